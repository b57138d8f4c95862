//! Finite-horizon LQR: low-rank Strang splitting for the Riccati equation,
//! the feedback gain it yields, and the algebraic residual as `T` grows.

use lrsplit::expmv::ExpmvConfig;
use lrsplit::problems::ProblemSpec;
use lrsplit::report::FinalState;
use lrsplit::riccati::{are_residual, solve_dre, DreMethod, DreOptions};

fn main() -> lrsplit::Result<()> {
    let cfg = ExpmvConfig::default();
    println!("{:>6} {:>12} {:>12}", "T", "residual", "|K|");
    for t_end in [0.01, 0.02, 0.05, 0.1] {
        let mut spec = ProblemSpec::lqr_dre(15);
        spec.t_end = t_end;
        let lqr = spec.lqr()?;
        let p = spec.build_lqr()?;
        let n = (t_end / 2.5e-4).round() as usize;
        let r = solve_dre(&p, DreMethod::Strang, 20, n, &cfg, &DreOptions::default())?;
        let FinalState::Sym(x) = &r.state else { unreachable!() };
        // u = -K x with K = R⁻¹ Bᵀ X.
        let gain = lqr.rw.clone().try_inverse().expect("R is invertible") * x.apply(&lqr.b).transpose();
        println!("{t_end:>6} {:>12.3e} {:>12.3e}", are_residual(&p, x), gain.norm());
    }
    Ok(())
}
