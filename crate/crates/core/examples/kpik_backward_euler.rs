//! Backward Euler with the extended Krylov (K-PIK) Lyapunov solver: one
//! step compared with the dense Kronecker solve, then a full integration.

use lrsplit::baselines::{be_dense_dle_step, be_kpik_dle_step, initial_factor, solve_be_kpik, KpikConfig};
use lrsplit::problems::{BuiltProblem, GridSpec, HeatModalSolution, ProblemSpec};
use lrsplit::report::FinalState;

fn main() -> lrsplit::Result<()> {
    let dtil = 7;
    let BuiltProblem::Lyapunov(p) = ProblemSpec::heat_dle(dtil).build()? else {
        unreachable!()
    };
    let cfg = KpikConfig::default();

    let tau = 0.01;
    let z1 = be_kpik_dle_step(&p, &initial_factor(&p), tau, &cfg)?;
    let x1 = be_dense_dle_step(&p.a.to_dense(), &p.q.to_dense(), &p.x0.to_dense(), tau)?;
    println!(
        "one step, d = {}: rank {}, relative gap to Kronecker solve {:.2e}",
        p.dim(),
        z1.rank(),
        (z1.to_dense() - &x1).norm() / x1.norm()
    );

    let exact = HeatModalSolution::new(GridSpec::new(dtil)?, &p.q_factor, &p.x0, p.t_end)?.to_dense();
    for n in [10, 20, 40, 80] {
        let r = solve_be_kpik(&p, n, &cfg)?;
        let FinalState::Factor(z) = &r.state else {
            unreachable!()
        };
        let err = (z * z.transpose() - &exact).norm() / p.dim() as f64;
        println!("nsteps {n:>3}: error {err:.3e}, rank {}", z.ncols());
    }
    Ok(())
}
