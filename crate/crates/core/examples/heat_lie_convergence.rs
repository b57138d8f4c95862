//! Lie splitting on the heat equation against the sine-basis closed form.
//!
//! `cargo run --release --example heat_lie_convergence`

use lrsplit::expmv::ExpmvConfig;
use lrsplit::lyapunov::{solve_dle, DleMethod};
use lrsplit::problems::{BuiltProblem, GridSpec, HeatModalSolution, ProblemSpec};
use lrsplit::report::FinalState;

fn main() -> lrsplit::Result<()> {
    let spec = ProblemSpec::heat_dle(20);
    let BuiltProblem::Lyapunov(p) = spec.build()? else {
        unreachable!()
    };
    let exact = HeatModalSolution::new(GridSpec::new(20)?, &p.q_factor, &p.x0, p.t_end - p.t0)?;

    let cfg = ExpmvConfig::default();
    println!("{:>6} {:>6} {:>12}", "rank", "nsteps", "error");
    for rank in [4, 8, 14] {
        for nsteps in [8, 32, 128, 512] {
            let r = solve_dle(&p, DleMethod::Lie, rank, nsteps, &cfg)?;
            let FinalState::Sym(y) = &r.state else { unreachable!() };
            println!("{rank:>6} {nsteps:>6} {:>12.3e}", exact.scaled_error(y));
        }
    }
    Ok(())
}
