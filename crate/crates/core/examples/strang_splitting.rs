//! Lie and Strang splitting side by side: halving the step halves the Lie
//! error and quarters the Strang error until the rank floor is reached.

use lrsplit::expmv::ExpmvConfig;
use lrsplit::lyapunov::{solve_dle, DleMethod};
use lrsplit::problems::{BuiltProblem, GridSpec, HeatModalSolution, ProblemSpec};
use lrsplit::report::FinalState;

fn main() -> lrsplit::Result<()> {
    let dtil = 15;
    let BuiltProblem::Lyapunov(p) = ProblemSpec::heat_dle(dtil).build()? else {
        unreachable!()
    };
    let exact = HeatModalSolution::new(GridSpec::new(dtil)?, &p.q_factor, &p.x0, p.t_end)?;
    let cfg = ExpmvConfig::default();

    let mut last = [f64::NAN; 2];
    println!(
        "{:>6} {:>12} {:>7} {:>12} {:>7}",
        "nsteps", "lie", "ratio", "strang", "ratio"
    );
    for k in 4..=10 {
        let n = 1 << k;
        let mut errs = [0.0; 2];
        for (i, m) in [DleMethod::Lie, DleMethod::Strang].into_iter().enumerate() {
            let r = solve_dle(&p, m, 20, n, &cfg)?;
            let FinalState::Sym(y) = &r.state else { unreachable!() };
            errs[i] = exact.scaled_error(y);
        }
        println!(
            "{n:>6} {:>12.3e} {:>7.2} {:>12.3e} {:>7.2}",
            errs[0],
            last[0] / errs[0],
            errs[1],
            last[1] / errs[1]
        );
        last = errs;
    }
    Ok(())
}
