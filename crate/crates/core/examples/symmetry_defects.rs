//! Symmetry and PSD defects of the symmetric splitting and of the plain
//! projector splitting, which tracks `U` and `V` separately.

use lrsplit::expmv::ExpmvConfig;
use lrsplit::lyapunov::{solve_dle, DleMethod};
use lrsplit::problems::{BuiltProblem, ProblemSpec};

fn main() -> lrsplit::Result<()> {
    let BuiltProblem::Lyapunov(p) = ProblemSpec::heat_dle(12).build()? else {
        unreachable!()
    };
    let cfg = ExpmvConfig::default();
    let norm = p.x0.s.norm();

    println!(
        "{:>11} {:>5} {:>6} {:>11} {:>11}",
        "method", "rank", "nsteps", "max d_sym", "max d_psd"
    );
    for m in [DleMethod::Lie, DleMethod::NonSymLie] {
        for rank in [2, 6, 10] {
            for nsteps in [2, 16, 128] {
                let r = solve_dle(&p, m, rank, nsteps, &cfg)?;
                println!(
                    "{:>11} {rank:>5} {nsteps:>6} {:>11.2e} {:>11.2e}",
                    m.name(),
                    r.max_d_sym(norm),
                    r.max_d_psd(norm)
                );
            }
        }
    }
    Ok(())
}
