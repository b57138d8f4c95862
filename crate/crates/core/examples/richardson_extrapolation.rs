//! Richardson extrapolation of backward Euler on `ẋ = -2x + 1`, where
//! the exact solution is known, and on a small heat problem.

use lrsplit::baselines::{solve_be_kpik, solve_richardson, KpikConfig, RichardsonMode};
use lrsplit::lyapunov::DleProblem;
use lrsplit::matcore::{DenseMatrix, SparseOperator, SymLowRank};
use lrsplit::report::FinalState;

fn main() -> lrsplit::Result<()> {
    // Ẋ = AX + XAᵀ + Q with A = -1, Q = 1, X(0) = 0: X(t) = (1 - e^{-2t}) / 2.
    let a = SparseOperator::from_triplets(1, &[(0, 0, -1.0)])?;
    let p = DleProblem::new(
        a,
        DenseMatrix::from_element(1, 1, 1.0),
        SymLowRank::zeros(1, 1),
        0.0,
        1.0,
    )?;
    let exact = 0.5 * (1.0 - (-2.0f64).exp());
    let cfg = KpikConfig::default();

    let value = |state: &FinalState| state.to_dense()[(0, 0)];
    println!("{:>6} {:>12} {:>12}", "nsteps", "euler", "richardson");
    for n in [8, 16, 32, 64, 128] {
        let be = solve_be_kpik(&p, n, &cfg)?;
        let ri = solve_richardson(&p, n, &cfg, RichardsonMode::Factors)?;
        println!(
            "{n:>6} {:>12.3e} {:>12.3e}",
            (value(&be.state) - exact).abs(),
            (value(&ri.state) - exact).abs()
        );
    }
    Ok(())
}
