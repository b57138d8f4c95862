//! `e^{τA}U` by Leja interpolation against the dense matrix exponential.

use lrsplit::expmv::{estimate_spectrum, expm_action, leja_points, ExpmvConfig};
use lrsplit::matcore::expm_dense;
use lrsplit::problems::{build_diffadv_operator, build_heat_operator, random_factor, GridSpec};

fn main() -> lrsplit::Result<()> {
    let g = GridSpec::new(15)?;
    println!("{} Leja points on [-2, 2]", leja_points().len());
    for (name, a) in [
        ("heat", build_heat_operator(&g)),
        ("diffadv", build_diffadv_operator(&g)),
    ] {
        let b = estimate_spectrum(&a);
        let u = random_factor(g.dim(), 4, 3);
        let dense = expm_dense(&(a.to_dense() * 0.01))?;
        for tol in [1e-4, 2f64.powi(-24), 1e-12] {
            let cfg = ExpmvConfig::default().with_tol(tol);
            let v = expm_action(&a, 0.01, &u, &cfg)?;
            let exact = &dense * &u;
            println!(
                "{name:>8}: spectrum [{:.0}, {:.1}] x i[{:.1}], tol {tol:.1e}: relative error {:.2e}",
                b.alpha,
                b.beta,
                b.gamma,
                (v - &exact).norm() / exact.norm()
            );
        }
    }
    Ok(())
}
