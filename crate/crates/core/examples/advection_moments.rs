//! Transport of a Gaussian mean by a constant velocity field: the centre of
//! mass moves by `u·t`.

use lrsplit::expmv::ExpmvConfig;
use lrsplit::matcore::DenseMatrix;
use lrsplit::problems::{build_advection_operator, propagate_mean, AdvectionScheme, GridSpec, VelocityField};

fn centre(g: &GridSpec, w: &DenseMatrix) -> (f64, f64) {
    let mass: f64 = w.iter().sum();
    let (mut cx, mut cy) = (0.0, 0.0);
    for k in 0..g.dim() {
        let (x, y) = g.point(k);
        cx += x * w[(k, 0)];
        cy += y * w[(k, 0)];
    }
    (cx / mass, cy / mass)
}

fn main() -> lrsplit::Result<()> {
    let g = GridSpec::new(60)?;
    let field = VelocityField::Constant { ux: 1.0, uy: 0.5 };
    let a = build_advection_operator(&g, &field, AdvectionScheme::Upwind)?;
    let x0 = DenseMatrix::from_fn(g.dim(), 1, |k, _| {
        let (x, y) = g.point(k);
        (-((x - 0.3).powi(2) + (y - 0.3).powi(2)) / 0.005).exp()
    });
    let cfg = ExpmvConfig::default();
    let (x_start, y_start) = centre(&g, &x0);
    for t in [0.0, 0.1, 0.2, 0.3] {
        let w = if t > 0.0 {
            propagate_mean(&a, &x0, t, &cfg)?
        } else {
            x0.clone()
        };
        let (cx, cy) = centre(&g, &w);
        println!(
            "t = {t:.1}: centre ({cx:.4}, {cy:.4}), expected ({:.4}, {:.4})",
            x_start + t,
            y_start + 0.5 * t
        );
    }
    Ok(())
}
