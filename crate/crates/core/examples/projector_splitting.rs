//! One projector-splitting (K, S, L) step for a user-defined right-hand side.
//! For constant `G` the step is exact whenever `Y₀ + τG` has rank at most `r`.

use std::sync::Arc;

use lrsplit::dlr::{ksl_step, InnerScheme, Nonlinearity, NonlinearityDescriptor, Outer};
use lrsplit::matcore::{svd_truncate, DenseMatrix};
use lrsplit::problems::random_factor;

/// `G(t, Y) = -Y`, so `Y(t) = e^{-t} Y₀` stays on the manifold.
struct Decay(usize);

impl Nonlinearity for Decay {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, _t: f64, y: &Outer<'_>, w: &DenseMatrix) -> DenseMatrix {
        -y.apply(w)
    }

    fn apply_transpose(&self, _t: f64, y: &Outer<'_>, w: &DenseMatrix) -> DenseMatrix {
        -y.apply_transpose(w)
    }
}

fn main() -> lrsplit::Result<()> {
    let (d, r) = (60, 4);
    let y0 = svd_truncate(&(random_factor(d, r, 1) * random_factor(d, r, 2).transpose()), r)?;

    // Constant G with range and co-range inside those of Y₀.
    let g = svd_truncate(&(&y0.u * random_factor(r, r, 3) * y0.v.transpose()), r)?;
    let tau = 0.3;
    let y1 = ksl_step(
        &NonlinearityDescriptor::Constant(g.clone()),
        &y0,
        0.0,
        tau,
        InnerScheme::ExactAffine,
    )?;
    let exact = y0.to_dense() + g.to_dense() * tau;
    println!(
        "constant G: step error {:.2e}",
        (y1.to_dense() - &exact).norm() / exact.norm()
    );

    let decay = NonlinearityDescriptor::Custom(Arc::new(Decay(d)));
    let steps = 20;
    let h = 1.0 / steps as f64;
    let mut y = y0.clone();
    for n in 0..steps {
        y = ksl_step(&decay, &y, n as f64 * h, h, InnerScheme::Rk4 { substeps: 1 })?;
    }
    let exact = y0.to_dense() * (-1.0f64).exp();
    println!(
        "G = -Y over [0, 1]: error {:.2e}, orthonormality defect {:.1e}",
        (y.to_dense() - &exact).norm() / exact.norm(),
        y.orthonormality_defect()
    );
    Ok(())
}
