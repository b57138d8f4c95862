//! Closed-form solution of the heat Lyapunov equation in the sine eigenbasis
//! of the discrete Laplacian.

use super::GridSpec;
use crate::error::{Error, Result};
use crate::matcore::{DenseMatrix, SymLowRank};

/// `X(t)` of `Ẋ = AX + XA + Q` for the heat operator, stored as `X̂ = SᵀXS`
/// with `S = S₁ ⊗ S₁` the orthogonal sine transform.
#[derive(Debug, Clone)]
pub struct HeatModalSolution {
    pub grid: GridSpec,
    s1: DenseMatrix,
    pub xhat: DenseMatrix,
}

/// Orthonormal eigenvectors `√(2h) sin(ikπh)` of the 1D stencil.
fn sine_basis(g: &GridSpec) -> DenseMatrix {
    let n = g.dtil;
    let h = g.h();
    DenseMatrix::from_fn(n, n, |i, k| {
        (2.0 * h).sqrt() * ((i + 1) as f64 * (k + 1) as f64 * std::f64::consts::PI * h).sin()
    })
}

/// Eigenvalues of the 2D operator in storage order.
pub fn heat_eigenvalues(g: &GridSpec) -> Vec<f64> {
    let h = g.h();
    let lam1: Vec<f64> = (1..=g.dtil)
        .map(|k| -(4.0 / (h * h)) * (k as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2))
        .collect();
    (0..g.dim()).map(|k| lam1[k % g.dtil] + lam1[k / g.dtil]).collect()
}

impl HeatModalSolution {
    /// `Sᵀ Z` for a `d×k` factor, applied column by column as `S₁ᵀ M S₁`.
    fn transform(s1: &DenseMatrix, z: &DenseMatrix) -> DenseMatrix {
        let n = s1.nrows();
        let mut out = DenseMatrix::zeros(z.nrows(), z.ncols());
        for c in 0..z.ncols() {
            // m[(ix, iy)] = z[iy·n + ix]
            let m = DenseMatrix::from_column_slice(n, n, z.column(c).as_slice());
            let mh = s1.tr_mul(&m) * s1;
            out.column_mut(c).copy_from_slice(mh.as_slice());
        }
        out
    }

    pub fn new(g: GridSpec, q_factor: &DenseMatrix, x0: &SymLowRank, t: f64) -> Result<Self> {
        let d = g.dim();
        if q_factor.nrows() != d || x0.dim() != d {
            return Err(Error::contract("modal solution: dimension mismatch"));
        }
        let s1 = sine_basis(&g);
        let lam = heat_eigenvalues(&g);
        let zq = Self::transform(&s1, q_factor);
        let u0 = Self::transform(&s1, &x0.u);
        let qhat = &zq * zq.transpose();
        let x0hat = &u0 * &x0.s * u0.transpose();
        let xhat = DenseMatrix::from_fn(d, d, |i, j| {
            let s = lam[i] + lam[j];
            let e = (s * t).exp();
            e * x0hat[(i, j)] + qhat[(i, j)] * (e - 1.0) / s
        });
        Ok(Self { grid: g, s1, xhat })
    }

    /// `X` in the grid basis.
    pub fn to_dense(&self) -> DenseMatrix {
        let st = Self::transform(&self.s1, &self.xhat);
        Self::transform(&self.s1, &st.transpose())
    }

    /// `(1/d)·‖Y − X‖_F` without leaving the eigenbasis.
    pub fn scaled_error(&self, y: &SymLowRank) -> f64 {
        let w = Self::transform(&self.s1, &y.u);
        let diff = &self.xhat - &w * &y.s * w.transpose();
        diff.norm() / self.grid.dim() as f64
    }
}
