use nalgebra::DVector;

use super::{complete_basis, qr_thin, sym_eigen_by_magnitude, symmetrize, DenseMatrix};
use crate::error::{Error, Result};

/// General factorization `Y = U S Vᵀ` with orthonormal `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenLowRank {
    pub u: DenseMatrix,
    pub s: DenseMatrix,
    pub v: DenseMatrix,
}

/// Symmetric factorization `Y = U S Uᵀ` with orthonormal `U`.
///
/// `S` is symmetric for the Lyapunov integrators. The Riccati integrators may
/// leave a small asymmetry in `S`, which is why the reconstruction uses `S` as is.
#[derive(Debug, Clone, PartialEq)]
pub struct SymLowRank {
    pub u: DenseMatrix,
    pub s: DenseMatrix,
}

fn orth_defect(q: &DenseMatrix) -> f64 {
    let k = q.ncols();
    (q.tr_mul(q) - DenseMatrix::identity(k, k)).norm()
}

impl GenLowRank {
    pub fn new(u: DenseMatrix, s: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        let r = s.nrows();
        if s.ncols() != r || u.ncols() != r || v.ncols() != r {
            return Err(Error::contract(format!(
                "GenLowRank factor widths disagree: U {:?}, S {:?}, V {:?}",
                u.shape(),
                s.shape(),
                v.shape()
            )));
        }
        if r > u.nrows() || r > v.nrows() {
            return Err(Error::contract("GenLowRank rank exceeds dimension"));
        }
        Ok(Self { u, s, v })
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        (&self.u * &self.s) * self.v.transpose()
    }

    /// Larger of `‖UᵀU − I‖_F` and `‖VᵀV − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        orth_defect(&self.u).max(orth_defect(&self.v))
    }

    /// `Y·W`.
    pub fn apply(&self, w: &DenseMatrix) -> DenseMatrix {
        &self.u * (&self.s * self.v.tr_mul(w))
    }

    /// `Yᵀ·W`.
    pub fn apply_transpose(&self, w: &DenseMatrix) -> DenseMatrix {
        &self.v * (self.s.tr_mul(&self.u.tr_mul(w)))
    }
}

impl From<&SymLowRank> for GenLowRank {
    fn from(y: &SymLowRank) -> Self {
        GenLowRank {
            u: y.u.clone(),
            s: y.s.clone(),
            v: y.u.clone(),
        }
    }
}

impl SymLowRank {
    pub fn new(u: DenseMatrix, s: DenseMatrix) -> Result<Self> {
        let r = s.nrows();
        if s.ncols() != r || u.ncols() != r {
            return Err(Error::contract(format!(
                "SymLowRank factor widths disagree: U {:?}, S {:?}",
                u.shape(),
                s.shape()
            )));
        }
        if r > u.nrows() {
            return Err(Error::contract("SymLowRank rank exceeds dimension"));
        }
        Ok(Self { u, s })
    }

    /// Zero matrix of dimension `d` carried with `r` canonical basis columns.
    pub fn zeros(d: usize, r: usize) -> Self {
        Self {
            u: DenseMatrix::identity(d, r),
            s: DenseMatrix::zeros(r, r),
        }
    }

    /// `Z Zᵀ` in compact form; `S` is diagonal with eigenvalues in decreasing order.
    pub fn from_factor(z: &DenseMatrix) -> Result<Self> {
        let (d, k) = z.shape();
        if k == 0 {
            return Ok(Self::zeros(d, 0));
        }
        if k > d {
            let dense = z * z.transpose();
            return super::sym_truncate(&dense, d);
        }
        let (q, r) = qr_thin(z)?;
        let small = &r * r.transpose();
        let (vals, vecs) = sym_eigen_by_magnitude(&small);
        Ok(Self {
            u: q * vecs,
            s: DenseMatrix::from_diagonal(&vals),
        })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        (&self.u * &self.s) * self.u.transpose()
    }

    /// `Y·W`.
    pub fn apply(&self, w: &DenseMatrix) -> DenseMatrix {
        &self.u * (&self.s * self.u.tr_mul(w))
    }

    /// `Yᵀ·W`.
    pub fn apply_transpose(&self, w: &DenseMatrix) -> DenseMatrix {
        &self.u * (self.s.tr_mul(&self.u.tr_mul(w)))
    }

    pub fn orthonormality_defect(&self) -> f64 {
        orth_defect(&self.u)
    }

    /// `‖S − Sᵀ‖_F`, equal to the symmetry defect of the reconstruction.
    pub fn asymmetry(&self) -> f64 {
        (&self.s - self.s.transpose()).norm()
    }

    /// Eigenpairs of the symmetric part of `S`, by decreasing |λ|.
    pub fn small_eigen(&self) -> (DVector<f64>, DenseMatrix) {
        sym_eigen_by_magnitude(&symmetrize(&self.s))
    }

    /// Re-expresses the matrix with exactly `r` columns: truncates to the
    /// `r` dominant eigenpairs or pads with complement directions and zeros.
    pub fn with_rank(&self, r: usize) -> Result<Self> {
        let d = self.dim();
        if r > d {
            return Err(Error::contract(format!("rank {r} exceeds dimension {d}")));
        }
        let (vals, vecs) = self.small_eigen();
        let keep = r.min(self.rank());
        let u_keep = &self.u * vecs.columns(0, keep);
        let u = complete_basis(&u_keep, r);
        let mut s = DenseMatrix::zeros(r, r);
        for i in 0..keep {
            s[(i, i)] = vals[i];
        }
        Ok(Self { u, s })
    }

    /// Factor `F` with `F Fᵀ` equal to the PSD part of the symmetrized matrix.
    pub fn psd_factor(&self) -> DenseMatrix {
        let (vals, vecs) = self.small_eigen();
        let mut w = &self.u * vecs;
        for (k, lam) in vals.iter().enumerate() {
            w.column_mut(k).scale_mut(lam.max(0.0).sqrt());
        }
        w
    }
}
