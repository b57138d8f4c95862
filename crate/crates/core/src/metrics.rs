//! Error and defect measures: scaled Frobenius norm, symmetry defect and
//! distance to the nearest positive semidefinite matrix.

use crate::matcore::{qr_thin, symmetrize, DenseMatrix, GenLowRank, SymLowRank};

/// `(1/d)·‖Z‖_F` for a `d×d` matrix.
pub fn scaled_fro_norm(z: &DenseMatrix) -> f64 {
    if z.nrows() == 0 {
        return 0.0;
    }
    z.norm() / z.nrows() as f64
}

/// Nearest symmetric PSD matrix: symmetric part with negative eigenvalues zeroed.
pub fn nearest_psd(y: &DenseMatrix) -> DenseMatrix {
    if y.nrows() == 0 {
        return y.clone();
    }
    let eig = symmetrize(y).symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DenseMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

/// `‖Y − Yᵀ‖_F / ref_norm`.
pub fn defect_sym(y: &DenseMatrix, ref_norm: f64) -> f64 {
    (y - y.transpose()).norm() / ref_norm
}

/// `‖Y − Ŷ‖_F` from the spectrum: the skew part and the negative eigenvalues
/// of the symmetric part are Frobenius-orthogonal, so no reconstruction is needed.
fn psd_gap(y: &DenseMatrix) -> f64 {
    if y.nrows() == 0 {
        return 0.0;
    }
    let skew = (y - y.transpose()).norm_squared() / 4.0;
    let neg: f64 = symmetrize(y)
        .symmetric_eigenvalues()
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| l * l)
        .sum();
    (skew + neg).sqrt()
}

/// `‖Y − Ŷ‖_F / ref_norm` with `Ŷ` the nearest symmetric PSD matrix.
pub fn defect_psd(y: &DenseMatrix, ref_norm: f64) -> f64 {
    psd_gap(y) / ref_norm
}

/// `(1/d)·‖X − X_r‖_F` for the best rank-`r` approximation `X_r` of a
/// symmetric `X`, i.e. the scaled tail of its eigenvalues.
pub fn best_rank_error(x: &DenseMatrix, r: usize) -> f64 {
    let mut mags: Vec<f64> = symmetrize(x).symmetric_eigenvalues().iter().map(|l| l.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let tail: f64 = mags.iter().skip(r).map(|l| l * l).sum();
    tail.sqrt() / x.nrows().max(1) as f64
}

/// `Y = W M Wᵀ` with orthonormal `W`, so every Frobenius quantity of `Y` is the
/// same quantity of the small core `M`.
#[derive(Debug, Clone)]
pub struct Compact {
    pub dim: usize,
    pub w: DenseMatrix,
    pub m: DenseMatrix,
}

impl Compact {
    /// From `Y = L C Lᵀ` with arbitrary (possibly dependent) columns in `L`.
    pub fn from_core(l: &DenseMatrix, c: &DenseMatrix) -> Self {
        let (d, k) = l.shape();
        if k <= d {
            let (w, r) = qr_thin(l).expect("width checked");
            let m = &r * c * r.transpose();
            Self { dim: d, w, m }
        } else {
            Self::dense(&(l * c * l.transpose()))
        }
    }

    pub fn dense(y: &DenseMatrix) -> Self {
        let d = y.nrows();
        Self {
            dim: d,
            w: DenseMatrix::identity(d, d),
            m: y.clone(),
        }
    }

    pub fn from_sym(y: &SymLowRank) -> Self {
        Self {
            dim: y.dim(),
            w: y.u.clone(),
            m: y.s.clone(),
        }
    }

    pub fn from_gen(y: &GenLowRank) -> Self {
        let r = y.rank();
        let mut l = DenseMatrix::zeros(y.nrows(), 2 * r);
        l.columns_mut(0, r).copy_from(&y.u);
        l.columns_mut(r, r).copy_from(&y.v);
        let mut c = DenseMatrix::zeros(2 * r, 2 * r);
        c.view_mut((0, r), (r, r)).copy_from(&y.s);
        Self::from_core(&l, &c)
    }

    /// `Z Zᵀ`.
    pub fn from_factor(z: &DenseMatrix) -> Self {
        let k = z.ncols();
        Self::from_core(z, &DenseMatrix::identity(k, k))
    }

    /// `self − other`.
    pub fn sub(&self, other: &Compact) -> Compact {
        let (k1, k2) = (self.w.ncols(), other.w.ncols());
        let mut l = DenseMatrix::zeros(self.dim, k1 + k2);
        l.columns_mut(0, k1).copy_from(&self.w);
        l.columns_mut(k1, k2).copy_from(&other.w);
        let mut c = DenseMatrix::zeros(k1 + k2, k1 + k2);
        c.view_mut((0, 0), (k1, k1)).copy_from(&self.m);
        c.view_mut((k1, k1), (k2, k2)).copy_from(&(-&other.m));
        Compact::from_core(&l, &c)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        &self.w * &self.m * self.w.transpose()
    }

    pub fn fro_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn scaled_norm(&self) -> f64 {
        if self.dim == 0 {
            0.0
        } else {
            self.m.norm() / self.dim as f64
        }
    }

    /// `‖Y − Yᵀ‖_F`.
    pub fn asymmetry(&self) -> f64 {
        (&self.m - self.m.transpose()).norm()
    }

    /// `‖Y − Ŷ‖_F` for the nearest symmetric PSD `Ŷ`.
    pub fn psd_distance(&self) -> f64 {
        psd_gap(&self.m)
    }

    pub fn defect_sym(&self, ref_norm: f64) -> f64 {
        self.asymmetry() / ref_norm
    }

    pub fn defect_psd(&self, ref_norm: f64) -> f64 {
        self.psd_distance() / ref_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(rows: usize, cols: usize, salt: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| {
            ((i * 37 + j * 101 + salt * 7) % 53) as f64 / 26.5 - 1.0
        })
    }

    #[test]
    fn scaled_norm_examples() {
        assert_eq!(scaled_fro_norm(&DenseMatrix::identity(4, 4)), 0.5);
        assert_eq!(scaled_fro_norm(&DenseMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn defect_examples() {
        let y = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(defect_sym(&y, 1.0), 2f64.sqrt(), epsilon = 1e-15);
        let y = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_relative_eq!(defect_psd(&y, 1.0), 1.0, epsilon = 1e-15);
        assert_eq!(defect_sym(&DenseMatrix::identity(3, 3), 1.0), 0.0);
        let z = sample(5, 2, 1);
        assert!(defect_psd(&(&z * z.transpose()), 1.0) < 1e-14);
        let pd = DenseMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(defect_psd(&pd, 1.0), 0.0);
    }

    #[test]
    fn best_rank_error_matches_truncation() {
        let z = sample(12, 5, 3);
        let x = &z * z.transpose();
        let y = crate::matcore::sym_truncate(&x, 3).unwrap();
        assert_relative_eq!(
            best_rank_error(&x, 3),
            scaled_fro_norm(&(&x - y.to_dense())),
            max_relative = 1e-10
        );
        assert!(best_rank_error(&x, 5) < 1e-14);
    }

    #[test]
    fn psd_gap_matches_projection() {
        for salt in 0..5 {
            let y = sample(7, 7, salt);
            let direct = (&y - nearest_psd(&y)).norm();
            assert_relative_eq!(defect_psd(&y, 1.0), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn compact_forms_agree_with_dense() {
        let d = 50;
        let z = sample(d, 3, 2);
        let sym = SymLowRank::from_factor(&z).unwrap();
        let dense = sym.to_dense();
        assert_relative_eq!(
            Compact::from_sym(&sym).scaled_norm(),
            scaled_fro_norm(&dense),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            Compact::from_factor(&z).scaled_norm(),
            scaled_fro_norm(&dense),
            max_relative = 1e-13
        );

        let g = crate::matcore::svd_truncate(&(sample(d, 3, 3) * sample(3, d, 4)), 3).unwrap();
        let gd = g.to_dense();
        let c = Compact::from_gen(&g);
        assert_relative_eq!(c.scaled_norm(), scaled_fro_norm(&gd), max_relative = 1e-12);
        assert_relative_eq!(c.asymmetry(), (&gd - gd.transpose()).norm(), max_relative = 1e-12);
        assert_relative_eq!(c.psd_distance(), (&gd - nearest_psd(&gd)).norm(), max_relative = 1e-10);

        let diff = c.sub(&Compact::from_sym(&sym));
        assert_relative_eq!(diff.fro_norm(), (&gd - &dense).norm(), max_relative = 1e-12);
    }
}
