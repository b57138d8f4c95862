//! Dense and low-rank linear-algebra kernels shared by every integrator.
//!
//! Dense storage is `nalgebra::DMatrix<f64>` (column-major). Everything here is a
//! pure function of its inputs and bit-deterministic for identical input bits.

mod lowrank;
mod lyap;
mod sparse;

pub use lowrank::{GenLowRank, SymLowRank};
pub use lyap::{kron_lyap_solve, lyap_solve, KRON_MAX_DIM};
pub use sparse::{BandedLu, SparseOperator};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Largest dimension accepted by [`expm_dense`].
pub const EXPM_DENSE_MAX_DIM: usize = 2000;

/// A column whose component orthogonal to the previous columns is below this
/// fraction of its own norm is treated as linearly dependent.
const DEFICIENCY_TOL: f64 = 1e-13;

/// Orthogonalizes `v` against the first `j` columns of `q` (classical Gram-Schmidt,
/// repeated while a pass removes more than ~30% of the norm). Returns the
/// accumulated projection coefficients.
fn orthogonalize_against(q: &DenseMatrix, j: usize, v: &mut DVector<f64>) -> DVector<f64> {
    let mut coeff = DVector::zeros(j);
    if j == 0 {
        return coeff;
    }
    let basis = q.columns(0, j);
    for _ in 0..4 {
        let before = v.norm();
        let c = basis.tr_mul(v);
        v.gemv(-1.0, &basis, &c, 1.0);
        coeff += c;
        if v.norm() > std::f64::consts::FRAC_1_SQRT_2 * before {
            break;
        }
    }
    coeff
}

/// Unit vector orthogonal to the first `j < d` columns of `q`, taken from the
/// canonical basis in index order.
fn complement_vector(q: &DenseMatrix, j: usize) -> DVector<f64> {
    let d = q.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        orthogonalize_against(q, j, &mut e);
        let n = e.norm();
        if n > 0.5 {
            return e / n;
        }
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, e));
        }
    }
    let (_, mut e) = best.expect("complement requested for an empty space");
    orthogonalize_against(q, j, &mut e);
    let n = e.norm();
    e / n
}

/// Extends the orthonormal columns of `u` to `r` columns with the deterministic
/// canonical-basis complement.
pub(crate) fn complete_basis(u: &DenseMatrix, r: usize) -> DenseMatrix {
    let (d, k) = u.shape();
    debug_assert!(r <= d);
    if r <= k {
        return u.columns(0, r).into_owned();
    }
    let mut out = DenseMatrix::zeros(d, r);
    out.columns_mut(0, k).copy_from(u);
    for j in k..r {
        let c = complement_vector(&out, j);
        out.set_column(j, &c);
    }
    out
}

/// Thin QR factorization `M = Q R` with a nonnegative diagonal of `R`.
///
/// Rank-deficient columns get `R[j][j] = 0` and a completion vector in `Q`, so
/// `Q` always has orthonormal columns.
pub fn qr_thin(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (d, r) = m.shape();
    if r > d {
        return Err(Error::contract(format!(
            "qr_thin needs at most as many columns as rows, got {d}x{r}"
        )));
    }
    let mut q = DenseMatrix::zeros(d, r);
    let mut rr = DenseMatrix::zeros(r, r);
    for j in 0..r {
        let mut v = m.column(j).clone_owned();
        let col_norm = v.norm();
        let coeff = orthogonalize_against(&q, j, &mut v);
        rr.view_mut((0, j), (j, 1)).copy_from(&coeff);
        let nrm = v.norm();
        if col_norm > 0.0 && nrm > DEFICIENCY_TOL * col_norm {
            rr[(j, j)] = nrm;
            q.set_column(j, &(v / nrm));
        } else {
            let c = complement_vector(&q, j);
            q.set_column(j, &c);
        }
    }
    Ok((q, rr))
}

/// Index of the entry with the largest magnitude (first one on ties).
fn argmax_abs<'a>(it: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = 0;
    let mut best_val = -1.0;
    for (i, x) in it.enumerate() {
        if x.abs() > best_val {
            best_val = x.abs();
            best = i;
        }
    }
    best
}

/// Flips column signs so that the largest-magnitude entry of each column of `u`
/// is positive; the same flips are applied to `partner` when given.
pub(crate) fn fix_column_signs(u: &mut DenseMatrix, mut partner: Option<&mut DenseMatrix>) {
    for k in 0..u.ncols() {
        let i = argmax_abs(u.column(k).iter());
        if u[(i, k)] < 0.0 {
            u.column_mut(k).neg_mut();
            if let Some(p) = partner.as_deref_mut() {
                p.column_mut(k).neg_mut();
            }
        }
    }
}

/// Sweeps of [`svd_jacobi`] before giving up.
const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U diag(σ) Vᵀ` by one-sided (Hestenes) Jacobi rotations,
/// `σ` descending. Columns of `U` belonging to zero singular values are
/// completed deterministically, so `U` and `V` are always orthonormal.
pub fn svd_jacobi(m: &DenseMatrix) -> Result<(DenseMatrix, DVector<f64>, DenseMatrix)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        let (v, s, u) = svd_jacobi(&m.transpose())?;
        return Ok((u, s, v));
    }
    // Tall inputs: rotate the small triangular factor instead of the full columns.
    if rows > cols {
        let (q, r) = qr_thin(m)?;
        let (ur, s, v) = jacobi_core(r, rows)?;
        return Ok((q * ur, s, v));
    }
    jacobi_core(m.clone(), rows)
}

/// One-sided Jacobi on a square or tall `a`; `rows` sets the tolerances.
fn jacobi_core(mut a: DenseMatrix, rows: usize) -> Result<(DenseMatrix, DVector<f64>, DenseMatrix)> {
    let cols = a.ncols();
    let mut v = DenseMatrix::identity(cols, cols);
    let tol = f64::EPSILON * (rows.max(1) as f64).sqrt();
    let mut converged = cols < 2;
    let mut worst = 0.0_f64;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        worst = 0.0;
        for p in 0..cols - 1 {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                // Separate roots: the product of two tiny norms underflows.
                let scale = alpha.sqrt() * beta.sqrt();
                if gamma == 0.0 || scale == 0.0 || gamma.abs() <= tol * scale {
                    continue;
                }
                converged = false;
                worst = worst.max(gamma.abs() / scale);
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: JACOBI_MAX_SWEEPS,
            residual: worst,
        });
    }

    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let floor = norms.iter().fold(0.0_f64, |x, &y| x.max(y)) * f64::EPSILON * rows as f64;
    let mut u = DenseMatrix::zeros(a.nrows(), 0);
    let mut sigma = DVector::zeros(cols);
    let mut vs = DenseMatrix::zeros(cols, cols);
    for (k, &i) in order.iter().enumerate() {
        sigma[k] = norms[i];
        vs.set_column(k, &v.column(i));
        if norms[i] > floor {
            u = u.insert_column(k, 0.0);
            u.set_column(k, &(a.column(i) / norms[i]));
        }
    }
    let u = complete_basis(&u, cols);
    Ok((u, sigma, vs))
}

/// `(a_p, a_q) ← (c·a_p − s·a_q, s·a_p + c·a_q)`.
fn rotate_columns(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    let (left, right) = a.as_mut_slice().split_at_mut(q * n);
    for (x, y) in left[p * n..(p + 1) * n].iter_mut().zip(&mut right[..n]) {
        (*x, *y) = (c * *x - s * *y, s * *x + c * *y);
    }
}

/// Best rank-`r` approximation in the Frobenius norm, singular values descending.
pub fn svd_truncate(m: &DenseMatrix, r: usize) -> Result<GenLowRank> {
    let (rows, cols) = m.shape();
    if r > rows.min(cols) {
        return Err(Error::contract(format!(
            "svd_truncate rank {r} exceeds min dimension of {rows}x{cols}"
        )));
    }
    let (u_all, sv, v_all) = svd_jacobi(m)?;
    let mut u = u_all.columns(0, r).into_owned();
    let mut v = v_all.columns(0, r).into_owned();
    let s = DenseMatrix::from_diagonal(&sv.rows(0, r).into_owned());
    fix_column_signs(&mut u, Some(&mut v));
    Ok(GenLowRank { u, s, v })
}

/// Eigendecomposition of a symmetric matrix with eigenpairs ordered by
/// decreasing |eigenvalue| and deterministic eigenvector signs.
pub(crate) fn sym_eigen_by_magnitude(m: &DenseMatrix) -> (DVector<f64>, DenseMatrix) {
    if m.nrows() == 0 {
        return (DVector::zeros(0), DenseMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let mut vals = DVector::zeros(n);
    let mut vecs = DenseMatrix::zeros(m.nrows(), n);
    for (k, &idx) in order.iter().enumerate() {
        vals[k] = eig.eigenvalues[idx];
        vecs.set_column(k, &eig.eigenvectors.column(idx));
    }
    fix_column_signs(&mut vecs, None);
    (vals, vecs)
}

/// Best symmetric rank-`r` approximation via the eigenpairs of largest |λ|.
/// The returned `S` is diagonal.
pub fn sym_truncate(m: &DenseMatrix, r: usize) -> Result<SymLowRank> {
    let (d, c) = m.shape();
    if d != c {
        return Err(Error::contract(format!(
            "sym_truncate needs a square matrix, got {d}x{c}"
        )));
    }
    if r > d {
        return Err(Error::contract(format!("sym_truncate rank {r} exceeds dimension {d}")));
    }
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * m.norm() {
        return Err(Error::contract(format!(
            "sym_truncate input is not symmetric (|M - M^T|_F = {asym:.3e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let (vals, vecs) = sym_eigen_by_magnitude(&sym);
    let u = vecs.columns(0, r).into_owned();
    let s = DenseMatrix::from_diagonal(&vals.rows(0, r).into_owned());
    Ok(SymLowRank { u, s })
}

/// Dense matrix exponential (scaling and squaring with Padé approximants).
pub fn expm_dense(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (d, c) = m.shape();
    if d != c {
        return Err(Error::contract(format!(
            "expm_dense needs a square matrix, got {d}x{c}"
        )));
    }
    if d > EXPM_DENSE_MAX_DIM {
        return Err(Error::Refused(format!(
            "expm_dense is limited to dimension {EXPM_DENSE_MAX_DIM} (got {d}); use expm_action instead"
        )));
    }
    if m.iter().all(|x| *x == 0.0) {
        return Ok(DenseMatrix::identity(d, d));
    }
    Ok(m.exp())
}

/// Symmetric part `(M + Mᵀ)/2`.
pub(crate) fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// Largest |eigenvalue| of a symmetric matrix, i.e. its spectral norm.
///
/// Small matrices use a full eigendecomposition; larger ones a Lanczos process
/// with full reorthogonalization started from a fixed vector.
pub(crate) fn sym_spectral_norm(m: &DenseMatrix) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= 96 {
        return m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    }
    let steps = 80.min(n);
    let mut basis = DenseMatrix::zeros(n, steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 104729) as f64 / 104729.0);
    v /= v.norm();
    for k in 0..steps {
        basis.set_column(k, &v);
        let mut w = m * &v;
        let a = v.dot(&w);
        alpha.push(a);
        orthogonalize_against(&basis, k + 1, &mut w);
        let b = w.norm();
        if k + 1 == steps || b <= 1e-14 * a.abs().max(1e-300) {
            break;
        }
        beta.push(b);
        v = w / b;
    }
    let k = alpha.len();
    let mut tri = DenseMatrix::zeros(k, k);
    for i in 0..k {
        tri[(i, i)] = alpha[i];
        if i + 1 < k {
            tri[(i, i + 1)] = beta[i];
            tri[(i + 1, i)] = beta[i];
        }
    }
    tri.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
