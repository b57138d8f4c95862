//! Dense solvers for the algebraic Lyapunov equation `A X + X Aᵀ + C = 0`.

use nalgebra::DVector;

use super::{symmetrize, DenseMatrix};
use crate::error::{Error, Result};

/// Largest dimension accepted by [`kron_lyap_solve`].
pub const KRON_MAX_DIM: usize = 80;

fn check_square_pair(a: &DenseMatrix, c: &DenseMatrix) -> Result<usize> {
    let m = a.nrows();
    if a.ncols() != m || c.nrows() != m || c.ncols() != m {
        return Err(Error::contract(format!(
            "Lyapunov solve needs square A and C of equal size, got {:?} and {:?}",
            a.shape(),
            c.shape()
        )));
    }
    Ok(m)
}

/// LU solve that reports a numerically singular matrix instead of returning garbage.
fn lu_solve_checked(k: DenseMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = k.nrows();
    let lu = k.lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..n {
        lo = lo.min(u[(i, i)].abs());
        hi = hi.max(u[(i, i)].abs());
    }
    if n > 0 && (hi == 0.0 || lo <= (n as f64) * f64::EPSILON * hi) {
        return Err(Error::Singular(format!(
            "pivot ratio {:.3e} in a {n}x{n} system",
            if hi > 0.0 { lo / hi } else { 0.0 }
        )));
    }
    lu.solve(rhs).ok_or_else(|| Error::Singular("LU solve failed".into()))
}

/// Solves `A X + X Aᵀ + C = 0` through the vectorized system
/// `(I ⊗ A + A ⊗ I) vec(X) = −vec(C)`. Dimension is capped at [`KRON_MAX_DIM`].
pub fn kron_lyap_solve(a: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let m = check_square_pair(a, c)?;
    if m > KRON_MAX_DIM {
        return Err(Error::Refused(format!(
            "kron_lyap_solve is limited to dimension {KRON_MAX_DIM} (got {m})"
        )));
    }
    if m == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let n = m * m;
    let mut k = DenseMatrix::zeros(n, n);
    for j in 0..m {
        for i in 0..m {
            let row = i + j * m;
            for l in 0..m {
                k[(row, l + j * m)] += a[(i, l)];
                k[(row, i + l * m)] += a[(j, l)];
            }
        }
    }
    let rhs = DVector::from_iterator(n, c.iter().map(|x| -x));
    let x = lu_solve_checked(k, &rhs)?;
    Ok(symmetrize(&DenseMatrix::from_column_slice(m, m, x.as_slice())))
}

/// Solves `A X + X Aᵀ + C = 0` for symmetric `C` at any dense size.
///
/// Symmetric `A` goes through its eigendecomposition, anything else through a
/// real Schur form and quasi-triangular back substitution (Bartels-Stewart).
pub fn lyap_solve(a: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let m = check_square_pair(a, c)?;
    if m == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    if *a == a.transpose() {
        lyap_symmetric(a, c)
    } else {
        lyap_schur(a, c)
    }
}

fn lyap_symmetric(a: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let m = a.nrows();
    let eig = a.clone().symmetric_eigen();
    let w = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let scale = lam.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let mut ch = w.tr_mul(&(c * w));
    for j in 0..m {
        for i in 0..m {
            let den = lam[i] + lam[j];
            if den.abs() <= (m as f64) * f64::EPSILON * scale || den == 0.0 {
                return Err(Error::Singular(format!(
                    "eigenvalues {:.3e} and {:.3e} sum to zero",
                    lam[i], lam[j]
                )));
            }
            ch[(i, j)] = -ch[(i, j)] / den;
        }
    }
    Ok(symmetrize(&(w * ch * w.transpose())))
}

/// Diagonal blocks (start, size) of a real quasi-triangular Schur factor.
fn schur_blocks(t: &DenseMatrix) -> Vec<(usize, usize)> {
    let m = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < m {
        if i + 1 < m && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solves the tiny Sylvester equation `T1 Z + Z T2ᵀ = F` (blocks of size ≤ 2).
fn small_sylvester(t1: &DenseMatrix, t2: &DenseMatrix, f: &DenseMatrix) -> Result<DenseMatrix> {
    let (p, q) = f.shape();
    if p == 1 && q == 1 {
        let den = t1[(0, 0)] + t2[(0, 0)];
        if den == 0.0 {
            return Err(Error::Singular("A and -A share an eigenvalue".into()));
        }
        return Ok(DenseMatrix::from_element(1, 1, f[(0, 0)] / den));
    }
    let n = p * q;
    let mut k = DenseMatrix::zeros(n, n);
    for j in 0..q {
        for i in 0..p {
            let row = i + j * p;
            for l in 0..p {
                k[(row, l + j * p)] += t1[(i, l)];
            }
            for l in 0..q {
                k[(row, i + l * p)] += t2[(j, l)];
            }
        }
    }
    let rhs = DVector::from_column_slice(f.as_slice());
    let z = lu_solve_checked(k, &rhs)?;
    Ok(DenseMatrix::from_column_slice(p, q, z.as_slice()))
}

fn lyap_schur(a: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let m = a.nrows();
    // The QR sweep has no exceptional shifts, so it is capped and retried with
    // a looser deflation threshold before giving up.
    let cap = 200 * m + 1000;
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, cap)
        .or_else(|| a.clone().try_schur(64.0 * f64::EPSILON, cap))
        .ok_or_else(|| Error::Singular("real Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let f = -(q.tr_mul(&(c * &q)));
    let blocks = schur_blocks(&t);
    let mut y = DenseMatrix::zeros(m, m);
    // T Y + Y Tᵀ = F, one column block at a time from the right.
    for &(l0, ls) in blocks.iter().rev() {
        let mut g = f.columns(l0, ls).into_owned();
        let tail = m - l0 - ls;
        if tail > 0 {
            g -= y.columns(l0 + ls, tail) * t.view((l0, l0 + ls), (ls, tail)).transpose();
        }
        let tll = t.view((l0, l0), (ls, ls)).into_owned();
        for &(k0, ks) in blocks.iter().rev() {
            let mut rhs = g.rows(k0, ks).into_owned();
            let below = m - k0 - ks;
            if below > 0 {
                rhs -= t.view((k0, k0 + ks), (ks, below)) * y.view((k0 + ks, l0), (below, ls));
            }
            let tkk = t.view((k0, k0), (ks, ks)).into_owned();
            let z = small_sylvester(&tkk, &tll, &rhs)?;
            y.view_mut((k0, l0), (ks, ls)).copy_from(&z);
        }
    }
    Ok(symmetrize(&(&q * y * q.transpose())))
}
