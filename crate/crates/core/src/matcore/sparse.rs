use super::DenseMatrix;
use crate::error::{Error, Result};

/// Square sparse matrix in compressed sparse row storage.
///
/// Column indices are sorted within each row and duplicates are summed on
/// construction, so two operators built from the same triplets are identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::contract(format!(
                    "triplet ({i}, {j}) outside a {dim}x{dim} operator"
                )));
            }
            if !v.is_finite() {
                return Err(Error::contract(format!("non-finite entry at ({i}, {j})")));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::contract("sparse operator must be square"));
        }
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), &trip)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.dim, &trip).expect("transpose of a valid operator is valid")
    }

    /// `alpha·A + beta·I`.
    pub fn scale_shift(&self, alpha: f64, beta: f64) -> Self {
        let mut trip: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)).collect();
        if beta != 0.0 {
            trip.extend((0..self.dim).map(|i| (i, i, beta)));
        }
        Self::from_triplets(self.dim, &trip).expect("scaled operator is valid")
    }

    /// `A·X` for a dense block `X` with `dim` rows.
    pub fn mul_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dim, x.ncols());
        self.mul_dense_into(x, &mut out);
        out
    }

    /// Writes `A·X` into `out` (overwriting it).
    pub fn mul_dense_into(&self, x: &DenseMatrix, out: &mut DenseMatrix) {
        assert_eq!(x.nrows(), self.dim, "operator/block dimension mismatch");
        assert_eq!(out.shape(), (self.dim, x.ncols()));
        let d = self.dim;
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for c in 0..x.ncols() {
            let xc = &xs[c * d..(c + 1) * d];
            let oc = &mut os[c * d..(c + 1) * d];
            for (i, o) in oc.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.values[k] * xc[self.col_idx[k]];
                }
                *o = acc;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        *self == self.transpose()
    }

    /// Lower and upper bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut lo, mut hi) = (0, 0);
        for i in 0..self.dim {
            for (j, _) in self.row(i) {
                if i > j {
                    lo = lo.max(i - j);
                } else {
                    hi = hi.max(j - i);
                }
            }
        }
        (lo, hi)
    }

    /// Gershgorin discs `(centre, radius)` by row.
    pub fn gershgorin_discs(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|i| {
                let mut centre = 0.0;
                let mut radius = 0.0;
                for (j, v) in self.row(i) {
                    if i == j {
                        centre += v;
                    } else {
                        radius += v.abs();
                    }
                }
                (centre, radius)
            })
            .collect()
    }
}

/// LU factorization with partial pivoting of a banded matrix.
///
/// Storage follows the LAPACK band layout with `kl` extra rows for fill-in:
/// entry `(i, j)` lives at row `kl + ku + i − j` of column `j`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        let mut amax = 0.0_f64;
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[kv + i - j + j * ldab] = v;
                amax = amax.max(v.abs());
            }
        }
        let tiny = (n as f64) * f64::EPSILON * amax;
        let mut ipiv = vec![0; n];
        let mut ju = 0;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // Pivot search in column j over rows j..=j+km.
            let col = j * ldab + kv;
            let mut p = 0;
            let mut best = ab[col].abs();
            for k in 1..=km {
                if ab[col + k].abs() > best {
                    best = ab[col + k].abs();
                    p = k;
                }
            }
            ipiv[j] = j + p;
            if best <= tiny || best == 0.0 {
                return Err(Error::Singular(format!("banded LU pivot {best:.3e} at column {j}")));
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let base = c * ldab + kv;
                    ab.swap(base + j - c + p, base + j - c);
                }
            }
            let piv = ab[col];
            for k in 1..=km {
                ab[col + k] /= piv;
            }
            for c in (j + 1)..=ju {
                let base = c * ldab + kv;
                let ujc = ab[base + j - c];
                if ujc != 0.0 {
                    for k in 1..=km {
                        ab[base + j + k - c] -= ab[col + k] * ujc;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.nrows(), self.n, "right-hand side dimension mismatch");
        let n = self.n;
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        let mut x = b.clone();
        for c in 0..x.ncols() {
            let xc = &mut x.as_mut_slice()[c * n..(c + 1) * n];
            for j in 0..n {
                let p = self.ipiv[j];
                if p != j {
                    xc.swap(p, j);
                }
                let km = self.kl.min(n - 1 - j);
                let xj = xc[j];
                if xj != 0.0 {
                    for k in 1..=km {
                        xc[j + k] -= self.ab[j * ldab + kv + k] * xj;
                    }
                }
            }
            for j in (0..n).rev() {
                let base = j * ldab + kv;
                xc[j] /= self.ab[base];
                let xj = xc[j];
                let top = j.saturating_sub(kv);
                for i in top..j {
                    xc[i] -= self.ab[base + i - j] * xj;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tridiag(n: usize, lo: f64, di: f64, up: f64) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, di));
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        SparseOperator::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn triplets_sum_duplicates_and_validate() {
        let a = SparseOperator::from_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.nnz(), 2);
        assert!(SparseOperator::from_triplets(2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseOperator::from_triplets(2, &[(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn mul_dense_matches_dense_product() {
        let a = tridiag(7, 1.0, -2.5, 0.5).scale_shift(2.0, 1.0);
        let x = DenseMatrix::from_fn(7, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 1.0));
        assert_relative_eq!(a.mul_dense(&x), a.to_dense() * &x, epsilon = 1e-13);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn banded_lu_solves_with_pivoting() {
        // Small diagonal forces row interchanges.
        let mut t = Vec::new();
        let n = 30;
        for i in 0..n {
            t.push((i, i, 1e-3 * (i as f64 + 1.0)));
            if i >= 1 {
                t.push((i, i - 1, 2.0 + i as f64 * 0.1));
            }
            if i >= 3 {
                t.push((i, i - 3, -0.7));
            }
            if i + 2 < n {
                t.push((i, i + 2, 1.3));
            }
        }
        let a = SparseOperator::from_triplets(n, &t).unwrap();
        let lu = BandedLu::factor(&a).unwrap();
        let b = DenseMatrix::from_fn(n, 2, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let x = lu.solve(&b);
        assert!((a.to_dense() * &x - &b).norm() < 1e-10 * b.norm());
    }

    #[test]
    fn banded_lu_detects_singularity() {
        let a = SparseOperator::from_triplets(3, &[(0, 0, 1.0), (1, 1, 0.0), (2, 2, 1.0)]).unwrap();
        assert!(matches!(BandedLu::factor(&a), Err(Error::Singular(_))));
    }
}
