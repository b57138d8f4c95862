//! Extended Krylov (K-PIK) solver for `ÃX + XÃᵀ + B̃B̃ᵀ = 0` and the backward
//! Euler method for the differential Lyapunov equation built on it.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::lyapunov::DleProblem;
use crate::matcore::{
    fix_column_signs, kron_lyap_solve, lyap_solve, qr_thin, svd_jacobi, sym_spectral_norm, symmetrize, BandedLu,
    DenseMatrix, SparseOperator, SymLowRank,
};
use crate::report::{FinalState, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpikConfig {
    /// Relative residual at which the iteration stops.
    pub tol: f64,
    /// Eigenvalues of the projected solution at or below this are dropped.
    pub toly: f64,
    pub max_iter: usize,
}

impl Default for KpikConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            toly: 1e-12,
            max_iter: 100,
        }
    }
}

impl KpikConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0 && self.toly > 0.0 && self.toly < 1.0) {
            return Err(Error::contract("K-PIK tolerances must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::contract("K-PIK needs max_iter >= 1"));
        }
        Ok(())
    }
}

/// `X = Z Zᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    pub z: DenseMatrix,
}

impl LowRankFactor {
    pub fn new(z: DenseMatrix) -> Self {
        Self { z }
    }

    pub fn rank(&self) -> usize {
        self.z.ncols()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        &self.z * self.z.transpose()
    }

    /// Compact factor of `Y = U S Uᵀ` with PSD `S` (negative parts clipped).
    pub fn from_sym(y: &SymLowRank) -> Self {
        Self { z: y.psd_factor() }
    }
}

#[derive(Debug, Clone)]
pub struct KpikOutcome {
    pub factor: LowRankFactor,
    pub iterations: usize,
    /// Final value of the stopping quantity.
    pub residual: f64,
    pub basis_dim: usize,
}

/// Orthonormal columns spanning the part of `w` outside `span(basis)`;
/// directions shrinking below `drop_tol` relative to `w` are deflated.
fn extend_basis(basis: &DenseMatrix, w: &DenseMatrix, drop_tol: f64) -> Result<DenseMatrix> {
    let scale = w.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 || w.ncols() == 0 {
        return Ok(DenseMatrix::zeros(w.nrows(), 0));
    }
    let mut w = w.clone();
    for _ in 0..2 {
        if basis.ncols() > 0 {
            w -= basis * basis.tr_mul(&w);
        }
    }
    let rows = w.nrows();
    let (u, sv, _) = svd_jacobi(&w)?;
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > drop_tol * scale).collect();
    let mut out = DenseMatrix::zeros(rows, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    // A second pass against the basis keeps the new block orthogonal to
    // working precision after the rank-revealing step.
    if basis.ncols() > 0 && out.ncols() > 0 {
        out -= basis * basis.tr_mul(&out);
        out = qr_thin(&out).map(|(q, _)| q).unwrap_or(out);
    }
    Ok(out)
}

fn hcat(parts: &[&DenseMatrix]) -> DenseMatrix {
    let rows = parts.iter().map(|p| p.nrows()).max().unwrap_or(0);
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DenseMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.columns_mut(at, p.ncols()).copy_from(*p);
        at += p.ncols();
    }
    out
}

/// 2-norm of `ÃVYVᵀ + VY(ÃV)ᵀ + B̃B̃ᵀ` from its factored form.
fn factored_residual(av: &DenseMatrix, v: &DenseMatrix, y: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    let (k, s) = (v.ncols(), b.ncols());
    let l = hcat(&[av, v, b]);
    let mut core = DenseMatrix::zeros(2 * k + s, 2 * k + s);
    core.view_mut((0, k), (k, k)).copy_from(y);
    core.view_mut((k, 0), (k, k)).copy_from(y);
    core.view_mut((2 * k, 2 * k), (s, s)).fill_with_identity();
    if l.ncols() > l.nrows() {
        return Ok(sym_spectral_norm(&(&l * core * l.transpose())));
    }
    // Only R is needed; `l` is rank deficient (B̃ lies in the span of V).
    let r = l.qr().r();
    Ok(sym_spectral_norm(&(&r * core * r.transpose())))
}

/// K-PIK with a precomputed factorization of `Ã`.
pub fn kpik_ale_solve_factored(
    a: &SparseOperator,
    lu: &BandedLu,
    b: &DenseMatrix,
    cfg: &KpikConfig,
) -> Result<KpikOutcome> {
    cfg.validate()?;
    let d = a.dim();
    if b.nrows() != d || lu.dim() != d {
        return Err(Error::contract("K-PIK: dimensions of A and B differ"));
    }
    let b_norm2 = b.norm_squared();
    if b_norm2 == 0.0 {
        return Ok(KpikOutcome {
            factor: LowRankFactor::new(DenseMatrix::zeros(d, 0)),
            iterations: 0,
            residual: 0.0,
            basis_dim: 0,
        });
    }
    let a_fro = a.frobenius_norm();
    let a_sym = a.is_symmetric();
    let drop_tol = 1e-12;

    // Two streams: `fwd` grows by Ã, `inv` by Ã⁻¹.
    let empty = DenseMatrix::zeros(d, 0);
    let mut fwd = extend_basis(&empty, b, drop_tol)?;
    let mut v = fwd.clone();
    let mut inv = extend_basis(&v, &lu.solve(b), drop_tol)?;
    v = hcat(&[&v, &inv]);
    let mut av = a.mul_dense(&v);

    let mut last = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let mut t = v.tr_mul(&av);
        if a_sym {
            t = symmetrize(&t);
        }
        let e = v.tr_mul(b);
        let y = lyap_solve(&t, &(&e * e.transpose()))?;
        let res = factored_residual(&av, &v, &y, b)?;
        last = res / (2.0 * a_fro * y.norm() + b_norm2);
        if last <= cfg.tol {
            let eig = y.clone().symmetric_eigen();
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let keep: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > cfg.toly).collect();
            let mut w = DenseMatrix::zeros(y.nrows(), keep.len());
            for (j, &i) in keep.iter().enumerate() {
                w.set_column(j, &(eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt()));
            }
            let mut z = &v * w;
            fix_column_signs(&mut z, None);
            return Ok(KpikOutcome {
                factor: LowRankFactor::new(z),
                iterations: it,
                residual: last,
                basis_dim: v.ncols(),
            });
        }
        if v.ncols() >= d {
            break;
        }
        let next_fwd = extend_basis(&v, &a.mul_dense(&fwd), drop_tol)?;
        let v_tmp = hcat(&[&v, &next_fwd]);
        let next_inv = extend_basis(&v_tmp, &lu.solve(&inv), drop_tol)?;
        if next_fwd.ncols() + next_inv.ncols() == 0 {
            break;
        }
        let added = hcat(&[&next_fwd, &next_inv]);
        av = hcat(&[&av, &a.mul_dense(&added)]);
        v = hcat(&[&v, &added]);
        if next_fwd.ncols() > 0 {
            fwd = next_fwd;
        }
        if next_inv.ncols() > 0 {
            inv = next_inv;
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        residual: last,
    })
}

/// Solves `ÃX + XÃᵀ + B̃B̃ᵀ = 0` for stable `Ã`; returns `Z` with `X ≈ ZZᵀ`.
pub fn kpik_ale_solve(a: &SparseOperator, b: &DenseMatrix, cfg: &KpikConfig) -> Result<LowRankFactor> {
    let lu = BandedLu::factor(a)?;
    Ok(kpik_ale_solve_factored(a, &lu, b, cfg)?.factor)
}

/// Backward Euler for the DLE with a fixed step, reusing the factorization of
/// `Ã = τA − ½I` across steps.
pub struct BackwardEulerKpik {
    a_tilde: SparseOperator,
    lu: BandedLu,
    tau: f64,
}

impl BackwardEulerKpik {
    pub fn new(a: &SparseOperator, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::contract("step size must be positive"));
        }
        let a_tilde = a.scale_shift(tau, -0.5);
        let lu = BandedLu::factor(&a_tilde)?;
        Ok(Self { a_tilde, lu, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// One step from `Z_n`: K-PIK with `B̃ = [√τ R, Z_n]`.
    pub fn step(&self, q_factor: &DenseMatrix, zn: &LowRankFactor, cfg: &KpikConfig) -> Result<KpikOutcome> {
        let b = hcat(&[&(q_factor * self.tau.sqrt()), &zn.z]);
        kpik_ale_solve_factored(&self.a_tilde, &self.lu, &b, cfg)
    }
}

pub fn be_kpik_dle_step(p: &DleProblem, zn: &LowRankFactor, tau: f64, cfg: &KpikConfig) -> Result<LowRankFactor> {
    Ok(BackwardEulerKpik::new(&p.a, tau)?.step(&p.q_factor, zn, cfg)?.factor)
}

/// Dense backward Euler step `(τA − ½I)X + X(τA − ½I)ᵀ + X_n + τQ = 0`.
pub fn be_dense_dle_step(a: &DenseMatrix, q: &DenseMatrix, xn: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    let d = a.nrows();
    let a_tilde = a * tau - DenseMatrix::identity(d, d) * 0.5;
    kron_lyap_solve(&a_tilde, &(xn + q * tau))
}

/// Initial factor for the baselines: `X₀ = Z₀Z₀ᵀ`.
pub fn initial_factor(p: &DleProblem) -> LowRankFactor {
    LowRankFactor::from_sym(&p.x0)
}

/// Backward Euler with K-PIK over `nsteps` uniform steps.
pub fn solve_be_kpik(p: &DleProblem, nsteps: usize, cfg: &KpikConfig) -> Result<SolveReport> {
    if nsteps == 0 {
        return Err(Error::contract("nsteps must be at least 1"));
    }
    let start = Instant::now();
    let tau = (p.t_end - p.t0) / nsteps as f64;
    let be = BackwardEulerKpik::new(&p.a, tau)?;
    let mut z = initial_factor(p);
    let mut report = SolveReport::new("be-kpik", 0, nsteps, tau, FinalState::Factor(z.z.clone()));
    report.timings.setup = start.elapsed().as_secs_f64();
    report.record(p.t0, &FinalState::Factor(z.z.clone()));
    let clock = Instant::now();
    for n in 0..nsteps {
        z = be.step(&p.q_factor, &z, cfg)?.factor;
        report.record(p.t0 + (n + 1) as f64 * tau, &FinalState::Factor(z.z.clone()));
    }
    report.timings.linear = clock.elapsed().as_secs_f64();
    report.rank = z.rank();
    report.state = FinalState::Factor(z.z);
    report.timings.total = start.elapsed().as_secs_f64();
    Ok(report)
}
