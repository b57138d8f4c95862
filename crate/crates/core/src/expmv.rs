//! Action of the matrix exponential `e^{τA}U` for sparse `A` and skinny `U`.
//!
//! The default backend interpolates `exp` in Newton form at real Leja points.
//! The spectrum estimate is mapped onto the reference interval `[-2, 2]`,
//! `τ` is split into substeps so each substep interpolates `exp(ρx)` with
//! `ρ ≤ RHO_MAX`, and the series stops once two consecutive corrections fall
//! below `tol·‖result‖`.

use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{expm_dense, qr_thin, symmetrize, DenseMatrix, GenLowRank, SparseOperator, SymLowRank};

/// Box bounding the spectrum: real parts in `[alpha, beta]`, imaginary parts in `[-gamma, gamma]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBox {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExpmvBackend {
    #[default]
    Leja,
    /// Dense `expm(τA)` formed once per step size; meant for `d ≤ 400`.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpmvConfig {
    pub tol: f64,
    pub max_degree: usize,
    pub max_substeps: usize,
    #[serde(default)]
    pub backend: ExpmvBackend,
}

impl Default for ExpmvConfig {
    fn default() -> Self {
        Self {
            tol: 2f64.powi(-24),
            max_degree: 100,
            max_substeps: 1 << 14,
            backend: ExpmvBackend::Leja,
        }
    }
}

impl ExpmvConfig {
    pub fn dense() -> Self {
        Self {
            backend: ExpmvBackend::Dense,
            ..Self::default()
        }
    }

    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::contract("expmv tolerance must be positive"));
        }
        if self.max_degree == 0 || self.max_degree >= LEJA_COUNT {
            return Err(Error::contract(format!("expmv max_degree must lie in 1..{LEJA_COUNT}")));
        }
        if self.max_substeps == 0 {
            return Err(Error::contract("expmv max_substeps must be positive"));
        }
        Ok(())
    }
}

/// Number of precomputed Leja points.
const LEJA_COUNT: usize = 256;
/// Largest interpolation parameter per substep.
const RHO_MAX: f64 = 4.0;

/// Real Leja points on `[-2, 2]`, chosen greedily on a fine uniform grid
/// starting from `2, -2`.
pub fn leja_points() -> &'static [f64] {
    static POINTS: OnceLock<Vec<f64>> = OnceLock::new();
    POINTS.get_or_init(|| {
        let n_grid = (1 << 15) + 1;
        let grid: Vec<f64> = (0..n_grid)
            .map(|i| -2.0 + 4.0 * i as f64 / (n_grid - 1) as f64)
            .collect();
        let mut logprod = vec![0.0_f64; n_grid];
        let mut pts = Vec::with_capacity(LEJA_COUNT);
        let mut next = n_grid - 1;
        for _ in 0..LEJA_COUNT {
            let xi = grid[next];
            pts.push(xi);
            let mut best = f64::NEG_INFINITY;
            for (k, (&x, lp)) in grid.iter().zip(logprod.iter_mut()).enumerate() {
                *lp += (x - xi).abs().ln();
                if *lp > best {
                    best = *lp;
                    next = k;
                }
            }
        }
        pts
    })
}

/// Divided differences `exp(ρ·)[ξ₀,…,ξⱼ]`, `j = 0..=m`, as the first column of
/// `exp(ρZ)` with `Z` lower bidiagonal (nodes on the diagonal, ones below).
fn divided_differences(rho: f64, m: usize) -> Result<Vec<f64>> {
    let xi = leja_points();
    let n = m + 1;
    let mut z = DenseMatrix::zeros(n, n);
    for j in 0..n {
        z[(j, j)] = rho * xi[j];
        if j + 1 < n {
            z[(j + 1, j)] = rho;
        }
    }
    let e = expm_dense(&z)?;
    Ok(e.column(0).iter().copied().collect())
}

/// Gershgorin box of `A`: every disc lies inside it.
pub fn estimate_spectrum(a: &SparseOperator) -> SpectralBox {
    let discs = a.gershgorin_discs();
    if discs.is_empty() {
        return SpectralBox {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        };
    }
    let mut b = SpectralBox {
        alpha: f64::INFINITY,
        beta: f64::NEG_INFINITY,
        gamma: 0.0,
    };
    for (c, r) in discs {
        b.alpha = b.alpha.min(c - r);
        b.beta = b.beta.max(c + r);
        b.gamma = b.gamma.max(r);
    }
    b
}

/// Tightens the Gershgorin box with Bendixson's bounds: real parts of the
/// eigenvalues lie in the numerical range of `(A + Aᵀ)/2`, imaginary parts are
/// bounded by the norm of `(A − Aᵀ)/2`.
fn refined_spectrum(a: &SparseOperator) -> SpectralBox {
    let mut b = estimate_spectrum(a);
    let at = a.transpose();
    let mut h_lo = f64::INFINITY;
    let mut h_hi = f64::NEG_INFINITY;
    let mut k_rad = 0.0_f64;
    for i in 0..a.dim() {
        let mut centre = 0.0;
        let mut h_radius = 0.0;
        let mut k_radius = 0.0;
        // Merge the sorted rows of A and Aᵀ.
        let mut ra = a.row(i).peekable();
        let mut rt = at.row(i).peekable();
        loop {
            let (j, x, y) = match (ra.peek().copied(), rt.peek().copied()) {
                (None, None) => break,
                (Some((j, x)), None) => {
                    ra.next();
                    (j, x, 0.0)
                }
                (None, Some((j, y))) => {
                    rt.next();
                    (j, 0.0, y)
                }
                (Some((ja, x)), Some((jt, y))) => {
                    if ja == jt {
                        ra.next();
                        rt.next();
                        (ja, x, y)
                    } else if ja < jt {
                        ra.next();
                        (ja, x, 0.0)
                    } else {
                        rt.next();
                        (jt, 0.0, y)
                    }
                }
            };
            if j == i {
                centre = x;
            } else {
                h_radius += (0.5 * (x + y)).abs();
            }
            k_radius += (0.5 * (x - y)).abs();
        }
        h_lo = h_lo.min(centre - h_radius);
        h_hi = h_hi.max(centre + h_radius);
        k_rad = k_rad.max(k_radius);
    }
    if a.dim() > 0 {
        b.alpha = b.alpha.max(h_lo);
        b.beta = b.beta.min(h_hi);
        b.gamma = b.gamma.min(k_rad);
    }
    b
}

#[derive(Debug, Clone)]
struct LejaPlan {
    centre: f64,
    scale: f64,
    substeps: usize,
    tau_sub: f64,
    dd: Vec<f64>,
}

impl LejaPlan {
    fn new(centre: f64, scale: f64, tau: f64, substeps: usize, max_degree: usize) -> Result<Self> {
        let tau_sub = tau / substeps as f64;
        let dd = divided_differences(tau_sub * scale, max_degree)?;
        Ok(Self {
            centre,
            scale,
            substeps,
            tau_sub,
            dd,
        })
    }
}

#[derive(Debug)]
enum FlowKind {
    Identity,
    Scalar(f64),
    Leja(RwLock<LejaPlan>),
    Dense(DenseMatrix),
}

/// Prepared propagator `U ↦ e^{τA}U` for a fixed operator and step size.
#[derive(Debug)]
pub struct LinearFlow {
    a: SparseOperator,
    tau: f64,
    cfg: ExpmvConfig,
    kind: FlowKind,
}

impl LinearFlow {
    pub fn new(a: &SparseOperator, tau: f64, cfg: &ExpmvConfig) -> Result<Self> {
        cfg.validate()?;
        if !tau.is_finite() {
            return Err(Error::contract("expmv step size must be finite"));
        }
        let kind = if tau == 0.0 || a.nnz() == 0 {
            FlowKind::Identity
        } else {
            match cfg.backend {
                ExpmvBackend::Dense => FlowKind::Dense(expm_dense(&(a.to_dense() * tau))?),
                ExpmvBackend::Leja => {
                    let b = refined_spectrum(a);
                    let centre = 0.5 * (b.alpha + b.beta);
                    let half_width = (0.5 * (b.beta - b.alpha)).max(b.gamma);
                    let scale = 0.5 * half_width;
                    if scale == 0.0 {
                        FlowKind::Scalar((tau * centre).exp())
                    } else {
                        let rho = tau.abs() * scale;
                        let substeps = ((rho / RHO_MAX).ceil() as usize).max(1);
                        if substeps > cfg.max_substeps {
                            return Err(Error::Divergence {
                                substeps,
                                residual: f64::INFINITY,
                            });
                        }
                        FlowKind::Leja(RwLock::new(LejaPlan::new(
                            centre,
                            scale,
                            tau,
                            substeps,
                            cfg.max_degree,
                        )?))
                    }
                }
            }
        };
        Ok(Self {
            a: a.clone(),
            tau,
            cfg: *cfg,
            kind,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `e^{τA}·U`.
    pub fn apply(&self, u: &DenseMatrix) -> Result<DenseMatrix> {
        if u.nrows() != self.a.dim() {
            return Err(Error::contract(format!(
                "expm_action: operator of dimension {} applied to {} rows",
                self.a.dim(),
                u.nrows()
            )));
        }
        match &self.kind {
            FlowKind::Identity => Ok(u.clone()),
            FlowKind::Scalar(f) => Ok(u * *f),
            FlowKind::Dense(e) => Ok(e * u),
            FlowKind::Leja(lock) => {
                let plan = lock.read().expect("plan lock poisoned").clone();
                match self.leja_run(&plan, u) {
                    Ok(v) => Ok(v),
                    Err(Error::Divergence { .. }) => self.leja_refine(lock, plan, u),
                    Err(e) => Err(e),
                }
            }
        }
    }

    /// Doubles the substep count until the interpolation converges and keeps the
    /// successful plan for later calls.
    fn leja_refine(&self, lock: &RwLock<LejaPlan>, mut plan: LejaPlan, u: &DenseMatrix) -> Result<DenseMatrix> {
        loop {
            let substeps = plan.substeps * 2;
            if substeps > self.cfg.max_substeps {
                let residual = self.leja_run(&plan, u).err().map_or(0.0, |e| match e {
                    Error::Divergence { residual, .. } => residual,
                    _ => f64::NAN,
                });
                return Err(Error::Divergence {
                    substeps: plan.substeps,
                    residual,
                });
            }
            plan = LejaPlan::new(plan.centre, plan.scale, self.tau, substeps, self.cfg.max_degree)?;
            if let Ok(v) = self.leja_run(&plan, u) {
                *lock.write().expect("plan lock poisoned") = plan;
                return Ok(v);
            }
        }
    }

    fn leja_run(&self, plan: &LejaPlan, u: &DenseMatrix) -> Result<DenseMatrix> {
        let xi = leja_points();
        let shift = (plan.tau_sub * plan.centre).exp();
        let inv_scale = 1.0 / plan.scale;
        let mut v = u.clone();
        let mut aw = DenseMatrix::zeros(u.nrows(), u.ncols());
        for _ in 0..plan.substeps {
            let mut w = v.clone();
            let mut p = &w * plan.dd[0];
            let mut p_norm = p.norm();
            if p_norm == 0.0 && w.norm() == 0.0 {
                return Ok(v);
            }
            let mut prev_small = false;
            let mut converged = false;
            let mut last = f64::INFINITY;
            for j in 0..self.cfg.max_degree {
                // w ← ((A − cI)/s − ξⱼI) w
                self.a.mul_dense_into(&w, &mut aw);
                let shift_j = plan.centre * inv_scale + xi[j];
                w.zip_apply(&aw, |wi, ai| *wi = ai * inv_scale - shift_j * *wi);
                let coef = plan.dd[j + 1];
                p.zip_apply(&w, |pi, wi| *pi += coef * wi);
                p_norm = p.norm();
                let corr = coef.abs() * w.norm();
                last = corr;
                let small = corr <= self.cfg.tol * p_norm;
                if small && prev_small {
                    converged = true;
                    break;
                }
                prev_small = small;
                if !corr.is_finite() {
                    break;
                }
            }
            if !converged {
                return Err(Error::Divergence {
                    substeps: plan.substeps,
                    residual: if p_norm > 0.0 { last / p_norm } else { last },
                });
            }
            v = p * shift;
        }
        Ok(v)
    }

    /// Linear flow of a symmetric factorization: `(Ũ, R) = qr(e^{τA}U)`,
    /// `S̃ = R S Rᵀ`. With `symmetric` set, `S̃` is symmetrized.
    pub fn propagate_sym(&self, y: &SymLowRank, symmetric: bool) -> Result<SymLowRank> {
        let w = self.apply(&y.u)?;
        let (u, r) = qr_thin(&w)?;
        let mut s = &r * &y.s * r.transpose();
        if symmetric {
            s = symmetrize(&s);
        }
        Ok(SymLowRank { u, s })
    }

    /// Linear flow of a general factorization with `U` and `V` propagated separately.
    pub fn propagate_gen(&self, y: &GenLowRank) -> Result<GenLowRank> {
        let (u, ru) = qr_thin(&self.apply(&y.u)?)?;
        let (v, rv) = qr_thin(&self.apply(&y.v)?)?;
        let s = &ru * &y.s * rv.transpose();
        Ok(GenLowRank { u, s, v })
    }
}

/// `e^{τA}·U`.
pub fn expm_action(a: &SparseOperator, tau: f64, u: &DenseMatrix, cfg: &ExpmvConfig) -> Result<DenseMatrix> {
    LinearFlow::new(a, tau, cfg)?.apply(u)
}

/// Rank-preserving linear flow `Y ↦ e^{τA} Y e^{τAᵀ}` on a symmetric factorization.
pub fn propagate_linear_flow(a: &SparseOperator, tau: f64, y: &SymLowRank, cfg: &ExpmvConfig) -> Result<SymLowRank> {
    LinearFlow::new(a, tau, cfg)?.propagate_sym(y, true)
}
