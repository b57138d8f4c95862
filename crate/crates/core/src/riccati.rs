//! Low-rank split-step integrators for `Ẋ = AX + XAᵀ + Q − XPX` with
//! symmetric PSD `Q`, `P` and `X₀`.
//!
//! The linear flow is applied exactly as for the Lyapunov equation. The
//! quadratic K, S and L substeps are integrated with RK4 in factored form, so
//! the result is only approximately symmetric and PSD. Neither property is
//! enforced unless [`DreOptions::symmetrize`] is set.

use std::time::Instant;

use crate::dlr::{symmetric_ksl_step, InnerScheme};
use crate::error::{Error, Result};
use crate::expmv::{ExpmvConfig, LinearFlow};
use crate::lyapunov::check_psd;
use crate::matcore::{symmetrize, DenseMatrix, SparseOperator, SymLowRank};
use crate::metrics::{scaled_fro_norm, Compact};
use crate::report::{FinalState, SolveReport};

#[derive(Debug, Clone)]
pub struct DreProblem {
    pub a: SparseOperator,
    pub q: SymLowRank,
    pub p: SymLowRank,
    pub q_factor: DenseMatrix,
    pub p_factor: DenseMatrix,
    pub x0: SymLowRank,
    pub t0: f64,
    pub t_end: f64,
}

impl DreProblem {
    /// Builds the problem from factors with `Q = R_Q R_Qᵀ` and `P = R_P R_Pᵀ`.
    pub fn new(
        a: SparseOperator,
        q_factor: DenseMatrix,
        p_factor: DenseMatrix,
        x0: SymLowRank,
        t0: f64,
        t_end: f64,
    ) -> Result<Self> {
        let d = a.dim();
        if q_factor.nrows() != d || p_factor.nrows() != d || x0.dim() != d {
            return Err(Error::InvalidProblem(format!(
                "dimension mismatch: A is {d}x{d}, factors of Q/P have {}/{} rows, X0 has {}",
                q_factor.nrows(),
                p_factor.nrows(),
                x0.dim()
            )));
        }
        if !(t_end > t0) {
            return Err(Error::InvalidProblem("final time must exceed initial time".into()));
        }
        check_psd(&x0, "X0")?;
        let q = SymLowRank::from_factor(&q_factor)?;
        let p = SymLowRank::from_factor(&p_factor)?;
        Ok(Self {
            a,
            q,
            p,
            q_factor,
            p_factor,
            x0,
            t0,
            t_end,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    fn p_is_zero(&self) -> bool {
        self.p.rank() == 0 || self.p.s.iter().all(|x| *x == 0.0)
    }
}

/// LQR data for `min ∫ yᵀQw y + uᵀRw u` subject to `ẋ = A_sys x + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct LqrSpec {
    pub a_sys: SparseOperator,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub qw: DenseMatrix,
    pub rw: DenseMatrix,
}

/// `M^{power}` for symmetric PSD `M` through its eigendecomposition.
fn sym_power(m: &DenseMatrix, power: f64) -> DenseMatrix {
    let eig = symmetrize(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| if l > 0.0 { l.powf(power) } else { 0.0 });
    &eig.eigenvectors * DenseMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Riccati problem of the LQR feedback: `A = A_sysᵀ`, `Q = CᵀQwC`, `P = B Rw⁻¹ Bᵀ`.
pub fn lqr_to_dre(s: &LqrSpec, x0: SymLowRank, t0: f64, t_end: f64) -> Result<DreProblem> {
    let d = s.a_sys.dim();
    let (m, q) = (s.b.ncols(), s.c.nrows());
    if s.b.nrows() != d || s.c.ncols() != d || s.qw.shape() != (q, q) || s.rw.shape() != (m, m) {
        return Err(Error::contract("lqr_to_dre: inconsistent dimensions"));
    }
    if (&s.rw - s.rw.transpose()).norm() > 1e-12 * s.rw.norm() || s.rw.clone().cholesky().is_none() {
        return Err(Error::contract("Rw must be symmetric positive definite"));
    }
    let q_factor = s.c.transpose() * sym_power(&s.qw, 0.5);
    let p_factor = &s.b * sym_power(&s.rw, -0.5);
    DreProblem::new(s.a_sys.transpose(), q_factor, p_factor, x0, t0, t_end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DreMethod {
    Lie,
    Strang,
}

impl DreMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lie => "lie",
            Self::Strang => "strang",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DreOptions {
    pub inner: InnerScheme,
    pub symmetrize: bool,
}

impl Default for DreOptions {
    fn default() -> Self {
        Self {
            inner: InnerScheme::Rk4 { substeps: 1 },
            symmetrize: false,
        }
    }
}

fn dre_nonlinear(p: &DreProblem, ya: &SymLowRank, tau: f64, opts: &DreOptions) -> Result<SymLowRank> {
    let quad = if opts.inner == InnerScheme::ExactAffine && p.p_is_zero() {
        None
    } else {
        Some(&p.p)
    };
    let mut y = symmetric_ksl_step(&p.q, quad, ya, tau, opts.inner)?;
    if opts.symmetrize {
        y.s = symmetrize(&y.s);
    }
    Ok(y)
}

pub fn lie_step_dre(
    p: &DreProblem,
    y: &SymLowRank,
    _tn: f64,
    tau: f64,
    cfg: &ExpmvConfig,
    opts: &DreOptions,
) -> Result<SymLowRank> {
    if !(tau > 0.0) {
        return Err(Error::contract("step size must be positive"));
    }
    let flow = LinearFlow::new(&p.a, tau, cfg)?;
    let ya = flow.propagate_sym(y, true)?;
    dre_nonlinear(p, &ya, tau, opts)
}

pub fn strang_step_dre(
    p: &DreProblem,
    y: &SymLowRank,
    _tn: f64,
    tau: f64,
    cfg: &ExpmvConfig,
    opts: &DreOptions,
) -> Result<SymLowRank> {
    if !(tau > 0.0) {
        return Err(Error::contract("step size must be positive"));
    }
    let half = LinearFlow::new(&p.a, 0.5 * tau, cfg)?;
    let ya = half.propagate_sym(y, true)?;
    let yg = dre_nonlinear(p, &ya, tau, opts)?;
    half.propagate_sym(&yg, true)
}

pub fn solve_dre(
    p: &DreProblem,
    method: DreMethod,
    rank: usize,
    nsteps: usize,
    cfg: &ExpmvConfig,
    opts: &DreOptions,
) -> Result<SolveReport> {
    if nsteps == 0 {
        return Err(Error::contract("nsteps must be at least 1"));
    }
    let start = Instant::now();
    let tau = (p.t_end - p.t0) / nsteps as f64;
    let y0 = p.x0.with_rank(rank)?;
    let flow_tau = if method == DreMethod::Strang { 0.5 * tau } else { tau };
    let flow = LinearFlow::new(&p.a, flow_tau, cfg)?;
    let mut report = SolveReport::new(method.name(), rank, nsteps, tau, FinalState::Sym(y0.clone()));
    report.timings.setup = start.elapsed().as_secs_f64();
    let (mut t_lin, mut t_non) = (0.0, 0.0);

    let mut y = y0;
    report.record(p.t0, &FinalState::Sym(y.clone()));
    for n in 0..nsteps {
        let clock = Instant::now();
        let ya = flow.propagate_sym(&y, true)?;
        t_lin += clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let yg = dre_nonlinear(p, &ya, tau, opts).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp {
                time: p.t0 + n as f64 * tau,
            },
            e => e,
        })?;
        t_non += clock.elapsed().as_secs_f64();
        y = if method == DreMethod::Strang {
            let clock = Instant::now();
            let out = flow.propagate_sym(&yg, true)?;
            t_lin += clock.elapsed().as_secs_f64();
            out
        } else {
            yg
        };
        report.record(p.t0 + (n + 1) as f64 * tau, &FinalState::Sym(y.clone()));
    }
    report.state = FinalState::Sym(y);
    report.timings.linear = t_lin;
    report.timings.nonlinear = t_non;
    report.timings.total = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Scaled Frobenius norm of `AX + XAᵀ + Q − XPX`, evaluated in factored form.
pub fn are_residual(p: &DreProblem, x: &SymLowRank) -> f64 {
    let (u, s) = (&x.u, &x.s);
    let (d, r, k) = (p.dim(), x.rank(), p.q.rank());
    let mut l = DenseMatrix::zeros(d, 2 * r + k);
    l.columns_mut(0, r).copy_from(&p.a.mul_dense(u));
    l.columns_mut(r, r).copy_from(u);
    l.columns_mut(2 * r, k).copy_from(&p.q.u);
    let utpu = u.tr_mul(&p.p.apply(u));
    let mut c = DenseMatrix::zeros(2 * r + k, 2 * r + k);
    c.view_mut((0, r), (r, r)).copy_from(s);
    c.view_mut((r, 0), (r, r)).copy_from(s);
    c.view_mut((r, r), (r, r)).copy_from(&(-(s * utpu * s)));
    c.view_mut((2 * r, 2 * r), (k, k)).copy_from(&p.q.s);
    Compact::from_core(&l, &c).scaled_norm()
}

/// Dense evaluation of the same residual.
pub fn are_residual_dense(a: &DenseMatrix, q: &DenseMatrix, p: &DenseMatrix, x: &DenseMatrix) -> f64 {
    scaled_fro_norm(&(a * x + x * a.transpose() + q - x * p * x))
}
