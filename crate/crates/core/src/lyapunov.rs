//! Low-rank split-step integrators for `Ẋ = AX + XAᵀ + Q` with symmetric PSD
//! `Q` and `X₀`.
//!
//! Each step composes the exact linear flow `X ↦ e^{τA} X e^{τAᵀ}` with a
//! symmetric projector-splitting step for `Ẋ = Q`. Its three substeps have
//! constant right-hand sides and are integrated exactly, which keeps `S`
//! symmetric and positive semidefinite.

use std::time::Instant;

use crate::dlr::{ksl_step, symmetric_ksl_step, InnerScheme, NonlinearityDescriptor};
use crate::error::{Error, Result};
use crate::expmv::{ExpmvConfig, LinearFlow};
use crate::matcore::{symmetrize, DenseMatrix, GenLowRank, SparseOperator, SymLowRank};
use crate::report::{FinalState, SolveReport};

#[derive(Debug, Clone)]
pub struct DleProblem {
    pub a: SparseOperator,
    pub q: SymLowRank,
    /// `R` with `Q = R Rᵀ`, kept for the backward Euler baseline.
    pub q_factor: DenseMatrix,
    pub x0: SymLowRank,
    pub t0: f64,
    pub t_end: f64,
}

pub(crate) fn check_psd(y: &SymLowRank, what: &str) -> Result<()> {
    if y.rank() == 0 {
        return Ok(());
    }
    let (vals, _) = y.small_eigen();
    let scale = y.s.norm();
    let min = vals.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if min < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidProblem(format!(
            "{what} is not positive semidefinite (eigenvalue {min:.3e})"
        )));
    }
    if y.asymmetry() > 1e-12 * scale {
        return Err(Error::InvalidProblem(format!("{what} is not symmetric")));
    }
    Ok(())
}

impl DleProblem {
    /// Builds the problem from the factor `R` of `Q = R Rᵀ`.
    pub fn new(a: SparseOperator, q_factor: DenseMatrix, x0: SymLowRank, t0: f64, t_end: f64) -> Result<Self> {
        let d = a.dim();
        if q_factor.nrows() != d || x0.dim() != d {
            return Err(Error::InvalidProblem(format!(
                "dimension mismatch: A is {d}x{d}, Q factor has {} rows, X0 has {}",
                q_factor.nrows(),
                x0.dim()
            )));
        }
        if !(t_end > t0) {
            return Err(Error::InvalidProblem("final time must exceed initial time".into()));
        }
        check_psd(&x0, "X0")?;
        let q = SymLowRank::from_factor(&q_factor)?;
        Ok(Self {
            a,
            q,
            q_factor,
            x0,
            t0,
            t_end,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DleMethod {
    Lie,
    Strang,
    /// Unmodified projector splitting with `V` tracked separately from `U`.
    NonSymLie,
}

impl DleMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lie => "lie",
            Self::Strang => "strang",
            Self::NonSymLie => "nonsym-lie",
        }
    }
}

/// Symmetric substep for `Ẋ = Q` from the propagated factors, then symmetrized.
fn dle_nonlinear(q: &SymLowRank, ya: &SymLowRank, tau: f64) -> Result<SymLowRank> {
    let mut y = symmetric_ksl_step(q, None, ya, tau, InnerScheme::ExactAffine)?;
    y.s = symmetrize(&y.s);
    Ok(y)
}

/// One Lie step: linear flow over `τ`, then the symmetric `Q` substep.
pub fn lie_step_dle(p: &DleProblem, y: &SymLowRank, _tn: f64, tau: f64, cfg: &ExpmvConfig) -> Result<SymLowRank> {
    if !(tau > 0.0) {
        return Err(Error::contract("step size must be positive"));
    }
    let flow = LinearFlow::new(&p.a, tau, cfg)?;
    let ya = flow.propagate_sym(y, true)?;
    dle_nonlinear(&p.q, &ya, tau)
}

/// One Strang step: half linear flow, full `Q` substep, half linear flow.
pub fn strang_step_dle(p: &DleProblem, y: &SymLowRank, _tn: f64, tau: f64, cfg: &ExpmvConfig) -> Result<SymLowRank> {
    if !(tau > 0.0) {
        return Err(Error::contract("step size must be positive"));
    }
    let half = LinearFlow::new(&p.a, 0.5 * tau, cfg)?;
    let ya = half.propagate_sym(y, true)?;
    let yg = dle_nonlinear(&p.q, &ya, tau)?;
    half.propagate_sym(&yg, true)
}

/// Integrates the DLE on a uniform grid of `nsteps` steps at fixed `rank`.
pub fn solve_dle(
    p: &DleProblem,
    method: DleMethod,
    rank: usize,
    nsteps: usize,
    cfg: &ExpmvConfig,
) -> Result<SolveReport> {
    if nsteps == 0 {
        return Err(Error::contract("nsteps must be at least 1"));
    }
    let start = Instant::now();
    let tau = (p.t_end - p.t0) / nsteps as f64;
    let y0 = p.x0.with_rank(rank)?;
    let flow_tau = if method == DleMethod::Strang { 0.5 * tau } else { tau };
    let flow = LinearFlow::new(&p.a, flow_tau, cfg)?;
    let mut report = SolveReport::new(method.name(), rank, nsteps, tau, FinalState::Sym(y0.clone()));
    report.timings.setup = start.elapsed().as_secs_f64();
    let (mut t_lin, mut t_non) = (0.0, 0.0);

    match method {
        DleMethod::Lie | DleMethod::Strang => {
            let mut y = y0;
            report.record(p.t0, &FinalState::Sym(y.clone()));
            for n in 0..nsteps {
                let clock = Instant::now();
                let ya = flow.propagate_sym(&y, true)?;
                t_lin += clock.elapsed().as_secs_f64();
                let clock = Instant::now();
                let yg = dle_nonlinear(&p.q, &ya, tau)?;
                t_non += clock.elapsed().as_secs_f64();
                y = if method == DleMethod::Strang {
                    let clock = Instant::now();
                    let out = flow.propagate_sym(&yg, true)?;
                    t_lin += clock.elapsed().as_secs_f64();
                    out
                } else {
                    yg
                };
                let state = FinalState::Sym(y.clone());
                report.record(p.t0 + (n + 1) as f64 * tau, &state);
            }
            report.state = FinalState::Sym(y);
        }
        DleMethod::NonSymLie => {
            let g = NonlinearityDescriptor::Constant(GenLowRank::from(&p.q));
            let mut y = GenLowRank::from(&y0);
            report.record(p.t0, &FinalState::Gen(y.clone()));
            for n in 0..nsteps {
                let tn = p.t0 + n as f64 * tau;
                let clock = Instant::now();
                let ya = flow.propagate_gen(&y)?;
                t_lin += clock.elapsed().as_secs_f64();
                let clock = Instant::now();
                y = ksl_step(&g, &ya, tn, tau, InnerScheme::ExactAffine)?;
                t_non += clock.elapsed().as_secs_f64();
                report.record(tn + tau, &FinalState::Gen(y.clone()));
            }
            report.state = FinalState::Gen(y);
        }
    }
    report.timings.linear = t_lin;
    report.timings.nonlinear = t_non;
    report.timings.total = start.elapsed().as_secs_f64();
    Ok(report)
}
