//! Comparison and reference solvers: adaptive Dormand-Prince on dense states,
//! backward Euler with extended Krylov ALE solves, and Richardson
//! extrapolation.

mod dopri5;
mod kpik;
mod richardson;

pub use dopri5::{dopri5_dense, dopri5_dense_at, Dopri5Options, DOPRI5_MAX_DIM};
pub use kpik::{
    be_dense_dle_step, be_kpik_dle_step, initial_factor, kpik_ale_solve, kpik_ale_solve_factored, solve_be_kpik,
    BackwardEulerKpik, KpikConfig, KpikOutcome, LowRankFactor,
};
pub use richardson::{richardson2, richardson_combine, solve_richardson, RichardsonMode};

use crate::error::Result;
use crate::lyapunov::DleProblem;
use crate::matcore::DenseMatrix;
use crate::riccati::DreProblem;

/// Dense Lyapunov right-hand side `AX + XAᵀ + Q`.
pub fn dle_rhs(p: &DleProblem) -> impl Fn(f64, &DenseMatrix) -> DenseMatrix + '_ {
    let q = &p.q_factor * p.q_factor.transpose();
    move |_, x| {
        let ax = p.a.mul_dense(x);
        &ax + ax.transpose() + &q
    }
}

/// Dense Riccati right-hand side `AX + XAᵀ + Q − (XR_P)(XR_P)ᵀ`.
pub fn dre_rhs(p: &DreProblem) -> impl Fn(f64, &DenseMatrix) -> DenseMatrix + '_ {
    let q = &p.q_factor * p.q_factor.transpose();
    move |_, x| {
        let ax = p.a.mul_dense(x);
        let xr = x * &p.p_factor;
        &ax + ax.transpose() + &q - &xr * xr.transpose()
    }
}

/// Dense reference for a Lyapunov problem at each of `times`.
pub fn dle_reference(p: &DleProblem, times: &[f64], opts: &Dopri5Options) -> Result<Vec<DenseMatrix>> {
    dopri5_dense_at(&dle_rhs(p), &p.x0.to_dense(), p.t0, times, opts)
}

/// Dense reference for a Riccati problem at each of `times`.
pub fn dre_reference(p: &DreProblem, times: &[f64], opts: &Dopri5Options) -> Result<Vec<DenseMatrix>> {
    dopri5_dense_at(&dre_rhs(p), &p.x0.to_dense(), p.t0, times, opts)
}
