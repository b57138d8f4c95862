//! Low-rank split-step integrators for differential Lyapunov and Riccati
//! equations `Ẋ = AX + XAᵀ + G(X)` with stiff, sparse `A`.
//!
//! The stiff linear flow `X ↦ e^{τA} X e^{τAᵀ}` is applied to the factors
//! through a polynomial approximation of the exponential action, and the
//! non-stiff remainder by a symmetric projector-splitting step on the rank-`r`
//! manifold. [`lyapunov`] and [`riccati`] hold the drivers, [`baselines`] the
//! reference and comparison solvers, [`experiments`] the sweeps behind the
//! command line tool.

pub mod baselines;
pub mod dlr;
pub mod error;
pub mod experiments;
pub mod expmv;
pub mod io;
pub mod lyapunov;
pub mod matcore;
pub mod metrics;
pub mod problems;
pub mod report;
pub mod riccati;

pub use error::{Error, Result};
