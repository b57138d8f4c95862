//! Richardson extrapolation of a first-order one-step method on factors.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::kpik::{initial_factor, BackwardEulerKpik, KpikConfig, LowRankFactor};
use crate::error::{Error, Result};
use crate::lyapunov::DleProblem;
use crate::matcore::{fix_column_signs, DenseMatrix};
use crate::metrics::Compact;
use crate::report::{FinalState, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RichardsonMode {
    /// `Z = 2Ẑ − Z̃` on the factors, the narrower one padded with zero columns.
    #[default]
    Factors,
    /// `X = 2ẐẐᵀ − Z̃Z̃ᵀ`, refactored with eigenvalues `≤ toly·λ_max` dropped.
    Reconstructions { toly: f64 },
}

fn padded(z: &DenseMatrix, width: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(z.nrows(), width);
    out.columns_mut(0, z.ncols()).copy_from(z);
    out
}

/// Combines one `τ` step `Z̃` with two `τ/2` steps `Ẑ`.
pub fn richardson_combine(z_hat: &LowRankFactor, z_tilde: &LowRankFactor, mode: RichardsonMode) -> LowRankFactor {
    match mode {
        RichardsonMode::Factors => {
            let w = z_hat.rank().max(z_tilde.rank());
            LowRankFactor::new(padded(&z_hat.z, w) * 2.0 - padded(&z_tilde.z, w))
        }
        RichardsonMode::Reconstructions { toly } => {
            let (k1, k2) = (z_hat.rank(), z_tilde.rank());
            let d = z_hat.z.nrows();
            let mut l = DenseMatrix::zeros(d, k1 + k2);
            l.columns_mut(0, k1).copy_from(&z_hat.z);
            l.columns_mut(k1, k2).copy_from(&z_tilde.z);
            let mut core = DenseMatrix::zeros(k1 + k2, k1 + k2);
            for i in 0..k1 {
                core[(i, i)] = 2.0;
            }
            for i in k1..k1 + k2 {
                core[(i, i)] = -1.0;
            }
            let c = Compact::from_core(&l, &core);
            let eig = crate::matcore::symmetrize(&c.m).symmetric_eigen();
            let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(*v));
            let mut order: Vec<usize> = (0..eig.eigenvalues.len())
                .filter(|&i| eig.eigenvalues[i] > toly * lmax)
                .collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let mut w = DenseMatrix::zeros(c.m.nrows(), order.len());
            for (j, &i) in order.iter().enumerate() {
                w.set_column(j, &(eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt()));
            }
            let mut z = &c.w * w;
            fix_column_signs(&mut z, None);
            LowRankFactor::new(z)
        }
    }
}

/// `2Ẑ − Z̃` from one step of size `τ` and two of size `τ/2` of `step`.
pub fn richardson2(
    step: &dyn Fn(&LowRankFactor, f64) -> Result<LowRankFactor>,
    zn: &LowRankFactor,
    tau: f64,
    mode: RichardsonMode,
) -> Result<LowRankFactor> {
    let z_tilde = step(zn, tau)?;
    let half = step(zn, 0.5 * tau)?;
    let z_hat = step(&half, 0.5 * tau)?;
    Ok(richardson_combine(&z_hat, &z_tilde, mode))
}

/// Extrapolated backward Euler with K-PIK over `nsteps` uniform steps.
pub fn solve_richardson(p: &DleProblem, nsteps: usize, cfg: &KpikConfig, mode: RichardsonMode) -> Result<SolveReport> {
    if nsteps == 0 {
        return Err(Error::contract("nsteps must be at least 1"));
    }
    let start = Instant::now();
    let tau = (p.t_end - p.t0) / nsteps as f64;
    let full = BackwardEulerKpik::new(&p.a, tau)?;
    let half = BackwardEulerKpik::new(&p.a, 0.5 * tau)?;
    let step = |z: &LowRankFactor, h: f64| -> Result<LowRankFactor> {
        let be = if h == tau { &full } else { &half };
        Ok(be.step(&p.q_factor, z, cfg)?.factor)
    };
    let mut z = initial_factor(p);
    let mut report = SolveReport::new("richardson", 0, nsteps, tau, FinalState::Factor(z.z.clone()));
    report.timings.setup = start.elapsed().as_secs_f64();
    report.record(p.t0, &FinalState::Factor(z.z.clone()));
    let clock = Instant::now();
    for n in 0..nsteps {
        z = richardson2(&step, &z, tau, mode)?;
        report.record(p.t0 + (n + 1) as f64 * tau, &FinalState::Factor(z.z.clone()));
    }
    report.timings.linear = clock.elapsed().as_secs_f64();
    report.rank = z.rank();
    report.state = FinalState::Factor(z.z);
    report.timings.total = start.elapsed().as_secs_f64();
    Ok(report)
}
