use serde::Serialize;

use crate::matcore::{DenseMatrix, GenLowRank, SymLowRank};
use crate::metrics::Compact;

/// Final state of a solve in whichever factored form the method produces.
#[derive(Debug, Clone)]
pub enum FinalState {
    Sym(SymLowRank),
    Gen(GenLowRank),
    /// `X = Z Zᵀ`.
    Factor(DenseMatrix),
    Dense(DenseMatrix),
}

impl FinalState {
    pub fn compact(&self) -> Compact {
        match self {
            Self::Sym(y) => Compact::from_sym(y),
            Self::Gen(y) => Compact::from_gen(y),
            Self::Factor(z) => Compact::from_factor(z),
            Self::Dense(x) => Compact::dense(x),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Self::Sym(y) => y.to_dense(),
            Self::Gen(y) => y.to_dense(),
            Self::Factor(z) => z * z.transpose(),
            Self::Dense(x) => x.clone(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Self::Sym(y) => y.rank(),
            Self::Gen(y) => y.rank(),
            Self::Factor(z) => z.ncols(),
            Self::Dense(x) => x.nrows(),
        }
    }
}

/// Wall-clock seconds spent per phase.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PhaseTimings {
    pub setup: f64,
    pub linear: f64,
    pub nonlinear: f64,
    pub total: f64,
}

/// Per-step record of a time integration. Series are indexed like `grid`,
/// entry 0 being the (truncated) initial value.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: String,
    pub rank: usize,
    pub nsteps: usize,
    pub tau: f64,
    pub grid: Vec<f64>,
    pub ranks: Vec<usize>,
    /// `‖Yₙ‖_F`.
    pub fro_norm: Vec<f64>,
    /// `‖Yₙ − Yₙᵀ‖_F`.
    pub asymmetry: Vec<f64>,
    /// `‖Yₙ − Ŷₙ‖_F`, `Ŷₙ` the nearest symmetric PSD matrix.
    pub psd_distance: Vec<f64>,
    pub timings: PhaseTimings,
    #[serde(skip)]
    pub state: FinalState,
}

impl SolveReport {
    pub(crate) fn new(method: &str, rank: usize, nsteps: usize, tau: f64, state: FinalState) -> Self {
        Self {
            method: method.to_string(),
            rank,
            nsteps,
            tau,
            grid: Vec::with_capacity(nsteps + 1),
            ranks: Vec::with_capacity(nsteps + 1),
            fro_norm: Vec::with_capacity(nsteps + 1),
            asymmetry: Vec::with_capacity(nsteps + 1),
            psd_distance: Vec::with_capacity(nsteps + 1),
            timings: PhaseTimings::default(),
            state,
        }
    }

    pub(crate) fn record(&mut self, t: f64, state: &FinalState) {
        let c = state.compact();
        self.grid.push(t);
        self.ranks.push(state.rank());
        self.fro_norm.push(c.fro_norm());
        self.asymmetry.push(c.asymmetry());
        self.psd_distance.push(c.psd_distance());
    }

    /// Symmetry defect of the final state relative to `ref_norm`.
    pub fn d_sym(&self, ref_norm: f64) -> f64 {
        self.asymmetry.last().copied().unwrap_or(0.0) / ref_norm
    }

    /// PSD defect of the final state relative to `ref_norm`.
    pub fn d_psd(&self, ref_norm: f64) -> f64 {
        self.psd_distance.last().copied().unwrap_or(0.0) / ref_norm
    }

    /// Largest symmetry defect over all recorded steps.
    pub fn max_d_sym(&self, ref_norm: f64) -> f64 {
        self.asymmetry.iter().fold(0.0_f64, |a, b| a.max(*b)) / ref_norm
    }

    pub fn max_d_psd(&self, ref_norm: f64) -> f64 {
        self.psd_distance.iter().fold(0.0_f64, |a, b| a.max(*b)) / ref_norm
    }
}
