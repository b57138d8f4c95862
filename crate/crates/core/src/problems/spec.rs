//! JSON problem documents.
//!
//! ```json
//! {
//!   "equation": "lyapunov",
//!   "operator": { "kind": "heat", "dtil": 20 },
//!   "q":  { "kind": "random", "rank": 5, "seed": 1 },
//!   "x0": { "kind": "random", "rank": 10, "seed": 2 },
//!   "t0": 0.0,
//!   "t_end": 0.1
//! }
//! ```
//!
//! `p` defaults to zero and `transpose_operator` to `false`; `solver` holds
//! optional defaults for the command line.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    build_advection_operator, build_diffadv_operator, build_heat_operator, build_lqr_vectors, random_factor,
    random_uniform_factor, AdvectionScheme, GridSpec, VelocityField,
};
use crate::error::{Error, Result};
use crate::lyapunov::DleProblem;
use crate::matcore::{DenseMatrix, SparseOperator, SymLowRank};
use crate::riccati::{lqr_to_dre, DreProblem, LqrSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    Lyapunov,
    Riccati,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Heat {
        dtil: usize,
    },
    Diffadv {
        dtil: usize,
    },
    Advection {
        dtil: usize,
        field: VelocityField,
        #[serde(default)]
        scheme: AdvectionScheme,
    },
    /// Explicit `(row, col, value)` entries, duplicates summed.
    Triplets {
        dim: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Heat { dtil } | Self::Diffadv { dtil } | Self::Advection { dtil, .. } => dtil * dtil,
            Self::Triplets { dim, .. } => *dim,
        }
    }

    fn grid(&self) -> Result<GridSpec> {
        match self {
            Self::Heat { dtil } | Self::Diffadv { dtil } | Self::Advection { dtil, .. } => GridSpec::new(*dtil),
            Self::Triplets { .. } => Err(Error::InvalidProblem(
                "LQR input/output vectors need a grid operator".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<SparseOperator> {
        match self {
            Self::Heat { dtil } => Ok(build_heat_operator(&GridSpec::new(*dtil)?)),
            Self::Diffadv { dtil } => Ok(build_diffadv_operator(&GridSpec::new(*dtil)?)),
            Self::Advection { dtil, field, scheme } => build_advection_operator(&GridSpec::new(*dtil)?, field, *scheme),
            Self::Triplets { dim, entries } => SparseOperator::from_triplets(*dim, entries),
        }
    }
}

/// A symmetric PSD matrix given through a factor `Z` with `M = Z Zᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LowRankSpec {
    #[default]
    Zero,
    Identity,
    /// Random factor, standard normal ([`random_factor`]) unless `entries`
    /// says otherwise.
    Random {
        rank: usize,
        seed: u64,
        #[serde(default, skip_serializing_if = "Entries::is_normal")]
        entries: Entries,
    },
    /// Factor rows, one inner array per row of `Z`.
    Factor {
        rows: Vec<Vec<f64>>,
    },
    /// `B B ᵀ / weight` with the grid's input indicator `B`.
    LqrInput {
        weight: f64,
    },
    /// `weight · Cᵀ C` with the grid's output indicator `C`.
    LqrOutput {
        weight: f64,
    },
}

/// Distribution of the entries of a random factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Entries {
    #[default]
    Normal,
    /// Uniform on `(0, 1]` ([`random_uniform_factor`]).
    Uniform,
}

impl Entries {
    fn is_normal(&self) -> bool {
        *self == Self::Normal
    }
}

impl LowRankSpec {
    pub fn factor(&self, op: &OperatorSpec) -> Result<DenseMatrix> {
        let d = op.dim();
        match self {
            Self::Zero => Ok(DenseMatrix::zeros(d, 1)),
            Self::Identity => Ok(DenseMatrix::identity(d, d)),
            Self::Random { rank, seed, entries } => {
                if *rank > d {
                    return Err(Error::InvalidProblem(format!("rank {rank} exceeds dimension {d}")));
                }
                Ok(match entries {
                    Entries::Normal => random_factor(d, *rank, *seed),
                    Entries::Uniform => random_uniform_factor(d, *rank, *seed),
                })
            }
            Self::Factor { rows } => {
                let k = rows.first().map_or(0, Vec::len);
                if rows.len() != d || rows.iter().any(|r| r.len() != k) {
                    return Err(Error::InvalidProblem(format!(
                        "factor must have {d} rows of equal length"
                    )));
                }
                Ok(DenseMatrix::from_fn(d, k, |i, j| rows[i][j]))
            }
            Self::LqrInput { weight } | Self::LqrOutput { weight } => {
                if !(*weight > 0.0) {
                    return Err(Error::InvalidProblem("LQR weight must be positive".into()));
                }
                let (b, c) = build_lqr_vectors(&op.grid()?);
                Ok(match self {
                    Self::LqrInput { .. } => b / weight.sqrt(),
                    _ => c.transpose() * weight.sqrt(),
                })
            }
        }
    }

    pub fn build(&self, op: &OperatorSpec) -> Result<SymLowRank> {
        SymLowRank::from_factor(&self.factor(op)?)
    }
}

/// Default solver settings carried along with a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub method: String,
    pub rank: usize,
    pub nsteps: usize,
    /// Residual tolerance of the K-PIK baseline.
    pub tol: f64,
    /// Eigenvalue truncation of the K-PIK baseline.
    pub toly: f64,
    /// Relative accuracy of the polynomial exponential action.
    pub expmv_tol: f64,
    /// Use the dense matrix exponential for the linear flow.
    pub dense_flow: bool,
    /// RK4 substeps per Riccati substep.
    pub inner_substeps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            method: "lie".into(),
            rank: 10,
            nsteps: 64,
            tol: 1e-10,
            toly: 1e-12,
            expmv_tol: 2f64.powi(-24),
            dense_flow: false,
            inner_substeps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub equation: EquationKind,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub transpose_operator: bool,
    pub q: LowRankSpec,
    #[serde(default)]
    pub p: LowRankSpec,
    pub x0: LowRankSpec,
    pub t0: f64,
    pub t_end: f64,
    #[serde(default)]
    pub solver: SolverSettings,
}

#[derive(Debug, Clone)]
pub enum BuiltProblem {
    Lyapunov(DleProblem),
    Riccati(DreProblem),
}

impl BuiltProblem {
    pub fn dim(&self) -> usize {
        match self {
            Self::Lyapunov(p) => p.dim(),
            Self::Riccati(p) => p.dim(),
        }
    }
}

impl ProblemSpec {
    /// Heat equation with random `Q` (rank 5, seed 1) and `X₀` (rank 10, seed 2) on `[0, 0.1]`.
    pub fn heat_dle(dtil: usize) -> Self {
        Self {
            equation: EquationKind::Lyapunov,
            operator: OperatorSpec::Heat { dtil },
            transpose_operator: false,
            q: LowRankSpec::Random {
                rank: 5,
                seed: 1,
                entries: Entries::Normal,
            },
            p: LowRankSpec::Zero,
            x0: LowRankSpec::Random {
                rank: 10,
                seed: 2,
                entries: Entries::Normal,
            },
            t0: 0.0,
            t_end: 0.1,
            solver: SolverSettings::default(),
        }
    }

    /// LQR Riccati equation for the diffusion-advection operator with
    /// `Qw = 100`, `Rw = 1` and `X₀ = 0` on `[0, 0.1]`.
    pub fn lqr_dre(dtil: usize) -> Self {
        Self {
            equation: EquationKind::Riccati,
            operator: OperatorSpec::Diffadv { dtil },
            transpose_operator: true,
            q: LowRankSpec::LqrOutput { weight: 100.0 },
            p: LowRankSpec::LqrInput { weight: 1.0 },
            x0: LowRankSpec::Zero,
            t0: 0.0,
            t_end: 0.1,
            solver: SolverSettings::default(),
        }
    }

    /// Switches every random factor to the given entry distribution.
    pub fn with_entries(mut self, e: Entries) -> Self {
        for m in [&mut self.q, &mut self.p, &mut self.x0] {
            if let LowRankSpec::Random { entries, .. } = m {
                *entries = e;
            }
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem specs always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Hex SHA-256 of the problem data (solver settings excluded).
    pub fn digest(&self) -> String {
        let mut key = self.clone();
        key.solver = SolverSettings::default();
        let bytes = serde_json::to_vec(&key).expect("problem specs always serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_operator(&self) -> Result<SparseOperator> {
        let a = self.operator.build()?;
        Ok(if self.transpose_operator { a.transpose() } else { a })
    }

    pub fn build(&self) -> Result<BuiltProblem> {
        let a = self.build_operator()?;
        let x0 = self.x0.build(&self.operator)?;
        let qf = self.q.factor(&self.operator)?;
        match self.equation {
            EquationKind::Lyapunov => {
                if self.p != LowRankSpec::Zero {
                    return Err(Error::InvalidProblem("Lyapunov problems take no P".into()));
                }
                Ok(BuiltProblem::Lyapunov(DleProblem::new(a, qf, x0, self.t0, self.t_end)?))
            }
            EquationKind::Riccati => {
                let pf = self.p.factor(&self.operator)?;
                Ok(BuiltProblem::Riccati(DreProblem::new(
                    a, qf, pf, x0, self.t0, self.t_end,
                )?))
            }
        }
    }

    /// The LQR form of the preset: `(A_sys, B, C, Qw, Rw)` when `q` and `p`
    /// are LQR indicators on a transposed grid operator.
    pub fn lqr(&self) -> Result<LqrSpec> {
        match (&self.q, &self.p) {
            (LowRankSpec::LqrOutput { weight: qw }, LowRankSpec::LqrInput { weight: rw })
                if self.transpose_operator =>
            {
                let (b, c) = build_lqr_vectors(&self.operator.grid()?);
                Ok(LqrSpec {
                    a_sys: self.operator.build()?,
                    b,
                    c,
                    qw: DenseMatrix::from_element(1, 1, *qw),
                    rw: DenseMatrix::from_element(1, 1, *rw),
                })
            }
            _ => Err(Error::InvalidProblem("not an LQR problem".into())),
        }
    }

    pub fn build_lqr(&self) -> Result<DreProblem> {
        let x0 = self.x0.build(&self.operator)?;
        lqr_to_dre(&self.lqr()?, x0, self.t0, self.t_end)
    }
}
