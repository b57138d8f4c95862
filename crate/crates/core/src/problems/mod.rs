//! Deterministic builders for the test problems: finite-difference operators on
//! the unit square, LQR input/output vectors, seeded random PSD factors and a
//! transport operator for moment equations.
//!
//! Grid convention: `dtil` interior points per direction, `h = 1/(dtil+1)`,
//! point `(x_i, y_j) = (i h, j h)` for `i, j = 1..=dtil`, stored at index
//! `k = (j−1)·dtil + (i−1)` (x runs fastest).

mod modal;
mod spec;

pub use modal::{heat_eigenvalues, HeatModalSolution};
pub use spec::{BuiltProblem, Entries, EquationKind, LowRankSpec, OperatorSpec, ProblemSpec, SolverSettings};

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expmv::{expm_action, ExpmvConfig};
use crate::matcore::{DenseMatrix, SparseOperator, SymLowRank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dtil: usize,
}

impl GridSpec {
    pub fn new(dtil: usize) -> Result<Self> {
        if dtil < 2 {
            return Err(Error::InvalidProblem(format!("grid needs dtil >= 2, got {dtil}")));
        }
        Ok(Self { dtil })
    }

    pub fn dim(&self) -> usize {
        self.dtil * self.dtil
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.dtil as f64 + 1.0)
    }

    /// Coordinate `i h` of the `i`-th interior line, `i = 1..=dtil`.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / (self.dtil as f64 + 1.0)
    }

    /// `(x, y)` of the grid point stored at index `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.coord(k % self.dtil + 1), self.coord(k / self.dtil + 1))
    }

    fn index(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.dtil + (i - 1)
    }
}

/// Five-point stencil operator with per-point neighbour weights; neighbours
/// outside the grid are dropped (homogeneous Dirichlet data).
fn stencil_operator(g: &GridSpec, weights: impl Fn(f64, f64) -> [f64; 5]) -> SparseOperator {
    let n = g.dtil;
    let mut trip = Vec::with_capacity(5 * g.dim());
    for j in 1..=n {
        for i in 1..=n {
            let k = g.index(i, j);
            let [centre, east, west, north, south] = weights(g.coord(i), g.coord(j));
            trip.push((k, k, centre));
            if i < n && east != 0.0 {
                trip.push((k, g.index(i + 1, j), east));
            }
            if i > 1 && west != 0.0 {
                trip.push((k, g.index(i - 1, j), west));
            }
            if j < n && north != 0.0 {
                trip.push((k, g.index(i, j + 1), north));
            }
            if j > 1 && south != 0.0 {
                trip.push((k, g.index(i, j - 1), south));
            }
        }
    }
    SparseOperator::from_triplets(g.dim(), &trip).expect("stencil indices are in range")
}

/// Discrete Laplacian `Ã ⊗ I + I ⊗ Ã` with the 1D stencil `(1, −2, 1)/h²`.
pub fn build_heat_operator(g: &GridSpec) -> SparseOperator {
    let h2 = 1.0 / (g.h() * g.h());
    stencil_operator(g, |_, _| [-4.0 * h2, h2, h2, h2, h2])
}

/// Central differences for `Δw − 10x ∂ₓw − 100y ∂ᵧw`.
pub fn build_diffadv_operator(g: &GridSpec) -> SparseOperator {
    let h = g.h();
    let h2 = 1.0 / (h * h);
    stencil_operator(g, |x, y| {
        let ax = 10.0 * x / (2.0 * h);
        let ay = 100.0 * y / (2.0 * h);
        [-4.0 * h2, h2 - ax, h2 + ax, h2 - ay, h2 + ay]
    })
}

/// Input and output indicator vectors of the control problem: `B_k = 1` for
/// `0.1 < x ≤ 0.3`, `C_k = 1` for `0.7 < x ≤ 0.9`, where `x` is the
/// x-coordinate of grid point `k` (so both are constant along y).
pub fn build_lqr_vectors(g: &GridSpec) -> (DenseMatrix, DenseMatrix) {
    let d = g.dim();
    let mut b = DenseMatrix::zeros(d, 1);
    let mut c = DenseMatrix::zeros(1, d);
    for k in 0..d {
        let (x, _) = g.point(k);
        if 0.1 < x && x <= 0.3 {
            b[(k, 0)] = 1.0;
        }
        if 0.7 < x && x <= 0.9 {
            c[(0, k)] = 1.0;
        }
    }
    (b, c)
}

/// Standard normal stream: SplitMix64 state seeded with `seed`, Box-Muller
/// on consecutive pairs of 53-bit uniforms, both outputs of each pair used
/// (cosine branch first).
pub struct NormalStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: SplitMix64::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in `(0, 1]`.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// `d×rank` matrix of standard normals, filled row by row.
pub fn random_factor(d: usize, rank: usize, seed: u64) -> DenseMatrix {
    let mut stream = NormalStream::new(seed);
    let mut z = DenseMatrix::zeros(d, rank);
    for i in 0..d {
        for j in 0..rank {
            z[(i, j)] = stream.next_normal();
        }
    }
    z
}

/// `d×rank` matrix of uniform `(0, 1]` entries from the same stream, filled
/// row by row.
pub fn random_uniform_factor(d: usize, rank: usize, seed: u64) -> DenseMatrix {
    let mut stream = NormalStream::new(seed);
    DenseMatrix::from_row_iterator(d, rank, std::iter::repeat_with(|| stream.next_uniform()).take(d * rank))
}

/// Random PSD matrix `Z Zᵀ` of the given rank in compact symmetric form.
pub fn random_psd_lowrank(d: usize, rank: usize, seed: u64) -> Result<SymLowRank> {
    if rank > d {
        return Err(Error::contract(format!("rank {rank} exceeds dimension {d}")));
    }
    SymLowRank::from_factor(&random_factor(d, rank, seed))
}

/// Velocity field sampled at the grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VelocityField {
    Constant {
        ux: f64,
        uy: f64,
    },
    /// Solid-body rotation about `(0.5, 0.5)` with angular speed `omega`.
    Rotational {
        omega: f64,
    },
    /// One `(ux, uy)` pair per grid point in storage order.
    Samples {
        values: Vec<(f64, f64)>,
    },
}

impl VelocityField {
    fn at(&self, g: &GridSpec, k: usize) -> Result<(f64, f64)> {
        let (x, y) = g.point(k);
        Ok(match self {
            Self::Constant { ux, uy } => (*ux, *uy),
            Self::Rotational { omega } => (-omega * (y - 0.5), omega * (x - 0.5)),
            Self::Samples { values } => {
                if values.len() != g.dim() {
                    return Err(Error::InvalidProblem(format!(
                        "velocity samples: expected {}, got {}",
                        g.dim(),
                        values.len()
                    )));
                }
                values[k]
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    Centered,
}

/// Transport operator for `∂ₜw = −u·∇w` with zero inflow data, so profiles move
/// along `u`.
pub fn build_advection_operator(
    g: &GridSpec,
    field: &VelocityField,
    scheme: AdvectionScheme,
) -> Result<SparseOperator> {
    let h = g.h();
    let n = g.dtil;
    let mut trip = Vec::new();
    for j in 1..=n {
        for i in 1..=n {
            let k = g.index(i, j);
            let (ux, uy) = field.at(g, k)?;
            // (value at centre, east, west, north, south)
            let mut w = [0.0; 5];
            match scheme {
                AdvectionScheme::Upwind => {
                    if ux > 0.0 {
                        w[0] -= ux / h;
                        w[2] += ux / h;
                    } else {
                        w[0] += ux / h;
                        w[1] -= ux / h;
                    }
                    if uy > 0.0 {
                        w[0] -= uy / h;
                        w[4] += uy / h;
                    } else {
                        w[0] += uy / h;
                        w[3] -= uy / h;
                    }
                }
                AdvectionScheme::Centered => {
                    w[1] = -ux / (2.0 * h);
                    w[2] = ux / (2.0 * h);
                    w[3] = -uy / (2.0 * h);
                    w[4] = uy / (2.0 * h);
                }
            }
            if w[0] != 0.0 {
                trip.push((k, k, w[0]));
            }
            let neighbours = [
                (i < n, (i + 1, j), w[1]),
                (i > 1, (i.wrapping_sub(1), j), w[2]),
                (j < n, (i, j + 1), w[3]),
                (j > 1, (i, j.wrapping_sub(1)), w[4]),
            ];
            for (inside, (ii, jj), v) in neighbours {
                if inside && v != 0.0 {
                    trip.push((k, g.index(ii, jj), v));
                }
            }
        }
    }
    SparseOperator::from_triplets(g.dim(), &trip)
}

/// Mean of the transported field: `e^{tA} x₀`.
pub fn propagate_mean(a: &SparseOperator, x0: &DenseMatrix, t: f64, cfg: &ExpmvConfig) -> Result<DenseMatrix> {
    expm_action(a, t, x0, cfg)
}
