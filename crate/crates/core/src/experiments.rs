//! Convergence and comparison sweeps: run every `(method, rank, nsteps)` cell
//! of a plan against a reference solution and tabulate errors, defects and
//! timings.
//!
//! `results.csv` columns:
//! `method,rank,nsteps,tau,error,d_sym,d_psd,final_rank,seconds,status`.
//! Floats use `%.16e`; `error` is the scaled Frobenius distance to the
//! reference at the final time, `d_sym` and `d_psd` are relative to the
//! reference's Frobenius norm, `status` is `ok` or the error message.
//! `orders.csv` holds `method,rank,order,points,rank_floor,floor_order,floor_points`:
//! the pre-plateau fit, the scaled best rank-`r` error of the reference, and
//! the fit over the [`ORDER_FIT_POINTS`] finest step sizes whose error exceeds
//! [`ORDER_FLOOR_FACTOR`] times that floor.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    dle_reference, dre_reference, solve_be_kpik, solve_richardson, Dopri5Options, KpikConfig, RichardsonMode,
};
use crate::dlr::InnerScheme;
use crate::error::{Error, Result};
use crate::expmv::ExpmvConfig;
use crate::io::{format_c_exp, read_reference, write_reference};
use crate::lyapunov::{solve_dle, DleMethod};
use crate::matcore::DenseMatrix;
use crate::metrics::{best_rank_error, scaled_fro_norm};
use crate::problems::{BuiltProblem, GridSpec, HeatModalSolution, OperatorSpec, ProblemSpec, SolverSettings};
use crate::report::{FinalState, SolveReport};
use crate::riccati::{solve_dre, DreMethod, DreOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodId {
    Lie,
    Strang,
    NonsymLie,
    BeKpik,
    Richardson,
    Dopri5,
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        Self::Lie,
        Self::Strang,
        Self::NonsymLie,
        Self::BeKpik,
        Self::Richardson,
        Self::Dopri5,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lie => "lie",
            Self::Strang => "strang",
            Self::NonsymLie => "nonsym-lie",
            Self::BeKpik => "be-kpik",
            Self::Richardson => "richardson",
            Self::Dopri5 => "dopri5",
        }
    }

    /// Fixed-rank splitting methods; the others choose their rank themselves.
    pub fn uses_rank(&self) -> bool {
        matches!(self, Self::Lie | Self::Strang | Self::NonsymLie)
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidProblem(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// Adaptive Dormand-Prince on the dense equation.
    #[default]
    Dopri5,
    /// Sine-basis closed form (heat Lyapunov problems only).
    Modal,
    /// A matrix stored in the reference binary layout.
    File(PathBuf),
}

impl FromStr for ReferenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dopri5" => Self::Dopri5,
            "modal" => Self::Modal,
            path => Self::File(PathBuf::from(path)),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodId>,
    pub ranks: Vec<usize>,
    pub nsteps: Vec<usize>,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Directory for `results.csv`, `orders.csv`, `report.json` and cached references.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(problem: ProblemSpec, methods: Vec<MethodId>, ranks: Vec<usize>, nsteps: Vec<usize>) -> Self {
        Self {
            problem,
            methods,
            ranks,
            nsteps,
            reference: ReferenceSpec::Dopri5,
            out_dir: None,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.nsteps.is_empty() {
            return Err(Error::InvalidProblem(
                "plan needs at least one method and one step count".into(),
            ));
        }
        if self.methods.iter().any(MethodId::uses_rank) && self.ranks.is_empty() {
            return Err(Error::InvalidProblem("plan needs at least one rank".into()));
        }
        if self.nsteps.contains(&0) {
            return Err(Error::InvalidProblem("step counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub rank: usize,
    pub nsteps: usize,
    pub tau: f64,
    pub error: f64,
    pub d_sym: f64,
    pub d_psd: f64,
    pub final_rank: usize,
    pub seconds: f64,
    pub status: String,
}

impl ResultRow {
    pub const HEADER: &'static str = "method,rank,nsteps,tau,error,d_sym,d_psd,final_rank,seconds,status";

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn csv_line(&self) -> String {
        let status = if self.status.contains([',', '"', '\n']) {
            format!("\"{}\"", self.status.replace('"', "\"\"").replace('\n', " "))
        } else {
            self.status.clone()
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.rank,
            self.nsteps,
            format_c_exp(self.tau),
            format_c_exp(self.error),
            format_c_exp(self.d_sym),
            format_c_exp(self.d_psd),
            self.final_rank,
            format_c_exp(self.seconds),
            status
        )
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(ResultRow::HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Least-squares slope of `log e` against `log τ`.
pub fn fit_order(taus: &[f64], errs: &[f64]) -> f64 {
    let n = taus.len().min(errs.len()) as f64;
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderFit {
    pub order: f64,
    /// Largest and smallest step size of the fitted segment.
    pub tau_max: f64,
    pub tau_min: f64,
    pub points: usize,
}

/// Order over the longest run of consecutive step sizes (sorted decreasing)
/// along which every refinement reduces the error by at least 1.5×.
pub fn pre_plateau_order(taus: &[f64], errs: &[f64]) -> Option<OrderFit> {
    let mut pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(errs)
        .filter(|(t, e)| t.is_finite() && e.is_finite() && **e > 0.0)
        .map(|(t, e)| (*t, *e))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut best, mut start) = ((0, 0), 0);
    for i in 1..=pts.len() {
        let ends = i == pts.len() || pts[i - 1].1 / pts[i].1 < 1.5;
        if ends {
            if i - start > best.1 - best.0 {
                best = (start, i);
            }
            start = i;
        }
    }
    let seg = &pts[best.0..best.1];
    if seg.len() < 2 {
        return None;
    }
    let (t, e): (Vec<f64>, Vec<f64>) = seg.iter().copied().unzip();
    Some(OrderFit {
        order: fit_order(&t, &e),
        tau_max: t[0],
        tau_min: t[t.len() - 1],
        points: seg.len(),
    })
}

/// Order over the `points` finest step sizes whose error stays above
/// `floor` (typically a multiple of the best rank-`r` approximation error).
pub fn order_above_floor(taus: &[f64], errs: &[f64], floor: f64, points: usize) -> Option<OrderFit> {
    let mut pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(errs)
        .filter(|(t, e)| t.is_finite() && e.is_finite() && **e > floor)
        .map(|(t, e)| (*t, *e))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let seg = &pts[pts.len().saturating_sub(points)..];
    if seg.len() < 2 {
        return None;
    }
    let (t, e): (Vec<f64>, Vec<f64>) = seg.iter().copied().unzip();
    Some(OrderFit {
        order: fit_order(&t, &e),
        tau_max: t[0],
        tau_min: t[t.len() - 1],
        points: seg.len(),
    })
}

pub const ORDER_FLOOR_FACTOR: f64 = 2.0;
pub const ORDER_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct OrderRow {
    pub method: String,
    pub rank: usize,
    pub fit: Option<OrderFit>,
    /// Best rank-`r` approximation error of the reference (0 for rank-free methods).
    pub rank_floor: f64,
    pub floor_fit: Option<OrderFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub orders: Vec<OrderRow>,
    pub reference_norm: f64,
}

impl SweepResult {
    pub fn row(&self, method: MethodId, rank: usize, nsteps: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method.name() && r.rank == rank && r.nsteps == nsteps)
    }

    pub fn order(&self, method: MethodId, rank: usize) -> Option<OrderFit> {
        self.orders
            .iter()
            .find(|o| o.method == method.name() && o.rank == rank)
            .and_then(|o| o.fit)
    }
}

pub fn expmv_config(s: &SolverSettings) -> ExpmvConfig {
    if s.dense_flow {
        ExpmvConfig::dense()
    } else {
        ExpmvConfig::default().with_tol(s.expmv_tol)
    }
}

pub fn kpik_config(s: &SolverSettings) -> KpikConfig {
    KpikConfig {
        tol: s.tol,
        toly: s.toly,
        ..KpikConfig::default()
    }
}

fn dre_options(s: &SolverSettings) -> DreOptions {
    DreOptions {
        inner: InnerScheme::Rk4 {
            substeps: s.inner_substeps.max(1),
        },
        symmetrize: false,
    }
}

/// Runs one method on a built problem.
pub fn run_method(
    built: &BuiltProblem,
    settings: &SolverSettings,
    method: MethodId,
    rank: usize,
    nsteps: usize,
) -> Result<SolveReport> {
    let cfg = expmv_config(settings);
    match (built, method) {
        (BuiltProblem::Lyapunov(p), MethodId::Lie) => solve_dle(p, DleMethod::Lie, rank, nsteps, &cfg),
        (BuiltProblem::Lyapunov(p), MethodId::Strang) => solve_dle(p, DleMethod::Strang, rank, nsteps, &cfg),
        (BuiltProblem::Lyapunov(p), MethodId::NonsymLie) => solve_dle(p, DleMethod::NonSymLie, rank, nsteps, &cfg),
        (BuiltProblem::Lyapunov(p), MethodId::BeKpik) => solve_be_kpik(p, nsteps, &kpik_config(settings)),
        (BuiltProblem::Lyapunov(p), MethodId::Richardson) => {
            solve_richardson(p, nsteps, &kpik_config(settings), RichardsonMode::Factors)
        }
        (BuiltProblem::Riccati(p), MethodId::Lie) => {
            solve_dre(p, DreMethod::Lie, rank, nsteps, &cfg, &dre_options(settings))
        }
        (BuiltProblem::Riccati(p), MethodId::Strang) => {
            solve_dre(p, DreMethod::Strang, rank, nsteps, &cfg, &dre_options(settings))
        }
        (built, MethodId::Dopri5) => {
            let start = Instant::now();
            let x = dense_solution(built, &Dopri5Options::default())?;
            let t_end = match built {
                BuiltProblem::Lyapunov(p) => p.t_end,
                BuiltProblem::Riccati(p) => p.t_end,
            };
            let mut r = SolveReport::new("dopri5", x.nrows(), 0, 0.0, FinalState::Dense(x.clone()));
            r.record(t_end, &FinalState::Dense(x));
            r.timings.total = start.elapsed().as_secs_f64();
            Ok(r)
        }
        (BuiltProblem::Riccati(_), m) => Err(Error::InvalidProblem(format!(
            "method `{m}` is not available for Riccati problems"
        ))),
    }
}

fn dense_solution(built: &BuiltProblem, opts: &Dopri5Options) -> Result<DenseMatrix> {
    Ok(match built {
        BuiltProblem::Lyapunov(p) => dle_reference(p, &[p.t_end], opts)?.remove(0),
        BuiltProblem::Riccati(p) => dre_reference(p, &[p.t_end], opts)?.remove(0),
    })
}

/// Reference at the final time, read from or written to `cache_dir` when given.
pub fn reference_solution(
    problem: &ProblemSpec,
    built: &BuiltProblem,
    spec: &ReferenceSpec,
    cache_dir: Option<&Path>,
) -> Result<DenseMatrix> {
    let x = match spec {
        ReferenceSpec::File(path) => read_reference(path)?,
        ReferenceSpec::Modal => match (&problem.operator, built) {
            (OperatorSpec::Heat { dtil }, BuiltProblem::Lyapunov(p)) if !problem.transpose_operator => {
                HeatModalSolution::new(GridSpec::new(*dtil)?, &p.q_factor, &p.x0, p.t_end - p.t0)?.to_dense()
            }
            _ => {
                return Err(Error::InvalidProblem(
                    "the modal reference exists only for heat Lyapunov problems".into(),
                ))
            }
        },
        ReferenceSpec::Dopri5 => {
            let opts = Dopri5Options::default();
            let cached = cache_dir.map(|dir| {
                dir.join(format!(
                    "reference-{}-dopri5-{:e}-{:e}.bin",
                    &problem.digest()[..16],
                    opts.rtol,
                    opts.atol
                ))
            });
            if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
                read_reference(path)?
            } else {
                let x = dense_solution(built, &opts)?;
                if let Some(path) = cached {
                    write_reference(&path, &x)?;
                }
                x
            }
        }
    };
    if x.shape() != (built.dim(), built.dim()) {
        return Err(Error::InvalidProblem(format!(
            "reference is {:?}, problem dimension is {}",
            x.shape(),
            built.dim()
        )));
    }
    Ok(x)
}

/// Tabulates one finished (or failed) run against the reference.
pub fn evaluate(
    method: MethodId,
    rank: usize,
    nsteps: usize,
    outcome: Result<SolveReport>,
    reference: &DenseMatrix,
    ref_norm: f64,
    seconds: f64,
) -> ResultRow {
    match outcome {
        Ok(r) => ResultRow {
            method: method.name().into(),
            rank,
            nsteps,
            tau: r.tau,
            error: scaled_fro_norm(&(r.state.to_dense() - reference)),
            d_sym: r.d_sym(ref_norm),
            d_psd: r.d_psd(ref_norm),
            final_rank: r.state.rank(),
            seconds,
            status: "ok".into(),
        },
        Err(e) => ResultRow {
            method: method.name().into(),
            rank,
            nsteps,
            tau: f64::NAN,
            error: f64::NAN,
            d_sym: f64::NAN,
            d_psd: f64::NAN,
            final_rank: 0,
            seconds,
            status: e.to_string(),
        },
    }
}

/// Plan cells in output order: methods as listed, then rank, then nsteps.
fn cells(plan: &ExperimentPlan) -> Vec<(MethodId, usize, usize)> {
    let mut out = Vec::new();
    for &m in &plan.methods {
        let ranks: Vec<usize> = if m.uses_rank() { plan.ranks.clone() } else { vec![0] };
        let steps: Vec<usize> = if m == MethodId::Dopri5 {
            vec![0]
        } else {
            plan.nsteps.clone()
        };
        for &r in &ranks {
            for &n in &steps {
                out.push((m, r, n));
            }
        }
    }
    out
}

fn run_cells(plan: &ExperimentPlan, built: &BuiltProblem, reference: &DenseMatrix, ref_norm: f64) -> Vec<ResultRow> {
    let todo = cells(plan);
    let workers = plan
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, todo.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ResultRow>>> = Mutex::new(vec![None; todo.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(m, r, n)) = todo.get(i) else { break };
                let clock = Instant::now();
                let outcome = run_method(built, &plan.problem.solver, m, r, n);
                let row = evaluate(m, r, n, outcome, reference, ref_norm, clock.elapsed().as_secs_f64());
                slots.lock().expect("no poisoned workers")[i] = Some(row);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

fn orders_of(plan: &ExperimentPlan, rows: &[ResultRow], reference: &DenseMatrix) -> Vec<OrderRow> {
    let mut out = Vec::new();
    for &m in &plan.methods {
        if m == MethodId::Dopri5 {
            continue;
        }
        let ranks: Vec<usize> = if m.uses_rank() { plan.ranks.clone() } else { vec![0] };
        for r in ranks {
            let (t, e): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|x| x.method == m.name() && x.rank == r && x.is_ok())
                .map(|x| (x.tau, x.error))
                .unzip();
            let rank_floor = if r > 0 { best_rank_error(reference, r) } else { 0.0 };
            out.push(OrderRow {
                method: m.name().into(),
                rank: r,
                fit: pre_plateau_order(&t, &e),
                rank_floor,
                floor_fit: order_above_floor(&t, &e, ORDER_FLOOR_FACTOR * rank_floor, ORDER_FIT_POINTS),
            });
        }
    }
    out
}

fn sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    plan.validate()?;
    let built = plan.problem.build()?;
    let reference = reference_solution(&plan.problem, &built, &plan.reference, plan.out_dir.as_deref())?;
    let ref_norm = reference.norm();
    let denom = if ref_norm > 0.0 { ref_norm } else { 1.0 };
    let rows = run_cells(plan, &built, &reference, denom);
    let orders = orders_of(plan, &rows, &reference);
    let result = SweepResult {
        rows,
        orders,
        reference_norm: ref_norm,
    };
    if let Some(dir) = &plan.out_dir {
        write_outputs(dir, plan, &result)?;
    }
    Ok(result)
}

/// Error, defects and timing for every plan cell plus fitted orders.
pub fn run_convergence(plan: &ExperimentPlan) -> Result<SweepResult> {
    sweep(plan)
}

/// Splitting against backward Euler at matched step counts; `final_rank`
/// records the rank each baseline step settled on.
pub fn run_compare(plan: &ExperimentPlan) -> Result<SweepResult> {
    let has_split = plan.methods.iter().any(MethodId::uses_rank);
    let has_base = plan
        .methods
        .iter()
        .any(|m| matches!(m, MethodId::BeKpik | MethodId::Richardson));
    if !(has_split && has_base) {
        return Err(Error::InvalidProblem(
            "a comparison needs a splitting method and a backward Euler method".into(),
        ));
    }
    sweep(plan)
}

fn gnuplot_script(plan: &ExperimentPlan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'step size'");
    let _ = writeln!(s, "set ylabel 'error'");
    let _ = writeln!(s, "set key left top");
    let mut series = Vec::new();
    for &m in &plan.methods {
        if m == MethodId::Dopri5 {
            continue;
        }
        let ranks: Vec<usize> = if m.uses_rank() { plan.ranks.clone() } else { vec![0] };
        for r in ranks {
            series.push(format!(
                "'results.csv' using (strcol(1) eq '{m}' && $2 == {r} ? $4 : NaN):5 with linespoints title '{m} r={r}'"
            ));
        }
    }
    let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
    s
}

pub fn write_outputs(dir: &Path, plan: &ExperimentPlan, result: &SweepResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), rows_to_csv(&result.rows))?;
    let mut orders = String::from("method,rank,order,points,rank_floor,floor_order,floor_points\n");
    for o in &result.orders {
        let (order, points) = o.fit.map_or((f64::NAN, 0), |f| (f.order, f.points));
        let (forder, fpoints) = o.floor_fit.map_or((f64::NAN, 0), |f| (f.order, f.points));
        let _ = writeln!(
            orders,
            "{},{},{},{},{},{},{}",
            o.method,
            o.rank,
            format_c_exp(order),
            points,
            format_c_exp(o.rank_floor),
            format_c_exp(forder),
            fpoints
        );
    }
    fs::write(dir.join("orders.csv"), orders)?;
    let report = serde_json::json!({ "plan": plan, "result": result });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(dir.join("plot.gp"), gnuplot_script(plan))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn order_of_power_law() {
        let taus: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
        for p in [1.0, 2.0, 1.37] {
            let errs: Vec<f64> = taus.iter().map(|t| 3.0 * t.powf(p)).collect();
            assert!((fit_order(&taus, &errs) - p).abs() <= 1e-6);
            let fit = pre_plateau_order(&taus, &errs).unwrap();
            assert!((fit.order - p).abs() <= 1e-6);
            assert_eq!(fit.points, 8);
        }
    }

    #[test]
    fn plateau_is_excluded() {
        let taus: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
        let errs: Vec<f64> = taus.iter().map(|t| t.max(0.025)).collect();
        let fit = pre_plateau_order(&taus, &errs).unwrap();
        assert_relative_eq!(fit.order, 1.0, epsilon = 1e-12);
        assert_eq!(fit.tau_min, 1.0 / 32.0);
    }

    #[test]
    fn floor_window_takes_finest_points() {
        let taus: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
        // Order one for coarse steps, two for fine ones, then a floor.
        let errs: Vec<f64> = taus
            .iter()
            .map(|&t| if t > 0.06 { t * 0.25 } else { (t * t * 4.0).max(1e-4) })
            .collect();
        let fit = order_above_floor(&taus, &errs, 2e-4, 3).unwrap();
        assert_relative_eq!(fit.order, 2.0, epsilon = 1e-12);
        assert_eq!(fit.tau_min, 1.0 / 128.0);
        assert!(order_above_floor(&taus, &errs, 1.0, 3).is_none());
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.name().parse::<MethodId>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("euler".parse::<MethodId>().is_err());
    }

    #[test]
    fn csv_is_stable() {
        let row = ResultRow {
            method: "lie".into(),
            rank: 4,
            nsteps: 16,
            tau: 0.1 / 16.0,
            error: 1.5e-5,
            d_sym: 0.0,
            d_psd: 2e-16,
            final_rank: 4,
            seconds: 0.25,
            status: "ok".into(),
        };
        assert_eq!(
            row.csv_line(),
            "lie,4,16,6.2500000000000003e-03,1.5000000000000000e-05,0.0000000000000000e+00,\
             2.0000000000000000e-16,4,2.5000000000000000e-01,ok"
        );
    }

    fn scalar_plan(methods: Vec<MethodId>) -> ExperimentPlan {
        let text = r#"{"equation":"lyapunov","operator":{"kind":"triplets","dim":1,"entries":[[0,0,-1.0]]},
            "q":{"kind":"factor","rows":[[1.4142135623730951]]},"x0":{"kind":"zero"},"t0":0,"t_end":0.5}"#;
        let problem = ProblemSpec::from_json(text).unwrap();
        ExperimentPlan::new(problem, methods, vec![1], vec![10])
    }

    #[test]
    fn single_cell_plan_gives_one_row() {
        let r = run_convergence(&scalar_plan(vec![MethodId::Lie])).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].is_ok());
    }

    #[test]
    fn scalar_comparison_matches_closed_forms() {
        let r = run_compare(&scalar_plan(vec![MethodId::Lie, MethodId::BeKpik])).unwrap();
        assert_eq!(r.rows.len(), 2);
        let exact = 1.0 - (-1f64).exp();
        let lie = 2.0 * 0.05 * (1.0 - (-1f64).exp()) / (1.0 - (-0.1f64).exp());
        let be = 1.0 - 1.1f64.powi(-10);
        // The reference is DOPRI5, itself within 1e-10 of the closed form.
        assert!((r.rows[0].error - (lie - exact).abs()).abs() <= 1e-9);
        assert!((r.rows[1].error - (be - exact).abs()).abs() <= 1e-9);
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let mut plan = ExperimentPlan::new(
            ProblemSpec::heat_dle(5),
            vec![MethodId::Strang, MethodId::Lie],
            vec![3, 2],
            vec![4, 2],
        );
        plan.workers = Some(3);
        let a = run_convergence(&plan).unwrap();
        plan.workers = Some(1);
        let b = run_convergence(&plan).unwrap();
        let strip = |rows: &[ResultRow]| -> Vec<ResultRow> {
            rows.iter()
                .cloned()
                .map(|mut r| {
                    r.seconds = 0.0;
                    r
                })
                .collect()
        };
        assert_eq!(strip(&a.rows), strip(&b.rows));
        let coords: Vec<(String, usize, usize)> = a.rows.iter().map(|r| (r.method.clone(), r.rank, r.nsteps)).collect();
        assert_eq!(coords[0], ("strang".into(), 3, 4));
        assert_eq!(coords[3], ("strang".into(), 2, 2));
        assert_eq!(coords[4], ("lie".into(), 3, 4));
    }

    #[test]
    fn outputs_and_reference_cache() {
        let dir = std::env::temp_dir().join(format!("lrsplit-exp-{}", std::process::id()));
        let mut plan = scalar_plan(vec![MethodId::Lie, MethodId::Dopri5]);
        plan.out_dir = Some(dir.clone());
        run_convergence(&plan).unwrap();
        let csv = fs::read_to_string(dir.join("results.csv")).unwrap();
        assert!(csv.starts_with(ResultRow::HEADER));
        assert_eq!(csv.lines().count(), 3);
        let cached: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with("reference-"))
            .collect();
        assert_eq!(cached.len(), 1);
        let again = run_convergence(&plan).unwrap();
        assert!(again.rows[1].error < 1e-14);
        fs::remove_dir_all(&dir).unwrap();
    }
}
