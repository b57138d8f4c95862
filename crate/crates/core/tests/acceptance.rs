//! Acceptance suite. Prints one `CRITERION n: PASS|FAIL` line per criterion
//! and exits non-zero if any criterion fails.
//!
//! `cargo test --test acceptance -- 4 5` runs a subset. The d = 3600 Strang
//! check of criterion 5 runs only with `LRSPLIT_SLOW=1`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use lrsplit::baselines::{
    be_dense_dle_step, be_kpik_dle_step, dle_reference, dopri5_dense, dre_reference, initial_factor, kpik_ale_solve,
    richardson2, solve_be_kpik, solve_richardson, BackwardEulerKpik, Dopri5Options, KpikConfig, LowRankFactor,
    RichardsonMode,
};
use lrsplit::dlr::{
    inner_ode_solve, ksl_step, symmetric_ksl_step, InnerScheme, Nonlinearity, NonlinearityDescriptor, Outer,
};
use lrsplit::experiments::{fit_order, order_above_floor, pre_plateau_order};
use lrsplit::expmv::{expm_action, ExpmvConfig};
use lrsplit::lyapunov::{solve_dle, DleMethod, DleProblem};
use lrsplit::matcore::{expm_dense, kron_lyap_solve, DenseMatrix, SparseOperator, SymLowRank};
use lrsplit::metrics::{best_rank_error, scaled_fro_norm};
use lrsplit::problems::{
    build_diffadv_operator, build_heat_operator, random_factor, random_psd_lowrank, BuiltProblem, Entries, GridSpec,
    HeatModalSolution, ProblemSpec,
};
use lrsplit::riccati::{are_residual, are_residual_dense, solve_dre, DreMethod, DreOptions, DreProblem};

const SYM_DEFECT_MAX: f64 = 1e-13;
const NONSYM_DEFECT_MIN: f64 = 1e-8;
const PSD_DEFECT_MAX: f64 = 1e-13;
const FIRST_ORDER: (f64, f64) = (0.85, 1.15);
const SECOND_ORDER: (f64, f64) = (1.8, 2.2);
const PLATEAU_FACTOR: f64 = 100.0;
/// Order fits use the `FIT_POINTS` finest step sizes whose error exceeds
/// `FLOOR_FACTOR` times the best rank-`r` approximation error of the reference.
const FLOOR_FACTOR: f64 = 2.0;
const FIT_POINTS: usize = 4;
const DEFECT_MARGIN: f64 = 100.0;
const ARE_AGREEMENT_FACTOR: f64 = 2.0;
const TIGHTER: f64 = 100.0;
const ROUNDOFF_FACTOR: f64 = 100.0;
const BE_DENSE_TOL: f64 = 1e-8;
const RICHARDSON_ORDER_MIN: f64 = 1.9;
const EXPMV_DENSE_TOL: f64 = 1e-6;
const KSL_EXACT_TOL: f64 = 1e-11;
const LEMMA_TOL: f64 = 1e-12;
const KSL_INSTANCES: usize = 100;

const HEAT_DTIL: usize = 20;
const SWEEP_RANKS: [usize; 7] = [2, 4, 6, 8, 10, 12, 14];
const SWEEP_STEPS: [usize; 4] = [2, 16, 128, 2048];

struct Check {
    pass: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            pass: true,
            notes: Vec::new(),
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn require(&mut self, ok: bool, s: impl Into<String>) {
        let s = s.into();
        self.notes.push(format!("{} {s}", if ok { "ok  " } else { "FAIL" }));
        self.pass &= ok;
    }

    fn in_range(&mut self, what: &str, x: f64, (lo, hi): (f64, f64)) {
        self.require(x >= lo && x <= hi, format!("{what} = {x:.4} in [{lo}, {hi}]"));
    }
}

/// Heat DLE of the sweeps with its DOPRI5 reference.
struct Heat {
    p: DleProblem,
    xref: DenseMatrix,
    ref_norm: f64,
}

impl Heat {
    fn new(dtil: usize) -> Self {
        Self::from_spec(ProblemSpec::heat_dle(dtil))
    }

    fn from_spec(spec: ProblemSpec) -> Self {
        let BuiltProblem::Lyapunov(p) = spec.build().unwrap() else {
            unreachable!("heat preset is a Lyapunov problem")
        };
        let xref = dle_reference(&p, &[p.t_end], &Dopri5Options::default())
            .unwrap()
            .remove(0);
        let ref_norm = xref.norm();
        Self { p, xref, ref_norm }
    }

    fn error(&self, state: &DenseMatrix) -> f64 {
        scaled_fro_norm(&(state - &self.xref))
    }
}

fn heat(cache: &mut Option<Heat>) -> &Heat {
    cache.get_or_insert_with(|| {
        let clock = Instant::now();
        let h = Heat::new(HEAT_DTIL);
        println!(
            "  heat d={} reference ready in {:.1}s",
            h.p.dim(),
            clock.elapsed().as_secs_f64()
        );
        h
    })
}

struct Defects {
    lie_sym: Vec<(usize, usize, f64)>,
    lie_psd: Vec<(usize, usize, f64)>,
    nonsym_sym: Vec<(usize, usize, f64)>,
    /// Largest defects over every intermediate step, not only the final one.
    lie_sym_max: f64,
    lie_psd_max: f64,
    seconds: f64,
}

fn defect_sweep(h: &Heat, cfg: &ExpmvConfig) -> Defects {
    let clock = Instant::now();
    let mut d = Defects {
        lie_sym: Vec::new(),
        lie_psd: Vec::new(),
        nonsym_sym: Vec::new(),
        lie_sym_max: 0.0,
        lie_psd_max: 0.0,
        seconds: 0.0,
    };
    for &r in &SWEEP_RANKS {
        for &n in &SWEEP_STEPS {
            let lie = solve_dle(&h.p, DleMethod::Lie, r, n, cfg).unwrap();
            d.lie_sym.push((r, n, lie.d_sym(h.ref_norm)));
            d.lie_sym_max = d.lie_sym_max.max(lie.max_d_sym(h.ref_norm));
            d.lie_psd.push((r, n, lie.d_psd(h.ref_norm)));
            d.lie_psd_max = d.lie_psd_max.max(lie.max_d_psd(h.ref_norm));
            let ns = solve_dle(&h.p, DleMethod::NonSymLie, r, n, cfg).unwrap();
            d.nonsym_sym.push((r, n, ns.d_sym(h.ref_norm)));
        }
    }
    d.seconds = clock.elapsed().as_secs_f64();
    d
}

fn table(c: &mut Check, label: &str, rows: &[(usize, usize, f64)]) {
    for &r in &SWEEP_RANKS {
        let line: Vec<String> = rows
            .iter()
            .filter(|x| x.0 == r)
            .map(|x| format!("{:9.2e}", x.2))
            .collect();
        c.note(format!("{label} rank {r:2}: {}", line.join(" ")));
    }
}

fn criterion_1(d: &Defects) -> Check {
    let mut c = Check::new();
    table(&mut c, "d_sym lie", &d.lie_sym);
    let worst = d.lie_sym.iter().fold(0.0_f64, |a, x| a.max(x.2));
    c.require(
        worst <= SYM_DEFECT_MAX,
        format!("max final d_sym {worst:.2e} <= {SYM_DEFECT_MAX:e}"),
    );
    c.require(
        d.lie_sym_max <= SYM_DEFECT_MAX,
        format!("max d_sym over all steps {:.2e}", d.lie_sym_max),
    );
    c.require(d.seconds < 300.0, format!("sweep runtime {:.1}s < 300s", d.seconds));
    c
}

fn criterion_2(d: &Defects) -> Check {
    let mut c = Check::new();
    table(&mut c, "d_sym nonsym", &d.nonsym_sym);
    let low = d
        .nonsym_sym
        .iter()
        .filter(|x| x.0 <= 10)
        .fold(f64::INFINITY, |a, x| a.min(x.2));
    c.require(
        low >= NONSYM_DEFECT_MIN,
        format!("min d_sym for rank <= 10 is {low:.2e} >= {NONSYM_DEFECT_MIN:e}"),
    );
    let sym = d.lie_sym.iter().fold(0.0_f64, |a, x| a.max(x.2)).max(SYM_DEFECT_MAX);
    c.require(
        low >= 1e5 * sym,
        format!("gap to the symmetric method >= 5 orders ({low:.2e} vs {sym:.2e})"),
    );
    c
}

fn criterion_3(d: &Defects) -> Check {
    let mut c = Check::new();
    table(&mut c, "d_psd lie", &d.lie_psd);
    let worst = d.lie_psd.iter().fold(0.0_f64, |a, x| a.max(x.2));
    c.require(
        worst <= PSD_DEFECT_MAX,
        format!("max final d_psd {worst:.2e} <= {PSD_DEFECT_MAX:e}"),
    );
    c.require(
        d.lie_psd_max <= PSD_DEFECT_MAX,
        format!("max d_psd over all steps {:.2e}", d.lie_psd_max),
    );
    c
}

/// Errors of `method` against the reference for each step count.
fn heat_errors(h: &Heat, method: DleMethod, rank: usize, steps: &[usize], cfg: &ExpmvConfig) -> (Vec<f64>, Vec<f64>) {
    let tau: Vec<f64> = steps.iter().map(|&n| (h.p.t_end - h.p.t0) / n as f64).collect();
    let err = steps
        .iter()
        .map(|&n| h.error(&solve_dle(&h.p, method, rank, n, cfg).unwrap().state.to_dense()))
        .collect();
    (tau, err)
}

fn error_line(steps: &[usize], err: &[f64]) -> String {
    steps
        .iter()
        .zip(err)
        .map(|(n, e)| format!("{n}:{e:.3e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Requires the order fitted above the rank floor to lie in `band`.
fn order_check(c: &mut Check, label: &str, tau: &[f64], err: &[f64], floor: f64, band: (f64, f64)) {
    if let Some(f) = pre_plateau_order(tau, err) {
        c.note(format!(
            "{label}: ratio-rule segment tau in [{:.2e}, {:.2e}] gives {:.3}",
            f.tau_min, f.tau_max, f.order
        ));
    }
    match order_above_floor(tau, err, FLOOR_FACTOR * floor, FIT_POINTS) {
        Some(f) => {
            c.note(format!(
                "{label}: rank floor {floor:.3e}, fit over tau in [{:.2e}, {:.2e}]",
                f.tau_min, f.tau_max
            ));
            c.in_range(&format!("{label} order"), f.order, band);
        }
        None => c.require(false, format!("{label}: fewer than two points above the rank floor")),
    }
}

fn criterion_4(h: &Heat, cfg: &ExpmvConfig) -> Check {
    let mut c = Check::new();
    let clock = Instant::now();
    let steps: Vec<usize> = (1..=13).map(|k| 1 << k).collect();
    let (tau, err) = heat_errors(h, DleMethod::Lie, 14, &steps, cfg);
    c.note(format!("rank 14 errors {}", error_line(&steps, &err)));
    order_check(&mut c, "rank 14", &tau, &err, best_rank_error(&h.xref, 14), FIRST_ORDER);

    let (_, err4) = heat_errors(h, DleMethod::Lie, 4, &steps, cfg);
    c.note(format!("rank 4 errors {}", error_line(&steps, &err4)));
    let plateau = *err4.last().unwrap();
    let mut sv: Vec<f64> = h.xref.symmetric_eigenvalues().iter().map(|x| x.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let level = sv[4] / h.p.dim() as f64;
    let ratio = plateau / level;
    c.require(
        (1.0 / PLATEAU_FACTOR..=PLATEAU_FACTOR).contains(&ratio),
        format!("rank 4 plateau {plateau:.3e} vs sigma_5/d {level:.3e} (ratio {ratio:.2})"),
    );
    let secs = clock.elapsed().as_secs_f64();
    c.require(secs < 600.0, format!("runtime {secs:.1}s < 600s"));
    c
}

fn criterion_5(h: &Heat, cfg: &ExpmvConfig) -> Check {
    let mut c = Check::new();
    let steps: Vec<usize> = (1..=12).map(|k| 1 << k).collect();
    let (tau, err) = heat_errors(h, DleMethod::Strang, 20, &steps, cfg);
    c.note(format!("rank 20 errors {}", error_line(&steps, &err)));
    order_check(
        &mut c,
        "rank 20",
        &tau,
        &err,
        best_rank_error(&h.xref, 20),
        SECOND_ORDER,
    );

    if std::env::var("LRSPLIT_SLOW").is_ok_and(|v| v == "1") {
        let g = GridSpec::new(60).unwrap();
        let BuiltProblem::Lyapunov(p) = ProblemSpec::heat_dle(60).build().unwrap() else {
            unreachable!()
        };
        let modal = HeatModalSolution::new(g, &p.q_factor, &p.x0, p.t_end - p.t0).unwrap();
        let steps: Vec<usize> = (1..=8).map(|k| 1 << k).collect();
        let tau: Vec<f64> = steps.iter().map(|&n| 0.1 / n as f64).collect();
        let err: Vec<f64> = steps
            .iter()
            .map(|&n| {
                let r = solve_dle(&p, DleMethod::Strang, 20, n, cfg).unwrap();
                let lrsplit::report::FinalState::Sym(y) = &r.state else {
                    unreachable!()
                };
                modal.scaled_error(y)
            })
            .collect();
        c.note(format!("d=3600 rank 20 errors {}", error_line(&steps, &err)));
        let order = pre_plateau_order(&tau, &err).map_or(fit_order(&tau, &err), |f| f.order);
        c.require(
            order < SECOND_ORDER.0,
            format!("d=3600 order {order:.3} < {} (order reduction)", SECOND_ORDER.0),
        );
    } else {
        c.note("d=3600 order-reduction check skipped (set LRSPLIT_SLOW=1)");
    }
    c
}

fn lqr_problem(x0_identity: bool, t_end: f64) -> DreProblem {
    let mut spec = ProblemSpec::lqr_dre(HEAT_DTIL);
    spec.t_end = t_end;
    if x0_identity {
        spec.x0 = lrsplit::problems::LowRankSpec::Identity;
    }
    let BuiltProblem::Riccati(p) = spec.build().unwrap() else {
        unreachable!("LQR preset is a Riccati problem")
    };
    p
}

fn criterion_6(cfg: &ExpmvConfig) -> Check {
    let mut c = Check::new();
    let p = lqr_problem(false, 0.1);
    let xref = dre_reference(&p, &[p.t_end], &Dopri5Options::default())
        .unwrap()
        .remove(0);
    let ref_norm = xref.norm();
    let opts = DreOptions::default();
    let steps: Vec<usize> = (4..=10).map(|k| 1 << k).collect();
    let tau: Vec<f64> = steps.iter().map(|&n| 0.1 / n as f64).collect();
    for (method, rank, band) in [(DreMethod::Lie, 25, FIRST_ORDER), (DreMethod::Strang, 25, SECOND_ORDER)] {
        let mut err = Vec::new();
        let mut margin_ok = true;
        let mut worst_margin = f64::INFINITY;
        for &n in &steps {
            let r = solve_dre(&p, method, rank, n, cfg, &opts).unwrap();
            let e = scaled_fro_norm(&(r.state.to_dense() - &xref));
            let defect = r.max_d_sym(ref_norm).max(r.max_d_psd(ref_norm));
            worst_margin = worst_margin.min(e / defect.max(f64::MIN_POSITIVE));
            margin_ok &= defect * DEFECT_MARGIN <= e;
            err.push(e);
        }
        c.note(format!(
            "{} rank {rank} errors {}",
            method.name(),
            error_line(&steps, &err)
        ));
        order_check(&mut c, method.name(), &tau, &err, best_rank_error(&xref, rank), band);
        c.require(
            margin_ok,
            format!(
                "{} defects at least {DEFECT_MARGIN}x below the error (smallest ratio {worst_margin:.2e})",
                method.name()
            ),
        );
    }
    c
}

fn criterion_7(cfg: &ExpmvConfig) -> Check {
    let mut c = Check::new();
    let times = [0.05, 0.1, 0.2, 0.5, 1.0];
    let p0 = lqr_problem(false, 1.0);
    let pi = lqr_problem(true, 1.0);
    let opts = Dopri5Options::default();
    let x0s = dre_reference(&p0, &times, &opts).unwrap();
    let xis = dre_reference(&pi, &times, &opts).unwrap();
    let tight = Dopri5Options::with_tolerances(opts.rtol / TIGHTER, opts.atol / TIGHTER);
    let x0t = dre_reference(&p0, &times, &tight).unwrap();
    let (a, q, pm) = (p0.a.to_dense(), p0.q.to_dense(), p0.p.to_dense());
    let res = |xs: &[DenseMatrix]| -> Vec<f64> { xs.iter().map(|x| are_residual_dense(&a, &q, &pm, x)).collect() };
    let (res0, resi, res0t) = (res(&x0s), res(&xis), res(&x0t));
    c.note(format!("residual X0=0: {}", fmt_list(&res0)));
    c.note(format!("residual X0=0, tolerances / {TIGHTER:e}: {}", fmt_list(&res0t)));
    c.note(format!("residual X0=I: {}", fmt_list(&resi)));
    // Once the true residual drops below what the integrator resolves, only
    // noise is left; the tolerance comparison measures that noise.
    let noise = res0.iter().zip(&res0t).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    c.require(
        non_increasing(&res0, noise),
        format!("residual of the X0=0 solution is non-increasing up to integration noise {noise:.2e}"),
    );

    // Low-rank Strang solution of the same problem, sampled at the same times.
    let lr: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let p = lqr_problem(false, t);
            let n = (t / 1e-3).round() as usize;
            let r = solve_dre(&p, DreMethod::Strang, 25, n, cfg, &DreOptions::default()).unwrap();
            let lrsplit::report::FinalState::Sym(y) = &r.state else {
                unreachable!()
            };
            (are_residual(&p, y), y.s.norm())
        })
        .collect();
    let lr_res: Vec<f64> = lr.iter().map(|v| v.0).collect();
    let x_norm = lr.iter().map(|v| v.1).fold(0.0, f64::max);
    let roundoff = ROUNDOFF_FACTOR * f64::EPSILON * 2.0 * p0.a.frobenius_norm() * x_norm / p0.dim() as f64;
    c.note(format!(
        "residual low-rank Strang X0=0, tau = 1e-3: {}",
        fmt_list(&lr_res)
    ));
    c.require(
        non_increasing(&lr_res, roundoff),
        format!("residual of the low-rank solution is non-increasing up to roundoff {roundoff:.2e}"),
    );

    let diff = scaled_fro_norm(&(&x0s[4] - &xis[4]));
    let bound = ARE_AGREEMENT_FACTOR * res0[4].max(resi[4]);
    c.require(
        diff <= bound,
        format!("|X(1; 0) - X(1; I)| = {diff:.3e} <= 2 x larger residual {bound:.3e}"),
    );
    c
}

fn non_increasing(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn heat_small(dtil: usize, seed: u64) -> DleProblem {
    let g = GridSpec::new(dtil).unwrap();
    let d = g.dim();
    DleProblem::new(
        build_heat_operator(&g),
        random_factor(d, 3, seed),
        random_psd_lowrank(d, 4, seed + 1).unwrap(),
        0.0,
        0.1,
    )
    .unwrap()
}

fn criterion_8() -> Check {
    let mut c = Check::new();
    let cfg = KpikConfig::default();
    for dtil in [6, 7] {
        let p = heat_small(dtil, 40 + dtil as u64);
        let a = p.a.to_dense();
        let q = p.q.to_dense();
        let mut z = initial_factor(&p);
        let mut x = p.x0.to_dense();
        let tau = 0.01;
        let mut worst = 0.0_f64;
        for _ in 0..2 {
            z = be_kpik_dle_step(&p, &z, tau, &cfg).unwrap();
            x = be_dense_dle_step(&a, &q, &x, tau).unwrap();
            worst = worst.max((z.to_dense() - &x).norm() / x.norm());
        }
        c.require(
            worst <= BE_DENSE_TOL,
            format!(
                "d={}: K-PIK vs Kronecker backward Euler {worst:.2e} <= {BE_DENSE_TOL:e}",
                p.dim()
            ),
        );
    }

    let p = heat_small(14, 60);
    let tau = 0.005;
    let be = BackwardEulerKpik::new(&p.a, tau).unwrap();
    let out = be.step(&p.q_factor, &initial_factor(&p), &cfg).unwrap();
    let d = p.dim();
    let at = p.a.to_dense() * tau - DenseMatrix::identity(d, d) * 0.5;
    let bt = {
        let z0 = initial_factor(&p).z;
        let mut b = DenseMatrix::zeros(d, p.q_factor.ncols() + z0.ncols());
        b.columns_mut(0, p.q_factor.ncols())
            .copy_from(&(&p.q_factor * tau.sqrt()));
        b.columns_mut(p.q_factor.ncols(), z0.ncols()).copy_from(&z0);
        b
    };
    let x = out.factor.to_dense();
    let res = &at * &x + &x * at.transpose() + &bt * bt.transpose();
    let res2 = res.clone().singular_values().max();
    let scale = 2.0 * at.norm() * x.norm() + bt.norm().powi(2);
    let rel = res2 / scale;
    c.note(format!("d={d}: {} iterations, basis {}", out.iterations, out.basis_dim));
    c.require(
        rel <= cfg.tol,
        format!("d={d}: dense stopping-rule residual {rel:.2e} <= tol {:e}", cfg.tol),
    );
    c
}

fn scalar_dle(a: f64, q: f64, x0: f64, t_end: f64) -> DleProblem {
    let op = SparseOperator::from_triplets(1, &[(0, 0, a)]).unwrap();
    let x0 = SymLowRank::new(DenseMatrix::identity(1, 1), DenseMatrix::from_element(1, 1, x0)).unwrap();
    DleProblem::new(op, DenseMatrix::from_element(1, 1, q.sqrt()), x0, 0.0, t_end).unwrap()
}

/// `x(t)` of `ẋ = 2ax + q`.
fn scalar_exact(a: f64, q: f64, x0: f64, t: f64) -> f64 {
    let e = (2.0 * a * t).exp();
    e * x0 + q * (e - 1.0) / (2.0 * a)
}

fn criterion_9() -> Check {
    let mut c = Check::new();
    let cfg = KpikConfig {
        tol: 1e-12,
        toly: 1e-14,
        max_iter: 100,
    };
    let p = scalar_dle(-1.0, 2.0, 0.0, 0.5);
    let exact = scalar_exact(-1.0, 2.0, 0.0, 0.5);
    let steps = [16usize, 32, 64, 128, 256];
    let tau: Vec<f64> = steps.iter().map(|&n| 0.5 / n as f64).collect();
    let err: Vec<f64> = steps
        .iter()
        .map(|&n| {
            let r = solve_richardson(&p, n, &cfg, RichardsonMode::Factors).unwrap();
            (r.state.to_dense()[(0, 0)] - exact).abs()
        })
        .collect();
    c.note(format!("scalar errors {}", error_line(&steps, &err)));
    c.require(
        fit_order(&tau, &err) >= RICHARDSON_ORDER_MIN,
        format!("scalar order {:.3} >= {RICHARDSON_ORDER_MIN}", fit_order(&tau, &err)),
    );

    let g = GridSpec::new(6).unwrap();
    let d = g.dim();
    let qf = random_factor(d, 2, 70);
    let x0 = SymLowRank::zeros(d, 1);
    let p = DleProblem::new(build_heat_operator(&g), qf.clone(), x0.clone(), 0.0, 0.1).unwrap();
    let modal = HeatModalSolution::new(g, &qf, &x0, 0.1).unwrap().to_dense();
    let steps = [64usize, 128, 256, 512, 1024];
    let tau: Vec<f64> = steps.iter().map(|&n| 0.1 / n as f64).collect();
    let err: Vec<f64> = steps
        .iter()
        .map(|&n| {
            let r = solve_richardson(&p, n, &cfg, RichardsonMode::Reconstructions { toly: 1e-14 }).unwrap();
            scaled_fro_norm(&(r.state.to_dense() - &modal))
        })
        .collect();
    c.note(format!("heat d={d} errors {}", error_line(&steps, &err)));
    let order = fit_order(&tau, &err);
    c.require(
        order >= RICHARDSON_ORDER_MIN,
        format!("heat d={d} order {order:.3} >= {RICHARDSON_ORDER_MIN}"),
    );
    c
}

/// Full-rank Lie (exponential first) and backward Euler errors, computed
/// entrywise in the eigenbasis of `A` where each entry obeys `x' = μx + q`.
fn modal_lie_be(p: &DleProblem, n: usize) -> (f64, f64) {
    let eig = p.a.to_dense().symmetric_eigen();
    let w = &eig.eigenvectors;
    let qh = w.transpose() * p.q.to_dense() * w;
    let xh = w.transpose() * p.x0.to_dense() * w;
    let (t, tau) = (p.t_end - p.t0, (p.t_end - p.t0) / n as f64);
    let d = w.nrows();
    let (mut el, mut eb) = (0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let mu = eig.eigenvalues[i] + eig.eigenvalues[j];
            let (q, x0) = (qh[(i, j)], xh[(i, j)]);
            let exact = (mu * t).exp() * x0 + q * (mu * t).exp_m1() / mu;
            let (mut l, mut b) = (x0, x0);
            for _ in 0..n {
                l = (tau * mu).exp() * l + tau * q;
                b = (b + tau * q) / (1.0 - tau * mu);
            }
            el += (l - exact).powi(2);
            eb += (b - exact).powi(2);
        }
    }
    (el.sqrt() / d as f64, eb.sqrt() / d as f64)
}

fn criterion_10(h: &Heat, cfg: &ExpmvConfig) -> Check {
    let mut c = Check::new();
    let kcfg = KpikConfig::default();
    let uni = Heat::from_spec(ProblemSpec::heat_dle(HEAT_DTIL).with_entries(Entries::Uniform));
    c.note("uniform (0, 1] entries for Q and X0 factors");
    for k in 4..=9 {
        let n = 1usize << k;
        let lie = solve_dle(&uni.p, DleMethod::Lie, 14, n, cfg).unwrap();
        let e_lie = uni.error(&lie.state.to_dense());
        let be = solve_be_kpik(&uni.p, n, &kcfg).unwrap();
        let e_be = uni.error(&be.state.to_dense());
        c.require(
            e_lie <= e_be,
            format!(
                "nsteps {n:3}: lie {e_lie:.3e} ({:.2}s) <= be-kpik {e_be:.3e} ({:.2}s, rank {})",
                lie.timings.total,
                be.timings.total,
                be.state.rank()
            ),
        );
    }
    for n in [16, 512] {
        let (l, b) = modal_lie_be(&h.p, n);
        c.note(format!(
            "standard normal entries, full rank, nsteps {n}: lie {l:.3e} vs backward Euler {b:.3e} (recorded)"
        ));
    }
    c
}

/// `G(t) = d/dt [(U₀ + tX) S₀ (V₀ + tW)ᵀ]`, independent of `Y`.
struct RankPath {
    u0: DenseMatrix,
    v0: DenseMatrix,
    x: DenseMatrix,
    w: DenseMatrix,
    s0: DenseMatrix,
}

impl RankPath {
    fn at(&self, t: f64) -> DenseMatrix {
        (&self.u0 + &self.x * t) * &self.s0 * (&self.v0 + &self.w * t).transpose()
    }
}

impl Nonlinearity for RankPath {
    fn dim(&self) -> usize {
        self.u0.nrows()
    }

    fn apply(&self, t: f64, _: &Outer<'_>, m: &DenseMatrix) -> DenseMatrix {
        let vt = &self.v0 + &self.w * t;
        &self.x * (&self.s0 * vt.tr_mul(m)) + (&self.u0 + &self.x * t) * (&self.s0 * self.w.tr_mul(m))
    }

    fn apply_transpose(&self, t: f64, _: &Outer<'_>, m: &DenseMatrix) -> DenseMatrix {
        let ut = &self.u0 + &self.x * t;
        (&self.v0 + &self.w * t) * (self.s0.transpose() * self.x.tr_mul(m))
            + &self.w * (self.s0.transpose() * ut.tr_mul(m))
    }
}

fn criterion_11() -> Check {
    let mut c = Check::new();
    let cfg = ExpmvConfig::default();

    for (name, a) in [
        ("heat", build_heat_operator(&GridSpec::new(HEAT_DTIL).unwrap())),
        ("diffadv", build_diffadv_operator(&GridSpec::new(HEAT_DTIL).unwrap())),
    ] {
        let u = random_factor(a.dim(), 5, 80);
        let mut worst = 0.0_f64;
        for tau in [1e-4, 1e-3, 1e-2] {
            let exact = expm_dense(&(a.to_dense() * tau)).unwrap() * &u;
            let got = expm_action(&a, tau, &u, &cfg).unwrap();
            worst = worst.max((got - &exact).norm() / u.norm());
        }
        c.require(
            worst <= EXPMV_DENSE_TOL,
            format!("expm_action {name} d=400 vs dense {worst:.2e} <= {EXPMV_DENSE_TOL:e}"),
        );
    }

    // 100 seeded instances, d = 50, ranks 1..=5: a rank-r path with G
    // depending on t, and a constant G inside the range of Y0.
    let (d, tau) = (50, 0.05);
    let (mut worst_path, mut worst_const) = (0.0_f64, 0.0_f64);
    for inst in 0..KSL_INSTANCES {
        let r = 1 + inst % 5;
        let seed = 1000 + 10 * inst as u64;
        let sigma: Vec<f64> = (0..r).map(|k| (r - k) as f64).collect();
        let path = RankPath {
            u0: random_factor(d, r, seed),
            v0: random_factor(d, r, seed + 1),
            x: random_factor(d, r, seed + 2),
            w: random_factor(d, r, seed + 3),
            s0: DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(sigma)),
        };
        let y0 = lrsplit::matcore::svd_truncate(&path.at(0.0), r).unwrap();
        let exact = path.at(tau);
        let g = NonlinearityDescriptor::Custom(Arc::new(path));
        let y1 = ksl_step(&g, &y0, 0.0, tau, InnerScheme::Rk4 { substeps: 1 }).unwrap();
        worst_path = worst_path.max((y1.to_dense() - &exact).norm() / exact.norm());

        let core = random_factor(r, r, seed + 4);
        let gc = lrsplit::matcore::svd_truncate(&(&y0.u * core * y0.v.transpose()), r).unwrap();
        let exact = y0.to_dense() + gc.to_dense() * tau;
        let y1 = ksl_step(
            &NonlinearityDescriptor::Constant(gc),
            &y0,
            0.0,
            tau,
            InnerScheme::ExactAffine,
        )
        .unwrap();
        worst_const = worst_const.max((y1.to_dense() - &exact).norm() / exact.norm());
    }
    c.require(
        worst_path <= KSL_EXACT_TOL,
        format!(
            "projector splitting on rank-r paths, {KSL_INSTANCES} instances: {worst_path:.2e} <= {KSL_EXACT_TOL:e}"
        ),
    );
    c.require(
        worst_const <= KSL_EXACT_TOL,
        format!("projector splitting, constant G in range, {KSL_INSTANCES} instances: {worst_const:.2e} <= {KSL_EXACT_TOL:e}"),
    );

    let (mut lemma, mut asym) = (0.0_f64, 0.0_f64);
    for seed in 0..20u64 {
        let ya = random_psd_lowrank(40, 6, 85 + 2 * seed).unwrap();
        let q = random_psd_lowrank(40, 3, 86 + 2 * seed).unwrap();
        let y = symmetric_ksl_step(&q, None, &ya, 0.1, InnerScheme::ExactAffine).unwrap();
        let p1 = &y.u * y.u.transpose();
        let expect = &p1 * (ya.to_dense() + q.to_dense() * 0.1) * &p1;
        lemma = lemma.max((y.to_dense() - &expect).norm() / expect.norm());
        asym = asym.max((&y.s - y.s.transpose()).norm() / y.s.norm());
    }
    c.require(
        lemma <= LEMMA_TOL,
        format!("S1 = U1^T (Ya + tau Q) U1, 20 instances: {lemma:.2e} <= {LEMMA_TOL:e}"),
    );
    c.require(
        asym <= LEMMA_TOL,
        format!("S1 symmetric before symmetrization: {asym:.2e}"),
    );

    scalar_examples(&mut c);
    c
}

fn scalar_examples(c: &mut Check) {
    let one = DenseMatrix::from_element(1, 1, 1.0);
    let decay = |_: f64, m: &DenseMatrix| -m;
    let m = inner_ode_solve(&decay, &one, 0.0, 0.1, InnerScheme::Rk4 { substeps: 1 }).unwrap()[(0, 0)];
    c.require(
        (m - 0.904837).abs() <= 1e-6,
        format!("RK4 decay one step {m:.7} vs 0.904837"),
    );

    let logistic = |_: f64, m: &DenseMatrix| m.map(|x| 1.0 - x * x);
    let zero = DenseMatrix::zeros(1, 1);
    let m1 = inner_ode_solve(&logistic, &zero, 0.0, 0.5, InnerScheme::Rk4 { substeps: 1 }).unwrap()[(0, 0)];
    let m4 = inner_ode_solve(&logistic, &zero, 0.0, 0.5, InnerScheme::Rk4 { substeps: 4 }).unwrap()[(0, 0)];
    let th = 0.5f64.tanh();
    c.note(format!(
        "RK4 logistic, one step: {m1:.7}, error {:.2e}",
        (m1 - th).abs()
    ));
    c.require(
        (m4 - th).abs() <= 1e-5,
        format!("RK4 logistic, four substeps: {m4:.7} vs tanh(0.5) {th:.7}"),
    );

    let p = scalar_dle(-1.0, 2.0, 0.0, 0.5);
    let lie = solve_dle(&p, DleMethod::Lie, 1, 10, &ExpmvConfig::default())
        .unwrap()
        .state
        .to_dense()[(0, 0)];
    let exact = scalar_exact(-1.0, 2.0, 0.0, 0.5);
    c.require(
        (lie - exact).abs() <= 0.02,
        format!(
            "scalar Lie, 10 steps: {lie:.6} vs {exact:.6}, error {:.4} <= 0.02",
            (lie - exact).abs()
        ),
    );

    let p = scalar_dle(-1.0, 2.0, 0.0, 0.1);
    let strang = solve_dle(&p, DleMethod::Strang, 1, 1, &ExpmvConfig::default())
        .unwrap()
        .state
        .to_dense()[(0, 0)];
    let exact = scalar_exact(-1.0, 2.0, 0.0, 0.1);
    c.require(
        (strang - exact).abs() <= 1e-3,
        format!(
            "scalar Strang, one step: {strang:.6} vs {exact:.6}, error {:.2e} <= 1e-3",
            (strang - exact).abs()
        ),
    );

    let a = SparseOperator::zeros(1);
    let x0 = SymLowRank::zeros(1, 1);
    let dre = DreProblem::new(a, one.clone(), one.clone(), x0, 0.0, 5.0).unwrap();
    let opts = DreOptions {
        inner: InnerScheme::Rk4 { substeps: 1 },
        symmetrize: false,
    };
    let x5 = solve_dre(&dre, DreMethod::Lie, 1, 500, &ExpmvConfig::default(), &opts)
        .unwrap()
        .state
        .to_dense()[(0, 0)];
    c.require(
        (x5 - 5f64.tanh()).abs() <= 1e-5,
        format!("scalar Riccati to T=5: {x5:.6} vs tanh(5) {:.6}", 5f64.tanh()),
    );

    let ode = |_: f64, m: &DenseMatrix| -m;
    let e1 = dopri5_dense(&ode, &one, 0.0, 1.0, &Dopri5Options::default()).unwrap()[(0, 0)];
    c.require(
        (e1 - (-1f64).exp()).abs() <= 1e-9,
        format!("DOPRI5 decay to T=1: {e1:.12}"),
    );

    let mut x = DenseMatrix::zeros(1, 1);
    let a1 = DenseMatrix::from_element(1, 1, -1.0);
    let q1 = DenseMatrix::from_element(1, 1, 2.0);
    for _ in 0..10 {
        x = be_dense_dle_step(&a1, &q1, &x, 0.05).unwrap();
    }
    let p = scalar_dle(-1.0, 2.0, 0.0, 0.5);
    let be = solve_be_kpik(&p, 10, &KpikConfig::default()).unwrap().state.to_dense()[(0, 0)];
    let recurrence = 1.0 - (1.0f64 / 1.1).powi(10);
    c.require(
        (be - recurrence).abs() <= 1e-12 && (x[(0, 0)] - recurrence).abs() <= 1e-12,
        format!("backward Euler recurrence {be:.10}"),
    );
    c.require(
        (be - 0.61529).abs() <= 1e-5,
        format!("backward Euler 10 steps {be:.5} vs stated 0.61529"),
    );

    let e = expm_action(
        &SparseOperator::from_triplets(2, &[(0, 0, -1.0), (1, 1, -2.0)]).unwrap(),
        1.0,
        &DenseMatrix::identity(2, 2),
        &ExpmvConfig::default(),
    )
    .unwrap();
    c.require(
        (e[(0, 0)] - 0.367879).abs() <= 1e-6 && (e[(1, 1)] - 0.135335).abs() <= 1e-6,
        format!("exp(diag(-1,-2)) = diag({:.6}, {:.6})", e[(0, 0)], e[(1, 1)]),
    );

    let ale = kpik_ale_solve(
        &SparseOperator::identity(4).scale_shift(-1.0, 0.0),
        &DenseMatrix::from_fn(4, 1, |i, _| if i == 0 { 1.0 } else { 0.0 }),
        &KpikConfig::default(),
    )
    .unwrap();
    c.require(
        (ale.to_dense()[(0, 0)] - 0.5).abs() <= 1e-14,
        "K-PIK with A = -I, B = e1 gives X = e1 e1^T / 2",
    );

    let x2 = kron_lyap_solve(&(-DenseMatrix::identity(2, 2)), &(DenseMatrix::identity(2, 2) * 2.0)).unwrap();
    c.require(
        (x2 - DenseMatrix::identity(2, 2)).norm() <= 1e-14,
        "Kronecker ALE with A = -I, C = 2I gives X = I",
    );

    let step = |z: &LowRankFactor, tau: f64| -> lrsplit::Result<LowRankFactor> {
        Ok(LowRankFactor::new(&z.z * (1.0 / (1.0 + 2.0 * tau)).sqrt()))
    };
    let z = richardson2(&step, &LowRankFactor::new(one.clone()), 0.1, RichardsonMode::Factors).unwrap();
    c.note(format!(
        "richardson2 on the homogeneous scalar recurrence: {:.8}",
        z.to_dense()[(0, 0)]
    ));
}

type Criterion = fn(&mut Ctx) -> Check;

struct Ctx {
    heat: Option<Heat>,
    defects: Option<Defects>,
    cfg: ExpmvConfig,
}

impl Ctx {
    fn defects(&mut self) -> &Defects {
        if self.defects.is_none() {
            let cfg = self.cfg;
            let d = defect_sweep(heat(&mut self.heat), &cfg);
            self.defects = Some(d);
        }
        self.defects.as_ref().unwrap()
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, Criterion); 11] = [
        (1, |x| criterion_1(x.defects())),
        (2, |x| criterion_2(x.defects())),
        (3, |x| criterion_3(x.defects())),
        (4, |x| {
            let cfg = x.cfg;
            criterion_4(heat(&mut x.heat), &cfg)
        }),
        (5, |x| {
            let cfg = x.cfg;
            criterion_5(heat(&mut x.heat), &cfg)
        }),
        (6, |x| criterion_6(&x.cfg)),
        (7, |x| criterion_7(&x.cfg)),
        (8, |_| criterion_8()),
        (9, |_| criterion_9()),
        (10, |x| {
            let cfg = x.cfg;
            criterion_10(heat(&mut x.heat), &cfg)
        }),
        (11, |_| criterion_11()),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut ctx = Ctx {
        heat: None,
        defects: None,
        cfg: ExpmvConfig::default(),
    };
    let mut failed = 0;
    for (id, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let clock = Instant::now();
        let check = run(&mut ctx);
        for line in &check.notes {
            println!("  [{id}] {line}");
        }
        println!(
            "CRITERION {id}: {} ({:.1}s)",
            if check.pass { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64()
        );
        failed += usize::from(!check.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
