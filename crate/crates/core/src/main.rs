use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lrsplit::experiments::{
    evaluate, reference_solution, rows_to_csv, run_compare, run_convergence, run_method, ExperimentPlan, MethodId,
    ReferenceSpec, ResultRow, SweepResult,
};
use lrsplit::io::format_c_exp;
use lrsplit::problems::{Entries, EquationKind, LowRankSpec, ProblemSpec};
use lrsplit::report::SolveReport;
use lrsplit::Result;

#[derive(Parser)]
#[command(
    name = "lrsplit",
    version,
    about = "Low-rank splitting for differential Lyapunov and Riccati equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a Lyapunov problem once (default: heat equation, d = 400).
    SolveDle(RunArgs),
    /// Integrate a Riccati problem once (default: LQR problem, d = 400).
    SolveDre(RunArgs),
    /// Error against a reference over every rank and step count.
    BenchConvergence(RunArgs),
    /// Splitting against backward Euler with K-PIK at matched step counts.
    BenchCompare(RunArgs),
    /// Symmetry and PSD defects of the symmetric and non-symmetric Lie splittings.
    Defects(RunArgs),
    /// Write a preset problem document.
    GenProblem(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Problem document (JSON); a preset is used when absent.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    method: Vec<MethodId>,
    /// Comma-separated ranks.
    #[arg(long, value_delimiter = ',')]
    rank: Vec<usize>,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',')]
    nsteps: Vec<usize>,
    /// K-PIK residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// K-PIK eigenvalue truncation.
    #[arg(long)]
    toly: Option<f64>,
    /// Replaces the seeds of random Q and X0 (X0 gets seed + 1).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `dopri5`, `modal` or a reference binary.
    #[arg(long)]
    reference: Option<ReferenceSpec>,
    /// Worker threads for sweeps.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Heat,
    Lqr,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntryDist {
    Normal,
    Uniform,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "heat")]
    preset: Preset,
    /// Grid points per dimension; the dimension is dtil².
    #[arg(long, default_value_t = 20)]
    dtil: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Distribution of the random Q and X0 factor entries.
    #[arg(long, value_enum, default_value = "normal")]
    entries: EntryDist,
    /// Output directory for problem.json; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn reseed(spec: &mut ProblemSpec, seed: u64) {
    if let LowRankSpec::Random { seed: s, .. } = &mut spec.q {
        *s = seed;
    }
    if let LowRankSpec::Random { seed: s, .. } = &mut spec.x0 {
        *s = seed + 1;
    }
}

fn load_problem(args: &RunArgs, preset: ProblemSpec) -> Result<ProblemSpec> {
    let mut spec = match &args.problem {
        Some(path) => ProblemSpec::from_json(&fs::read_to_string(path)?)?,
        None => preset,
    };
    if let Some(seed) = args.seed {
        reseed(&mut spec, seed);
    }
    if let Some(tol) = args.tol {
        spec.solver.tol = tol;
    }
    if let Some(toly) = args.toly {
        spec.solver.toly = toly;
    }
    Ok(spec)
}

fn plan_of(
    args: &RunArgs,
    spec: ProblemSpec,
    methods: &[MethodId],
    ranks: &[usize],
    nsteps: &[usize],
) -> ExperimentPlan {
    let pick = |given: &[usize], default: &[usize]| {
        if given.is_empty() {
            default.to_vec()
        } else {
            given.to_vec()
        }
    };
    let methods = if args.method.is_empty() {
        methods.to_vec()
    } else {
        args.method.clone()
    };
    let mut plan = ExperimentPlan::new(spec, methods, pick(&args.rank, ranks), pick(&args.nsteps, nsteps));
    plan.reference = args.reference.clone().unwrap_or_default();
    plan.out_dir = args.out.clone();
    plan.workers = args.workers;
    plan
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

fn series_csv(r: &SolveReport) -> String {
    let mut s = String::from("step,t,rank,fro_norm,asymmetry,psd_distance\n");
    for i in 0..r.grid.len() {
        s.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            format_c_exp(r.grid[i]),
            r.ranks[i],
            format_c_exp(r.fro_norm[i]),
            format_c_exp(r.asymmetry[i]),
            format_c_exp(r.psd_distance[i])
        ));
    }
    s
}

fn solve(args: &RunArgs, equation: EquationKind) -> Result<()> {
    let preset = match equation {
        EquationKind::Lyapunov => ProblemSpec::heat_dle(20),
        EquationKind::Riccati => ProblemSpec::lqr_dre(20),
    };
    let spec = load_problem(args, preset)?;
    if spec.equation != equation {
        return Err(lrsplit::Error::InvalidProblem(format!(
            "expected a {equation:?} problem"
        )));
    }
    let method = match args.method.first() {
        Some(m) => *m,
        None => spec.solver.method.parse()?,
    };
    let rank = args.rank.first().copied().unwrap_or(spec.solver.rank);
    let nsteps = args.nsteps.first().copied().unwrap_or(spec.solver.nsteps);
    let built = spec.build()?;

    let clock = Instant::now();
    let report = run_method(&built, &spec.solver, method, rank, nsteps)?;
    let seconds = clock.elapsed().as_secs_f64();

    let row = match &args.reference {
        Some(r) => {
            let x = reference_solution(&spec, &built, r, args.out.as_deref())?;
            let norm = x.norm();
            evaluate(
                method,
                rank,
                nsteps,
                Ok(report.clone()),
                &x,
                if norm > 0.0 { norm } else { 1.0 },
                seconds,
            )
        }
        None => {
            let norm = report.fro_norm.last().copied().filter(|n| *n > 0.0).unwrap_or(1.0);
            ResultRow {
                method: method.name().into(),
                rank,
                nsteps,
                tau: report.tau,
                error: f64::NAN,
                d_sym: report.d_sym(norm),
                d_psd: report.d_psd(norm),
                final_rank: report.state.rank(),
                seconds,
                status: "ok".into(),
            }
        }
    };
    print!("{}", rows_to_csv(std::slice::from_ref(&row)));

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), rows_to_csv(std::slice::from_ref(&row)))?;
        fs::write(dir.join("series.csv"), series_csv(&report))?;
        let doc = serde_json::json!({ "problem": spec, "row": row, "report": report });
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(())
}

fn summarize(result: &SweepResult) {
    print!("{}", rows_to_csv(&result.rows));
    for o in &result.orders {
        let fmt = |f: Option<lrsplit::experiments::OrderFit>| {
            f.map_or("-".to_string(), |f| format!("{:.3} ({} pts)", f.order, f.points))
        };
        println!(
            "# order {} r={}: ratio rule {}, above floor {}",
            o.method,
            o.rank,
            fmt(o.fit),
            fmt(o.floor_fit)
        );
    }
}

fn defects(args: &RunArgs) -> Result<()> {
    let spec = load_problem(args, ProblemSpec::heat_dle(20))?;
    let plan = plan_of(
        args,
        spec,
        &[MethodId::Lie, MethodId::NonsymLie],
        &[2, 4, 6, 8, 10, 12, 14],
        &[2, 16, 128, 2048],
    );
    let result = run_convergence(&plan)?;
    println!("method,rank,nsteps,d_sym,d_psd");
    for r in &result.rows {
        println!(
            "{},{},{},{},{}",
            r.method,
            r.rank,
            r.nsteps,
            format_c_exp(r.d_sym),
            format_c_exp(r.d_psd)
        );
    }
    for m in &plan.methods {
        let worst = |f: fn(&ResultRow) -> f64| {
            result
                .rows
                .iter()
                .filter(|r| r.method == m.name())
                .map(f)
                .fold(0.0, f64::max)
        };
        println!(
            "# {m}: max d_sym {:.3e}, max d_psd {:.3e}",
            worst(|r| r.d_sym),
            worst(|r| r.d_psd)
        );
    }
    Ok(())
}

fn gen_problem(args: &GenArgs) -> Result<()> {
    let mut spec = match args.preset {
        Preset::Heat => ProblemSpec::heat_dle(args.dtil),
        Preset::Lqr => ProblemSpec::lqr_dre(args.dtil),
    };
    if let Some(seed) = args.seed {
        reseed(&mut spec, seed);
    }
    if let Some(t) = args.t_end {
        spec.t_end = t;
    }
    spec = spec.with_entries(match args.entries {
        EntryDist::Normal => Entries::Normal,
        EntryDist::Uniform => Entries::Uniform,
    });
    spec.build_operator()?;
    let text = spec.to_json();
    match &args.out {
        Some(dir) => write_into(dir, "problem.json", &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_into(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveDle(a) => solve(&a, EquationKind::Lyapunov),
        Command::SolveDre(a) => solve(&a, EquationKind::Riccati),
        Command::BenchConvergence(a) => {
            let spec = load_problem(&a, ProblemSpec::heat_dle(20))?;
            let plan = plan_of(
                &a,
                spec,
                &[MethodId::Lie, MethodId::Strang],
                &[14],
                &powers_of_two(1, 10),
            );
            summarize(&run_convergence(&plan)?);
            Ok(())
        }
        Command::BenchCompare(a) => {
            let spec = load_problem(&a, ProblemSpec::heat_dle(20))?;
            let plan = plan_of(
                &a,
                spec,
                &[MethodId::Lie, MethodId::BeKpik],
                &[14],
                &powers_of_two(4, 9),
            );
            summarize(&run_compare(&plan)?);
            Ok(())
        }
        Command::Defects(a) => defects(&a),
        Command::GenProblem(a) => gen_problem(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
