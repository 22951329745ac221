//! Command-line front end for the bilevel SVC hyperparameter solvers.
//!
//! `run` maps argv to an exit code: 0 on success, 1 for usage errors (bad
//! flags, unreadable or malformed input), 2 when a solver fails.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use grlpn_core::lpnewton::build_subproblem;
use grlpn_core::lpsolve::{LpBackend, LpOptions};
use grlpn_core::mpec::mfcq_diagnostic;
use grlpn_core::report::{features_svg, table_markdown, TableRow};
use grlpn_core::residual::{eval_residual, jacobian, select_active};
use grlpn_core::{
    assemble, augment_bias, grid_search, kfold_split, parse_libsvm, solve, solve_inlp, CvSplit,
    Dataset, EpsilonMode, GridConfig, MpecProblem, SolverConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "grlpn",
    version,
    about = "Bilevel hyperparameter selection for linear SVC"
)]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Full relaxation schedule (GRLPN).
    #[command(allow_negative_numbers = true)]
    Solve(SolveArgs),
    /// One relaxed solve at a fixed tau.
    #[command(allow_negative_numbers = true)]
    Inlp(InlpArgs),
    /// Exhaustive grid over C and the feature bounds.
    #[command(allow_negative_numbers = true)]
    Grid(GridArgs),
    /// Constraint-qualification diagnostic at a given point.
    #[command(allow_negative_numbers = true)]
    CheckMfcq(CheckArgs),
    /// Assemble the MPEC and write it to disk.
    #[command(allow_negative_numbers = true)]
    DumpProblem(DumpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// LIBSVM-format data file.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of folds K.
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Cross-validation set size; the remaining points form the test set.
    /// Defaults to the largest multiple of K not exceeding the data size.
    #[arg(long)]
    pub cv_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Assign folds without balancing the classes.
    #[arg(long)]
    pub no_stratify: bool,
    /// The file already ends every record with a constant 1 feature.
    #[arg(long)]
    pub pre_augmented: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EpsArg {
    Constant,
    Theory,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.1)]
    pub tau0: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tau_min: f64,
    /// Relaxation decrease factor.
    #[arg(long, default_value_t = 0.1)]
    pub sigma2: f64,
    /// Armijo constant of the inner line search.
    #[arg(long, default_value_t = 1e-2)]
    pub sigma1: f64,
    /// Backtracking factor.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Inner stopping tolerance.
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = EpsArg::Constant)]
    pub eps_mode: EpsArg,
    #[arg(long, default_value_t = 1e-3)]
    pub vio_stop: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub c_lb: f64,
    #[arg(long, default_value_t = 1e4)]
    pub c_ub: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub wbar_lb: f64,
    #[arg(long, default_value_t = 1.5)]
    pub wbar_ub: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 500)]
    pub max_inner: usize,
    /// Start from the plain QP multipliers instead of the fitted ones.
    #[arg(long)]
    pub no_fit_multipliers: bool,
    /// Force an LP backend (auto, dense, sparse).
    #[arg(long, default_value = "auto")]
    pub lp_backend: String,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for report.json, trace.csv, features.svg and table.md.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write every inner iteration to inner_trace.csv.
    #[arg(long)]
    pub trace: bool,
    /// Write the assembled problem to this file.
    #[arg(long)]
    pub dump_problem: Option<PathBuf>,
    /// Write the first LP-Newton subproblem in LP text format to this file.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InlpArgs {
    /// Fixed relaxation parameter.
    #[arg(long, default_value_t = 1e-4)]
    pub tau: f64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Candidate values of C.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4])]
    pub c_grid: Vec<f64>,
    /// Candidate bound levels for each non-bias feature.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.75, 1.5])]
    pub levels: Vec<f64>,
    /// Bound for the bias column; ignored when the bias is gridded.
    #[arg(long, default_value_t = 1.5)]
    pub bias_level: f64,
    /// Grid the bias bound like any other feature.
    #[arg(long)]
    pub grid_bias: bool,
    /// Refuse grids with more cells than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u128,
    /// Worker threads for grid cells.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Problem file written by dump-problem.
    #[arg(long)]
    pub problem: PathBuf,
    /// JSON point: either an array or a report with a `v_opt` field.
    #[arg(long)]
    pub point: PathBuf,
    /// Activity tolerance for the index sets.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Also write the result to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Destination of the problem dump.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the first LP-Newton subproblem in LP text format.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
}

/// Failure classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Solver(_) => EXIT_SOLVER,
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

/// Core errors caused by the input are usage errors; the rest are solver failures.
fn classify(e: grlpn_core::Error) -> Failure {
    use grlpn_core::Error as E;
    match e {
        E::Parse { .. }
        | E::NoRecords
        | E::Label(_)
        | E::Split(_)
        | E::Dimension(_)
        | E::Config(_)
        | E::GridBudget { .. }
        | E::EmptyTestSet
        | E::Json(_) => Failure::Usage(e.into()),
        _ => Failure::Solver(e.into()),
    }
}

impl SolverArgs {
    pub fn to_config(&self, seed: u64) -> Outcome<SolverConfig> {
        let backend = match self.lp_backend.as_str() {
            "auto" => LpBackend::Auto,
            "dense" => LpBackend::Dense,
            "sparse" => LpBackend::Sparse,
            other => return Err(usage(anyhow!("unknown LP backend '{other}'"))),
        };
        let mut cfg = SolverConfig {
            tau0: self.tau0,
            tau_min: self.tau_min,
            sigma2: self.sigma2,
            sigma1: self.sigma1,
            theta: self.theta,
            eps_inner: self.eps,
            eps_mode: match self.eps_mode {
                EpsArg::Constant => EpsilonMode::Constant,
                EpsArg::Theory => EpsilonMode::Theory,
            },
            vio_stop: self.vio_stop,
            c_lb: self.c_lb,
            c_ub: self.c_ub,
            wbar_lb: self.wbar_lb,
            wbar_ub: self.wbar_ub,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            seed,
            lp: LpOptions {
                backend,
                ..LpOptions::default()
            },
            ..SolverConfig::default()
        };
        cfg.init.fit_multipliers = !self.no_fit_multipliers;
        cfg.validate().map_err(classify)?;
        Ok(cfg)
    }
}

/// Loaded data with its split and a short name for tables.
pub struct Instance {
    pub name: String,
    pub data: Dataset,
    pub split: CvSplit,
}

impl DataArgs {
    pub fn load(&self) -> Outcome<Instance> {
        let file = fs::File::open(&self.data)
            .with_context(|| format!("cannot open data file {}", self.data.display()))
            .map_err(usage)?;
        let raw = parse_libsvm(std::io::BufReader::new(file), None).map_err(classify)?;
        let data = if self.pre_augmented {
            raw.into_pre_augmented().map_err(classify)?
        } else {
            augment_bias(&raw)
        };
        if self.folds < 2 {
            return Err(usage(anyhow!("--folds must be at least 2")));
        }
        let l1 = self.cv_size.unwrap_or(data.len() / self.folds * self.folds);
        let split =
            kfold_split(&data, self.folds, l1, self.seed, !self.no_stratify).map_err(classify)?;
        let name = self
            .data
            .file_stem()
            .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
        Ok(Instance { name, data, split })
    }
}

/// Prints to stdout, ignoring a closed pipe.
fn say(text: &str) {
    use std::io::Write as _;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(usage)?;
    }
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(usage)
}

fn dump_first_lp(p: &MpecProblem, cfg: &SolverConfig, tau: f64, path: &Path) -> Outcome<()> {
    let (z, _) = grlpn_core::grlpn::initialize(p, cfg, tau).map_err(classify)?;
    let m = &p.affine;
    let f = eval_residual(m, &z, tau).map_err(classify)?;
    let sel = select_active(m, &z).map_err(classify)?;
    let jac = jacobian(m, &z, &sel).map_err(classify)?;
    let (lp, _) = build_subproblem(m, &z, &f, &jac).map_err(classify)?;
    write(path, &lp.to_lp_format())
}

fn run_relaxation(
    inst: &Instance,
    cfg: &SolverConfig,
    out: &OutputArgs,
    tau: Option<f64>,
) -> Outcome<()> {
    let p =
        assemble(&inst.split, &inst.data, &cfg.bounds(inst.data.n_features)).map_err(classify)?;
    if let Some(path) = &out.dump_problem {
        write(path, &p.dump())?;
    }
    if let Some(path) = &out.dump_lp {
        dump_first_lp(&p, cfg, tau.unwrap_or(cfg.tau0), path)?;
    }
    let report = match tau {
        None => solve(&p, &inst.data, &inst.split, cfg),
        Some(t) => solve_inlp(&p, &inst.data, &inst.split, cfg, t),
    }
    .map_err(classify)?;
    let json = report.to_json().map_err(classify)?;
    write(&out.out.join("report.json"), &json)?;
    write(&out.out.join("trace.csv"), &report.outer_trace_csv())?;
    write(
        &out.out.join("features.svg"),
        &features_svg(&report.w_bar, &report.w_refit),
    )?;
    write(
        &out.out.join("table.md"),
        &table_markdown(&[TableRow::from_solve(&inst.name, &report)]),
    )?;
    if out.trace {
        let mut csv = String::from("k,j,resid_inf,eta,m,delta,lp_pivots\n");
        for (k, steps) in report.inner_traces.iter().enumerate() {
            for s in steps {
                let m = s.m.map_or(String::new(), |m| m.to_string());
                csv.push_str(&format!(
                    "{k},{},{:e},{:e},{m},{:e},{}\n",
                    s.j, s.residual_norm, s.eta, s.delta, s.lp_pivots
                ));
            }
        }
        write(&out.out.join("inner_trace.csv"), &csv)?;
    }
    say(&format!(
        "{}: C = {:.6e}, vio = {:.3e}, E_C = {:.4}, E_t = {}, status = {:?}",
        report.method,
        report.c_scaled,
        report.vio,
        report.cv_error,
        report.test_error.map_or("-".into(), |e| format!("{e:.4}")),
        report.status
    ));
    Ok(())
}

fn run_grid(a: &GridArgs) -> Outcome<()> {
    if a.jobs == 0 {
        return Err(usage(anyhow!("--jobs must be at least 1")));
    }
    if a.c_grid.is_empty() || a.c_grid.iter().any(|c| !(*c > 0.0)) {
        return Err(usage(anyhow!("--c-grid values must be positive")));
    }
    if a.levels.is_empty() || a.levels.iter().any(|l| !(*l >= 0.0)) {
        return Err(usage(anyhow!("--levels must be nonnegative")));
    }
    let inst = a.data.load()?;
    let cfg = GridConfig {
        c_values: a.c_grid.clone(),
        wbar_levels: a.levels.clone(),
        bias_level: (!a.grid_bias).then_some(a.bias_level),
        budget: a.budget,
        jobs: a.jobs,
        ..GridConfig::default()
    };
    let r = grid_search(&inst.data, &inst.split, &cfg).map_err(classify)?;
    let json = serde_json::to_string_pretty(&r).map_err(usage)?;
    write(&a.out.join("report.json"), &json)?;
    write(
        &a.out.join("features.svg"),
        &features_svg(&r.w_bar, &r.w_refit),
    )?;
    write(
        &a.out.join("table.md"),
        &table_markdown(&[TableRow::from_grid(&inst.name, &r)]),
    )?;
    say(&format!(
        "GS: C = {:.6e}, E_C = {:.4}, E_t = {}, cells = {}",
        r.c_scaled,
        r.cv_error,
        r.test_error.map_or("-".into(), |e| format!("{e:.4}")),
        r.cells
    ));
    Ok(())
}

/// Reads a point from a bare JSON array or an object carrying `v_opt`.
pub fn read_point(text: &str) -> anyhow::Result<Vec<f64>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let arr = match &value {
        serde_json::Value::Object(o) => o
            .get("v_opt")
            .or_else(|| o.get("v"))
            .ok_or_else(|| anyhow!("point object has no v_opt field"))?,
        other => other,
    };
    Ok(serde_json::from_value(arr.clone())?)
}

fn run_check(a: &CheckArgs) -> Outcome<()> {
    let text = fs::read_to_string(&a.problem)
        .with_context(|| format!("cannot read {}", a.problem.display()))
        .map_err(usage)?;
    let p = MpecProblem::load(&text).map_err(classify)?;
    let pt = fs::read_to_string(&a.point)
        .with_context(|| format!("cannot read {}", a.point.display()))
        .map_err(usage)?;
    let v = read_point(&pt).map_err(usage)?;
    let r = mfcq_diagnostic(&p, &v, a.tol).map_err(classify)?;
    let json = serde_json::to_string_pretty(&r).map_err(usage)?;
    if let Some(path) = &a.out {
        write(path, &json)?;
    }
    say(&json);
    Ok(())
}

fn run_dump(a: &DumpArgs) -> Outcome<()> {
    let inst = a.data.load()?;
    let cfg = a.solver.to_config(a.data.seed)?;
    let p =
        assemble(&inst.split, &inst.data, &cfg.bounds(inst.data.n_features)).map_err(classify)?;
    write(&a.out, &p.dump())?;
    if let Some(path) = &a.dump_lp {
        dump_first_lp(&p, &cfg, cfg.tau0, path)?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        CliCommand::Solve(a) => {
            let cfg = a.solver.to_config(a.data.seed)?;
            let inst = a.data.load()?;
            run_relaxation(&inst, &cfg, &a.output, None)
        }
        CliCommand::Inlp(a) => {
            if !(a.tau > 0.0) {
                return Err(usage(anyhow!("--tau must be positive")));
            }
            let cfg = a.solver.to_config(a.data.seed)?;
            let inst = a.data.load()?;
            run_relaxation(&inst, &cfg, &a.output, Some(a.tau))
        }
        CliCommand::Grid(a) => run_grid(a),
        CliCommand::CheckMfcq(a) => run_check(a),
        CliCommand::DumpProblem(a) => run_dump(a),
    }
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log)
        .try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let e = match &f {
                Failure::Usage(e) | Failure::Solver(e) => e,
            };
            eprintln!("error: {e:#}");
            f.code()
        }
    }
}
