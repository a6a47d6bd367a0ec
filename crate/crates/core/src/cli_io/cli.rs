//! Command-line front end.

use super::dataset::read_dataset;
use super::mps::{export_model, read_model, sidecar_path, solve_by_enumeration};
use super::report::{Details, GapRecord, ReplicateRecord, RunReport, SparseVector};
use crate::error::{Error, Result};
use crate::experiments::{
    gap_instance, generate_scenario, replicate_rng, rsc_random_test, rsc_table, statistical_run, summarize, Method, RscOptions,
    Scenario, ScenarioKind, SummaryRow,
};
use crate::global_solver::{solve_global, SolveOptions, SolveStatus};
use crate::local_solvers::{lasso_cd, lla, nonconvex_cd, proximal_gradient, Init, LocalOptions};
use crate::model::{build_hinge_svm, build_lad, build_least_squares, build_quantile, ProblemInstance};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::reformulate::{build_mip, estimate_big_m};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_UNCERTIFIED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "fcgo", version, about = "Certified global solutions of SCAD/MCP penalized regression")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    #[arg(long, global = true, default_value = "scad")]
    pub penalty: PenaltyFamily,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Concavity parameter; 3.7 for SCAD and 2 for MCP when omitted.
    #[arg(long = "a", global = true)]
    pub a: Option<f64>,
    /// Relative optimality gap.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub gap_tol: f64,
    /// Seconds per global solve.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    #[arg(long, global = true)]
    pub node_limit: Option<usize>,
    #[arg(long, global = true)]
    pub box_c: Option<f64>,
    /// `auto` or a positive value.
    #[arg(long, global = true, default_value = "auto")]
    pub big_m: String,
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report (or exported model) path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Ls,
    Lad,
    Quantile,
    Hinge,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV design, one observation per row.
    #[arg(long)]
    pub x: PathBuf,
    /// CSV response, one value per row.
    #[arg(long)]
    pub y: PathBuf,
    /// Skip the first row of both files.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum, default_value = "ls")]
    pub loss: LossArg,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Comma-separated coefficient indices left unpenalized.
    #[arg(long, value_delimiter = ',')]
    pub unpenalized: Vec<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum LocalMethod {
    Lla,
    Cd,
    Gm,
    Lasso,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Zero,
    Random,
    Lasso,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Mps,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    S4,
    S52,
    S6,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::S4 => ScenarioKind::S4,
            ScenarioArg::S52 => ScenarioKind::S52,
            ScenarioArg::S6 => ScenarioKind::S6,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    #[arg(long, value_enum, default_value = "s6")]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Coefficients; 100 for S4 and S6, 20 for S52 when omitted.
    #[arg(long)]
    pub d: Option<usize>,
    /// Observations; 20 for S4, 10 for S52, 80 for S6 when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    /// AR correlation of the S4 design.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Certified global solve.
    Solve(DataArgs),
    /// Local solve.
    Local {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "lla")]
        method: LocalMethod,
        #[arg(long, value_enum, default_value = "zero")]
        init: InitArg,
        /// LASSO weight; nλ when omitted.
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Write the big-M model and a JSON sidecar to --out.
    Export {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "mps")]
        format: ExportFormat,
    },
    /// Solve an exported model by enumerating its binaries.
    SolveMps {
        #[arg(long)]
        mps: PathBuf,
    },
    /// Replicated simulation: global versus local objectives on S52, tuned estimators on S4 and S6.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
    },
    /// Random midpoint-convexity test on a dataset or on an S4 grid.
    RscTest {
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long)]
        header: bool,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5")]
        rhos: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "20,35")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 2)]
        k_test: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        /// Half-width of the sampling box for test points (default aλ).
        #[arg(long)]
        range: Option<f64>,
    },
    /// Table of AD, FP, FN, Gap and Time per method over replicates.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<Method>,
    },
}

impl GlobalArgs {
    pub fn a_value(&self) -> f64 {
        self.a.unwrap_or(match self.penalty {
            PenaltyFamily::Scad => 3.7,
            PenaltyFamily::Mcp => 2.0,
        })
    }

    fn spec(&self) -> Result<PenaltySpec> {
        let lambda = self.lambda.ok_or_else(|| Error::InvalidParameter("--lambda is required".into()))?;
        PenaltySpec::new(self.penalty, lambda, self.a_value())
    }

    fn big_m(&self) -> Result<Option<f64>> {
        match self.big_m.as_str() {
            "auto" => Ok(None),
            v => match v.parse::<f64>() {
                Ok(m) if m > 0.0 && m.is_finite() => Ok(Some(m)),
                _ => Err(Error::InvalidParameter(format!("--big-m must be auto or a positive number, got {v}"))),
            },
        }
    }

    pub fn solve_options(&self) -> Result<SolveOptions> {
        if !(self.gap_tol >= 0.0) {
            return Err(Error::InvalidParameter("--gap-tol must be nonnegative".into()));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidParameter("--time-limit must be positive".into()));
        }
        Ok(SolveOptions {
            gap_tol_rel: self.gap_tol,
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            threads: self.threads.max(1),
            seed: self.seed,
            big_m: self.big_m()?,
            ..Default::default()
        })
    }
}

fn build_instance(data: &DataArgs, g: &GlobalArgs) -> Result<ProblemInstance> {
    let (x, y) = read_dataset(&data.x, &data.y, data.header)?;
    let spec = g.spec()?;
    let inst = match data.loss {
        LossArg::Ls => build_least_squares(&x, &y, spec, g.box_c)?,
        LossArg::Lad => build_lad(&x, &y, spec, g.box_c)?,
        LossArg::Quantile => build_quantile(&x, &y, data.tau, spec, g.box_c)?,
        LossArg::Hinge => build_hinge_svm(&x, &y, spec, g.box_c)?,
    };
    if data.unpenalized.is_empty() {
        return Ok(inst);
    }
    let mut mask = inst.penalized.clone();
    for &i in &data.unpenalized {
        if i >= inst.beta_dim() {
            return Err(Error::InvalidParameter(format!("--unpenalized index {i} out of range")));
        }
        mask[i] = false;
    }
    inst.with_penalized(mask)
}

fn scenario_of(s: &ScenarioArgs, rep: usize, seed: u64) -> Scenario {
    let kind: ScenarioKind = s.scenario.into();
    let (d, n) = match kind {
        ScenarioKind::S4 => (100, 20),
        ScenarioKind::S52 => (20, 10),
        ScenarioKind::S6 => (100, 80),
    };
    let rep_seed = replicate_rng(seed, rep as u64).random();
    Scenario { kind, d: s.d.unwrap_or(d), n: s.n.unwrap_or(n), rho: s.rho, seed: rep_seed }
}

struct Outcome {
    report: RunReport,
    lines: Vec<String>,
    certified: bool,
}

fn fmt_beta(beta: &SparseVector) -> String {
    let parts: Vec<String> = beta.entries.iter().map(|(i, v)| format!("{i}:{v}")).collect();
    format!("beta {}", parts.join(" "))
}

fn solve_lines(r: &RunReport) -> Vec<String> {
    let mut l = vec![format!("status {}", r.status)];
    for (k, v) in [("objective", r.objective), ("lower_bound", r.lower_bound), ("gap", r.gap)] {
        if let Some(v) = v {
            l.push(format!("{k} {v}"));
        }
    }
    if let Some(n) = r.nodes {
        l.push(format!("nodes {n}"));
    }
    if let Some(b) = &r.beta {
        l.push(fmt_beta(b));
    }
    l
}

fn table(rows: &[SummaryRow]) -> Vec<String> {
    let mut out = vec![format!(
        "{:<12} {:>18} {:>14} {:>14} {:>18} {:>20} {:>5}",
        "method", "AD", "FP", "FN", "Gap(%)", "Time(ms)", "runs"
    )];
    let ms = |(m, s): (f64, f64)| format!("{m:.3} ({s:.3})");
    for r in rows {
        out.push(format!(
            "{:<12} {:>18} {:>14} {:>14} {:>18} {:>20} {:>5}",
            r.method.to_string(),
            ms(r.ad),
            ms(r.fp),
            ms(r.fn_),
            ms(r.gap_pct),
            ms(r.time_ms),
            r.runs
        ));
    }
    out
}

fn statistical(cmd: &[String], g: &GlobalArgs, s: &ScenarioArgs, methods: &[Method]) -> Result<Outcome> {
    let solve = g.solve_options()?;
    let mut replicates = vec![];
    let mut excluded = vec![];
    for rep in 0..s.reps {
        let sample = generate_scenario(&scenario_of(s, rep, g.seed))?;
        let run = statistical_run(&sample, g.penalty, g.a_value(), methods, &solve, g.box_c, rep, g.seed)?;
        // a global solve that did not certify its gap takes the replicate out of the table
        if run.runs.iter().any(|(r, _)| r.status.is_some_and(|st| st != SolveStatus::Certified)) {
            excluded.push(rep);
        }
        for (r, m) in run.runs {
            replicates.push(ReplicateRecord {
                rep,
                lambda: run.lambda,
                method: r.method,
                objective: r.objective,
                status: r.status,
                certified_gap: r.certified_gap,
                metrics: m,
            });
        }
    }
    let kept: Vec<(Method, crate::experiments::MetricsReport)> =
        replicates.iter().filter(|r| !excluded.contains(&r.rep)).map(|r| (r.method, r.metrics.clone())).collect();
    let summary = summarize(&kept);
    let mut lines = table(&summary);
    if !excluded.is_empty() {
        lines.push(format!("excluded replicates (uncertified global solve): {excluded:?}"));
    }
    let mut report = RunReport::new(cmd.to_vec(), g.seed, "Completed");
    report.details = Some(Details::Statistical { scenario: s.scenario.into(), replicates, summary, excluded });
    Ok(Outcome { report, lines, certified: true })
}

fn gap_simulation(cmd: &[String], g: &GlobalArgs, s: &ScenarioArgs) -> Result<Outcome> {
    let spec = match g.lambda {
        Some(_) => g.spec()?,
        None => PenaltySpec::new(g.penalty, if g.penalty == PenaltyFamily::Scad { 1.0 } else { 0.5 }, g.a_value())?,
    };
    let solve = g.solve_options()?;
    let mut records = vec![];
    let mut lines = vec![format!("{:>4} {:>14} {:>14} {:>10} {:>12}", "rep", "mipgo", "best_local", "status", "gap")];
    for rep in 0..s.reps {
        let sample = generate_scenario(&scenario_of(s, rep, g.seed))?;
        let gi = gap_instance(&sample, spec, &solve, rep, g.seed)?;
        let status = gi.mipgo.status.expect("global run has a status");
        lines.push(format!(
            "{rep:>4} {:>14.6} {:>14.6} {:>10} {:>12.3e}",
            gi.mipgo.objective,
            gi.best_local,
            status.to_string(),
            gi.mipgo.certified_gap.unwrap_or(f64::NAN)
        ));
        records.push(GapRecord {
            rep,
            mipgo_objective: gi.mipgo.objective,
            status,
            certified_gap: gi.mipgo.certified_gap.unwrap_or(0.0),
            best_local: gi.best_local,
            best_local_method: gi.best_local_method,
            time_ms: gi.mipgo.time_ms,
        });
    }
    let mut report = RunReport::new(cmd.to_vec(), g.seed, "Completed");
    report.details = Some(Details::Gap { scenario: s.scenario.into(), records });
    Ok(Outcome { report, lines, certified: true })
}

fn execute(cli: &Cli, cmd: &[String]) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve(data) => {
            let inst = build_instance(data, g)?;
            let r = solve_global(&inst, &g.solve_options()?)?;
            let report = RunReport::from_solve(cmd.to_vec(), g.seed, &inst, &r);
            Ok(Outcome { lines: solve_lines(&report), report, certified: r.status == SolveStatus::Certified })
        }
        Command::Local { data, method, init, omega } => {
            let inst = build_instance(data, g)?;
            let omega = omega.unwrap_or(inst.nf() * inst.penalty.lambda);
            let init_v = match init {
                InitArg::Zero => Init::Zero,
                InitArg::Random => Init::Random { seed: g.seed, lo: -10.0, hi: 10.0 },
                InitArg::Lasso => Init::Lasso { omega },
            };
            let opts = LocalOptions::with_init(init_v);
            let (beta, iterations) = match method {
                LocalMethod::Lla => {
                    let r = lla(&inst, &opts)?;
                    (r.beta, r.iterations)
                }
                LocalMethod::Cd => {
                    let r = nonconvex_cd(&inst, &opts)?;
                    (r.beta, r.iterations)
                }
                LocalMethod::Gm => {
                    let r = proximal_gradient(&inst, &opts)?;
                    (r.beta, r.iterations)
                }
                LocalMethod::Lasso => {
                    let design = match (&inst.kind, &inst.design) {
                        (crate::model::LossKind::LeastSquares, Some(d)) => d,
                        _ => return Err(Error::InvalidParameter("--method lasso needs --loss ls".into())),
                    };
                    let mask = inst.penalized.clone();
                    (lasso_cd(&design.x, &design.y, omega, Some(&mask), &LocalOptions::default())?, 0)
                }
            };
            let mut report = RunReport::new(cmd.to_vec(), g.seed, "Local");
            report.objective = Some(inst.objective(&beta));
            report.beta = Some(SparseVector::from_dense(&beta[..inst.beta_dim()]));
            report.instance_digest = Some(super::report::instance_digest(&inst));
            report.details = Some(Details::Local {
                method: format!("{method:?}").to_lowercase(),
                init: format!("{init:?}").to_lowercase(),
                iterations,
            });
            Ok(Outcome { lines: solve_lines(&report), report, certified: true })
        }
        Command::Export { data, format: ExportFormat::Mps } => {
            let path = g.out.clone().ok_or_else(|| Error::InvalidParameter("export needs --out PATH".into()))?;
            let inst = build_instance(data, g)?;
            let big_m = match g.big_m()? {
                Some(m) => m,
                None => estimate_big_m(&inst)?,
            };
            let mip = build_mip(&inst, big_m)?;
            let (p, side) = export_model(&mip, &path)?;
            let mut report = RunReport::new(cmd.to_vec(), g.seed, "Completed");
            report.instance_digest = Some(super::report::instance_digest(&inst));
            report.details = Some(Details::Export {
                mps: path.display().to_string(),
                sidecar: sidecar_path(&path).display().to_string(),
                columns: p.columns.len(),
                rows: p.rows.len(),
                binaries: p.num_integer(),
                objective_offset: side.objective_offset,
            });
            let lines = vec![
                format!("wrote {} ({} columns, {} rows, {} binaries)", path.display(), p.columns.len(), p.rows.len(), p.num_integer()),
                format!("wrote {}", sidecar_path(&path).display()),
            ];
            // the report goes to stdout only; --out names the model file
            Ok(Outcome { report, lines, certified: true })
        }
        Command::SolveMps { mps } => {
            let (p, side) = read_model(mps)?;
            let sol = solve_by_enumeration(&p)?;
            let mut report = RunReport::new(cmd.to_vec(), g.seed, "Certified");
            let value = side.reported_value(sol.objective);
            report.objective = Some(value);
            report.lower_bound = Some(value);
            report.gap = Some(0.0);
            report.nodes = Some(sol.leaves);
            report.beta = Some(SparseVector::from_dense(&side.beta(&sol.x)));
            report.details = Some(Details::Enumeration { leaves: sol.leaves, binaries: p.num_integer() });
            Ok(Outcome { lines: solve_lines(&report), report, certified: true })
        }
        Command::Simulate { scenario, methods } => match scenario.scenario {
            ScenarioArg::S52 if methods.is_empty() => gap_simulation(cmd, g, scenario),
            _ => {
                let methods = if methods.is_empty() { vec![Method::Mipgo, Method::LlaLasso, Method::Lasso, Method::Oracle] } else { methods.clone() };
                statistical(cmd, g, scenario, &methods)
            }
        },
        Command::Compare { scenario, methods } => statistical(cmd, g, scenario, methods),
        Command::RscTest { x, y, header, rhos, ns, d, instances, k_test, reps, range } => {
            let spec = match g.lambda {
                Some(_) => g.spec()?,
                None => PenaltySpec::new(g.penalty, 0.2, g.a_value())?,
            };
            let opts = RscOptions { k_test: *k_test, reps: *reps, range: *range, seed: g.seed, stop_early: false };
            let mut report = RunReport::new(cmd.to_vec(), g.seed, "Completed");
            let lines = match (x, y) {
                (Some(xp), Some(yp)) => {
                    let (xm, yv) = read_dataset(xp, yp, *header)?;
                    let o = rsc_random_test(&xm, &yv, &spec, &opts)?;
                    vec![format!("pass {} violations {} skipped {}", o.pass, o.violations, o.skipped)]
                }
                (None, None) => {
                    let cells = rsc_table(rhos, ns, *d, *instances, spec, &opts)?;
                    let l = cells.iter().map(|c| format!("rho {} n {} pass {:.1}%", c.rho, c.n, c.pass_pct())).collect();
                    report.details = Some(Details::Rsc { cells });
                    l
                }
                _ => return Err(Error::InvalidParameter("rsc-test needs both --x and --y or neither".into())),
            };
            Ok(Outcome { report, lines, certified: true })
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::SizeGuard(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cmd: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let start = Instant::now();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let out = pool.install(|| execute(&cli, &cmd));
    let mut out = match out {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    out.report.time_ms = start.elapsed().as_secs_f64() * 1e3;
    for l in &out.lines {
        println!("{l}");
    }
    let is_export = matches!(cli.command, Command::Export { .. });
    if let (Some(path), false) = (&cli.global.out, is_export) {
        if let Err(e) = out.report.write(path) {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
    }
    if out.certified {
        EXIT_OK
    } else {
        eprintln!("solver stopped at {} with gap {:.3e}", out.report.status, out.report.gap.unwrap_or(f64::NAN));
        EXIT_UNCERTIFIED
    }
}
