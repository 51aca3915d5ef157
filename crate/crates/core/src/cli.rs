//! Command-line harness: convergence studies written as CSV files, and a
//! randomized self-check of the LP solver.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::active_set::{multilevel_solve, ActiveSetError, LevelResult, MultilevelParams};
use crate::problems::{make_problem, multiplier_difference, multiplier_error, reference_cost, ProblemError};
use crate::transport::{solve_reduced, ActiveSet, TransportError, TransportSolution, DEFAULT_FULL_LP_CAP};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solve(#[from] ActiveSetError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("verification failed on instance {instance}: {reason}")]
    Verify { instance: usize, reason: String },
}

#[derive(Debug, Parser)]
#[command(name = "mlot", version, about = "Multilevel active-set solver for discretized optimal transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a benchmark problem over a range of levels and write CSV tables.
    Run(RunArgs),
    /// Solve random small instances and check their optimality certificates.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// ex1, ex2, ex3 or ex4.
    #[arg(long)]
    pub example: Option<String>,
    /// Cost exponent, c(x, y) = |x - y|^p / p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Level range `a:b`.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub theta_act: Option<f64>,
    #[arg(long)]
    pub c_opt: Option<f64>,
    #[arg(long)]
    pub auto_tune_theta: bool,
    #[arg(long)]
    pub max_tolerance_increases: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma separated subset of sizes,cost,multiplier,support,mesh.
    #[arg(long)]
    pub emit: Option<String>,
    #[arg(long)]
    pub full_lp_cap: Option<usize>,
    /// File with `key=value` lines; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    /// Largest number of rows and columns.
    #[arg(long, default_value_t = 6)]
    pub max_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Emit {
    pub sizes: bool,
    pub cost: bool,
    pub multiplier: bool,
    pub support: bool,
    pub mesh: bool,
}

impl Emit {
    pub fn parse(list: &str) -> Result<Self, CliError> {
        let mut e = Emit::default();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "sizes" => e.sizes = true,
                "cost" | "cost_error" => e.cost = true,
                "multiplier" | "multiplier_error" => e.multiplier = true,
                "support" => e.support = true,
                "mesh" => e.mesh = true,
                other => return Err(CliError::Config(format!("unknown emit item {other:?}"))),
            }
        }
        Ok(e)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub example: String,
    pub p: f64,
    pub level_min: u32,
    pub level_max: u32,
    pub params: MultilevelParams,
    pub out: PathBuf,
    pub emit: Emit,
}

pub fn parse_levels(s: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Config(format!("levels must look like a:b, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(CliError::Config(format!("empty level range {s}")));
    }
    Ok((a, b))
}

/// Reads `key=value` lines; blank lines and lines starting with `#` are
/// skipped. Keys may use `-` or `_`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

fn parsed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let mut file = match &args.config {
            Some(path) => parse_config_file(&fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let mut take = |key: &str| file.remove(key);

        let example_file = take("example");
        let example = args.example.clone().or(example_file).unwrap_or_else(|| "ex1".into());
        let p_file = take("p");
        let p = match (args.p, p_file) {
            (Some(p), _) => p,
            (None, Some(v)) => parsed("p", &v)?,
            (None, None) => 2.0,
        };
        let levels_file = take("levels");
        let levels = args.levels.clone().or(levels_file);
        let (level_min, level_max) = match levels {
            Some(l) => parse_levels(&l)?,
            None => (3, 5),
        };
        let mut params = MultilevelParams::with_levels(level_min, level_max);
        let theta_file = take("theta_act");
        if let Some(v) = args.theta_act.map(Ok).or_else(|| theta_file.map(|v| parsed("theta_act", &v))) {
            params.theta_act = v?;
        }
        let c_opt_file = take("c_opt");
        if let Some(v) = args.c_opt.map(Ok).or_else(|| c_opt_file.map(|v| parsed("c_opt", &v))) {
            params.c_opt = v?;
        }
        let increases_file = take("max_tolerance_increases");
        if let Some(v) = args
            .max_tolerance_increases
            .map(Ok)
            .or_else(|| increases_file.map(|v| parsed("max_tolerance_increases", &v)))
        {
            params.max_tolerance_increases = v?;
        }
        let cap_file = take("full_lp_cap");
        params.full_lp_cap = match (args.full_lp_cap, cap_file) {
            (Some(c), _) => c,
            (None, Some(v)) => parsed("full_lp_cap", &v)?,
            (None, None) => DEFAULT_FULL_LP_CAP,
        };
        let tune_file = take("auto_tune_theta").map(|v| parsed::<bool>("auto_tune_theta", &v)).transpose()?;
        params.auto_tune_theta = args.auto_tune_theta || tune_file.unwrap_or(false);

        let out_file = take("out");
        let out = args
            .out
            .clone()
            .or(out_file.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let emit_file = take("emit");
        let emit = Emit::parse(
            &args
                .emit
                .clone()
                .or(emit_file)
                .unwrap_or_else(|| "sizes,cost,multiplier".into()),
        )?;
        if let Some(key) = file.keys().next() {
            return Err(CliError::Config(format!("unknown key {key:?}")));
        }
        if !(p >= 1.0) {
            return Err(CliError::Config(format!("p must be at least 1, got {p}")));
        }
        params.validate()?;
        Ok(Self {
            example,
            p,
            level_min,
            level_max,
            params,
            out,
            emit,
        })
    }
}

/// `log2(δ_{2h} / δ_h)` for consecutive entries; infinite when `δ_h` is zero.
pub fn observed_order(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| {
            if w[1] == 0.0 {
                f64::INFINITY
            } else {
                (w[0] / w[1]).log2()
            }
        })
        .collect()
}

/// Full precision, `.` separator.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Per-level numbers written by [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub levels: Vec<LevelResult>,
    /// Objectives including the total mass of the problem.
    pub objectives: Vec<f64>,
    pub reference: Option<f64>,
    pub cost_errors: Vec<f64>,
    /// `(level, ε_h)` for every level with a reference multiplier.
    pub multiplier_errors: Vec<(u32, f64)>,
}

pub fn run(config: &RunConfig) -> Result<RunSummary, CliError> {
    let problem = make_problem(&config.example)?;
    let cost = crate::transport::CostFunction::polynomial(config.p);
    let levels = multilevel_solve(&problem, &cost, &config.params)?;

    let objectives: Vec<f64> = levels.iter().map(|l| problem.mass * l.solution.objective).collect();
    let reference = problem
        .exact_cost(config.p)
        .or_else(|| reference_cost(&objectives).ok());
    let cost_errors: Vec<f64> = objectives
        .iter()
        .map(|o| reference.map_or(f64::NAN, |r| (r - o).abs()))
        .collect();

    let mut multiplier_errors = Vec::new();
    let exact_phi = config.p == 2.0 && problem.exact_multiplier().is_some();
    for (k, l) in levels.iter().enumerate() {
        if exact_phi {
            multiplier_errors.push((l.report.level, multiplier_error(&l.solution.phi, &problem, &l.mesh_x)?));
        } else if let Some(fine) = levels.get(k + 1) {
            let e = multiplier_difference(&l.solution.phi, &l.mesh_x, &fine.solution.phi, &fine.mesh_x)?;
            multiplier_errors.push((l.report.level, e));
        }
    }

    let summary = RunSummary {
        levels,
        objectives,
        reference,
        cost_errors,
        multiplier_errors,
    };
    write_outputs(config, &summary)?;
    Ok(summary)
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn order_column(errors: &[f64]) -> Vec<String> {
    std::iter::once(String::new())
        .chain(observed_order(errors).into_iter().map(fmt_num))
        .collect()
}

fn write_outputs(config: &RunConfig, s: &RunSummary) -> io::Result<()> {
    let dir = &config.out;
    fs::create_dir_all(dir)?;
    if config.emit.sizes {
        let mut w = create(dir, "sizes.csv")?;
        writeln!(w, "level,M,N,M+N,MN,|A|,tolerance_increases")?;
        for l in &s.levels {
            let r = &l.report;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.level,
                r.rows,
                r.cols,
                r.rows + r.cols,
                r.rows * r.cols,
                r.active_cardinality,
                r.tolerance_increases
            )?;
        }
        w.flush()?;
    }
    if config.emit.cost {
        let mut w = create(dir, "cost.csv")?;
        writeln!(w, "level,objective,δ_h,observed_order")?;
        let orders = order_column(&s.cost_errors);
        for (((l, o), e), ord) in s.levels.iter().zip(&s.objectives).zip(&s.cost_errors).zip(orders) {
            writeln!(w, "{},{},{},{}", l.report.level, fmt_num(*o), fmt_num(*e), ord)?;
        }
        w.flush()?;
    }
    if config.emit.multiplier {
        let mut w = create(dir, "multiplier.csv")?;
        writeln!(w, "level,ε_h,observed_order")?;
        let errors: Vec<f64> = s.multiplier_errors.iter().map(|e| e.1).collect();
        for ((level, e), ord) in s.multiplier_errors.iter().zip(order_column(&errors)) {
            writeln!(w, "{level},{},{ord}", fmt_num(*e))?;
        }
        w.flush()?;
    }
    if let Some(last) = s.levels.last() {
        if config.emit.support {
            write_support(&mut create(dir, "support.csv")?, last)?;
        }
        if config.emit.mesh {
            last.mesh_x.write_dump(create(dir, "mesh_x.txt")?)?;
            last.mesh_y.write_dump(create(dir, "mesh_y.txt")?)?;
        }
    }
    Ok(())
}

fn write_support<W: Write>(w: &mut W, level: &LevelResult) -> io::Result<()> {
    let dim = level.mesh_x.dim();
    let coords = |name: &str| -> String {
        if dim == 1 {
            name.to_string()
        } else {
            format!("{name}_1,{name}_2")
        }
    };
    writeln!(w, "i,j,{},{},mass", coords("x_i"), coords("y_j"))?;
    let (xs, ys) = (level.mesh_x.nodes(), level.mesh_y.nodes());
    for e in &level.solution.plan {
        let (x, y) = (xs[e.row], ys[e.col]);
        let pts: Vec<String> = x[..dim].iter().chain(&y[..dim]).map(|v| fmt_num(*v)).collect();
        writeln!(w, "{},{},{},{}", e.row, e.col, pts.join(","), fmt_num(e.mass))?;
    }
    w.flush()
}

/// Random marginals on `rows x cols` with costs in `[0, 1)`. Some weights
/// are zero so degenerate instances are common.
pub fn random_instance(rng: &mut impl Rng, rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut weights = |n: usize| -> Vec<f64> {
        let mut w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(1..=8) as f64 })
            .collect();
        if w.iter().all(|v| *v == 0.0) {
            w[0] = 1.0;
        }
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    };
    let mu = weights(rows);
    let mut nu = weights(cols);
    // make the totals agree to the last bit
    let drift: f64 = mu.iter().sum::<f64>() - nu.iter().sum::<f64>();
    let k = nu.iter().position(|v| *v > 0.0).unwrap();
    nu[k] += drift;
    let costs = (0..rows * cols).map(|_| rng.gen_range(0.0..1.0)).collect();
    (mu, nu, costs)
}

/// Reasons why `s` is not certified optimal on `active`: marginal
/// violations, dual infeasibility, complementary slackness and the duality
/// gap, each checked up to `tol`. Empty means certified.
pub fn certificate_violations(
    costs: &[f64],
    mu: &[f64],
    nu: &[f64],
    active: &ActiveSet,
    s: &TransportSolution,
    tol: f64,
) -> Vec<String> {
    let mut out = Vec::new();
    for (k, (r, m)) in s.row_sums().iter().zip(mu).enumerate() {
        if (r - m).abs() > tol {
            out.push(format!("row {k} sums to {r}, expected {m}"));
        }
    }
    for (k, (c, n)) in s.col_sums().iter().zip(nu).enumerate() {
        if (c - n).abs() > tol {
            out.push(format!("column {k} sums to {c}, expected {n}"));
        }
    }
    for e in &s.plan {
        if e.mass < 0.0 {
            out.push(format!("negative mass at ({}, {})", e.row, e.col));
        }
        let Ok(k) = active.pairs().binary_search(&(e.row, e.col)) else {
            out.push(format!("mass outside the active set at ({}, {})", e.row, e.col));
            continue;
        };
        if (s.phi[e.row] + s.psi[e.col] - costs[k]).abs() > tol {
            out.push(format!("complementary slackness fails at ({}, {})", e.row, e.col));
        }
    }
    for (k, &(i, j)) in active.pairs().iter().enumerate() {
        if s.phi[i] + s.psi[j] > costs[k] + tol {
            out.push(format!("dual infeasible at ({i}, {j})"));
        }
    }
    let gap = s.objective - s.dual_objective(mu, nu);
    if gap.abs() > tol {
        out.push(format!("duality gap {gap}"));
    }
    out
}

pub fn verify(args: &VerifyArgs) -> Result<usize, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let max = args.max_size.max(1);
    for instance in 0..args.instances {
        let rows = rng.gen_range(1..=max);
        let cols = rng.gen_range(1..=max);
        let (mu, nu, costs) = random_instance(&mut rng, rows, cols);
        let active = ActiveSet::full(rows, cols);
        let s = solve_reduced(&costs, &mu, &nu, &active)?;
        let problems = certificate_violations(&costs, &mu, &nu, &active, &s, 1e-9);
        if !s.is_optimal() || !problems.is_empty() {
            return Err(CliError::Verify {
                instance,
                reason: problems.join("; "),
            });
        }
    }
    Ok(args.instances)
}

pub fn main_with(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let config = RunConfig::from_args(&args)?;
            let s = run(&config)?;
            for (l, o) in s.levels.iter().zip(&s.objectives) {
                let r = &l.report;
                println!(
                    "level {:>2}  M+N {:>7}  |A| {:>9}  increases {}  objective {}",
                    r.level,
                    r.rows + r.cols,
                    r.active_cardinality,
                    r.tolerance_increases,
                    fmt_num(*o)
                );
            }
            println!("wrote {}", config.out.display());
        }
        Command::Verify(args) => {
            let n = verify(&args)?;
            println!("{n} instances verified");
        }
    }
    Ok(())
}
