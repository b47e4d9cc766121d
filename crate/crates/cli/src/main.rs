mod input;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use coverlock_core::analysis::compare_policies;
use coverlock_core::experiments::{
    default_scenarios, mc2_unit_table, regret_curve_data, run_mc1, run_mc2, series_csv, table1_csv,
    table2_csv, Dgp1Config, Dgp2Config, Mc1Config, Mc2Scenario,
};
use coverlock_core::glc::{glc_solve, GlcConfig};
use coverlock_core::lp::{round_lp_to_feasible, solve_lp};
use coverlock_core::rc::rc_threshold;
use coverlock_core::{
    Allocation, BinaryAllocation, DualPrices, ExperimentError, ProblemInstance, Registry,
    SolveError,
};

use input::{load_instance, CsvTotals};

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(
    name = "coverlock",
    version,
    about = "Budget- and coverage-constrained allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with a single method.
    Solve(SolveArgs),
    /// OPT vs LP vs GLC over a grid of sample sizes.
    Mc1(Mc1Args),
    /// LP vs calibrated ratio ranking across cost/coverage scenarios.
    Mc2(Mc2Args),
    /// Compare the allocations of two methods on one instance.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file (.json, or .csv with a `value,cost` header).
    input: PathBuf,
    /// Total budget for CSV input.
    #[arg(long)]
    budget: Option<f64>,
    /// Coverage floor for CSV input.
    #[arg(long)]
    coverage: Option<usize>,
    /// GLC slack tolerance as a share of the budget.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// GLC bisection iterations.
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
}

impl InstanceArgs {
    fn load(&self) -> Result<ProblemInstance> {
        let loaded = load_instance(
            &self.input,
            CsvTotals {
                budget: self.budget,
                coverage: self.coverage,
            },
        )?;
        if let Some(note) = loaded.conversion {
            eprintln!("{note}");
        }
        Ok(loaded.instance)
    }

    fn glc(&self) -> GlcConfig {
        GlcConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iter,
            ..GlcConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// One of exact, lp, glc, rc-prefix, rc-skip.
    #[arg(long)]
    method: String,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print the GLC bisection trace on standard error.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct Mc1Args {
    /// Sample sizes: `start..end..step` or a comma list.
    #[arg(long, default_value = "50,100,200,400")]
    n: String,
    #[arg(long, default_value_t = 25)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-capita budget C.
    #[arg(long = "budget-per-capita", default_value_t = 0.6)]
    budget_per_capita: f64,
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    /// Table CSV path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Regret and gap series CSV.
    #[arg(long = "plot-out")]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct Mc2Args {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta1: f64,
    #[arg(long = "gamma-sq", default_value_t = 0.5, allow_hyphen_values = true)]
    gamma_sq: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long = "budget-per-capita", default_value_t = 0.8)]
    budget_per_capita: f64,
    #[arg(long = "delta-high", default_value_t = 1.0)]
    delta_high: f64,
    #[arg(long = "rho-high", default_value_t = 0.5)]
    rho_high: f64,
    #[arg(long = "rho-low", default_value_t = 0.1)]
    rho_low: f64,
    /// `label:delta:rho`, repeatable; replaces the four default scenarios.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-unit boundary table for one replication.
    #[arg(long = "dump-units")]
    dump_units: Option<PathBuf>,
    /// Scenario label used for `--dump-units`.
    #[arg(long = "dump-scenario", default_value = "(1)")]
    dump_scenario: String,
    #[arg(long = "dump-rep", default_value_t = 0)]
    dump_rep: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Reference method; its allocation is compared against the LP boundary.
    first: String,
    /// Ranking-type method; its last treated ratio sets the threshold.
    second: String,
    /// Bound on the margin density, enables the welfare bound.
    #[arg(long = "margin-constant")]
    margin_constant: Option<f64>,
    /// Bound on |tau|; defaults to the instance's largest |value|.
    #[arg(long = "tau-bound")]
    tau_bound: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveOutput {
    schema: u32,
    method: &'static str,
    n: usize,
    budget: f64,
    coverage_floor: usize,
    objective: f64,
    budget_used: f64,
    coverage_used: f64,
    budget_binding: bool,
    coverage_binding: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    decisions: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    treated: Vec<usize>,
    fractional_indices: Vec<usize>,
    dual_prices: Option<DualPrices>,
    iterations: usize,
    optimal: bool,
}

#[derive(Serialize)]
struct AnalyzeOutput {
    schema: u32,
    first: String,
    second: String,
    prices: DualPrices,
    t_star: f64,
    misallocation_area: f64,
    disagreeing: Vec<usize>,
    delta: f64,
    c_bar: f64,
    band_radius: f64,
    band_containment: bool,
    welfare_loss: f64,
    loss_bound: Option<f64>,
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn solver_by_name<'a>(reg: &'a Registry, name: &str) -> Result<&'a dyn coverlock_core::Solver> {
    reg.get(name).ok_or_else(|| {
        anyhow!(
            "unknown method `{name}`; expected one of {}",
            reg.names().join(", ")
        )
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let inst = args.instance.load()?;
    let glc = args.instance.glc();
    let reg = Registry::with_glc(glc);
    let solver = solver_by_name(&reg, &args.method)?;
    let report = if args.trace && args.method == "glc" {
        let out = glc_solve(&inst, &glc)?;
        eprint!("{}", out.trace);
        out.report
    } else {
        solver.solve(&inst)?
    };
    let (decisions, weights, treated, fractional_indices) = match &report.allocation {
        Allocation::Binary(a) => (
            Some(a.decisions().iter().map(|&d| u8::from(d)).collect()),
            None,
            a.treated(),
            Vec::new(),
        ),
        Allocation::Fractional(f) => (
            None,
            Some(f.weights().to_vec()),
            (0..inst.len()).filter(|&i| f.weights()[i] > 0.0).collect(),
            f.fractional_indices(),
        ),
    };
    let out = SolveOutput {
        schema: SCHEMA,
        method: report.method,
        n: inst.len(),
        budget: inst.budget(),
        coverage_floor: inst.coverage_floor(),
        objective: report.objective,
        budget_used: report.budget_used,
        coverage_used: report.coverage_used,
        budget_binding: report.budget_binding,
        coverage_binding: report.coverage_binding,
        decisions,
        weights,
        treated,
        fractional_indices,
        dual_prices: report.dual_prices,
        iterations: report.iterations,
        optimal: report.optimal,
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    emit(args.output.as_deref(), &text)
}

/// `start..end..step` (inclusive end), `start..end` (step 1) or `a,b,c`.
fn parse_grid(spec: &str) -> Result<Vec<usize>> {
    let parse = |s: &str| -> Result<usize> {
        s.trim()
            .parse()
            .with_context(|| format!("bad sample size `{s}`"))
    };
    let grid: Vec<usize> = if spec.contains("..") {
        let parts: Vec<&str> = spec.split("..").collect();
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (parse(a)?, parse(b)?, 1),
            [a, b, c] => (parse(a)?, parse(b)?, parse(c)?),
            _ => bail!("grid must look like start..end..step"),
        };
        if step == 0 || start > end {
            bail!("empty or malformed grid `{spec}`");
        }
        (start..=end).step_by(step).collect()
    } else {
        spec.split(',').map(parse).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.contains(&0) {
        bail!("grid must hold positive sample sizes");
    }
    Ok(grid)
}

fn cmd_mc1(args: &Mc1Args) -> Result<()> {
    let cfg = Mc1Config {
        grid: parse_grid(&args.n)?,
        replications: args.reps,
        template: Dgp1Config {
            n: 1,
            d: args.d,
            gamma: args.gamma,
            budget_per_capita: args.budget_per_capita,
            rho: args.rho,
            seed: args.seed,
        },
        glc: GlcConfig {
            epsilon: args.epsilon,
            max_iterations: args.max_iter,
            ..GlcConfig::default()
        },
    };
    eprintln!(
        "mc1: grid {:?}, reps {}, seed {}, C {}, rho {}, gamma {}, d {}",
        cfg.grid, cfg.replications, args.seed, args.budget_per_capita, args.rho, args.gamma, args.d
    );
    let rows = run_mc1(&cfg)?;
    emit(args.out.as_deref(), &table1_csv(&rows))?;
    if let Some(p) = &args.plot_out {
        emit(Some(p), &series_csv(&regret_curve_data(&rows)?))?;
    }
    let resamples: usize = rows.iter().map(|r| r.resamples).sum();
    if resamples > 0 {
        eprintln!("mc1: {resamples} infeasible draws resampled");
    }
    Ok(())
}

fn parse_scenario(s: &str) -> Result<Mc2Scenario> {
    let parts: Vec<&str> = s.split(':').collect();
    let [label, delta, rho] = parts.as_slice() else {
        bail!("scenario must be label:delta:rho, got `{s}`");
    };
    Ok(Mc2Scenario::new(
        *label,
        delta
            .parse()
            .with_context(|| format!("bad delta in `{s}`"))?,
        rho.parse().with_context(|| format!("bad rho in `{s}`"))?,
    ))
}

fn cmd_mc2(args: &Mc2Args) -> Result<()> {
    let scenarios = if args.scenarios.is_empty() {
        default_scenarios(args.delta_high, args.rho_high, args.rho_low)
    } else {
        args.scenarios
            .iter()
            .map(|s| parse_scenario(s))
            .collect::<Result<_>>()?
    };
    let template = Dgp2Config {
        n: args.n,
        beta0: args.beta0,
        beta1: args.beta1,
        gamma_sq: args.gamma_sq,
        c0: args.c0,
        delta: args.delta_high,
        budget_per_capita: args.budget_per_capita,
        rho: args.rho_high,
        replications: args.reps,
        seed: args.seed,
    };
    eprintln!(
        "mc2: n {}, reps {}, seed {}, beta ({}, {}), gamma {}, c0 {}, B {}",
        args.n,
        args.reps,
        args.seed,
        args.beta0,
        args.beta1,
        args.gamma_sq,
        args.c0,
        args.budget_per_capita
    );
    let rows = run_mc2(&scenarios, &template)?;
    emit(args.out.as_deref(), &table2_csv(&rows))?;
    if let Some(path) = &args.dump_units {
        let scenario = scenarios
            .iter()
            .find(|s| s.label == args.dump_scenario)
            .ok_or_else(|| anyhow!("no scenario labelled `{}`", args.dump_scenario))?;
        let units = mc2_unit_table(scenario, &template, args.dump_rep)?;
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for u in &units {
            w.serialize(u)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn binary_of(inst: &ProblemInstance, reg: &Registry, name: &str) -> Result<BinaryAllocation> {
    let report = solver_by_name(reg, name)?.solve(inst)?;
    match report.allocation {
        Allocation::Binary(a) => Ok(a),
        Allocation::Fractional(_) => Ok(round_lp_to_feasible(&solve_lp(inst)?, inst)?),
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let inst = args.instance.load()?;
    let reg = Registry::with_glc(args.instance.glc());
    let a = binary_of(&inst, &reg, &args.first)?;
    let b = binary_of(&inst, &reg, &args.second)?;
    let prices = solve_lp(&inst)?.prices;
    let t_star = rc_threshold(&inst, &b);
    let tau_bound = args.tau_bound.unwrap_or_else(|| inst.v_max());
    let report = compare_policies(
        &inst,
        prices,
        t_star,
        &a,
        &b,
        args.margin_constant.unwrap_or(1.0),
        tau_bound,
    )?;
    let out = AnalyzeOutput {
        schema: SCHEMA,
        first: args.first.clone(),
        second: args.second.clone(),
        prices,
        t_star,
        misallocation_area: report.area,
        disagreeing: report.disagreeing,
        delta: report.delta,
        c_bar: report.c_bar,
        band_radius: report.band_radius,
        band_containment: report.band_containment,
        welfare_loss: report.welfare_loss,
        loss_bound: args.margin_constant.map(|_| report.loss_bound),
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    emit(args.output.as_deref(), &text)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("COVERLOCK_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| anyhow!("COVERLOCK_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn solve_code(e: &SolveError) -> u8 {
    match e {
        SolveError::Infeasible { .. } | SolveError::RoundingInfeasible => 2,
        SolveError::NoFeasibleCutoff | SolveError::CoreInfeasible { .. } => 3,
        _ => 1,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<SolveError>() {
            return solve_code(e);
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return match e {
                ExperimentError::TooManyInfeasibleDraws { .. } => 2,
                ExperimentError::Solve(s) => solve_code(s),
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Mc1(a) => cmd_mc1(a),
        Command::Mc2(a) => cmd_mc2(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
