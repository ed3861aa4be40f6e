//! Command-line front end. Every command loads one case, writes its results
//! as CSV files under `--out` and reports failures through a fixed set of
//! exit codes (see [`ExitStatus`]).

mod diff;
mod tables;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::clearing::{build_so, sample_scenarios, solve_cco, solve_so, CcoSolution, ClearingError, SoSolution};
use crate::lp::write_lp_format;
use crate::montecarlo::{simulate_traced, write_stats_csv, write_violations_csv, EmpiricalStats};
use crate::netmodel::{load_any_case, CaseError, MarketCase};
use crate::pricing::{cco_prices, so_prices, PriceSchedule, PricingError, SoPriceSchedule};
use crate::profits::{cco_profits, so_profits, write_profit_csv, ProfitError, ProfitReport, SoProfitReport, Verdict, ADEQUACY_TOL};

pub use diff::{diff_cells, read_expected, write_diff_csv, CellDiff, DiffStatus, ExpectedError, Tolerances};
pub use tables::{
    cco_cells, histogram, price_comparison, so_cells, write_cells_csv, write_comparison_csv, write_dispatch_csv,
    write_histogram_csv, write_price_rules_csv, write_rounded_prices_csv, write_so_dispatch_csv,
    write_so_price_series_csv, write_so_prices_csv, Cell, HistogramBin, PriceLine, BIN_WIDTH, PRICE_RULES,
};

/// Process exit codes. The numeric values are part of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// Unreadable, malformed or invalid input, including bad flags.
    Input = 10,
    /// The clearing problem has no optimal solution.
    Infeasible = 20,
    /// The case breaks a modelling assumption, such as zero served demand.
    Assumption = 21,
    /// A revenue-adequacy, profit identity or money-conservation check failed.
    Adequacy = 30,
    /// Monte Carlo moments or violation frequencies left their bands.
    Statistics = 40,
    /// Reproduced tables differ from the reference values.
    Diff = 50,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Clear with the chance-constrained model and price the result
    SolveCco,
    /// Clear with the scenario-based model and price the result
    SolveSo,
    /// Price comparison between the two schemes with histogram data
    Compare,
    /// Monte Carlo check of the chance-constrained settlement
    Simulate,
    /// Rerun the bundled cases and diff them against reference values
    Reproduce,
}

/// Everything a command needs. Flags a command does not use are ignored.
#[derive(Debug, Clone, Parser)]
#[command(name = "ccmkt", version, about = "Chance-constrained and scenario-based market clearing with revenue-adequate prices")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Case file or `*.variant.json`; for `reproduce`, the directory holding case1.json to case4.json
    pub case: PathBuf,
    /// Replace the case's violation tolerance
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of sampled scenarios
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub scenarios: u64,
    /// Seed for scenario sampling and Monte Carlo draws
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte Carlo draws
    #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub draws: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Adequacy tolerance for solve commands (default 1e-6); cell tolerance for reproduce (default 0.01)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Decimals in emitted tables
    #[arg(long, default_value_t = 2)]
    pub round: usize,
    /// simulate: settle at the prices in this file (prices.csv layout)
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// simulate: write one row per draw to trace.csv
    #[arg(long)]
    pub trace: bool,
    /// reproduce: reference value directory [default: expected/ next to the cases directory]
    #[arg(long)]
    pub expected: Option<PathBuf>,
    /// solve-cco, solve-so: also write the model in LP format
    #[arg(long)]
    pub lp: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("profit check failed: {0}")]
    Profit(#[from] ProfitError),
    #[error(transparent)]
    Expected(#[from] ExpectedError),
    #[error("{0}")]
    Config(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error("{0}")]
    Conservation(String),
    #[error("{0}")]
    Statistics(String),
    #[error("{0}")]
    Diff(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Case(_) | CliError::Expected(_) | CliError::Config(_) | CliError::Output { .. } => ExitStatus::Input,
            CliError::Clearing(e) => match e {
                ClearingError::Case(_) | ClearingError::Quantile(_) => ExitStatus::Input,
                ClearingError::Assumption(_) => ExitStatus::Assumption,
                ClearingError::Lp(_) | ClearingError::Infeasible(_) | ClearingError::Unbounded(_) => ExitStatus::Infeasible,
            },
            CliError::Pricing(_) => ExitStatus::Assumption,
            CliError::Profit(_) | CliError::Conservation(_) => ExitStatus::Adequacy,
            CliError::Statistics(_) => ExitStatus::Statistics,
            CliError::Diff(_) => ExitStatus::Diff,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Input.code() } else { ExitStatus::Success.code() };
        }
    };
    match run(&config) {
        Ok(()) => ExitStatus::Success.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    }
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    if config.tol.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
        return Err(CliError::Config("--tol must be finite and nonnegative".into()));
    }
    match config.command {
        Command::SolveCco => cmd_solve_cco(config),
        Command::SolveSo => cmd_solve_so(config),
        Command::Compare => cmd_compare(config),
        Command::Simulate => cmd_simulate(config),
        Command::Reproduce => cmd_reproduce(config),
    }
}

fn load(config: &RunConfig, path: &Path) -> Result<MarketCase, CliError> {
    let mut case = load_any_case(path)?;
    if let Some(eps) = config.epsilon {
        case.epsilon = eps;
        case.validate()?;
    }
    Ok(case)
}

fn emit<F>(dir: &Path, name: &str, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
{
    let path = dir.join(name);
    let fail = |message: String| CliError::Output { path: path.display().to_string(), message };
    fs::create_dir_all(dir).map_err(|e| fail(e.to_string()))?;
    let mut out = BufWriter::new(File::create(&path).map_err(|e| fail(e.to_string()))?);
    write(&mut out).map_err(|e| fail(e.to_string()))?;
    out.flush().map_err(|e| fail(e.to_string()))
}

fn emit_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    emit(dir, name, |out| out.write_all(text.as_bytes()).map_err(csv::Error::from))
}

struct CcoRun {
    sol: CcoSolution,
    prices: PriceSchedule,
    report: ProfitReport,
}

fn run_cco(case: &MarketCase) -> Result<CcoRun, CliError> {
    let sol = solve_cco(case)?;
    let prices = cco_prices(&sol)?;
    let report = cco_profits(&sol, &prices);
    Ok(CcoRun { sol, prices, report })
}

struct SoRun {
    sol: SoSolution,
    prices: SoPriceSchedule,
    report: SoProfitReport,
}

fn run_so(case: &MarketCase, config: &RunConfig) -> Result<SoRun, CliError> {
    let scenarios = sample_scenarios(case, config.scenarios as usize, config.seed);
    let sol = solve_so(case, &scenarios)?;
    let prices = so_prices(&sol);
    let report = so_profits(&sol, &prices);
    Ok(SoRun { sol, prices, report })
}

fn write_cco_tables(dir: &Path, run: &CcoRun, digits: usize) -> Result<(), CliError> {
    emit(dir, "dispatch.csv", |o| write_dispatch_csv(&run.sol, &run.prices, digits, o))?;
    emit(dir, "prices.csv", |o| write_rounded_prices_csv(&run.sol, &run.prices, digits, o))?;
    emit(dir, "profits.csv", |o| write_profit_csv(&run.report.rows(&run.sol), digits, o))
}

fn write_so_tables(dir: &Path, run: &SoRun, digits: usize) -> Result<(), CliError> {
    emit(dir, "so_dispatch.csv", |o| write_so_dispatch_csv(&run.sol, digits, o))?;
    emit(dir, "so_prices.csv", |o| write_so_prices_csv(&run.sol, &run.prices, digits, o))?;
    emit(dir, "so_profits.csv", |o| write_profit_csv(&run.report.rows(&run.sol), digits, o))
}

fn write_verdicts<W: Write>(verdicts: &[Verdict], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "participant", "margin", "guaranteed", "pass"])?;
    for v in verdicts {
        w.write_record([
            &v.scheme.to_string(),
            &v.participant,
            &v.margin.to_string(),
            &v.guaranteed.to_string(),
            &v.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn adequacy_tol(config: &RunConfig) -> f64 {
    config.tol.unwrap_or(ADEQUACY_TOL)
}

pub fn cmd_solve_cco(config: &RunConfig) -> Result<(), CliError> {
    let case = load(config, &config.case)?;
    let run = run_cco(&case)?;
    let dir = &config.out;
    write_cco_tables(dir, &run, config.round)?;
    emit(dir, "duals.csv", |o| {
        let mut w = csv::Writer::from_writer(o);
        w.write_record(["row", "dual"])?;
        for (row, y) in run.sol.model.lp.rows().iter().zip(&run.sol.lp.duals) {
            w.write_record([row.name.as_str(), &y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let tol = adequacy_tol(config);
    emit(dir, "adequacy.csv", |o| write_verdicts(&run.report.verdicts(&run.sol, tol), o))?;
    if config.lp {
        emit_text(dir, "cco.lp", &write_lp_format(&run.sol.model.lp))?;
    }
    println!("objective {:.6}", run.sol.objective);
    run.report.verify(&run.sol, tol)?;
    Ok(())
}

pub fn cmd_solve_so(config: &RunConfig) -> Result<(), CliError> {
    let case = load(config, &config.case)?;
    let run = run_so(&case, config)?;
    let dir = &config.out;
    emit(dir, "scenarios.csv", |o| run.sol.scenarios.write_csv(o))?;
    write_so_tables(dir, &run, config.round)?;
    emit(dir, "so_price_series.csv", |o| write_so_price_series_csv(&run.sol, &run.prices, o))?;
    let tol = adequacy_tol(config);
    emit(dir, "adequacy.csv", |o| write_verdicts(&run.report.verdicts(&run.sol, tol), o))?;
    if config.lp {
        let model = build_so(&case, &run.sol.scenarios)?;
        emit_text(dir, "so.lp", &write_lp_format(&model.lp))?;
    }
    println!("objective {:.6} over {} scenarios", run.sol.objective, run.sol.scenarios.len());
    run.report.verify(&run.sol, tol)?;
    Ok(())
}

pub fn cmd_compare(config: &RunConfig) -> Result<(), CliError> {
    let case = load(config, &config.case)?;
    let cco = run_cco(&case)?;
    let so = run_so(&case, config)?;
    let dir = &config.out;
    let lines = price_comparison(&cco.sol, &cco.prices, Some(&so.prices));
    emit(dir, "price_comparison.csv", |o| write_comparison_csv(&lines, config.round, o))?;
    emit(dir, "price_rules.csv", |o| write_price_rules_csv(o))?;
    emit(dir, "histogram.csv", |o| write_histogram_csv(&so.sol, &so.prices, o))?;
    for l in lines.iter().filter(|l| l.stage == "realtime") {
        let (m, s) = l.so.expect("paired");
        println!("{:<4} {:<12} cco {:>8.2}  so {:>8.2} ({:.2})", l.participant, l.action, l.cco, m, s);
    }
    Ok(())
}

/// Replaces composed prices with the values in a `participant,action,bus,price`
/// file. Rows that name no known participant action are rejected.
pub fn apply_price_file(sol: &CcoSolution, prices: &mut PriceSchedule, path: &Path) -> Result<(), CliError> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let case = &sol.case;
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let (who, action, bus) = (&rec[0], &rec[1], &rec[2]);
        let v: f64 = rec[3].parse().map_err(|_| bad(format!("`{}` is not a number", &rec[3])))?;
        let n = case.bus_index(bus).ok_or_else(|| bad(format!("unknown bus `{bus}`")))?;
        let slot = match (case.generator_index(who), action) {
            (Some(i), "energy") => &mut prices.generator_energy[i],
            (Some(i), "reserve_up") => &mut prices.generator_up[i],
            (Some(i), "reserve_down") => &mut prices.generator_down[i],
            (None, "schedule") => &mut prices.vres_schedule[n],
            (None, "spill") => &mut prices.vres_deviation[n],
            (None, "consumption") => &mut prices.load_schedule[n],
            (None, "curtailment") => &mut prices.curtailment[n],
            _ => return Err(bad(format!("unknown action `{who},{action}`"))),
        };
        *slot = v;
    }
    Ok(())
}

pub fn cmd_simulate(config: &RunConfig) -> Result<(), CliError> {
    let case = load(config, &config.case)?;
    let mut run = run_cco(&case)?;
    if let Some(path) = &config.prices {
        apply_price_file(&run.sol, &mut run.prices, path)?;
    }
    let dir = &config.out;
    let draws = config.draws as usize;
    let stats: EmpiricalStats = if config.trace {
        let mut result = None;
        emit(dir, "trace.csv", |o| {
            result = Some(simulate_traced(&run.sol, &run.prices, draws, config.seed, Some(o))?);
            Ok(())
        })?;
        result.expect("trace written")
    } else {
        simulate_traced(&run.sol, &run.prices, draws, config.seed, None::<&mut Vec<u8>>)
            .expect("in-memory trace cannot fail")
    };
    emit(dir, "mc_stats.csv", |o| write_stats_csv(&stats, o))?;
    emit(dir, "mc_violations.csv", |o| write_violations_csv(&stats, o))?;
    if stats.insufficient() {
        eprintln!("warning: {} draws is too few for the statistical bands; verdicts skipped", stats.draws);
    }
    println!(
        "draws {}  max imbalance {:.3e}  means {}  stds {}  bounds {}",
        stats.draws,
        stats.max_imbalance,
        stats.means_pass(),
        stats.stds_pass(),
        stats.bounds_pass()
    );
    if !stats.books_balance() {
        return Err(CliError::Conservation(format!(
            "money is not conserved: largest per-draw imbalance {:.3e}, rebalance residual {:.3e}",
            stats.max_imbalance, stats.max_rebalance_residual
        )));
    }
    if !stats.statistics_pass() {
        return Err(CliError::Statistics("empirical results fall outside the statistical bands; see mc_stats.csv".into()));
    }
    Ok(())
}

/// Names of the bundled cases that `reproduce` runs.
pub const REPRODUCED_CASES: [&str; 4] = ["case1", "case2", "case3", "case4"];

/// Reference files read by `reproduce`.
pub const EXPECTED_FILES: [&str; 2] = ["cco.csv", "so.csv"];

pub fn cmd_reproduce(config: &RunConfig) -> Result<(), CliError> {
    let dir = &config.case;
    let mut cells = Vec::new();
    for name in REPRODUCED_CASES {
        let case = load(config, &dir.join(format!("{name}.json")))?;
        let cco = run_cco(&case)?;
        cco.report.verify(&cco.sol, ADEQUACY_TOL)?;
        let so = run_so(&case, config)?;
        let sub = config.out.join(name);
        write_cco_tables(&sub, &cco, config.round)?;
        write_so_tables(&sub, &so, config.round)?;
        let lines = price_comparison(&cco.sol, &cco.prices, Some(&so.prices));
        emit(&sub, "price_comparison.csv", |o| write_comparison_csv(&lines, config.round, o))?;
        emit(&sub, "histogram.csv", |o| write_histogram_csv(&so.sol, &so.prices, o))?;
        cells.extend(cco_cells(name, &cco.sol, &cco.prices, &cco.report));
        cells.extend(so_cells(name, &so.sol, &so.prices, &so.report));
    }
    emit(&config.out, "cells.csv", |o| write_cells_csv(&cells, config.round, o))?;

    let expected_dir = config.expected.clone().unwrap_or_else(|| {
        dir.parent().map(|p| p.join("expected")).unwrap_or_else(|| PathBuf::from("expected"))
    });
    let mut expected = Vec::new();
    for file in EXPECTED_FILES {
        let path = expected_dir.join(file);
        let f = File::open(&path)
            .map_err(|e| CaseError::Io { path: path.display().to_string(), message: e.to_string() })?;
        expected.extend(read_expected(f)?);
    }
    let tol = Tolerances { cco: config.tol.unwrap_or(Tolerances::default().cco), ..Tolerances::default() };
    let diffs = diff_cells(&expected, &cells, &tol);
    emit(&config.out, "diff.csv", |o| write_diff_csv(&diffs, config.round, o))?;

    let failed: Vec<&CellDiff> = diffs.iter().filter(|d| d.status.is_failure()).collect();
    let judged = diffs.iter().filter(|d| d.status != DiffStatus::Informational).count();
    println!("{} of {judged} judged cells match", judged - failed.len());
    if failed.is_empty() {
        return Ok(());
    }
    for d in &failed {
        let e = &d.expected;
        let actual = d.actual.map_or("missing".to_string(), |a| format!("{a:.4}"));
        eprintln!("{} {} {} {}: expected {:.2}, got {actual}", e.case, e.section, e.element, e.field, e.value);
    }
    if config.epsilon.is_some() {
        println!("{} cells differ under the overridden violation tolerance (informational)", failed.len());
        return Ok(());
    }
    Err(CliError::Diff(format!("{} cells differ from the reference values; see diff.csv", failed.len())))
}
