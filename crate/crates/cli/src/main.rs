//! `slotalloc`: allocate slots, sweep congestion costs, compare with
//! baselines, generate synthetic scenarios and verify mechanism properties.
//!
//! Exit codes: 0 success, 1 internal error (including unwritable output),
//! 2 usage or validation error, 3 property violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use slotalloc::baselines::{aggregate_reports, compare, CompareError, ComparisonReport};
use slotalloc::payments::run_mechanism;
use slotalloc::scenario::output::{self, write_comparison, write_mechanism_results, OutputError};
use slotalloc::scenario::synth::{default_ensemble, SynthSpec, DEFAULT_G_GRID};
use slotalloc::scenario::{
    build_scenario, load_scenario, synth_scenario, LoadedScenario, ScenarioError, ScenarioFiles,
};
use slotalloc::verify::{verify, PaymentRule, VerifyConfig};

#[derive(Debug, Parser)]
#[command(
    name = "slotalloc",
    version,
    about = "Congestion-aware airport slot allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Allocate slots and compute payments for one scenario.
    Allocate(AllocateArgs),
    /// Welfare, payments and utilities of every method across congestion costs.
    Sweep(StudyArgs),
    /// Percent-improvement comparison against the baselines, plus the sweep.
    Compare(StudyArgs),
    /// Write a synthetic scenario directory.
    Synth(SynthArgs),
    /// Check truthfulness, rationality, optimality and monotonicity on random instances.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct AllocateArgs {
    /// Scenario directory.
    #[arg(long)]
    scenario: PathBuf,
    /// Config file overriding the scenario's config.txt.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Congestion cost overriding the config.
    #[arg(long, value_parser = non_negative)]
    g: Option<f64>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Scenario directory; without it the default synthetic ensemble is used.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, requires = "scenario")]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated congestion costs.
    #[arg(long, value_delimiter = ',', value_parser = non_negative, num_args = 1..)]
    g: Option<Vec<f64>>,
    /// Seed of the synthetic ensemble.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slots per comparison interval.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    interval_width: u32,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    movements: usize,
    #[arg(long, default_value_t = 24, value_parser = clap::value_parser!(u32).range(1..))]
    slots: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    capacity: u32,
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    cities: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Congestion cost written to config.txt.
    #[arg(long, value_parser = non_negative)]
    g: Option<f64>,
    /// Warn when the day has fewer seats than movements.
    #[arg(long)]
    no_rejection: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 50)]
    misreports: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for verify_report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Fault::None, hide = true)]
    inject_fault: Fault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fault {
    None,
    PayAsBid,
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("'{s}' is not a finite non-negative number")),
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Self::internal(e.to_string())
    }
}

impl From<CompareError> for Failure {
    fn from(e: CompareError) -> Self {
        match e {
            CompareError::Validation(v) => Self::usage(v.to_string()),
            CompareError::Alloc(a) => Self::internal(a.to_string()),
        }
    }
}

fn load(dir: &Path, config: Option<&Path>) -> Result<LoadedScenario, Failure> {
    if !dir.is_dir() {
        return Err(Failure::usage(format!(
            "{}: not a scenario directory",
            dir.display()
        )));
    }
    let mut files = ScenarioFiles::in_dir(dir);
    if let Some(c) = config {
        files.config = Some(c.to_path_buf());
    }
    Ok(load_scenario(&files)?)
}

fn cmd_allocate(args: &AllocateArgs) -> Result<(), Failure> {
    let mut scenario = load(&args.scenario, args.config.as_deref())?;
    if let Some(g) = args.g {
        scenario.instance = scenario
            .instance
            .with_g(g)
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let inst = &scenario.instance;
    let result = run_mechanism(inst);
    for &i in &result.low_rcof {
        log::warn!(
            "movement {} has a near-zero remoteness weight; its payment is ill-conditioned",
            inst.movements()[i].label
        );
    }
    write_mechanism_results(&args.out, inst, &result)?;
    println!(
        "allocated {} of {} movements; social utility {:.6}",
        result.allocation.allocated_count(),
        inst.num_movements(),
        result.social_utility
    );
    Ok(())
}

/// Reports per scenario plus, for an ensemble, their aggregate.
fn study(args: &StudyArgs) -> Result<(ComparisonReport, Vec<ComparisonReport>), Failure> {
    let gs = args.g.clone().unwrap_or_else(|| DEFAULT_G_GRID.to_vec());
    let width = args.interval_width as usize;
    if let Some(dir) = &args.scenario {
        let s = load(dir, args.config.as_deref())?;
        let report = compare(&s.instance, &s.current, &gs, width)?;
        return Ok((report, Vec::new()));
    }
    let mut reports = Vec::new();
    for spec in default_ensemble(args.seed) {
        let texts = synth_scenario(&spec).texts;
        let s = build_scenario(&texts)
            .map_err(|e| Failure::internal(format!("synthetic scenario invalid: {e}")))?;
        reports.push(compare(&s.instance, &s.current, &gs, width)?);
    }
    let total = aggregate_reports(&reports)
        .ok_or_else(|| Failure::internal("ensemble reports differ in shape"))?;
    Ok((total, reports))
}

fn write_per_scenario(out: &Path, reports: &[ComparisonReport], full: bool) -> Result<(), Failure> {
    for (k, r) in reports.iter().enumerate() {
        let dir = out.join("scenarios").join(format!("{k:02}"));
        if full {
            write_comparison(&dir, r)?;
        } else {
            write_file(&dir, output::SWEEP_CSV, &output::render_sweep_csv(r))?;
        }
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| OutputError::io(dir, e))?;
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| OutputError::io(&p, e))?;
    Ok(())
}

fn cmd_sweep(args: &StudyArgs) -> Result<(), Failure> {
    let (report, per_scenario) = study(args)?;
    write_file(
        &args.out,
        output::SWEEP_CSV,
        &output::render_sweep_csv(&report),
    )?;
    write_per_scenario(&args.out, &per_scenario, false)?;
    println!("wrote {} sweep rows", report.sweep.len());
    Ok(())
}

fn cmd_compare(args: &StudyArgs) -> Result<(), Failure> {
    let (report, per_scenario) = study(args)?;
    write_comparison(&args.out, &report)?;
    write_per_scenario(&args.out, &per_scenario, true)?;
    for row in report.rows.iter().filter(|r| r.interval == "all") {
        let pct = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}%"));
        println!(
            "g={}: mechanism {:.2}, vs current {}, vs iata {}",
            row.g,
            row.mechanism,
            pct(row.improvement_vs_current),
            pct(row.improvement_vs_iata)
        );
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let mut spec = SynthSpec::uniform(
        args.movements,
        args.slots as usize,
        args.capacity,
        args.seed,
    );
    spec.cities = args.cities as usize;
    spec.allow_rejection = !args.no_rejection;
    if let Some(g) = args.g {
        spec.params.g = g;
    }
    let out = synth_scenario(&spec);
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    out.texts.write_to(&args.out)?;
    println!(
        "wrote scenario with {} movements and {} slots to {}",
        args.movements,
        args.slots,
        args.out.display()
    );
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let cfg = VerifyConfig {
        trials: args.trials as usize,
        misreports: args.misreports as usize,
        seed: args.seed,
        rule: match args.inject_fault {
            Fault::None => PaymentRule::Marginal,
            Fault::PayAsBid => PaymentRule::PayAsBid,
        },
        ..VerifyConfig::default()
    };
    let report = verify(&cfg);
    for s in &report.suites {
        let status = if s.violations.is_empty() {
            "ok"
        } else {
            "FAILED"
        };
        println!(
            "{:<24} {:>8} checks  {:>4} violations  {status}",
            s.suite.as_str(),
            s.checks,
            s.violations.len()
        );
    }
    if let Some(dir) = &args.out {
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| Failure::internal(e.to_string()))?;
        write_file(dir, "verify_report.json", &(json + "\n"))?;
    }
    if report.is_clean() {
        return Ok(());
    }
    for v in report.suites.iter().flat_map(|s| &s.violations) {
        eprintln!(
            "violation [{}] trial {} (instance seed {}): {}",
            v.suite.as_str(),
            v.trial,
            v.instance_seed,
            v.detail
        );
        eprintln!("{}", serde_json::to_string(v).unwrap_or_default());
    }
    Err(Failure {
        code: 3,
        message: format!(
            "{} property violations (seed {})",
            report.violation_count(),
            args.seed
        ),
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Allocate(a) => cmd_allocate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(1),
    }
}
