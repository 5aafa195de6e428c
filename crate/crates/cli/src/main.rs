use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use tailshift::copula::{generate, Scenario};
use tailshift::harness::{run, ExperimentPlan, PillowConfig};
use tailshift::io::{
    integrated_cdf, read_dataset, read_json, write_curve, write_dataset, write_json, write_power_csv,
    write_power_curves, Column, DatasetSpec, RowFilter,
};
use tailshift::limit::{pillow_critical_values, CriticalTable};
use tailshift::pipeline::{analyze, AnalysisConfig};
use tailshift::sample::{Norm, DEFAULT_CANDIDATE_CAP};
use tailshift::stationarity::{decide, CriticalSource, TestReport};
use tailshift::Error;

#[derive(Parser)]
#[command(name = "tailshift", version, about = "Tests for a time-varying extremal dependence structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the integrated spectral measure of a data file and test it
    /// for constancy.
    Test(Box<TestArgs>),
    /// Simulate Brownian-pillow critical values.
    Critval(CritvalArgs),
    /// Write a synthetic sample described by a scenario file.
    Generate(GenerateArgs),
    /// Run a Monte Carlo size/power experiment.
    Power(PowerArgs),
}

#[derive(Args)]
struct PillowArgs {
    /// Grid mesh of the simulated pillows.
    #[arg(long, default_value_t = 0.005)]
    grid_step: f64,
    /// Number of simulated pillows.
    #[arg(long, default_value_t = 2000)]
    pillow_replications: usize,
    #[arg(long, default_value_t = 1)]
    pillow_seed: u64,
}

#[derive(Args)]
struct TestArgs {
    /// Delimited data file, one observation per row.
    data: PathBuf,
    /// Block length.
    #[arg(short)]
    b: usize,
    /// Exceedances per block.
    #[arg(short)]
    k: usize,
    #[arg(long, default_value = "euclidean")]
    norm: Norm,
    /// Value columns (0-based index or header name); default all but the time column.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<Column>,
    /// Column used only to order the rows.
    #[arg(long)]
    time_column: Option<Column>,
    #[arg(long, default_value = ",")]
    delimiter: char,
    #[arg(long)]
    no_header: bool,
    /// Keep rows whose every component exceeds this value.
    #[arg(long)]
    filter_all_above: Option<f64>,
    /// Keep rows whose component sum exceeds this value.
    #[arg(long)]
    filter_total_above: Option<f64>,
    /// Largest candidate family before falling back to a grid.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_CAP)]
    cap: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.10])]
    sizes: Vec<f64>,
    /// Cached critical value table (from `critval`) for bivariate data.
    #[arg(long)]
    critical_table: Option<PathBuf>,
    #[command(flatten)]
    pillow: PillowArgs,
    /// Simulate the estimated limit process this many times (required when d > 2).
    #[arg(long)]
    limit_replications: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Integrated cdf over a block range, as FIRST:LAST:OUT.csv (repeatable).
    #[arg(long)]
    cdf: Vec<String>,
}

#[derive(Args)]
struct CritvalArgs {
    #[arg(long, default_value_t = 0.005)]
    grid_step: f64,
    #[arg(long, default_value_t = 2000)]
    replications: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.005, 0.01, 0.025, 0.05, 0.10, 0.20])]
    sizes: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Where to cache the table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PowerArgs {
    /// Experiment plan JSON file.
    plan: PathBuf,
    /// Directory for power.csv, power.json and curves.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Use 1000 replications and 10,000 pillows on a 0.001 grid.
    #[arg(long)]
    full_scale: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_infeasible() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Test(args) => cmd_test(*args),
        Command::Critval(args) => cmd_critval(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Power(args) => cmd_power(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn delimiter_byte(c: char) -> anyhow::Result<u8> {
    if c.is_ascii() {
        Ok(c as u8)
    } else {
        bail!("delimiter must be a single ASCII character")
    }
}

fn parse_cdf(arg: &str) -> anyhow::Result<(usize, usize, PathBuf)> {
    let mut parts = arg.splitn(3, ':');
    let (Some(first), Some(last), Some(out)) = (parts.next(), parts.next(), parts.next()) else {
        bail!("--cdf expects FIRST:LAST:OUT, got `{arg}`");
    };
    Ok((first.parse()?, last.parse()?, PathBuf::from(out)))
}

fn cmd_test(args: TestArgs) -> anyhow::Result<()> {
    let mut spec = DatasetSpec::new(&args.data);
    spec.columns = args.columns;
    spec.time_column = args.time_column;
    spec.delimiter = delimiter_byte(args.delimiter)?;
    spec.has_header = !args.no_header;
    spec.filters.extend(args.filter_all_above.map(|threshold| RowFilter::AllComponents { threshold }));
    spec.filters.extend(args.filter_total_above.map(|threshold| RowFilter::Total { threshold }));
    let cdfs = args.cdf.iter().map(|c| parse_cdf(c)).collect::<anyhow::Result<Vec<_>>>()?;

    let sample = read_dataset(&spec).with_context(|| format!("reading {}", args.data.display()))?;
    let config = AnalysisConfig {
        b: args.b,
        k: args.k,
        norm: args.norm,
        cap: args.cap,
    };
    let analysis = analyze(&sample, &config)?;
    let report = analysis.report();
    let d = analysis.dimension();

    let table;
    let source = match (d, args.limit_replications) {
        (_, Some(replications)) => CriticalSource::PerSample {
            path: &analysis.path,
            family: &analysis.family,
            replications,
            seed: args.seed,
            sizes: &args.sizes,
        },
        (2, None) => {
            table = match &args.critical_table {
                Some(path) => read_json::<CriticalTable>(path)?,
                None => pillow_critical_values(
                    args.pillow.grid_step,
                    args.pillow.pillow_replications,
                    &args.sizes,
                    args.pillow.pillow_seed,
                )?,
            };
            CriticalSource::Table(&table)
        }
        (d, None) => return Err(Error::MissingSimulation(d).into()),
    };
    let report = decide(report, source)?;

    for (first, last, out) in cdfs {
        let points = integrated_cdf(&analysis.path, first, last)?;
        write_curve(create(&out)?, &points)?;
    }
    if let Some(path) = &args.json {
        write_json(create(path)?, &report)?;
    }
    print_report(&mut std::io::stdout().lock(), &analysis.path.scheme().n, &report)?;
    Ok(())
}

fn print_report<W: Write>(out: &mut W, n: &usize, report: &TestReport) -> std::io::Result<()> {
    writeln!(out, "observations  {n}")?;
    writeln!(out, "dimension     {}", report.dimension)?;
    writeln!(out, "T_KS          {:.6}", report.t_ks)?;
    writeln!(out, "T_CM          {:.6}", report.t_cm)?;
    if let Some(p) = &report.p_values {
        writeln!(out, "p-value KS    {:.4}  ({} simulations)", p.ks, p.replications)?;
        writeln!(out, "p-value CM    {:.4}", p.cm)?;
    }
    if let Some(crit) = &report.critical_values {
        for c in crit {
            writeln!(out, "critical {:<5} KS {:.4}  CM {:.4}", c.size, c.ks, c.cm)?;
        }
    }
    for d in report.decisions.iter().flatten() {
        let verdict = |r: bool| if r { "reject" } else { "accept" };
        writeln!(
            out,
            "size {:<5}    KS {}  CM {}",
            d.size,
            verdict(d.reject_ks),
            verdict(d.reject_cm)
        )?;
    }
    Ok(())
}

fn cmd_critval(args: CritvalArgs) -> anyhow::Result<()> {
    let table = pillow_critical_values(args.grid_step, args.replications, &args.sizes, args.seed)?;
    write_json(create(&args.out)?, &table)?;
    let mut out = std::io::stdout().lock();
    for e in &table.entries {
        writeln!(out, "{:<6} KS {:.4}  CM {:.4}", e.size, e.ks, e.cm)?;
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let scenario: Scenario = read_json(&args.scenario)?;
    scenario.validate().map_err(|e| Error::Config {
        path: "scenario".into(),
        message: e.to_string(),
    })?;
    let sample = generate(&scenario, args.seed)?;
    let mut out = create(&args.out)?;
    write_dataset(&mut out, &sample)?;
    out.flush()?;
    Ok(())
}

fn cmd_power(args: PowerArgs) -> anyhow::Result<()> {
    let mut plan: ExperimentPlan = read_json(&args.plan)?;
    if args.full_scale {
        plan.replications = 1000;
        plan.pillow = PillowConfig {
            grid_step: 0.001,
            replications: 10_000,
            ..plan.pillow
        };
    }
    let table = run(&plan)?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_power_csv(create(&args.out_dir.join("power.csv"))?, &table)?;
    write_json(create(&args.out_dir.join("power.json"))?, &table)?;
    write_power_curves(create(&args.out_dir.join("curves.csv"))?, &table)?;
    for cell in &table.infeasible {
        eprintln!("infeasible: {} b={} k={}: {}", cell.scenario, cell.b, cell.k, cell.reason);
    }
    println!(
        "{} rows, {} infeasible cells -> {}",
        table.rows.len(),
        table.infeasible.len(),
        args.out_dir.display()
    );
    Ok(())
}
