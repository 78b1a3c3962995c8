//! Command-line front end: compute index series, generate synthetic panels,
//! time the standard benchmark triple, and emit match tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use pricelab::aggregation::Partition;
use pricelab::extension::SpliceMethod;
use pricelab::filtering::FilterSpec;
use pricelab::ingest::{parse_transactions, CsvDialect};
use pricelab::matching::{match_products, Observation};
use pricelab::pipeline::{self, EmitFormat, IndexMethod, RunConfig};
use pricelab::synth::{generate, write_transactions, PanelRecipe};
use pricelab::{Error, Month, Result};

#[derive(Parser)]
#[command(name = "pricelab", version, about = "Scanner-data price index engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute index series from transaction CSV files.
    Run(Box<RunArgs>),
    /// Generate a synthetic transaction panel from a JSON recipe.
    Synth(SynthArgs),
    /// Time chained Jevons, chained Fisher and GEKS on the same panel.
    Bench(BenchArgs),
    /// Match products and emit the observation-key table as CSV.
    Match(MatchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Transaction CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Index method: jevons|dutot|carli|harmonic|cswd|laspeyres|paasche|
    /// fisher|tornqvist|sato-vartia|geks|ccdi|gk|tpd.
    #[arg(long, default_value = "geks")]
    index: String,

    /// Chain the bilateral formula through consecutive months instead of
    /// comparing directly with the base month.
    #[arg(long)]
    chained: bool,

    /// Output directory for series, manifest and rejects files.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Rebase the emitted series onto this month (YYYY-MM).
    #[arg(long)]
    base: Option<String>,

    /// Restrict the panel to an inclusive month range, FIRST:LAST.
    #[arg(long)]
    months: Option<String>,

    /// Multilateral window length in months.
    #[arg(long, default_value_t = 13)]
    window: usize,

    /// Window extension: movement|window|half|mean|fbew|fbmw|none.
    #[arg(long, default_value = "none")]
    splice: String,

    /// Filter, repeatable and applied in order: lowsale:LAMBDA,
    /// extremeprice:LO,HI or extremeprice-quantile:QLO,QHI.
    #[arg(long = "filter")]
    filters: Vec<String>,

    /// Aggregation partition: none|subgroup|outlet|both.
    #[arg(long, default_value = "none")]
    aggregate: String,

    /// Aggregation formula: laspeyres|fisher.
    #[arg(long = "agg-formula", default_value = "laspeyres")]
    agg_formula: String,

    /// Drop cells whose series failed and renormalize the weights, instead
    /// of failing the run.
    #[arg(long)]
    allow_missing_cells: bool,

    /// Acceptance threshold for name matching.
    #[arg(long, default_value_t = 0.90)]
    match_threshold: f64,

    /// Import a previously emitted (possibly corrected) match table CSV.
    #[arg(long)]
    match_table: Option<PathBuf>,

    /// Series file format: csv|json.
    #[arg(long, default_value = "csv")]
    emit: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Recipe JSON file.
    #[arg(long)]
    recipe: PathBuf,

    /// Output transaction CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Transaction CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Output directory for benchmark.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Repetitions per method; medians are reported.
    #[arg(long, default_value_t = 5)]
    reps: usize,

    /// Filter, repeatable and applied in order.
    #[arg(long = "filter")]
    filters: Vec<String>,
}

#[derive(Args)]
struct MatchArgs {
    /// Transaction CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Output match table CSV.
    #[arg(long)]
    out: PathBuf,

    /// Acceptance threshold for name matching.
    #[arg(long, default_value_t = 0.90)]
    threshold: f64,
}

fn parse_month_flag(name: &str, value: &str) -> Result<Month> {
    value
        .parse::<Month>()
        .map_err(|_| Error::InvalidConfig(format!("--{name} expects YYYY-MM, got `{value}`")))
}

fn parse_filters(specs: &[String]) -> Result<Vec<FilterSpec>> {
    specs.iter().map(|s| s.parse::<FilterSpec>()).collect()
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig> {
    let method = IndexMethod::parse(&args.index, args.chained)?;
    let mut config = RunConfig::new(args.inputs.clone(), args.out.clone(), method);
    if let Some(base) = &args.base {
        config.base_month = Some(parse_month_flag("base", base)?);
    }
    if let Some(range) = &args.months {
        let (first, last) = range.split_once(':').ok_or_else(|| {
            Error::InvalidConfig(format!("--months expects FIRST:LAST, got `{range}`"))
        })?;
        config.month_range =
            Some((parse_month_flag("months", first)?, parse_month_flag("months", last)?));
    }
    config.window_length = args.window;
    if args.splice != "none" {
        config.splice = Some(args.splice.parse::<SpliceMethod>()?);
    }
    config.filters = parse_filters(&args.filters)?;
    if args.aggregate != "none" {
        config.partition = Some(args.aggregate.parse::<Partition>()?);
    }
    config.agg_formula = args.agg_formula.parse()?;
    config.allow_missing_cells = args.allow_missing_cells;
    config.match_threshold = args.match_threshold;
    config.match_table = args.match_table.clone();
    config.emit = args.emit.parse::<EmitFormat>()?;
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = build_run_config(args)?;
    let artifacts = pipeline::run(&config)?;
    for (label, series) in &artifacts.series {
        println!(
            "{label}: {} points, base {}, method {}",
            series.points().len(),
            series.base(),
            series.meta.method
        );
    }
    println!("series: {}", artifacts.series_path.display());
    println!("manifest: {}", artifacts.manifest_path.display());
    println!("rejects: {}", artifacts.rejects_path.display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let recipe: PanelRecipe = serde_json::from_reader(fs::File::open(&args.recipe)?)?;
    let records = generate(&recipe)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_transactions(&records, fs::File::create(&args.out)?)?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let method = IndexMethod::parse("geks", false)?;
    let mut config = RunConfig::new(args.inputs.clone(), args.out.clone(), method);
    config.filters = parse_filters(&args.filters)?;
    let report = pipeline::benchmark(&config, args.reps)?;
    let text = serde_json::to_string_pretty(&report)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("benchmark.json");
    fs::write(&path, text.clone() + "\n")?;
    println!("{text}");
    println!("report: {}", path.display());
    Ok(())
}

fn cmd_match(args: &MatchArgs) -> Result<()> {
    if !args.threshold.is_finite() || !(0.0..=1.0).contains(&args.threshold) {
        return Err(Error::InvalidConfig(format!(
            "match threshold must be in [0, 1], got {}",
            args.threshold
        )));
    }
    let mut records = Vec::new();
    for path in &args.inputs {
        let outcome = parse_transactions(fs::File::open(path)?, CsvDialect::default())?;
        records.extend(outcome.records);
    }
    let table = match_products(records.iter().map(Observation::of), args.threshold);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    table.to_csv(fs::File::create(&args.out)?)?;
    println!(
        "{} observation keys, {} products, written to {}",
        table.len(),
        table.product_count(),
        args.out.display()
    );
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            std::process::exit(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Match(args) => cmd_match(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(e.class().exit_code());
    }
}
