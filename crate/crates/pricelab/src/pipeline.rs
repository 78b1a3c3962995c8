//! End-to-end runs: parse transactions, resolve products, build the panel,
//! compute per-cell index series in parallel, aggregate, and write artifacts.
//!
//! A run emits three files into the output directory: the series (CSV or
//! JSON), a JSON manifest echoing the configuration with reconciling record
//! counts, and the per-row rejects report. Nothing in a run is randomized or
//! time-stamped, so identical inputs and configuration produce byte-identical
//! artifacts; cells are computed in a parallel worker pool but merged in
//! sorted key order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregation::{
    aggregate_series, AggFormula, CellIndexSet, CellKey, CellSeries, Partition,
};
use crate::bilateral::{bilateral_index, chain_series, BilateralFormula, MatchedPair};
use crate::error::{Error, Result};
use crate::extension::{extended_series, SpliceMethod};
use crate::filtering::{apply_filters, FilterSpec};
use crate::ingest::{
    build_panel, parse_transactions, CsvDialect, ProductPanel, ScopePanel, TransactionRecord,
};
use crate::matching::{match_products, MatchTable, Observation, ProductId};
use crate::month::Month;
use crate::multilateral::{MultilateralEngine, MultilateralMethod};
use crate::num;
use crate::series::{IndexSeries, SeriesMeta};

/// Which index engine a run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMethod {
    /// A bilateral formula: chained through consecutive months, or compared
    /// directly against the base month.
    Bilateral {
        formula: BilateralFormula,
        chained: bool,
    },
    Multilateral(MultilateralMethod),
}

impl IndexMethod {
    /// Resolve a method id plus the chained flag.
    pub fn parse(id: &str, chained: bool) -> Result<IndexMethod> {
        if let Ok(method) = id.parse::<MultilateralMethod>() {
            if chained {
                return Err(Error::InvalidConfig(format!(
                    "--chained applies to bilateral formulas, not {method}"
                )));
            }
            return Ok(IndexMethod::Multilateral(method));
        }
        match id.parse::<BilateralFormula>() {
            Ok(formula) => Ok(IndexMethod::Bilateral { formula, chained }),
            Err(_) => Err(Error::Parameter(format!("unknown index method `{id}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            IndexMethod::Bilateral { formula, chained: true } => format!("chained-{formula}"),
            IndexMethod::Bilateral { formula, chained: false } => {
                format!("fixed-base-{formula}")
            }
            IndexMethod::Multilateral(method) => method.to_string(),
        }
    }
}

/// Output format of the series file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmitFormat {
    #[default]
    Csv,
    Json,
}

impl std::fmt::Display for EmitFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Json => "json",
        })
    }
}

impl std::str::FromStr for EmitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            other => {
                Err(Error::Parameter(format!("unknown emit format `{other}`, expected csv|json")))
            }
        }
    }
}

/// Everything a run needs. Combination rules are checked by [`RunConfig::validate`]
/// before any file is read.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub method: IndexMethod,
    /// Rebase the emitted series onto this month; default is the natural
    /// base (first scope month, or the anchor December of a fixed-base run).
    pub base_month: Option<Month>,
    /// Restrict the panel to this inclusive month range.
    pub month_range: Option<(Month, Month)>,
    pub window_length: usize,
    pub splice: Option<SpliceMethod>,
    pub filters: Vec<FilterSpec>,
    /// `None` computes one series over the whole panel; otherwise per-cell
    /// series are aggregated with `agg_formula`.
    pub partition: Option<Partition>,
    pub agg_formula: AggFormula,
    pub allow_missing_cells: bool,
    pub match_threshold: f64,
    /// Import a previously emitted (possibly corrected) match table instead
    /// of matching from scratch.
    pub match_table: Option<PathBuf>,
    pub emit: EmitFormat,
}

impl RunConfig {
    pub fn new(inputs: Vec<PathBuf>, output_dir: PathBuf, method: IndexMethod) -> RunConfig {
        RunConfig {
            inputs,
            output_dir,
            method,
            base_month: None,
            month_range: None,
            window_length: 13,
            splice: None,
            filters: Vec::new(),
            partition: None,
            agg_formula: AggFormula::Laspeyres,
            allow_missing_cells: false,
            match_threshold: 0.90,
            match_table: None,
            emit: EmitFormat::Csv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::InvalidConfig("no input files given".into()));
        }
        if self.splice.is_some() && !matches!(self.method, IndexMethod::Multilateral(_)) {
            return Err(Error::InvalidConfig(
                "splicing extends a multilateral window; pick geks|ccdi|gk|tpd".into(),
            ));
        }
        if self.window_length < 2 {
            return Err(Error::InvalidConfig(format!(
                "window length must be at least 2, got {}",
                self.window_length
            )));
        }
        if self.splice == Some(SpliceMethod::Fbmw) && self.window_length < 13 {
            return Err(Error::InvalidConfig(format!(
                "the rolling-window fixed-base method needs a window of at least 13 months, got {}",
                self.window_length
            )));
        }
        if !self.match_threshold.is_finite() || !(0.0..=1.0).contains(&self.match_threshold) {
            return Err(Error::InvalidConfig(format!(
                "match threshold must be in [0, 1], got {}",
                self.match_threshold
            )));
        }
        if let Some((first, last)) = self.month_range {
            if first > last {
                return Err(Error::InvalidConfig(format!(
                    "month range runs backwards: {first} after {last}"
                )));
            }
        }
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            output_dir: self.output_dir.display().to_string(),
            method: self.method.name(),
            base_month: self.base_month.map(|m| m.to_string()),
            month_range: self.month_range.map(|(a, b)| [a.to_string(), b.to_string()]),
            window_length: self.window_length,
            splice: self.splice.map(|s| s.to_string()),
            filters: self.filters.iter().map(|f| f.to_string()).collect(),
            aggregate: self.partition.map(|p| p.to_string()),
            aggregation_formula: self.agg_formula.to_string(),
            allow_missing_cells: self.allow_missing_cells,
            match_threshold: self.match_threshold,
            match_table: self.match_table.as_ref().map(|p| p.display().to_string()),
            emit: self.emit.to_string(),
        }
    }
}

/// Configuration echo embedded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub inputs: Vec<String>,
    pub output_dir: String,
    pub method: String,
    pub base_month: Option<String>,
    pub month_range: Option<[String; 2]>,
    pub window_length: usize,
    pub splice: Option<String>,
    pub filters: Vec<String>,
    pub aggregate: Option<String>,
    pub aggregation_formula: String,
    pub allow_missing_cells: bool,
    pub match_threshold: f64,
    pub match_table: Option<String>,
    pub emit: String,
}

/// Record counts; `records = accepted + rejected` always holds.
#[derive(Debug, Clone, Serialize)]
pub struct Counts {
    /// Input rows read (accepted + rejected).
    pub records: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// Accepted records that resolved through the match table.
    pub matched: u64,
    pub unmatched: u64,
    /// Netted (product, outlet, month) cells dropped for non-positive
    /// quantity or turnover.
    pub netted_cells_dropped: u64,
    /// Observations removed by the configured filters, summed over the
    /// consecutive-month comparisons of the pooled panel.
    pub filter_removed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub computed: Vec<String>,
    pub excluded: Vec<String>,
}

/// The JSON run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: ConfigEcho,
    pub counts: Counts,
    pub cells: CellReport,
}

/// What [`run`] produced and where it wrote it.
#[derive(Debug)]
pub struct RunArtifacts {
    pub series_path: PathBuf,
    pub manifest_path: PathBuf,
    pub rejects_path: PathBuf,
    /// Emitted series in output order: each partition cell, then `total`
    /// when aggregating; a single `all` series otherwise.
    pub series: Vec<(String, IndexSeries)>,
    pub manifest: Manifest,
}

struct LoadedPanel {
    panel: ProductPanel,
    counts: Counts,
    rejects: Vec<(String, u64, String)>,
    first: Month,
    last: Month,
}

fn load_panel(config: &RunConfig) -> Result<LoadedPanel> {
    let mut records: Vec<TransactionRecord> = Vec::new();
    let mut rejects: Vec<(String, u64, String)> = Vec::new();
    let open = |path: &PathBuf| {
        fs::File::open(path).map_err(|source| Error::Input { path: path.clone(), source })
    };
    for path in &config.inputs {
        let file = open(path)?;
        let outcome = parse_transactions(file, CsvDialect::default())?;
        let label = path.display().to_string();
        rejects.extend(outcome.rejects.into_iter().map(|r| (label.clone(), r.line, r.reason)));
        records.extend(outcome.records);
    }
    let accepted = records.len() as u64;
    let rejected = rejects.len() as u64;

    let table = match &config.match_table {
        Some(path) => MatchTable::from_csv(open(path)?)?,
        None => match_products(records.iter().map(Observation::of), config.match_threshold),
    };
    let build = build_panel(&records, &table)?;
    let unmatched = build.unmatched.len() as u64;

    let panel_first = build.panel.first_month().expect("non-empty panel");
    let panel_last = build.panel.last_month().expect("non-empty panel");
    let (first, last) = match config.month_range {
        Some((a, b)) => {
            let first = a.max(panel_first);
            let last = b.min(panel_last);
            if first > last {
                return Err(Error::InvalidConfig(format!(
                    "month range {a}..{b} does not intersect the panel ({panel_first}..{panel_last})"
                )));
            }
            (first, last)
        }
        None => (panel_first, panel_last),
    };

    Ok(LoadedPanel {
        panel: build.panel,
        counts: Counts {
            records: accepted + rejected,
            accepted,
            rejected,
            matched: accepted - unmatched,
            unmatched,
            netted_cells_dropped: build.excluded_cells,
            filter_removed: 0,
        },
        rejects,
        first,
        last,
    })
}

/// Drop months outside `[first, last]` and products left without cells.
fn restrict_scope(scope: ScopePanel, first: Month, last: Month) -> ScopePanel {
    let months: Vec<Month> =
        scope.months.into_iter().filter(|m| (first..=last).contains(m)).collect();
    let cells: BTreeMap<(ProductId, Month), _> =
        scope.cells.into_iter().filter(|((_, m), _)| (first..=last).contains(m)).collect();
    let products: Vec<ProductId> =
        cells.keys().map(|(p, _)| p.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    ScopePanel { outlet: scope.outlet, subgroup: scope.subgroup, months, products, cells }
}

/// Total expenditure per month within a scope.
fn monthly_expenditures(scope: &ScopePanel) -> BTreeMap<Month, f64> {
    scope
        .months
        .iter()
        .map(|&m| {
            let values =
                scope.products.iter().filter_map(|p| scope.cell(p, m)).map(|c| c.expenditure);
            (m, num::sum(values))
        })
        .collect()
}

/// Observations removed by the filters over consecutive-month comparisons.
fn filter_removals(scope: &ScopePanel, filters: &[FilterSpec]) -> u64 {
    if filters.is_empty() {
        return 0;
    }
    scope
        .months
        .windows(2)
        .map(|w| {
            let matched = scope.matched_set(w[0], w[1]).len();
            let kept = apply_filters(scope, w[0], w[1], filters).len();
            (matched - kept) as u64
        })
        .sum()
}

/// Bilateral series comparing each month directly with the base month.
fn fixed_base_series(
    formula: BilateralFormula,
    scope: &ScopePanel,
    filters: &[FilterSpec],
) -> Result<IndexSeries> {
    let base = scope.months[0];
    let mut points = Vec::with_capacity(scope.months.len());
    for &t in &scope.months {
        let value = if t == base {
            1.0
        } else {
            let set = apply_filters(scope, base, t, filters);
            bilateral_index(formula, &MatchedPair::new(scope, base, t, &set))?
        };
        points.push((t, value));
    }
    let meta = SeriesMeta {
        filters: filters.iter().map(ToString::to_string).collect(),
        ..SeriesMeta::bare(format!("fixed-base-{formula}"))
    };
    IndexSeries::new(base, points, meta)
}

/// Index series for one scope under the configured method.
fn scope_series(config: &RunConfig, scope: &ScopePanel) -> Result<IndexSeries> {
    if scope.months.is_empty() {
        return Err(Error::EmptyPanel { rejected: 0 });
    }
    let series = match config.method {
        IndexMethod::Bilateral { formula, chained: true } => {
            chain_series(formula, scope, &config.filters)?
        }
        IndexMethod::Bilateral { formula, chained: false } => {
            fixed_base_series(formula, scope, &config.filters)?
        }
        IndexMethod::Multilateral(method) => {
            let engine = MultilateralEngine::new(method).with_filters(config.filters.clone());
            match config.splice {
                Some(splice) => extended_series(splice, &engine, scope, config.window_length)?,
                None => engine.series(scope, &scope.months)?,
            }
        }
    };
    match config.base_month {
        Some(base) if base != series.base() => series.rebase(base),
        _ => Ok(series),
    }
}

/// A partition cell plus the outlet/subgroup selectors that carve its scope.
type CellDef = (CellKey, Option<String>, Option<String>);

/// Cell definitions for the configured partition, in output order.
fn cell_definitions(panel: &ProductPanel, partition: Option<Partition>) -> Result<Vec<CellDef>> {
    let defs = match partition {
        None => vec![(CellKey { outlet: None, subgroup: None }, None, None)],
        Some(Partition::Subgroup) => {
            let labels = panel.subgroup_labels();
            if labels.is_empty() {
                return Err(Error::InvalidConfig(
                    "partition by subgroup needs a subgroup column in the input".into(),
                ));
            }
            labels.into_iter().map(|s| (CellKey::subgroup(s.clone()), None, Some(s))).collect()
        }
        Some(Partition::Outlet) => panel
            .outlets
            .iter()
            .map(|o| (CellKey::outlet(o.clone()), Some(o.clone()), None))
            .collect(),
        Some(Partition::Both) => {
            let labels = panel.subgroup_labels();
            if labels.is_empty() {
                return Err(Error::InvalidConfig(
                    "partition by outlet and subgroup needs a subgroup column in the input".into(),
                ));
            }
            panel
                .outlets
                .iter()
                .flat_map(|o| {
                    labels.iter().map(|s| {
                        (CellKey::both(o.clone(), s.clone()), Some(o.clone()), Some(s.clone()))
                    })
                })
                .collect()
        }
    };
    Ok(defs)
}

/// Execute a run and write the series, manifest and rejects files.
pub fn run(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let mut loaded = load_panel(config)?;

    let pooled = restrict_scope(loaded.panel.scope(None, None), loaded.first, loaded.last);
    loaded.counts.filter_removed = filter_removals(&pooled, &config.filters);

    let defs = cell_definitions(&loaded.panel, config.partition)?;
    let computed: Vec<(CellKey, ScopePanel, Result<IndexSeries>)> = defs
        .into_par_iter()
        .map(|(key, outlet, subgroup)| {
            let scope = restrict_scope(
                loaded.panel.scope(outlet.as_deref(), subgroup.as_deref()),
                loaded.first,
                loaded.last,
            );
            let series = scope_series(config, &scope);
            (key, scope, series)
        })
        .collect();

    let mut series_out: Vec<(String, IndexSeries)> = Vec::new();
    let mut excluded: Vec<String> = Vec::new();
    match config.partition {
        None => {
            let (_, _, result) = computed.into_iter().next().expect("one scope");
            series_out.push(("all".to_string(), result?));
        }
        Some(partition) => {
            let mut set = CellIndexSet::new(partition);
            for (key, scope, result) in computed {
                let label = key.to_string();
                let outcome = result.and_then(|series| {
                    let expenditures = monthly_expenditures(&scope);
                    let base_expenditure = expenditures.get(&series.base()).copied().unwrap_or(0.0);
                    let cell = CellSeries { series, base_expenditure, expenditures };
                    set.insert(key, cell)
                });
                match outcome {
                    Ok(()) => {}
                    Err(_) if config.allow_missing_cells => excluded.push(label),
                    Err(e) => return Err(e),
                }
            }
            if set.is_empty() {
                return Err(Error::MissingCells { month: loaded.first, cells: excluded });
            }
            for (key, cell) in set.cells() {
                series_out.push((key.to_string(), cell.series.clone()));
            }
            let total = aggregate_series(&set, config.agg_formula, config.allow_missing_cells)?;
            series_out.push(("total".to_string(), total));
        }
    }

    let manifest = Manifest {
        config: config.echo(),
        counts: loaded.counts,
        cells: CellReport {
            computed: series_out.iter().map(|(label, _)| label.clone()).collect(),
            excluded,
        },
    };

    fs::create_dir_all(&config.output_dir)?;
    let series_path = match config.emit {
        EmitFormat::Csv => {
            let path = config.output_dir.join("series.csv");
            write_series_csv(&series_out, &path)?;
            path
        }
        EmitFormat::Json => {
            let path = config.output_dir.join("series.json");
            write_series_json(&series_out, &path)?;
            path
        }
    };
    let manifest_path = config.output_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    let rejects_path = config.output_dir.join("rejects.csv");
    write_rejects_csv(&loaded.rejects, &rejects_path)?;

    Ok(RunArtifacts { series_path, manifest_path, rejects_path, series: series_out, manifest })
}

fn write_series_csv(series: &[(String, IndexSeries)], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["month", "value", "method", "cell"])?;
    for (label, s) in series {
        for &(month, value) in s.points() {
            writer.write_record([
                month.to_string(),
                value.to_string(),
                s.meta.method.clone(),
                label.clone(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn write_series_json(series: &[(String, IndexSeries)], path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Entry<'a> {
        cell: &'a str,
        series: &'a IndexSeries,
    }
    let entries: Vec<Entry> =
        series.iter().map(|(label, s)| Entry { cell: label, series: s }).collect();
    fs::write(path, serde_json::to_string_pretty(&entries)? + "\n")?;
    Ok(())
}

fn write_rejects_csv(rejects: &[(String, u64, String)], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["file", "line", "reason"])?;
    for (file, line, reason) in rejects {
        writer.write_record([file.as_str(), &line.to_string(), reason.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Timing report of the standard benchmark triple.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub reps: usize,
    pub months: usize,
    pub products: usize,
    /// Median wall-clock milliseconds per full-series computation.
    pub median_ms: BTreeMap<String, f64>,
    pub ratios: BTreeMap<String, f64>,
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

/// Time chained Jevons, chained Fisher and the GEKS window on the pooled
/// panel, reporting per-method medians over `reps` repetitions and the
/// pairwise ratios against GEKS.
pub fn benchmark(config: &RunConfig, reps: usize) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::InvalidConfig("benchmark needs at least one repetition".into()));
    }
    config.validate()?;
    let loaded = load_panel(config)?;
    let scope = restrict_scope(loaded.panel.scope(None, None), loaded.first, loaded.last);

    let time = |compute: &(dyn Fn() -> Result<IndexSeries> + Sync)| -> Result<f64> {
        let mut samples = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let series = compute()?;
            std::hint::black_box(&series);
            samples.push(start.elapsed().as_secs_f64() * 1e3);
        }
        Ok(median(&mut samples))
    };

    let filters = config.filters.clone();
    let mut median_ms = BTreeMap::new();
    median_ms.insert(
        "chain-jevons".to_string(),
        time(&|| {
            chain_series(
                BilateralFormula::Unweighted(crate::bilateral::UnweightedFormula::Jevons),
                &scope,
                &filters,
            )
        })?,
    );
    median_ms.insert(
        "chain-fisher".to_string(),
        time(&|| {
            chain_series(
                BilateralFormula::Weighted(crate::bilateral::WeightedFormula::Fisher),
                &scope,
                &filters,
            )
        })?,
    );
    let engine = MultilateralEngine::new(MultilateralMethod::Geks).with_filters(filters.clone());
    median_ms.insert("geks".to_string(), time(&|| engine.series(&scope, &scope.months))?);

    let geks = median_ms["geks"];
    let mut ratios = BTreeMap::new();
    ratios.insert("geks/chain-jevons".to_string(), geks / median_ms["chain-jevons"]);
    ratios.insert("geks/chain-fisher".to_string(), geks / median_ms["chain-fisher"]);

    Ok(BenchReport {
        reps,
        months: scope.months.len(),
        products: scope.products.len(),
        median_ms,
        ratios,
    })
}
