//! Aggregation of cell-level index series into group indices.
//!
//! A run may partition the panel into cells (per subgroup, per outlet, or
//! their cartesian product) and compute one index series per cell. This
//! module combines those series into a single group series using expenditure
//! weights: Laspeyres (base-period shares) or Fisher (geometric mean of the
//! Laspeyres aggregate and a Paasche-type harmonic aggregate with
//! current-period shares).
//!
//! Weights stay anchored at the run's base month for the whole series; there
//! is no seasonal re-basing of weights.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::month::Month;
use crate::num;
use crate::series::IndexSeries;

/// How the panel is split into cells before aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    /// One cell per product subgroup.
    Subgroup,
    /// One cell per outlet.
    Outlet,
    /// One cell per (outlet, subgroup) pair, aggregated in a single step.
    Both,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Partition::Subgroup => "subgroup",
            Partition::Outlet => "outlet",
            Partition::Both => "both",
        };
        f.write_str(name)
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgroup" => Ok(Partition::Subgroup),
            "outlet" => Ok(Partition::Outlet),
            "both" => Ok(Partition::Both),
            other => Err(Error::Parameter(format!(
                "unknown partition `{other}`, expected subgroup|outlet|both"
            ))),
        }
    }
}

/// Weighted mean used to combine cell indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFormula {
    /// Arithmetic mean of cell indices with base-period expenditure shares.
    Laspeyres,
    /// Geometric mean of the Laspeyres aggregate and a Paasche-type
    /// harmonic aggregate with current-period expenditure shares.
    Fisher,
}

impl fmt::Display for AggFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AggFormula::Laspeyres => "laspeyres",
            AggFormula::Fisher => "fisher",
        };
        f.write_str(name)
    }
}

impl FromStr for AggFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laspeyres" => Ok(AggFormula::Laspeyres),
            "fisher" => Ok(AggFormula::Fisher),
            other => Err(Error::Parameter(format!(
                "unknown aggregation formula `{other}`, expected laspeyres|fisher"
            ))),
        }
    }
}

/// Identifies one cell of a partition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub outlet: Option<String>,
    pub subgroup: Option<String>,
}

impl CellKey {
    pub fn subgroup(name: impl Into<String>) -> Self {
        CellKey { outlet: None, subgroup: Some(name.into()) }
    }

    pub fn outlet(name: impl Into<String>) -> Self {
        CellKey { outlet: Some(name.into()), subgroup: None }
    }

    pub fn both(outlet: impl Into<String>, subgroup: impl Into<String>) -> Self {
        CellKey { outlet: Some(outlet.into()), subgroup: Some(subgroup.into()) }
    }

    fn matches(&self, partition: Partition) -> bool {
        match partition {
            Partition::Subgroup => self.outlet.is_none() && self.subgroup.is_some(),
            Partition::Outlet => self.outlet.is_some() && self.subgroup.is_none(),
            Partition::Both => self.outlet.is_some() && self.subgroup.is_some(),
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.outlet, &self.subgroup) {
            (Some(o), Some(s)) => write!(f, "{o}/{s}"),
            (Some(o), None) => f.write_str(o),
            (None, Some(s)) => f.write_str(s),
            (None, None) => f.write_str("all"),
        }
    }
}

/// One cell's index series together with its expenditure weights.
#[derive(Debug, Clone)]
pub struct CellSeries {
    pub series: IndexSeries,
    /// Total expenditure in the base month; fixed weight for the whole run.
    pub base_expenditure: f64,
    /// Total expenditure per month; current-period weights for Fisher.
    pub expenditures: BTreeMap<Month, f64>,
}

/// The full set of cells for one partition, keyed canonically.
#[derive(Debug, Clone)]
pub struct CellIndexSet {
    pub partition: Partition,
    cells: BTreeMap<CellKey, CellSeries>,
}

impl CellIndexSet {
    pub fn new(partition: Partition) -> Self {
        CellIndexSet { partition, cells: BTreeMap::new() }
    }

    /// Add a cell, validating its weights and that its key fits the
    /// partition and its series shares the base month of earlier cells.
    pub fn insert(&mut self, key: CellKey, cell: CellSeries) -> Result<()> {
        if !key.matches(self.partition) {
            return Err(Error::Parameter(format!(
                "cell key `{key}` does not fit partition `{}`",
                self.partition
            )));
        }
        if !cell.base_expenditure.is_finite() || cell.base_expenditure <= 0.0 {
            return Err(Error::Parameter(format!(
                "cell `{key}` has non-positive base expenditure {}",
                cell.base_expenditure
            )));
        }
        if let Some(bad) = cell.expenditures.iter().find(|(_, e)| !e.is_finite() || **e < 0.0) {
            return Err(Error::Parameter(format!(
                "cell `{key}` has invalid expenditure {} at {}",
                bad.1, bad.0
            )));
        }
        if let Some(base) = self.base() {
            if cell.series.base() != base {
                return Err(Error::InvalidConfig(format!(
                    "cell `{key}` is based at {}, other cells at {base}",
                    cell.series.base()
                )));
            }
        }
        self.cells.insert(key, cell);
        Ok(())
    }

    pub fn cells(&self) -> &BTreeMap<CellKey, CellSeries> {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Common base month of the cell series.
    pub fn base(&self) -> Option<Month> {
        self.cells.values().next().map(|c| c.series.base())
    }

    /// Union of months covered by any cell, ascending.
    pub fn months(&self) -> Vec<Month> {
        let mut months: Vec<Month> = self.cells.values().flat_map(|c| c.series.months()).collect();
        months.sort_unstable();
        months.dedup();
        months
    }
}

/// Aggregate the cell indices at one month.
///
/// Cells without a value or expenditure at `t` are an error unless
/// `allow_missing` is set, in which case they are dropped and the weights of
/// the remaining cells renormalized.
pub fn aggregate(
    set: &CellIndexSet,
    formula: AggFormula,
    t: Month,
    allow_missing: bool,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Parameter("no cells to aggregate".into()));
    }
    let mut missing = Vec::new();
    // (index value, base expenditure, current expenditure) per included cell.
    let mut included: Vec<(f64, f64, f64)> = Vec::with_capacity(set.len());
    for (key, cell) in set.cells() {
        match (cell.series.value(t), cell.expenditures.get(&t)) {
            (Some(p), Some(&e)) => included.push((p, cell.base_expenditure, e)),
            _ => missing.push(key.to_string()),
        }
    }
    if (!missing.is_empty() && !allow_missing) || included.is_empty() {
        return Err(Error::MissingCells { month: t, cells: missing });
    }

    // Unnormalized weights with a shared denominator: at the base month every
    // cell value is exactly 1, so numerator and denominator are the same sum
    // and the aggregate is exactly 1 as well.
    let base_total = num::sum(included.iter().map(|&(_, w0, _)| w0));
    let laspeyres = num::sum(included.iter().map(|&(p, w0, _)| w0 * p)) / base_total;
    match formula {
        AggFormula::Laspeyres => Ok(laspeyres),
        AggFormula::Fisher => {
            let current_total = num::sum(included.iter().map(|&(_, _, wt)| wt));
            if current_total <= 0.0 {
                // Zero turnover across every included cell: the harmonic
                // component degenerates to 0/0.
                return Err(Error::NonFiniteValue(t));
            }
            let paasche = current_total / num::sum(included.iter().map(|&(p, _, wt)| wt / p));
            Ok((laspeyres * paasche).sqrt())
        }
    }
}

/// Aggregate every month covered by the cells into one group series.
pub fn aggregate_series(
    set: &CellIndexSet,
    formula: AggFormula,
    allow_missing: bool,
) -> Result<IndexSeries> {
    if set.is_empty() {
        return Err(Error::Parameter("no cells to aggregate".into()));
    }
    let base = set.base().expect("non-empty set has a base");
    let points = set
        .months()
        .into_iter()
        .map(|t| Ok((t, aggregate(set, formula, t, allow_missing)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut meta = set.cells().values().next().expect("non-empty").series.meta.clone();
    meta.aggregation = Some(format!("{formula} over {}", set.partition));
    IndexSeries::new(base, points, meta)
}
