//! Window-based indices that are transitive by construction.
//!
//! Four methods share the same shape: given a window of consecutive months,
//! produce a series based at the window's first month. GEKS and CCDI take
//! geometric means of bilateral links across all month pairs; the
//! Geary-Khamis ([`gk`]) and time-product-dummy ([`tpd`]) methods estimate
//! per-product quality factors and deflate with them.
//!
//! Filters run per month pair. One survivor set serves both directions of a
//! pair, which keeps every link time-reversible and the resulting matrix
//! skew-symmetric in logs.

pub mod gk;
pub mod tpd;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bilateral::{weighted_index, MatchedPair, WeightedFormula};
use crate::error::{Error, Result};
use crate::filtering::{apply_filters, FilterSpec};
use crate::ingest::ScopePanel;
use crate::matching::ProductId;
use crate::month::Month;
use crate::num;
use crate::series::{IndexSeries, SeriesMeta};

/// Which multilateral method to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultilateralMethod {
    Geks,
    Ccdi,
    Gk,
    Tpd,
}

impl fmt::Display for MultilateralMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MultilateralMethod::Geks => "geks",
            MultilateralMethod::Ccdi => "ccdi",
            MultilateralMethod::Gk => "gk",
            MultilateralMethod::Tpd => "tpd",
        })
    }
}

impl FromStr for MultilateralMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<MultilateralMethod> {
        Ok(match s {
            "geks" => MultilateralMethod::Geks,
            "ccdi" => MultilateralMethod::Ccdi,
            "gk" => MultilateralMethod::Gk,
            "tpd" => MultilateralMethod::Tpd,
            _ => return Err(Error::Parameter(format!("unknown multilateral method {s:?}"))),
        })
    }
}

/// A multilateral method plus the knobs shared by all windows it will see.
#[derive(Debug, Clone)]
pub struct MultilateralEngine {
    pub method: MultilateralMethod,
    pub filters: Vec<FilterSpec>,
    /// Convergence tolerance for the Geary-Khamis fixed point.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl MultilateralEngine {
    pub fn new(method: MultilateralMethod) -> MultilateralEngine {
        MultilateralEngine { method, filters: Vec::new(), tolerance: 1e-10, max_iter: 1000 }
    }

    pub fn with_filters(mut self, filters: Vec<FilterSpec>) -> MultilateralEngine {
        self.filters = filters;
        self
    }

    /// Series over `window`, based at its first month.
    pub fn series(&self, scope: &ScopePanel, window: &[Month]) -> Result<IndexSeries> {
        match self.method {
            MultilateralMethod::Geks => geks(scope, window, &self.filters),
            MultilateralMethod::Ccdi => ccdi(scope, window, &self.filters),
            MultilateralMethod::Gk => {
                gk::gk_solve(scope, window, &self.filters, self.tolerance, self.max_iter)
                    .map(|solution| solution.series)
            }
            MultilateralMethod::Tpd => {
                tpd::tpd(scope, window, &self.filters).map(|solution| solution.series)
            }
        }
    }
}

/// Windows must be consecutive months, all present in the scope.
pub(crate) fn check_window(scope: &ScopePanel, window: &[Month]) -> Result<()> {
    if window.len() < 2 {
        return Err(Error::Parameter("a multilateral window needs at least two months".into()));
    }
    for pair in window.windows(2) {
        if pair[1] != pair[0].next() {
            return Err(Error::Parameter(format!(
                "window months must be consecutive, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    for &month in window {
        if !scope.has_month(month) {
            return Err(Error::MissingMonth(month));
        }
    }
    Ok(())
}

fn month_pairs(len: usize) -> Vec<(usize, usize)> {
    (0..len).flat_map(|a| (a + 1..len).map(move |b| (a, b))).collect()
}

/// Survivor sets for every month pair a < b of the window, possibly empty.
pub(crate) fn pair_survivors(
    scope: &ScopePanel,
    window: &[Month],
    filters: &[FilterSpec],
) -> Vec<((usize, usize), Vec<ProductId>)> {
    month_pairs(window.len())
        .into_par_iter()
        .map(|(a, b)| ((a, b), apply_filters(scope, window[a], window[b], filters)))
        .collect()
}

/// Products taking part in at least one surviving month pair, ascending.
pub(crate) fn window_universe(
    scope: &ScopePanel,
    window: &[Month],
    filters: &[FilterSpec],
) -> Vec<ProductId> {
    let mut universe = BTreeSet::new();
    for (_, set) in pair_survivors(scope, window, filters) {
        universe.extend(set);
    }
    universe.into_iter().collect()
}

/// GEKS-style series: for each target month, the geometric mean over all
/// bridge months τ of link(τ, target) / link(τ, base).
fn gm_series(
    scope: &ScopePanel,
    window: &[Month],
    filters: &[FilterSpec],
    link: WeightedFormula,
    method: MultilateralMethod,
) -> Result<IndexSeries> {
    check_window(scope, window)?;
    let n = window.len();
    let links: Vec<((usize, usize), f64)> = month_pairs(n)
        .into_par_iter()
        .map(|(a, b)| {
            let survivors = apply_filters(scope, window[a], window[b], filters);
            if survivors.is_empty() {
                return Err(Error::MissingLink { a: window[a], b: window[b] });
            }
            let pair = MatchedPair::new(scope, window[a], window[b], &survivors);
            Ok(((a, b), weighted_index(link, &pair)?.ln()))
        })
        .collect::<Result<_>>()?;

    // Skew-symmetric log-link matrix; the reverse link is the exact negation
    // because both directions share the survivor set.
    let mut log_link = vec![vec![0.0_f64; n]; n];
    for ((a, b), value) in links {
        log_link[a][b] = value;
        log_link[b][a] = -value;
    }

    let points = window
        .iter()
        .enumerate()
        .map(|(t, &month)| {
            let log_index =
                num::sum((0..n).map(|tau| log_link[tau][t] - log_link[tau][0])) / n as f64;
            (month, log_index.exp())
        })
        .collect();

    let meta = SeriesMeta {
        window: Some(n),
        filters: filters.iter().map(|f| f.to_string()).collect(),
        ..SeriesMeta::bare(method.to_string())
    };
    IndexSeries::new(window[0], points, meta)
}

/// Geometric mean of Fisher links across all month pairs.
pub fn geks(scope: &ScopePanel, window: &[Month], filters: &[FilterSpec]) -> Result<IndexSeries> {
    gm_series(scope, window, filters, WeightedFormula::Fisher, MultilateralMethod::Geks)
}

/// Geometric mean of Törnqvist links across all month pairs.
pub fn ccdi(scope: &ScopePanel, window: &[Month], filters: &[FilterSpec]) -> Result<IndexSeries> {
    gm_series(scope, window, filters, WeightedFormula::Tornqvist, MultilateralMethod::Ccdi)
}
