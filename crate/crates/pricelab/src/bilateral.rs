//! Two-period index formulas and month-to-month chaining.
//!
//! A [`MatchedPair`] holds the products present in both months of a
//! comparison, with prices, quantities, and within-set expenditure shares.
//! Formulas come in two families: unweighted ones need prices only, weighted
//! ones use quantities or shares. All reductions run in ascending product
//! order so results do not depend on input order.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filtering::{apply_filters, FilterSpec};
use crate::ingest::ScopePanel;
use crate::matching::ProductId;
use crate::month::Month;
use crate::num;
use crate::series::{IndexSeries, SeriesMeta};

/// Formulas that use prices only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnweightedFormula {
    Jevons,
    Dutot,
    Carli,
    Harmonic,
    Cswd,
}

/// Formulas that weight price changes by quantities or expenditure shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightedFormula {
    Laspeyres,
    Paasche,
    Fisher,
    Tornqvist,
    SatoVartia,
}

/// Any two-period formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BilateralFormula {
    Unweighted(UnweightedFormula),
    Weighted(WeightedFormula),
}

impl fmt::Display for BilateralFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BilateralFormula::Unweighted(u) => match u {
                UnweightedFormula::Jevons => "jevons",
                UnweightedFormula::Dutot => "dutot",
                UnweightedFormula::Carli => "carli",
                UnweightedFormula::Harmonic => "harmonic",
                UnweightedFormula::Cswd => "cswd",
            },
            BilateralFormula::Weighted(w) => match w {
                WeightedFormula::Laspeyres => "laspeyres",
                WeightedFormula::Paasche => "paasche",
                WeightedFormula::Fisher => "fisher",
                WeightedFormula::Tornqvist => "tornqvist",
                WeightedFormula::SatoVartia => "sato-vartia",
            },
        };
        f.write_str(name)
    }
}

impl FromStr for BilateralFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<BilateralFormula> {
        use BilateralFormula::{Unweighted, Weighted};
        Ok(match s {
            "jevons" => Unweighted(UnweightedFormula::Jevons),
            "dutot" => Unweighted(UnweightedFormula::Dutot),
            "carli" => Unweighted(UnweightedFormula::Carli),
            "harmonic" => Unweighted(UnweightedFormula::Harmonic),
            "cswd" => Unweighted(UnweightedFormula::Cswd),
            "laspeyres" => Weighted(WeightedFormula::Laspeyres),
            "paasche" => Weighted(WeightedFormula::Paasche),
            "fisher" => Weighted(WeightedFormula::Fisher),
            "tornqvist" => Weighted(WeightedFormula::Tornqvist),
            "sato-vartia" => Weighted(WeightedFormula::SatoVartia),
            _ => return Err(Error::Parameter(format!("unknown index formula {s:?}"))),
        })
    }
}

/// One product of a matched pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairItem {
    pub product: ProductId,
    pub p0: f64,
    pub p1: f64,
    pub q0: f64,
    pub q1: f64,
    /// Expenditure share within the matched set, first month.
    pub s0: f64,
    /// Expenditure share within the matched set, second month.
    pub s1: f64,
}

/// Products present in both months of a comparison, in ascending id order.
#[derive(Debug, Clone)]
pub struct MatchedPair {
    pub t0: Month,
    pub t1: Month,
    pub items: Vec<PairItem>,
}

impl MatchedPair {
    /// Build a pair over `set`, which must list products present in both
    /// months (normally the output of [`apply_filters`]). Shares are
    /// renormalized within the set.
    pub fn new(scope: &ScopePanel, t0: Month, t1: Month, set: &[ProductId]) -> MatchedPair {
        let e0 = num::sum(set.iter().map(|p| scope.cell(p, t0).unwrap().expenditure));
        let e1 = num::sum(set.iter().map(|p| scope.cell(p, t1).unwrap().expenditure));
        let items = set
            .iter()
            .map(|p| {
                let c0 = scope.cell(p, t0).unwrap();
                let c1 = scope.cell(p, t1).unwrap();
                PairItem {
                    product: p.clone(),
                    p0: c0.price,
                    p1: c1.price,
                    q0: c0.quantity,
                    q1: c1.quantity,
                    s0: c0.expenditure / e0,
                    s1: c1.expenditure / e1,
                }
            })
            .collect();
        MatchedPair { t0, t1, items }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn undefined(&self) -> Error {
        Error::UndefinedIndex { t0: self.t0, t1: self.t1 }
    }
}

fn logmean(a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        (a - b) / (a.ln() - b.ln())
    }
}

/// Price-only index over a matched pair.
pub fn unweighted_index(formula: UnweightedFormula, pair: &MatchedPair) -> Result<f64> {
    if pair.is_empty() {
        return Err(pair.undefined());
    }
    let n = pair.items.len() as f64;
    let value = match formula {
        UnweightedFormula::Jevons => {
            (num::sum(pair.items.iter().map(|i| (i.p1 / i.p0).ln())) / n).exp()
        }
        UnweightedFormula::Dutot => {
            num::sum(pair.items.iter().map(|i| i.p1)) / num::sum(pair.items.iter().map(|i| i.p0))
        }
        UnweightedFormula::Carli => num::sum(pair.items.iter().map(|i| i.p1 / i.p0)) / n,
        UnweightedFormula::Harmonic => n / num::sum(pair.items.iter().map(|i| i.p0 / i.p1)),
        UnweightedFormula::Cswd => {
            let carli = unweighted_index(UnweightedFormula::Carli, pair)?;
            let harmonic = unweighted_index(UnweightedFormula::Harmonic, pair)?;
            (carli * harmonic).sqrt()
        }
    };
    Ok(value)
}

/// Quantity- or share-weighted index over a matched pair.
pub fn weighted_index(formula: WeightedFormula, pair: &MatchedPair) -> Result<f64> {
    if pair.is_empty() {
        return Err(pair.undefined());
    }
    let value = match formula {
        WeightedFormula::Laspeyres => {
            num::sum(pair.items.iter().map(|i| i.p1 * i.q0))
                / num::sum(pair.items.iter().map(|i| i.p0 * i.q0))
        }
        WeightedFormula::Paasche => {
            num::sum(pair.items.iter().map(|i| i.p1 * i.q1))
                / num::sum(pair.items.iter().map(|i| i.p0 * i.q1))
        }
        WeightedFormula::Fisher => {
            let la = weighted_index(WeightedFormula::Laspeyres, pair)?;
            let pa = weighted_index(WeightedFormula::Paasche, pair)?;
            (la * pa).sqrt()
        }
        WeightedFormula::Tornqvist => {
            num::sum(pair.items.iter().map(|i| (i.s0 + i.s1) / 2.0 * (i.p1 / i.p0).ln())).exp()
        }
        WeightedFormula::SatoVartia => {
            let raw: Vec<f64> = pair.items.iter().map(|i| logmean(i.s1, i.s0)).collect();
            let total = num::sum(raw.iter().copied());
            num::sum(pair.items.iter().zip(&raw).map(|(i, w)| w / total * (i.p1 / i.p0).ln())).exp()
        }
    };
    Ok(value)
}

/// Dispatch on either family.
pub fn bilateral_index(formula: BilateralFormula, pair: &MatchedPair) -> Result<f64> {
    match formula {
        BilateralFormula::Unweighted(u) => unweighted_index(u, pair),
        BilateralFormula::Weighted(w) => weighted_index(w, pair),
    }
}

/// Index of the single link t → t+1 after filtering.
fn link_index(
    formula: BilateralFormula,
    scope: &ScopePanel,
    t: Month,
    filters: &[FilterSpec],
) -> Result<f64> {
    let next = t.next();
    for month in [t, next] {
        if !scope.has_month(month) {
            return Err(Error::MissingMonth(month));
        }
    }
    let survivors = apply_filters(scope, t, next, filters);
    if survivors.is_empty() {
        return Err(Error::BrokenChain { t0: t, t1: next });
    }
    bilateral_index(formula, &MatchedPair::new(scope, t, next, &survivors))
}

/// Chained index from `base` to `t`: the product of month-to-month links,
/// each over its own filtered matched set.
pub fn chain_index(
    formula: BilateralFormula,
    scope: &ScopePanel,
    base: Month,
    t: Month,
    filters: &[FilterSpec],
) -> Result<f64> {
    if t < base {
        return Err(Error::Parameter(format!(
            "chained index runs forward; base {base} is after target {t}"
        )));
    }
    let mut value = 1.0;
    let mut month = base;
    while month < t {
        value *= link_index(formula, scope, month, filters)?;
        month = month.next();
    }
    Ok(value)
}

/// Chained series over the whole scope, base = first month.
pub fn chain_series(
    formula: BilateralFormula,
    scope: &ScopePanel,
    filters: &[FilterSpec],
) -> Result<IndexSeries> {
    let base = *scope.months.first().ok_or(Error::EmptyPanel { rejected: 0 })?;
    let last = *scope.months.last().unwrap();
    let mut points = vec![(base, 1.0)];
    let mut value = 1.0;
    let mut month = base;
    while month < last {
        value *= link_index(formula, scope, month, filters)?;
        month = month.next();
        points.push((month, value));
    }
    let meta = SeriesMeta {
        filters: filters.iter().map(|f| f.to_string()).collect(),
        ..SeriesMeta::bare(format!("chained-{formula}"))
    };
    IndexSeries::new(base, points, meta)
}
