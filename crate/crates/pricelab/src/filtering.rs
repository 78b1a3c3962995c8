//! Low-sale and extreme-price screening of matched sets.
//!
//! Filters decide which products of a month pair's matched set enter the
//! comparison. They compose left to right: each filter sees the survivors of
//! the previous one, and the low-sale `n` is the size of the set handed to
//! that filter.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::ScopePanel;
use crate::matching::ProductId;
use crate::month::Month;

/// One filter with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    /// Keep products whose mean expenditure share across the two months
    /// strictly exceeds 1/(nλ).
    LowSale { lambda: f64 },
    /// Keep products whose price relative lies inside [lo, hi].
    ExtremeFixed { lo: f64, hi: f64 },
    /// Keep products whose price relative lies inside the closed band of the
    /// nearest-rank quantiles at q_lo and q_hi.
    ExtremeQuantile { q_lo: f64, q_hi: f64 },
}

impl FilterSpec {
    pub fn low_sale(lambda: f64) -> Result<FilterSpec> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(FilterSpec::LowSale { lambda })
        } else {
            Err(Error::Parameter(format!("low-sale λ must be positive, got {lambda}")))
        }
    }

    pub fn extreme_fixed(lo: f64, hi: f64) -> Result<FilterSpec> {
        if lo > 0.0 && lo < 1.0 && hi > 1.0 && hi.is_finite() {
            Ok(FilterSpec::ExtremeFixed { lo, hi })
        } else {
            Err(Error::Parameter(format!(
                "extreme-price band needs 0 < lo < 1 < hi, got ({lo}, {hi})"
            )))
        }
    }

    pub fn extreme_quantile(q_lo: f64, q_hi: f64) -> Result<FilterSpec> {
        if (0.0..=1.0).contains(&q_lo) && (0.0..=1.0).contains(&q_hi) && q_lo < q_hi {
            Ok(FilterSpec::ExtremeQuantile { q_lo, q_hi })
        } else {
            Err(Error::Parameter(format!(
                "quantile band needs 0 ≤ q_lo < q_hi ≤ 1, got ({q_lo}, {q_hi})"
            )))
        }
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::LowSale { lambda } => write!(f, "lowsale:{lambda}"),
            FilterSpec::ExtremeFixed { lo, hi } => write!(f, "extremeprice:{lo},{hi}"),
            FilterSpec::ExtremeQuantile { q_lo, q_hi } => {
                write!(f, "extremeprice-quantile:{q_lo},{q_hi}")
            }
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;

    /// Parse the CLI grammar: `lowsale:1.25`, `extremeprice:0.5,2.0`,
    /// `extremeprice-quantile:0.01,0.99`.
    fn from_str(s: &str) -> Result<FilterSpec> {
        let bad = || Error::Parameter(format!("unrecognized filter {s:?}"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind, nums.as_slice()) {
            ("lowsale", [lambda]) => FilterSpec::low_sale(*lambda),
            ("extremeprice", [lo, hi]) => FilterSpec::extreme_fixed(*lo, *hi),
            ("extremeprice-quantile", [q_lo, q_hi]) => FilterSpec::extreme_quantile(*q_lo, *q_hi),
            _ => Err(bad()),
        }
    }
}

fn shares(scope: &ScopePanel, set: &[ProductId], month: Month) -> Vec<f64> {
    let expenditures: Vec<f64> =
        set.iter().map(|p| scope.cell(p, month).map_or(0.0, |c| c.expenditure)).collect();
    let total = crate::num::sum(expenditures.iter().copied());
    expenditures.into_iter().map(|e| e / total).collect()
}

fn relatives(scope: &ScopePanel, set: &[ProductId], t_prev: Month, t: Month) -> Vec<f64> {
    set.iter()
        .map(|p| scope.cell(p, t).unwrap().price / scope.cell(p, t_prev).unwrap().price)
        .collect()
}

/// Keep the products of `set` whose mean expenditure share over the two
/// months strictly exceeds 1/(nλ), with n the size of `set` and shares
/// computed within it. An empty input yields an empty result.
pub fn low_sale_filter(
    scope: &ScopePanel,
    t_prev: Month,
    t: Month,
    lambda: f64,
    set: &[ProductId],
) -> Vec<ProductId> {
    if set.is_empty() {
        return Vec::new();
    }
    let threshold = 1.0 / (set.len() as f64 * lambda);
    let s_prev = shares(scope, set, t_prev);
    let s_cur = shares(scope, set, t);
    set.iter()
        .enumerate()
        .filter(|(i, _)| (s_prev[*i] + s_cur[*i]) / 2.0 > threshold)
        .map(|(_, p)| p.clone())
        .collect()
}

/// Remove products whose price relative p^t / p^{t_prev} falls strictly
/// outside [lo, hi].
pub fn extreme_price_filter_fixed(
    scope: &ScopePanel,
    t_prev: Month,
    t: Month,
    lo: f64,
    hi: f64,
    set: &[ProductId],
) -> Vec<ProductId> {
    let rel = relatives(scope, set, t_prev, t);
    set.iter()
        .enumerate()
        .filter(|(i, _)| rel[*i] >= lo && rel[*i] <= hi)
        .map(|(_, p)| p.clone())
        .collect()
}

/// Nearest-rank quantile of sorted values. The rank ⌈q·n⌉ is computed with a
/// tolerance so that exactly representable products like 0.99 × 100 do not
/// land one rank high.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let h = q * sorted.len() as f64;
    let rank = if (h - h.round()).abs() < 1e-9 { h.round() } else { h.ceil() } as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Remove products whose price relative lies strictly below the q_lo
/// quantile or strictly above the q_hi quantile of the set's relatives.
pub fn extreme_price_filter_quantile(
    scope: &ScopePanel,
    t_prev: Month,
    t: Month,
    q_lo: f64,
    q_hi: f64,
    set: &[ProductId],
) -> Vec<ProductId> {
    if set.is_empty() {
        return Vec::new();
    }
    let rel = relatives(scope, set, t_prev, t);
    let mut sorted = rel.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = nearest_rank(&sorted, q_lo);
    let hi = nearest_rank(&sorted, q_hi);
    set.iter()
        .enumerate()
        .filter(|(i, _)| rel[*i] >= lo && rel[*i] <= hi)
        .map(|(_, p)| p.clone())
        .collect()
}

/// Matched set of (t_prev, t) refined by the filters in order.
pub fn apply_filters(
    scope: &ScopePanel,
    t_prev: Month,
    t: Month,
    filters: &[FilterSpec],
) -> Vec<ProductId> {
    let mut set = scope.matched_set(t_prev, t);
    for filter in filters {
        set = match *filter {
            FilterSpec::LowSale { lambda } => low_sale_filter(scope, t_prev, t, lambda, &set),
            FilterSpec::ExtremeFixed { lo, hi } => {
                extreme_price_filter_fixed(scope, t_prev, t, lo, hi, &set)
            }
            FilterSpec::ExtremeQuantile { q_lo, q_hi } => {
                extreme_price_filter_quantile(scope, t_prev, t, q_lo, q_hi, &set)
            }
        };
    }
    set
}
