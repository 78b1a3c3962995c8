//! Long index series from window-limited methods.
//!
//! A multilateral method covers one estimation window at a time. Production
//! series run for years, so each new month re-estimates the window ending at
//! that month and links its movement onto the accumulated history. The four
//! splice variants differ in which window month anchors the link; the two
//! fixed-base variants instead anchor every month of a year at the previous
//! December and chain across years at Decembers.
//!
//! The state is serializable: a monthly production job can load last month's
//! state, advance one month, and store it back without recomputing history.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ScopePanel;
use crate::month::Month;
use crate::multilateral::MultilateralEngine;
use crate::num;
use crate::series::{IndexSeries, SeriesMeta};

/// How history is extended by one month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpliceMethod {
    /// Link on the previous month (the window's own month-on-month move).
    Movement,
    /// Link on the first month of the shifted window.
    Window,
    /// Link on the middle month of the window.
    Half,
    /// Geometric mean over all possible link months.
    Mean,
    /// Fixed base at the previous December, expanding window within the year.
    Fbew,
    /// Fixed base at the previous December, rolling window of full length.
    Fbmw,
}

impl fmt::Display for SpliceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpliceMethod::Movement => "movement",
            SpliceMethod::Window => "window",
            SpliceMethod::Half => "half",
            SpliceMethod::Mean => "mean",
            SpliceMethod::Fbew => "fbew",
            SpliceMethod::Fbmw => "fbmw",
        })
    }
}

impl FromStr for SpliceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<SpliceMethod> {
        Ok(match s {
            "movement" => SpliceMethod::Movement,
            "window" => SpliceMethod::Window,
            "half" => SpliceMethod::Half,
            "mean" => SpliceMethod::Mean,
            "fbew" => SpliceMethod::Fbew,
            "fbmw" => SpliceMethod::Fbmw,
            _ => return Err(Error::Parameter(format!("unknown splice method {s:?}"))),
        })
    }
}

/// Resumable extension state: the accumulated series plus the most recent
/// window's multilateral series (the next link's denominator half).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpliceState {
    pub method: SpliceMethod,
    pub window_length: usize,
    history: IndexSeries,
    last_window: Option<IndexSeries>,
}

/// Months back from the window end to the half-window link month.
fn half_offset(window_length: usize) -> usize {
    (window_length - 1).div_ceil(2)
}

/// One splice factor: the move from the link month to the window end in the
/// current window, relative to the same link month's move in the previous
/// window.
fn splice_factor(cur: &IndexSeries, prev: &IndexSeries, end: Month, offset: usize) -> f64 {
    let link = end.offset(-(offset as i32));
    let current_move = cur.value(end).unwrap() / cur.value(link).unwrap();
    let previous_move = prev.value(end.offset(-1)).unwrap() / prev.value(link).unwrap();
    current_move / previous_move
}

impl SpliceState {
    /// Start a series at `start`. Splice methods compute the full first
    /// window up front (history equals that window's series exactly); the
    /// fixed-base methods start with the bare base month, which must be a
    /// December.
    pub fn first_window(
        method: SpliceMethod,
        engine: &MultilateralEngine,
        scope: &ScopePanel,
        start: Month,
        window_length: usize,
    ) -> Result<SpliceState> {
        match method {
            SpliceMethod::Fbew | SpliceMethod::Fbmw => {
                if !start.is_december() {
                    return Err(Error::InvalidConfig(format!(
                        "{method} series must start at a December, got {start}"
                    )));
                }
                if method == SpliceMethod::Fbmw && window_length < 13 {
                    return Err(Error::InvalidConfig(format!(
                        "fbmw needs a window of at least 13 months to reach the previous \
                         December, got {window_length}"
                    )));
                }
                let meta = SeriesMeta {
                    window: Some(window_length),
                    splice: Some(method.to_string()),
                    filters: engine.filters.iter().map(|f| f.to_string()).collect(),
                    ..SeriesMeta::bare(engine.method.to_string())
                };
                let history = IndexSeries::new(start, vec![(start, 1.0)], meta)?;
                Ok(SpliceState { method, window_length, history, last_window: None })
            }
            _ => {
                let window: Vec<Month> =
                    (0..window_length).map(|k| start.offset(k as i32)).collect();
                let series = engine.series(scope, &window)?;
                let mut history = series.clone();
                history.meta.splice = Some(method.to_string());
                Ok(SpliceState { method, window_length, history, last_window: Some(series) })
            }
        }
    }

    pub fn history(&self) -> &IndexSeries {
        &self.history
    }

    pub fn into_history(self) -> IndexSeries {
        self.history
    }

    /// Append P(0, new_month); `new_month` must directly follow the history.
    pub fn advance(
        &mut self,
        scope: &ScopePanel,
        engine: &MultilateralEngine,
        new_month: Month,
    ) -> Result<()> {
        let expected = self.history.last_month().expect("history is never empty").next();
        if new_month != expected {
            return Err(Error::Parameter(format!(
                "series extends month by month: expected {expected}, got {new_month}"
            )));
        }
        let value = match self.method {
            SpliceMethod::Fbew => {
                let dec = new_month.previous_december();
                let anchor = self.history.value(dec).ok_or(Error::MissingBaseDecember(dec))?;
                anchor * fbew(scope, engine, new_month)?
            }
            SpliceMethod::Fbmw => {
                let dec = new_month.previous_december();
                let anchor = self.history.value(dec).ok_or(Error::MissingBaseDecember(dec))?;
                anchor * fbmw(scope, engine, new_month, self.window_length)?
            }
            _ => self.spliced_value(scope, engine, new_month)?,
        };
        self.history.push(new_month, value)
    }

    fn spliced_value(
        &mut self,
        scope: &ScopePanel,
        engine: &MultilateralEngine,
        new_month: Month,
    ) -> Result<f64> {
        let length = self.window_length as i32;
        let cur_window: Vec<Month> =
            (0..length).map(|k| new_month.offset(k + 1 - length)).collect();
        let prev_window: Vec<Month> = (0..length).map(|k| new_month.offset(k - length)).collect();

        let cur = engine.series(scope, &cur_window)?;
        let prev = match self.last_window.take() {
            Some(series) if series.first_month() == Some(prev_window[0]) => series,
            _ => engine.series(scope, &prev_window)?,
        };

        let t = self.window_length - 1;
        let factor = match self.method {
            SpliceMethod::Movement => splice_factor(&cur, &prev, new_month, 1),
            SpliceMethod::Window => splice_factor(&cur, &prev, new_month, t),
            SpliceMethod::Half => {
                splice_factor(&cur, &prev, new_month, half_offset(self.window_length))
            }
            SpliceMethod::Mean => {
                let log_factors =
                    (1..=t).map(|offset| splice_factor(&cur, &prev, new_month, offset).ln());
                (num::sum(log_factors) / t as f64).exp()
            }
            SpliceMethod::Fbew | SpliceMethod::Fbmw => unreachable!("handled in advance"),
        };
        let value = self.history.value(new_month.offset(-1)).unwrap() * factor;
        self.last_window = Some(cur);
        Ok(value)
    }
}

/// Fixed-base expanding-window value P(Dec_prev, t) on the window
/// [Dec_prev, t]. A December without an earlier December in the scope is its
/// own base and maps to 1.
pub fn fbew(scope: &ScopePanel, engine: &MultilateralEngine, t: Month) -> Result<f64> {
    let dec = t.previous_december();
    if !scope.has_month(dec) {
        return if t.is_december() { Ok(1.0) } else { Err(Error::MissingBaseDecember(dec)) };
    }
    let window: Vec<Month> = dec.range_to(t).collect();
    let series = engine.series(scope, &window)?;
    Ok(series.value(t).unwrap())
}

/// Fixed-base moving-window value P(Dec_prev, t) evaluated inside the
/// rolling window of `window_length` months ending at t. Mirrors [`fbew`]'s
/// own-base rule for a first December.
pub fn fbmw(
    scope: &ScopePanel,
    engine: &MultilateralEngine,
    t: Month,
    window_length: usize,
) -> Result<f64> {
    let dec = t.previous_december();
    if !scope.has_month(dec) && t.is_december() {
        return Ok(1.0);
    }
    let start = t.offset(1 - window_length as i32);
    if start > dec {
        return Err(Error::InvalidConfig(format!(
            "fbmw window of {window_length} months ending {t} does not reach back to {dec}"
        )));
    }
    for month in start.range_to(t) {
        if !scope.has_month(month) {
            return Err(Error::InsufficientBackData(month));
        }
    }
    let window: Vec<Month> = start.range_to(t).collect();
    let series = engine.series(scope, &window)?;
    Ok(series.value(t).unwrap() / series.value(dec).unwrap())
}

/// Whole-scope extended series: full first window (splices) or first usable
/// December (fixed base), then one [`SpliceState::advance`] per remaining
/// month.
///
/// The fixed-base methods anchor at a December. For the rolling-window
/// variant that December must additionally leave `window_length - 1` months
/// of back data in the scope, so its series may start later than the
/// expanding-window one.
pub fn extended_series(
    method: SpliceMethod,
    engine: &MultilateralEngine,
    scope: &ScopePanel,
    window_length: usize,
) -> Result<IndexSeries> {
    let first = *scope.months.first().ok_or(Error::EmptyPanel { rejected: 0 })?;
    let last = *scope.months.last().unwrap();
    let start = match method {
        SpliceMethod::Fbew | SpliceMethod::Fbmw => {
            let mut earliest = match method {
                SpliceMethod::Fbmw => first.offset(window_length as i32 - 2),
                _ => first,
            };
            while !earliest.is_december() {
                earliest = earliest.next();
            }
            if earliest > last {
                return Err(Error::InvalidConfig(format!(
                    "no December in the panel can anchor a {method} series"
                )));
            }
            earliest
        }
        _ => {
            if scope.months.len() < window_length {
                return Err(Error::InvalidConfig(format!(
                    "panel spans {} months but the first window needs {window_length}",
                    scope.months.len()
                )));
            }
            first
        }
    };
    let mut state = SpliceState::first_window(method, engine, scope, start, window_length)?;
    let mut month = state.history().last_month().unwrap();
    while month < last {
        month = month.next();
        state.advance(scope, engine, month)?;
    }
    Ok(state.into_history())
}
