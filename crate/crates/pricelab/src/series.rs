//! Index series: a base month plus ordered (month, value) points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::Month;

/// Metadata describing how a series was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splice: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub filters: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
}

impl SeriesMeta {
    pub fn bare(method: impl Into<String>) -> Self {
        SeriesMeta { method: method.into(), ..Default::default() }
    }
}

/// A price index series anchored at a base month where the value is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    base: Month,
    points: Vec<(Month, f64)>,
    pub meta: SeriesMeta,
}

impl IndexSeries {
    /// Build a series, validating that every value is finite and positive and
    /// that the base month carries the value 1.
    pub fn new(base: Month, points: Vec<(Month, f64)>, meta: SeriesMeta) -> Result<Self> {
        for (m, v) in &points {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::NonFiniteValue(*m));
            }
        }
        debug_assert!(points.windows(2).all(|w| w[0].0 < w[1].0));
        if let Some(&(_, v)) = points.iter().find(|(m, _)| *m == base) {
            debug_assert!(v == 1.0, "base value must be exactly 1, got {v}");
        }
        Ok(IndexSeries { base, points, meta })
    }

    pub fn base(&self) -> Month {
        self.base
    }

    pub fn points(&self) -> &[(Month, f64)] {
        &self.points
    }

    pub fn months(&self) -> impl Iterator<Item = Month> + '_ {
        self.points.iter().map(|(m, _)| *m)
    }

    pub fn first_month(&self) -> Option<Month> {
        self.points.first().map(|(m, _)| *m)
    }

    pub fn last_month(&self) -> Option<Month> {
        self.points.last().map(|(m, _)| *m)
    }

    pub fn value(&self, month: Month) -> Option<f64> {
        self.points.binary_search_by_key(&month, |(m, _)| *m).ok().map(|i| self.points[i].1)
    }

    /// Ratio of values, i.e. the index comparing `to` with `from` via this
    /// series (exact transitivity within the series).
    pub fn ratio(&self, from: Month, to: Month) -> Option<f64> {
        Some(self.value(to)? / self.value(from)?)
    }

    /// Rebase so that `new_base` carries the value 1 (present in the series).
    pub fn rebase(&self, new_base: Month) -> Result<IndexSeries> {
        let anchor = self.value(new_base).ok_or(Error::MissingMonth(new_base))?;
        let points = self
            .points
            .iter()
            .map(|&(m, v)| (m, if m == new_base { 1.0 } else { v / anchor }))
            .collect();
        IndexSeries::new(new_base, points, self.meta.clone())
    }

    pub(crate) fn push(&mut self, month: Month, value: f64) -> Result<()> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonFiniteValue(month));
        }
        debug_assert!(self.points.last().map(|(m, _)| *m < month).unwrap_or(true));
        self.points.push((month, value));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Month {
        s.parse().unwrap()
    }

    #[test]
    fn value_lookup_and_ratio() {
        let s = IndexSeries::new(
            m("2018-01"),
            vec![(m("2018-01"), 1.0), (m("2018-02"), 1.1), (m("2018-03"), 1.21)],
            SeriesMeta::bare("test"),
        )
        .unwrap();
        assert_eq!(s.value(m("2018-02")), Some(1.1));
        assert_eq!(s.value(m("2018-04")), None);
        let r = s.ratio(m("2018-02"), m("2018-03")).unwrap();
        assert!((r - 1.1).abs() < 1e-12);
    }

    #[test]
    fn rebase_moves_unit_value() {
        let s = IndexSeries::new(
            m("2018-01"),
            vec![(m("2018-01"), 1.0), (m("2018-02"), 2.0)],
            SeriesMeta::bare("test"),
        )
        .unwrap();
        let r = s.rebase(m("2018-02")).unwrap();
        assert_eq!(r.value(m("2018-02")), Some(1.0));
        assert_eq!(r.value(m("2018-01")), Some(0.5));
    }

    #[test]
    fn rejects_nonpositive_values() {
        let err = IndexSeries::new(
            m("2018-01"),
            vec![(m("2018-01"), 1.0), (m("2018-02"), -0.5)],
            SeriesMeta::bare("test"),
        );
        assert!(err.is_err());
    }
}
