//! Geary-Khamis quality-adjusted index over one window.
//!
//! Each product gets a reference value v_i; the index for a month is the
//! expenditure ratio against the base month deflated by a v-weighted
//! quantity index. The v_i are in turn quantity-share-weighted means of
//! deflated prices, so the two definitions form a fixed point, found by
//! iterating from v ≡ 1.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::filtering::FilterSpec;
use crate::ingest::ScopePanel;
use crate::matching::ProductId;
use crate::month::Month;
use crate::num;
use crate::series::{IndexSeries, SeriesMeta};

use super::{check_window, window_universe};

/// Converged Geary-Khamis fixed point.
#[derive(Debug, Clone)]
pub struct GkSolution {
    /// Quality-adjustment factor per product.
    pub v: BTreeMap<ProductId, f64>,
    pub series: IndexSeries,
    pub iterations: usize,
    /// Max relative change in v at the final iteration.
    pub residual: f64,
}

struct Obs {
    price: f64,
    quantity: f64,
    /// Quantity share of this product's window total.
    phi: f64,
}

/// Per-product observations over the window, month-indexed; `None` where the
/// product is absent.
struct Universe {
    products: Vec<ProductId>,
    obs: Vec<Vec<Option<Obs>>>,
}

impl Universe {
    fn collect(scope: &ScopePanel, window: &[Month], products: Vec<ProductId>) -> Universe {
        let obs = products
            .iter()
            .map(|p| {
                let cells: Vec<Option<(f64, f64)>> = window
                    .iter()
                    .map(|&m| scope.cell(p, m).map(|c| (c.price, c.quantity)))
                    .collect();
                let total = num::sum(cells.iter().flatten().map(|&(_, q)| q));
                cells
                    .into_iter()
                    .map(|c| {
                        c.map(|(price, quantity)| Obs { price, quantity, phi: quantity / total })
                    })
                    .collect()
            })
            .collect();
        Universe { products, obs }
    }

    /// Index values for every window month given reference values `v`:
    /// expenditure ratio to base over v-weighted quantity ratio to base.
    fn deflated_series(&self, v: &[f64], base_exp: f64, base_vq: f64) -> Vec<f64> {
        (0..self.obs[0].len())
            .map(|z| {
                let exp = num::sum(
                    self.obs.iter().filter_map(|row| row[z].as_ref().map(|o| o.price * o.quantity)),
                );
                let vq = num::sum(
                    self.obs
                        .iter()
                        .zip(v)
                        .filter_map(|(row, &vi)| row[z].as_ref().map(|o| vi * o.quantity)),
                );
                (exp / base_exp) / (vq / base_vq)
            })
            .collect()
    }

    fn month_sums(&self, v: &[f64], z: usize) -> (f64, f64) {
        let exp = num::sum(
            self.obs.iter().filter_map(|row| row[z].as_ref().map(|o| o.price * o.quantity)),
        );
        let vq = num::sum(
            self.obs
                .iter()
                .zip(v)
                .filter_map(|(row, &vi)| row[z].as_ref().map(|o| vi * o.quantity)),
        );
        (exp, vq)
    }
}

/// Iterate the Geary-Khamis fixed point on the window until the largest
/// relative change in any v_i drops below `tolerance`.
pub fn gk_solve(
    scope: &ScopePanel,
    window: &[Month],
    filters: &[FilterSpec],
    tolerance: f64,
    max_iter: usize,
) -> Result<GkSolution> {
    if tolerance <= 0.0 {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tolerance}")));
    }
    check_window(scope, window)?;
    let products = window_universe(scope, window, filters);
    if products.is_empty() {
        return Err(Error::UndefinedIndex { t0: window[0], t1: *window.last().unwrap() });
    }
    let universe = Universe::collect(scope, window, products);
    for (z, &month) in window.iter().enumerate() {
        if universe.obs.iter().all(|row| row[z].is_none()) {
            return Err(Error::UndefinedIndex { t0: window[0], t1: month });
        }
    }

    let n = universe.products.len();
    let mut v = vec![1.0_f64; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while residual >= tolerance {
        if iterations == max_iter {
            return Err(Error::NonConvergence { iterations, residual });
        }
        let (base_exp, base_vq) = universe.month_sums(&v, 0);
        let index = universe.deflated_series(&v, base_exp, base_vq);
        let next: Vec<f64> = universe
            .obs
            .iter()
            .map(|row| {
                num::sum(
                    row.iter()
                        .zip(&index)
                        .filter_map(|(o, &p)| o.as_ref().map(|o| o.phi * o.price / p)),
                )
            })
            .collect();
        residual =
            v.iter().zip(&next).map(|(old, new)| ((new - old) / old).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
    }

    let (base_exp, base_vq) = universe.month_sums(&v, 0);
    let index = universe.deflated_series(&v, base_exp, base_vq);
    let points = window.iter().copied().zip(index).collect();
    let meta = SeriesMeta {
        window: Some(window.len()),
        filters: filters.iter().map(|f| f.to_string()).collect(),
        ..SeriesMeta::bare("gk")
    };
    let series = IndexSeries::new(window[0], points, meta)?;
    let v = universe.products.into_iter().zip(v).collect();
    Ok(GkSolution { v, series, iterations, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilateral::tests::{setup, varied};
    use crate::synth::oracle;

    #[test]
    fn single_product_index_is_the_price_relative() {
        let (scope, _) = setup(&[("a", vec![(2.0, 7.0), (3.0, 5.0)])]);
        let solution = gk_solve(&scope, &scope.months, &[], 1e-10, 1000).unwrap();
        assert_eq!(solution.series.value(scope.months[0]), Some(1.0));
        assert!((solution.series.value(scope.months[1]).unwrap() - 1.5).abs() < 1e-10);
        // v = Σ_z φ_z p_z / P(0,z) = (7/12)·2 + (5/12)·(3/1.5) = 2.
        assert!((solution.v["a"] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn constant_prices_fix_v_at_the_price_level() {
        let (scope, _) = setup(&[
            ("a", vec![(2.0, 10.0), (2.0, 14.0), (2.0, 9.0)]),
            ("b", vec![(5.0, 4.0), (5.0, 3.0), (5.0, 6.0)]),
        ]);
        let solution = gk_solve(&scope, &scope.months, &[], 1e-12, 1000).unwrap();
        for &(_, value) in solution.series.points() {
            assert!((value - 1.0).abs() < 1e-8);
        }
        assert!((solution.v["a"] - 2.0).abs() / 2.0 < 1e-8);
        assert!((solution.v["b"] - 5.0).abs() / 5.0 < 1e-8);
    }

    #[test]
    fn agrees_with_independent_fixed_point() {
        let (scope, tables) = varied();
        let solution = gk_solve(&scope, &scope.months, &[], 1e-10, 1000).unwrap();
        let (expected_series, expected_v) = oracle::geary_khamis(&tables, 1e-12, 10_000).unwrap();
        for (t, &(_, value)) in solution.series.points().iter().enumerate() {
            assert!(
                (value - expected_series[t]).abs() < 1e-8,
                "month {t}: {value} vs {}",
                expected_series[t]
            );
        }
        for (i, name) in ["a", "b", "c", "d"].iter().enumerate() {
            assert!((solution.v[*name] - expected_v[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let (scope, _) = varied();
        match gk_solve(&scope, &scope.months, &[], 1e-10, 1) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn returned_v_is_a_fixed_point_within_tolerance() {
        let (scope, _) = varied();
        let tolerance = 1e-10;
        let solution = gk_solve(&scope, &scope.months, &[], tolerance, 1000).unwrap();
        assert!(solution.residual < tolerance);
        assert!(solution.v.values().all(|&v| v > 0.0));
        // One more application of the update map moves v by less than the
        // tolerance (relative).
        let again = gk_solve(&scope, &scope.months, &[], solution.residual / 2.0, 1000).unwrap();
        for (a, b) in solution.v.values().zip(again.v.values()) {
            assert!(((a - b) / a).abs() < tolerance * 10.0);
        }
    }
}
