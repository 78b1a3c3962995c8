//! Time-product-dummy regression index over one window.
//!
//! Log prices are regressed on month dummies and product dummies by weighted
//! least squares, weights being each observation's expenditure share within
//! its month. The product effects absorb quality differences; exp(γ̂_i)
//! deflates prices, and the index compares share-weighted geometric means of
//! the deflated prices across months.
//!
//! The product block of the normal equations is diagonal, so it is absorbed
//! analytically and only the small month-level system is factorized. Rank
//! deficiency in this design is exactly disconnection of the product-month
//! incidence graph, which is checked up front.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filtering::FilterSpec;
use crate::ingest::ScopePanel;
use crate::matching::ProductId;
use crate::month::Month;
use crate::num;
use crate::series::{IndexSeries, SeriesMeta};

use super::{check_window, window_universe};

/// Fitted dummy regression: month effects, product effects, and the series.
#[derive(Debug, Clone)]
pub struct TpdSolution {
    /// Fitted intercept; together with delta and gamma it reconstructs every
    /// fitted log price.
    pub alpha: f64,
    /// δ̂ per month; the window's first month is the omitted dummy, pinned
    /// at 0.
    pub delta: BTreeMap<Month, f64>,
    /// γ̂ per product; the first product in id order is the reference,
    /// pinned at 0.
    pub gamma: BTreeMap<ProductId, f64>,
    pub series: IndexSeries,
}

struct Design {
    products: Vec<ProductId>,
    /// weight[i][z], zero where product i is absent in month z.
    weight: Vec<Vec<f64>>,
    /// log_price[i][z], meaningful only where weight > 0.
    log_price: Vec<Vec<f64>>,
}

impl Design {
    fn build(scope: &ScopePanel, window: &[Month], products: Vec<ProductId>) -> Design {
        let span = window.len();
        let mut weight = vec![vec![0.0; span]; products.len()];
        let mut log_price = vec![vec![0.0; span]; products.len()];
        for (z, &month) in window.iter().enumerate() {
            let total = num::sum(
                products.iter().filter_map(|p| scope.cell(p, month).map(|c| c.expenditure)),
            );
            for (i, p) in products.iter().enumerate() {
                if let Some(c) = scope.cell(p, month) {
                    weight[i][z] = c.expenditure / total;
                    log_price[i][z] = c.price.ln();
                }
            }
        }
        Design { products, weight, log_price }
    }
}

/// Disconnected parts of the product-month incidence graph make month and
/// product effects unidentifiable relative to the base month. Returns the
/// offending column names, empty when the design has full rank.
fn disconnected_columns(design: &Design, window: &[Month]) -> Vec<String> {
    let n = design.products.len();
    let span = window.len();
    let mut parent: Vec<usize> = (0..n + span).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for i in 0..n {
        for z in 0..span {
            if design.weight[i][z] > 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, n + z));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let base = find(&mut parent, n);
    let mut columns = Vec::new();
    for (z, &month) in window.iter().enumerate().skip(1) {
        if find(&mut parent, n + z) != base {
            columns.push(format!("month:{month}"));
        }
    }
    for (i, p) in design.products.iter().enumerate() {
        if find(&mut parent, i) != base {
            columns.push(format!("product:{p}"));
        }
    }
    columns
}

/// Fit the dummy regression on the window and derive the index series.
pub fn tpd(scope: &ScopePanel, window: &[Month], filters: &[FilterSpec]) -> Result<TpdSolution> {
    check_window(scope, window)?;
    let products = window_universe(scope, window, filters);
    if products.is_empty() {
        return Err(Error::UndefinedIndex { t0: window[0], t1: *window.last().unwrap() });
    }
    let design = Design::build(scope, window, products);
    let columns = disconnected_columns(&design, window);
    if !columns.is_empty() {
        return Err(Error::SingularDesign { columns });
    }

    let n = design.products.len();
    let span = window.len();
    // Month-level parameters θ = [α, δ_1 .. δ_{span-1}]; product effects are
    // absorbed through the diagonal product block.
    let total_weight = |i: usize| num::sum(design.weight[i].iter().copied());
    let weighted_y =
        |i: usize| num::sum((0..span).map(|z| design.weight[i][z] * design.log_price[i][z]));

    let mut s = DMatrix::zeros(span, span);
    let mut r = DVector::zeros(span);
    // Full month-block normal equations: row 0 is the intercept, row z ≥ 1
    // the month-z dummy.
    for z in 0..span {
        let w_z = num::sum((0..n).map(|i| design.weight[i][z]));
        let wy_z = num::sum((0..n).map(|i| design.weight[i][z] * design.log_price[i][z]));
        s[(0, 0)] += w_z;
        r[0] += wy_z;
        if z > 0 {
            s[(0, z)] = w_z;
            s[(z, 0)] = w_z;
            s[(z, z)] = w_z;
            r[z] = wy_z;
        }
    }
    // Subtract the absorbed product block: for non-reference products,
    // S -= b_i b_iᵀ / T_i and r -= b_i (Σ w y)_i / T_i where b_i stacks the
    // product's total weight (intercept row) and per-month weights.
    for i in 1..n {
        let t_i = total_weight(i);
        let wy_i = weighted_y(i);
        let b = |z: usize| if z == 0 { t_i } else { design.weight[i][z] };
        for z in 0..span {
            for z2 in 0..span {
                s[(z, z2)] -= b(z) * b(z2) / t_i;
            }
            r[z] -= b(z) * wy_i / t_i;
        }
    }

    let qr = s.clone().col_piv_qr();
    let theta = qr.solve(&r).ok_or_else(|| Error::SingularDesign {
        columns: std::iter::once("intercept".to_string())
            .chain(window.iter().skip(1).map(|m| format!("month:{m}")))
            .collect(),
    })?;

    let alpha = theta[0];
    let mut gamma_vec = vec![0.0_f64; n];
    for (i, gamma) in gamma_vec.iter_mut().enumerate().skip(1) {
        let t_i = total_weight(i);
        let cross = num::sum((1..span).map(|z| design.weight[i][z] * theta[z]));
        *gamma = (weighted_y(i) - t_i * alpha - cross) / t_i;
    }

    // Share-weighted geometric mean of quality-adjusted prices per month,
    // compared in logs against the base month.
    let log_level: Vec<f64> = (0..span)
        .map(|z| {
            num::sum(
                (0..n)
                    .filter(|&i| design.weight[i][z] > 0.0)
                    .map(|i| design.weight[i][z] * (design.log_price[i][z] - gamma_vec[i])),
            )
        })
        .collect();
    let points: Vec<(Month, f64)> = window
        .iter()
        .enumerate()
        .map(|(z, &month)| (month, (log_level[z] - log_level[0]).exp()))
        .collect();
    let meta = SeriesMeta {
        window: Some(span),
        filters: filters.iter().map(|f| f.to_string()).collect(),
        ..SeriesMeta::bare("tpd")
    };
    let series = IndexSeries::new(window[0], points, meta)?;

    let delta =
        window.iter().enumerate().map(|(z, &m)| (m, if z == 0 { 0.0 } else { theta[z] })).collect();
    let gamma = design.products.iter().cloned().zip(gamma_vec).collect();
    Ok(TpdSolution { alpha, delta, gamma, series })
}
