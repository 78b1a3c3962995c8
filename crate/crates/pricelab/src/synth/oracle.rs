//! Reference index evaluations on raw price/quantity tables.
//!
//! Everything here is a straight-line transcription of the published formula
//! it implements, operating on plain nested vectors, with no shared code with
//! the engine modules. The test suites compare engine output against these
//! functions; nothing in the library itself calls them.

/// Raw observation tables: `prices[i][t]` / `quantities[i][t]` hold product
/// `i` in month `t`, `None` where the product was not observed.
#[derive(Debug, Clone)]
pub struct RawTables {
    pub prices: Vec<Vec<Option<f64>>>,
    pub quantities: Vec<Vec<Option<f64>>>,
}

impl RawTables {
    pub fn n_products(&self) -> usize {
        self.prices.len()
    }

    pub fn n_months(&self) -> usize {
        self.prices.first().map(|r| r.len()).unwrap_or(0)
    }

    /// Products observed in both months.
    pub fn matched(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.n_products())
            .filter(|&i| self.prices[i][a].is_some() && self.prices[i][b].is_some())
            .collect()
    }

    /// Products observed in the given month.
    pub fn present(&self, t: usize) -> Vec<usize> {
        (0..self.n_products()).filter(|&i| self.prices[i][t].is_some()).collect()
    }

    fn p(&self, i: usize, t: usize) -> f64 {
        self.prices[i][t].unwrap()
    }

    fn q(&self, i: usize, t: usize) -> f64 {
        self.quantities[i][t].unwrap()
    }

    /// Expenditure share of product `i` in month `t` over the matched set `set`.
    fn share(&self, set: &[usize], i: usize, t: usize) -> f64 {
        let total: f64 = set.iter().map(|&k| self.p(k, t) * self.q(k, t)).sum();
        self.p(i, t) * self.q(i, t) / total
    }

    /// Sub-table restricted to months `from..=to` (product axis unchanged).
    pub fn window(&self, from: usize, to: usize) -> RawTables {
        RawTables {
            prices: self.prices.iter().map(|r| r[from..=to].to_vec()).collect(),
            quantities: self.quantities.iter().map(|r| r[from..=to].to_vec()).collect(),
        }
    }
}

pub fn jevons(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    let n = set.len() as f64;
    let mut prod = 1.0;
    for &i in &set {
        prod *= (t.p(i, b) / t.p(i, a)).powf(1.0 / n);
    }
    Some(prod)
}

pub fn dutot(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    let num: f64 = set.iter().map(|&i| t.p(i, b)).sum();
    let den: f64 = set.iter().map(|&i| t.p(i, a)).sum();
    Some(num / den)
}

pub fn carli(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    let sum: f64 = set.iter().map(|&i| t.p(i, b) / t.p(i, a)).sum();
    Some(sum / set.len() as f64)
}

pub fn harmonic(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    let sum: f64 = set.iter().map(|&i| t.p(i, a) / t.p(i, b)).sum();
    Some(set.len() as f64 / sum)
}

pub fn cswd(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    Some((carli(t, a, b)? * harmonic(t, a, b)?).sqrt())
}

pub fn laspeyres(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    let num: f64 = set.iter().map(|&i| t.p(i, b) * t.q(i, a)).sum();
    let den: f64 = set.iter().map(|&i| t.p(i, a) * t.q(i, a)).sum();
    Some(num / den)
}

pub fn paasche(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    let num: f64 = set.iter().map(|&i| t.p(i, b) * t.q(i, b)).sum();
    let den: f64 = set.iter().map(|&i| t.p(i, a) * t.q(i, b)).sum();
    Some(num / den)
}

pub fn fisher(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    Some((laspeyres(t, a, b)? * paasche(t, a, b)?).sqrt())
}

pub fn tornqvist(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    let mut prod = 1.0;
    for &i in &set {
        let w = (t.share(&set, i, a) + t.share(&set, i, b)) / 2.0;
        prod *= (t.p(i, b) / t.p(i, a)).powf(w);
    }
    Some(prod)
}

pub fn sato_vartia(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let set = t.matched(a, b);
    if set.is_empty() {
        return None;
    }
    // Logarithmic mean of the shares; limit s when both shares coincide.
    let logmean = |s0: f64, s1: f64| if s0 == s1 { s0 } else { (s1 - s0) / (s1.ln() - s0.ln()) };
    let mut weights = Vec::new();
    for &i in &set {
        weights.push(logmean(t.share(&set, i, a), t.share(&set, i, b)));
    }
    let total: f64 = weights.iter().sum();
    let mut ln_index = 0.0;
    for (k, &i) in set.iter().enumerate() {
        ln_index += weights[k] / total * (t.p(i, b) / t.p(i, a)).ln();
    }
    Some(ln_index.exp())
}

/// Dispatch a bilateral formula by its CLI identifier.
pub fn oracle_index(formula: &str, t: &RawTables, a: usize, b: usize) -> Option<f64> {
    match formula {
        "jevons" => jevons(t, a, b),
        "dutot" => dutot(t, a, b),
        "carli" => carli(t, a, b),
        "harmonic" => harmonic(t, a, b),
        "cswd" => cswd(t, a, b),
        "laspeyres" => laspeyres(t, a, b),
        "paasche" => paasche(t, a, b),
        "fisher" => fisher(t, a, b),
        "tornqvist" => tornqvist(t, a, b),
        "sato-vartia" => sato_vartia(t, a, b),
        other => panic!("unknown formula id `{other}`"),
    }
}

/// Single GEKS value comparing month `b` with month `a` over the whole table.
pub fn geks_pair(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let span = t.n_months();
    let mut prod = 1.0;
    for tau in 0..span {
        prod *= (fisher(t, tau, b)? / fisher(t, tau, a)?).powf(1.0 / span as f64);
    }
    Some(prod)
}

/// GEKS series relative to month 0.
pub fn geks(t: &RawTables) -> Option<Vec<f64>> {
    (0..t.n_months()).map(|m| geks_pair(t, 0, m)).collect()
}

pub fn ccdi_pair(t: &RawTables, a: usize, b: usize) -> Option<f64> {
    let span = t.n_months();
    let mut prod = 1.0;
    for tau in 0..span {
        prod *= (tornqvist(t, tau, b)? / tornqvist(t, tau, a)?).powf(1.0 / span as f64);
    }
    Some(prod)
}

pub fn ccdi(t: &RawTables) -> Option<Vec<f64>> {
    (0..t.n_months()).map(|m| ccdi_pair(t, 0, m)).collect()
}

/// Quality-adjusted unit value series for fixed adjustment factors `v`.
pub fn qu_series(t: &RawTables, v: &[f64]) -> Vec<f64> {
    let span = t.n_months();
    let g0 = t.present(0);
    let turnover0: f64 = g0.iter().map(|&i| t.p(i, 0) * t.q(i, 0)).sum();
    let common0: f64 = g0.iter().map(|&i| v[i] * t.q(i, 0)).sum();
    (0..span)
        .map(|z| {
            let gz = t.present(z);
            let turnover: f64 = gz.iter().map(|&i| t.p(i, z) * t.q(i, z)).sum();
            let common: f64 = gz.iter().map(|&i| v[i] * t.q(i, z)).sum();
            (turnover / turnover0) / (common / common0)
        })
        .collect()
}

/// Geary-Khamis fixed point, iterated from v = 1 until the maximum relative
/// change in v drops below `tol`. Returns (series relative to month 0, v).
pub fn geary_khamis(t: &RawTables, tol: f64, max_iter: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = t.n_products();
    let span = t.n_months();
    let mut v = vec![1.0; n];
    for _ in 0..max_iter {
        let series = qu_series(t, &v);
        let mut v_next = vec![0.0; n];
        for (i, next) in v_next.iter_mut().enumerate() {
            let total_q: f64 = (0..span).filter_map(|z| t.quantities[i][z]).sum();
            for (z, level) in series.iter().enumerate() {
                if let (Some(p), Some(q)) = (t.prices[i][z], t.quantities[i][z]) {
                    let phi = q / total_q;
                    *next += phi * p / level;
                }
            }
        }
        let residual = (0..n).map(|i| ((v_next[i] - v[i]) / v[i]).abs()).fold(0.0, f64::max);
        v = v_next;
        if residual < tol {
            return Some((qu_series(t, &v), v));
        }
    }
    None
}

/// Weighted least squares for the time/product dummy model via explicit
/// normal equations and Gaussian elimination.
///
/// Returns (delta over months with delta[0] = 0, gamma over products with
/// gamma[0] = 0, series relative to month 0 from the quality-adjusted ratios).
pub fn tpd(t: &RawTables) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = t.n_products();
    let span = t.n_months();
    let k = 1 + (span - 1) + (n - 1); // intercept, time dummies, product dummies
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];

    // Monthly expenditure shares over all products observed in the month.
    let mut month_total = vec![0.0; span];
    for (z, total) in month_total.iter_mut().enumerate() {
        for i in 0..n {
            if let (Some(p), Some(q)) = (t.prices[i][z], t.quantities[i][z]) {
                *total += p * q;
            }
        }
    }

    for z in 0..span {
        for i in 0..n {
            let (p, q) = match (t.prices[i][z], t.quantities[i][z]) {
                (Some(p), Some(q)) => (p, q),
                _ => continue,
            };
            let w = p * q / month_total[z];
            let y = p.ln();
            let mut row = vec![0.0; k];
            row[0] = 1.0;
            if z > 0 {
                row[z] = 1.0; // columns 1..span-1 are time dummies
            }
            if i > 0 {
                row[span - 1 + i] = 1.0; // columns span..k-1 are product dummies
            }
            for r in 0..k {
                if row[r] == 0.0 {
                    continue;
                }
                for c in 0..k {
                    xtx[r][c] += w * row[r] * row[c];
                }
                xty[r] += w * row[r] * y;
            }
        }
    }

    let beta = solve_gauss(xtx, xty)?;
    let mut delta = vec![0.0; span];
    delta[1..span].copy_from_slice(&beta[1..span]);
    let mut gamma = vec![0.0; n];
    gamma[1..n].copy_from_slice(&beta[span..k]);

    // Index via the quality-adjusted price levels.
    let level = |z: usize| -> f64 {
        let gz = t.present(z);
        let mut ln_level = 0.0;
        for &i in &gz {
            let s = t.p(i, z) * t.q(i, z) / month_total[z];
            ln_level += s * (t.p(i, z).ln() - gamma[i]);
        }
        ln_level.exp()
    };
    let base = level(0);
    let series = (0..span).map(|z| level(z) / base).collect();
    Some((delta, gamma, series))
}

/// Plain Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)] // two rows of `a` alias inside the elimination
fn solve_gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for c in row + 1..n {
            sum -= a[row][c] * x[c];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

/// One splice factor: multilateral comparison of `t` with `t - offset` inside
/// the window ending at `t`, divided by the comparison of `t - 1` with the
/// same month inside the window ending at `t - 1`. Months are absolute table
/// indices; the window spans `window_len` months.
pub fn splice_factor(
    t: &RawTables,
    multilateral: fn(&RawTables) -> Option<Vec<f64>>,
    window_len: usize,
    month: usize,
    offset: usize,
) -> Option<f64> {
    let cur = t.window(month + 1 - window_len, month);
    let prev = t.window(month - window_len, month - 1);
    let cur_series = multilateral(&cur)?;
    let prev_series = multilateral(&prev)?;
    // Window-local positions of the link month t - offset.
    let cur_pos = window_len - 1 - offset;
    let prev_pos = window_len - offset;
    Some(
        (cur_series[window_len - 1] / cur_series[cur_pos])
            / (prev_series[window_len - 1] / prev_series[prev_pos]),
    )
}
