//! Small numeric helpers shared across index computations.

/// Neumaier-compensated sum.
///
/// Totals feed strict comparisons (share thresholds) and ratios that must
/// hit identities exactly, so plain left-to-right addition is not enough:
/// its rounding can move a boundary value to the wrong side. Compensation
/// recovers the correctly rounded sum for the cases that matter here.
pub(crate) fn sum<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut s = 0.0_f64;
    let mut compensation = 0.0_f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            compensation += (s - t) + v;
        } else {
            compensation += (v - t) + s;
        }
        s = t;
    }
    s + compensation
}
