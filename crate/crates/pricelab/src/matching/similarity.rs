//! Jaro and Jaro-Winkler string similarity.

use crate::error::{Error, Result};

/// Jaro similarity in [0, 1].
///
/// Characters match when equal and no further apart than
/// ⌊max(|s1|,|s2|)/2⌋ − 1 positions; `t` is half the number of matched
/// characters that appear in a different order in the two strings. Returns 0
/// when there are no matching characters at all (including when either
/// string is empty), otherwise (1/3)(m/|s1| + m/|s2| + (m−t)/m). Symmetric.
pub fn jaro_similarity(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);

    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut m = 0usize;
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == ca {
                a_matched[i] = true;
                b_matched[j] = true;
                m += 1;
                break;
            }
        }
    }
    if m == 0 {
        return 0.0;
    }

    // Count matched characters that are out of order; t is half that count.
    let a_seq: Vec<char> = a.iter().zip(&a_matched).filter(|(_, &f)| f).map(|(&c, _)| c).collect();
    let b_seq: Vec<char> = b.iter().zip(&b_matched).filter(|(_, &f)| f).map(|(&c, _)| c).collect();
    let transposed = a_seq.iter().zip(&b_seq).filter(|(x, y)| x != y).count();
    let t = transposed as f64 / 2.0;

    let m = m as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler score: the Jaro similarity boosted by agreement on a prefix
/// of up to `max_prefix` characters, sim_w = sim_j + l·p·(1 − sim_j).
///
/// `p` must lie in [0, 0.25] so that the score stays within [0, 1].
pub fn winkler_score(s1: &str, s2: &str, p: f64, max_prefix: usize) -> Result<f64> {
    if !(0.0..=0.25).contains(&p) {
        return Err(Error::Parameter(format!(
            "prefix scaling factor must lie in [0, 0.25], got {p}"
        )));
    }
    let sim_j = jaro_similarity(s1, s2);
    let l = s1.chars().zip(s2.chars()).take(max_prefix).take_while(|(x, y)| x == y).count() as f64;
    Ok(sim_j + l * p * (1.0 - sim_j))
}
