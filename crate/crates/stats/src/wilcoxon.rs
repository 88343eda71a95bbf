//! Wilcoxon signed-rank test with mid-ranks for ties, a tie-corrected
//! variance, and a continuity correction.

use serde::Serialize;

use crate::{two_sided_p, StatsError};

/// Result of a two-sided Wilcoxon signed-rank test.
#[derive(Debug, Clone, Serialize)]
pub struct WilcoxonResult {
    /// Normal-approximation statistic; at most zero by the min-sum
    /// convention, so "more negative" means a stronger difference.
    pub z_statistic: f64,
    pub p_value: f64,
    /// Effect size r = |Z| / sqrt(n_effective).
    pub effect_size_r: f64,
    /// Pairs remaining after zero differences are removed.
    pub n_effective: usize,
    /// min(W+, W-).
    pub w_statistic: f64,
    pub w_positive: f64,
    pub w_negative: f64,
}

/// Mid-ranks of the absolute differences plus the tie-correction sum
/// of t^3 - t over tie groups.
fn midranks(abs_diffs: &[f64]) -> (Vec<f64>, f64) {
    let n = abs_diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs_diffs[a].partial_cmp(&abs_diffs[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the mid-rank of ranks i+1..=j+1.
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_sum)
}

/// Paired two-sided Wilcoxon signed-rank test of `a` against `b`.
///
/// Zero differences are dropped; at least 5 informative pairs must remain.
/// The statistic is the smaller signed-rank sum, standardized with a
/// tie-corrected variance and a 0.5 continuity correction, so Z <= 0.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(StatsError::NonFinite(format!("pair {i}")));
        }
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::DegeneratePairing);
    }
    if diffs.len() < 5 {
        return Err(StatsError::TooFewPairs {
            effective: diffs.len(),
        });
    }

    let n = diffs.len();
    let abs_diffs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, tie_sum) = midranks(&abs_diffs);
    let w_positive: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = n as f64 * (n + 1) as f64 / 2.0;
    let w_negative = total - w_positive;
    let w = w_positive.min(w_negative);

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum / 48.0;
    let sd = variance.sqrt();
    if !(sd > 0.0) {
        return Err(StatsError::DegeneratePairing);
    }
    let z = ((w - mean + 0.5) / sd).min(0.0);
    let p_value = two_sided_p(z);

    Ok(WilcoxonResult {
        z_statistic: z,
        p_value,
        effect_size_r: z.abs() / nf.sqrt(),
        n_effective: n,
        w_statistic: w,
        w_positive,
        w_negative,
    })
}
