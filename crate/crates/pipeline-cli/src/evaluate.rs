//! Paired evaluation of fixed versus adaptive speech: per-stratum summary
//! cells and Wilcoxon signed-rank tests over participant means.

use std::collections::BTreeMap;

use etv_model::InteractionTuple;
use serde::Serialize;
use stats::{wilcoxon_signed_rank, WilcoxonResult};

use crate::{PipelineError, Result};

/// Mean and sample standard deviation of one outcome in one cell.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CellSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl CellSummary {
    fn over(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        CellSummary { mean, std, n }
    }

    /// The "mean ± std" rendering used in the results table.
    pub fn display(&self) -> String {
        format!("{:.2} \u{00b1} {:.2}", self.mean, self.std)
    }
}

/// Similarity-score and experience cells for one condition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionCells {
    pub score: CellSummary,
    pub ux: CellSummary,
}

/// One stratum's cells and paired tests.
#[derive(Debug, Clone, Serialize)]
pub struct StratumReport {
    pub stratum: &'static str,
    pub n_pairs: usize,
    pub n_participants: usize,
    pub fixed: ConditionCells,
    pub adaptive: ConditionCells,
    pub score_test: WilcoxonResult,
    pub ux_test: WilcoxonResult,
}

/// The full evaluation: every pair, then split by annoyance stratum.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub ar_threshold: f64,
    pub all: StratumReport,
    pub low_annoyance: StratumReport,
    pub high_annoyance: StratumReport,
}

struct Pair<'a> {
    subject: &'a str,
    fixed: &'a InteractionTuple,
    adaptive: &'a InteractionTuple,
    high: bool,
}

fn index_condition<'a>(
    condition: &'static str,
    tuples: &'a [InteractionTuple],
) -> Result<BTreeMap<(String, String), &'a InteractionTuple>> {
    let mut map = BTreeMap::new();
    for tuple in tuples {
        let key = (tuple.subject_id.clone(), tuple.word_id.clone());
        if map.insert(key, tuple).is_some() {
            return Err(PipelineError::DuplicatePair {
                condition,
                key: format!("{}/{}", tuple.subject_id, tuple.word_id),
            });
        }
    }
    Ok(map)
}

fn summarize(stratum: &'static str, pairs: &[&Pair]) -> Result<StratumReport> {
    if pairs.is_empty() {
        return Err(PipelineError::EmptyStratum { stratum });
    }
    let fixed = ConditionCells {
        score: CellSummary::over(
            &pairs
                .iter()
                .map(|p| p.fixed.phonetic_similarity)
                .collect::<Vec<_>>(),
        ),
        ux: CellSummary::over(&pairs.iter().map(|p| p.fixed.ux).collect::<Vec<_>>()),
    };
    let adaptive = ConditionCells {
        score: CellSummary::over(
            &pairs
                .iter()
                .map(|p| p.adaptive.phonetic_similarity)
                .collect::<Vec<_>>(),
        ),
        ux: CellSummary::over(&pairs.iter().map(|p| p.adaptive.ux).collect::<Vec<_>>()),
    };

    // The tests run on participant means, one pair of means per participant,
    // so participants with many words do not dominate.
    let mut by_subject: BTreeMap<&str, Vec<&Pair>> = BTreeMap::new();
    for pair in pairs {
        by_subject.entry(pair.subject).or_default().push(pair);
    }
    let mean_of = |rows: &[&Pair], get: fn(&Pair) -> f64| -> f64 {
        rows.iter().map(|p| get(p)).sum::<f64>() / rows.len() as f64
    };
    let mut fixed_score = Vec::new();
    let mut adaptive_score = Vec::new();
    let mut fixed_ux = Vec::new();
    let mut adaptive_ux = Vec::new();
    for rows in by_subject.values() {
        fixed_score.push(mean_of(rows, |p| p.fixed.phonetic_similarity));
        adaptive_score.push(mean_of(rows, |p| p.adaptive.phonetic_similarity));
        fixed_ux.push(mean_of(rows, |p| p.fixed.ux));
        adaptive_ux.push(mean_of(rows, |p| p.adaptive.ux));
    }

    Ok(StratumReport {
        stratum,
        n_pairs: pairs.len(),
        n_participants: by_subject.len(),
        fixed,
        adaptive,
        score_test: wilcoxon_signed_rank(&fixed_score, &adaptive_score)?,
        ux_test: wilcoxon_signed_rank(&fixed_ux, &adaptive_ux)?,
    })
}

/// Pairs the two conditions by (subject, word), summarizes each stratum,
/// and tests fixed against adaptive on participant means.
///
/// Every row in one condition must have exactly one partner in the other,
/// and both rows of a pair must fall on the same side of the annoyance
/// threshold; violations are reported with the offending keys.
pub fn run_evaluation(
    fixed: &[InteractionTuple],
    adaptive: &[InteractionTuple],
    ar_threshold: f64,
) -> Result<EvaluationReport> {
    if !ar_threshold.is_finite() {
        return Err(PipelineError::Validation(format!(
            "annoyance threshold {ar_threshold} must be finite"
        )));
    }
    let fixed_index = index_condition("fixed", fixed)?;
    let adaptive_index = index_condition("adaptive", adaptive)?;

    let missing_in_adaptive: Vec<String> = fixed_index
        .keys()
        .filter(|k| !adaptive_index.contains_key(*k))
        .map(|(s, w)| format!("{s}/{w}"))
        .collect();
    let missing_in_fixed: Vec<String> = adaptive_index
        .keys()
        .filter(|k| !fixed_index.contains_key(*k))
        .map(|(s, w)| format!("{s}/{w}"))
        .collect();
    if !missing_in_adaptive.is_empty() || !missing_in_fixed.is_empty() {
        return Err(PipelineError::UnpairedRows {
            missing_in_adaptive,
            missing_in_fixed,
        });
    }

    let mut offenders = Vec::new();
    let mut pairs = Vec::new();
    for (key, fixed_row) in &fixed_index {
        let adaptive_row = adaptive_index[key];
        let fixed_high = fixed_row.env.annoyance >= ar_threshold;
        let adaptive_high = adaptive_row.env.annoyance >= ar_threshold;
        if fixed_high != adaptive_high {
            offenders.push(format!("{}/{}", key.0, key.1));
            continue;
        }
        pairs.push(Pair {
            subject: &fixed_row.subject_id,
            fixed: fixed_row,
            adaptive: adaptive_row,
            high: fixed_high,
        });
    }
    if !offenders.is_empty() {
        return Err(PipelineError::StratumMismatch { offenders });
    }

    let all: Vec<&Pair> = pairs.iter().collect();
    let low: Vec<&Pair> = pairs.iter().filter(|p| !p.high).collect();
    let high: Vec<&Pair> = pairs.iter().filter(|p| p.high).collect();

    Ok(EvaluationReport {
        ar_threshold,
        all: summarize("all", &all)?,
        low_annoyance: summarize("low-annoyance", &low)?,
        high_annoyance: summarize("high-annoyance", &high)?,
    })
}
