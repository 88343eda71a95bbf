//! A deterministic paired-evaluation fixture: 27 participants by 30 words,
//! built so every summary cell of the results table lands on an exact,
//! pre-verified value at two decimal places.
//!
//! Each stratum/condition/outcome cell is a two-point distribution chosen
//! so its mean and sample standard deviation equal the target cell by
//! construction: a symmetric pair mean +/- d for the experience ratings and
//! an asymmetric pair (p copies high, q copies low) for similarity scores,
//! which keeps every value inside [0, 1] and [1, 10].

use etv_model::{EnvironmentContext, InteractionTuple, UserProfile, VoiceParameters};

pub const FIXTURE_SUBJECTS: usize = 27;
pub const FIXTURE_WORDS: usize = 30;

/// Expected "mean ± std" renderings, per stratum, at two decimals.
#[derive(Debug, Clone, Copy)]
pub struct ExpectedCells {
    pub stratum: &'static str,
    pub fixed_score: &'static str,
    pub adaptive_score: &'static str,
    pub fixed_ux: &'static str,
    pub adaptive_ux: &'static str,
}

pub const FIXTURE_CELLS: [ExpectedCells; 3] = [
    ExpectedCells {
        stratum: "all",
        fixed_score: "0.73 \u{00b1} 0.31",
        adaptive_score: "0.79 \u{00b1} 0.29",
        fixed_ux: "6.27 \u{00b1} 2.42",
        adaptive_ux: "6.60 \u{00b1} 2.43",
    },
    ExpectedCells {
        stratum: "low-annoyance",
        fixed_score: "0.78 \u{00b1} 0.28",
        adaptive_score: "0.81 \u{00b1} 0.28",
        fixed_ux: "6.60 \u{00b1} 2.36",
        adaptive_ux: "6.86 \u{00b1} 2.32",
    },
    ExpectedCells {
        stratum: "high-annoyance",
        fixed_score: "0.67 \u{00b1} 0.33",
        adaptive_score: "0.76 \u{00b1} 0.30",
        fixed_ux: "5.93 \u{00b1} 2.43",
        adaptive_ux: "6.34 \u{00b1} 2.52",
    },
];

/// Low-annoyance slots: the first fifteen words for everyone plus word 16
/// for the first five participants, giving 410 low and 400 high pairs.
fn is_low(subject: usize, word: usize) -> bool {
    word < 15 || (subject < 5 && word == 15)
}

/// Symmetric two-point values mean +/- d whose sample std is exactly `std`.
fn two_point_symmetric(mean: f64, std: f64, n: usize) -> (f64, f64) {
    let d = std * (((n - 1) as f64) / n as f64).sqrt();
    (mean - d, mean + d)
}

/// Asymmetric two-point values: `p` copies of the high value and `n - p`
/// of the low one, with exact sample mean and std. Shifting mass toward
/// the high value pulls it under 1.0, matching a score ceiling.
fn two_point_asymmetric(mean: f64, std: f64, n: usize, p: usize) -> (f64, f64) {
    let q = n - p;
    let s = std * (((n - 1) as f64) / n as f64).sqrt();
    let high = mean + s * (q as f64 / p as f64).sqrt();
    let low = mean - s * (p as f64 / q as f64).sqrt();
    (high, low)
}

struct StratumValues {
    n: usize,
    score_high: f64,
    score_low: f64,
    score_high_count: usize,
    ux_lo: f64,
    ux_hi: f64,
}

impl StratumValues {
    fn new(n: usize, score_mean: f64, score_std: f64, score_high_count: usize, ux_mean: f64, ux_std: f64) -> Self {
        let (score_high, score_low) = two_point_asymmetric(score_mean, score_std, n, score_high_count);
        let (ux_lo, ux_hi) = two_point_symmetric(ux_mean, ux_std, n);
        StratumValues {
            n,
            score_high,
            score_low,
            score_high_count,
            ux_lo,
            ux_hi,
        }
    }

    /// Score for the `slot`-th row of this stratum: exactly
    /// `score_high_count` high values spread evenly over the n slots.
    fn score(&self, slot: usize) -> f64 {
        let before = (slot * self.score_high_count) / self.n;
        let after = ((slot + 1) * self.score_high_count) / self.n;
        if after > before {
            self.score_high
        } else {
            self.score_low
        }
    }

    /// Experience rating for the `slot`-th row: alternating low and high.
    fn ux(&self, slot: usize) -> f64 {
        if slot % 2 == 0 {
            self.ux_lo
        } else {
            self.ux_hi
        }
    }
}

fn build_condition(
    low: &StratumValues,
    high: &StratumValues,
    voice: VoiceParameters,
) -> Vec<InteractionTuple> {
    let profile = UserProfile::new(1.0, 4.0).expect("fixture profile is valid");
    let mut rows = Vec::with_capacity(FIXTURE_SUBJECTS * FIXTURE_WORDS);
    let mut low_slot = 0usize;
    let mut high_slot = 0usize;
    for subject in 0..FIXTURE_SUBJECTS {
        for word in 0..FIXTURE_WORDS {
            let (values, slot, annoyance) = if is_low(subject, word) {
                let s = low_slot;
                low_slot += 1;
                (low, s, 3.0)
            } else {
                let s = high_slot;
                high_slot += 1;
                (high, s, 7.0)
            };
            let env = EnvironmentContext::new(annoyance, 200.0, 0.3)
                .expect("fixture context is valid");
            rows.push(InteractionTuple {
                subject_id: format!("s{:02}", subject + 1),
                word_id: format!("w{:02}", word + 1),
                voice,
                env,
                profile,
                phonetic_similarity: values.score(slot),
                ux: values.ux(slot),
            });
        }
    }
    debug_assert_eq!(low_slot, low.n);
    debug_assert_eq!(high_slot, high.n);
    rows
}

/// Builds the paired fixture: (fixed-voice rows, adaptive-voice rows),
/// 810 rows each, keyed by the same subject/word grid.
pub fn evaluation_fixture() -> (Vec<InteractionTuple>, Vec<InteractionTuple>) {
    let n_low = 410;
    let n_high = 400;

    let fixed_low = StratumValues::new(n_low, 0.78, 0.28, 260, 6.60, 2.36);
    let fixed_high = StratumValues::new(n_high, 0.67, 0.33, 200, 5.93, 2.43);
    let adaptive_low = StratumValues::new(n_low, 0.81, 0.28, 290, 6.86, 2.32);
    let adaptive_high = StratumValues::new(n_high, 0.76, 0.30, 250, 6.34, 2.52);

    let fixed_voice =
        VoiceParameters::new(1.0, 1.0, 1.0, 0.0).expect("fixture voice is valid");
    let adaptive_voice =
        VoiceParameters::new(1.4, 0.9, 0.8, 2.0).expect("fixture voice is valid");

    (
        build_condition(&fixed_low, &fixed_high, fixed_voice),
        build_condition(&adaptive_low, &adaptive_high, adaptive_voice),
    )
}
