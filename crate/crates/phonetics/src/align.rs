//! Global phoneme-sequence alignment and the similarity score built on it.

use crate::inventory::{phoneme_distance, Phoneme, PhonemeSequence};
use crate::lexicon::Lexicon;
use crate::Result;

/// Cost of inserting or deleting one phoneme. Maximal, so a gap is never
/// cheaper than any substitution.
pub const INDEL_COST: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlignmentStep {
    /// Target phoneme aligned to response phoneme at the given cost.
    Substitute {
        target: Phoneme,
        response: Phoneme,
        cost: f64,
    },
    /// Target phoneme with no counterpart in the response.
    Delete { target: Phoneme },
    /// Response phoneme with no counterpart in the target.
    Insert { response: Phoneme },
}

/// Result of scoring a word pair: the score, the winning variant pair and
/// its alignment, and the cost breakdown behind the normalization.
#[derive(Debug, Clone)]
pub struct SimilarityScore {
    /// `1 − cost / normalizer`, clamped to [0, 1]. Exactly 1 iff cost is 0.
    pub value: f64,
    pub alignment: Vec<AlignmentStep>,
    pub target_pronunciation: PhonemeSequence,
    pub response_pronunciation: PhonemeSequence,
    /// Total alignment cost of the winning variant pair.
    pub cost: f64,
    /// `max(target length, response length)` of the winning variant pair.
    pub normalizer: f64,
    /// True when the corresponding word fell back to letter-to-sound rules.
    pub target_oov: bool,
    pub response_oov: bool,
}

/// Minimum-cost global alignment of two phoneme sequences: substitution
/// costs the feature distance, gaps cost [`INDEL_COST`]. On ties the
/// traceback prefers substitution over gaps, and deletion over insertion,
/// so alignments are stable.
pub fn align(target: &PhonemeSequence, response: &PhonemeSequence) -> (f64, Vec<AlignmentStep>) {
    let a = &target.phonemes;
    let b = &response.phonemes;
    let (la, lb) = (a.len(), b.len());
    let width = lb + 1;

    #[derive(Clone, Copy, PartialEq)]
    enum Op {
        Start,
        Sub,
        Del,
        Ins,
    }

    let mut cost = vec![0.0; (la + 1) * width];
    let mut op = vec![Op::Start; (la + 1) * width];
    for j in 1..=lb {
        cost[j] = j as f64 * INDEL_COST;
        op[j] = Op::Ins;
    }
    for i in 1..=la {
        cost[i * width] = i as f64 * INDEL_COST;
        op[i * width] = Op::Del;
        for j in 1..=lb {
            let sub = cost[(i - 1) * width + (j - 1)] + phoneme_distance(a[i - 1], b[j - 1]);
            let del = cost[(i - 1) * width + j] + INDEL_COST;
            let ins = cost[i * width + (j - 1)] + INDEL_COST;
            // Tie-break order: substitution, deletion, insertion.
            let (best, best_op) = if sub <= del && sub <= ins {
                (sub, Op::Sub)
            } else if del <= ins {
                (del, Op::Del)
            } else {
                (ins, Op::Ins)
            };
            cost[i * width + j] = best;
            op[i * width + j] = best_op;
        }
    }

    let mut steps = Vec::with_capacity(la.max(lb));
    let (mut i, mut j) = (la, lb);
    while i > 0 || j > 0 {
        match op[i * width + j] {
            Op::Sub => {
                i -= 1;
                j -= 1;
                steps.push(AlignmentStep::Substitute {
                    target: a[i],
                    response: b[j],
                    cost: phoneme_distance(a[i], b[j]),
                });
            }
            Op::Del => {
                i -= 1;
                steps.push(AlignmentStep::Delete { target: a[i] });
            }
            Op::Ins => {
                j -= 1;
                steps.push(AlignmentStep::Insert { response: b[j] });
            }
            Op::Start => unreachable!("traceback escaped the matrix"),
        }
    }
    steps.reverse();
    (cost[la * width + lb], steps)
}

/// Phonetic similarity between a target word and a response word using a
/// specific dictionary: both words are converted to their pronunciation
/// variants, every variant pair is aligned, and the best normalized score
/// wins.
pub fn similarity_with(lexicon: &Lexicon, target: &str, response: &str) -> Result<SimilarityScore> {
    let target_pron = lexicon.to_phonemes(target)?;
    let response_pron = lexicon.to_phonemes(response)?;

    let mut best: Option<SimilarityScore> = None;
    for t in &target_pron.variants {
        for r in &response_pron.variants {
            let (cost, alignment) = align(t, r);
            let normalizer = t.len().max(r.len()) as f64;
            let value = (1.0 - cost / normalizer).clamp(0.0, 1.0);
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(SimilarityScore {
                    value,
                    alignment,
                    target_pronunciation: t.clone(),
                    response_pronunciation: r.clone(),
                    cost,
                    normalizer,
                    target_oov: target_pron.out_of_vocabulary,
                    response_oov: response_pron.out_of_vocabulary,
                });
            }
        }
    }
    Ok(best.expect("to_phonemes guarantees at least one variant"))
}

/// [`similarity_with`] against the embedded dictionary.
pub fn similarity(target: &str, response: &str) -> Result<SimilarityScore> {
    similarity_with(Lexicon::embedded(), target, response)
}
