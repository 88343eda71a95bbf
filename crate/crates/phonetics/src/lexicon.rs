//! Word-to-phoneme conversion: dictionary lookup with an embedded
//! pronouncing dictionary, plus deterministic letter-to-sound rules for
//! out-of-vocabulary words.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use crate::inventory::{Phoneme, PhonemeSequence};
use crate::{PhoneticsError, Result};

const EMBEDDED_LEXICON: &str = include_str!("../data/lexicon.txt");

/// A pronouncing dictionary mapping uppercase words to one or more
/// pronunciation variants.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, Vec<PhonemeSequence>>,
}

impl Lexicon {
    /// Parses dictionary text: `WORD  PH1 PH2 ...` per line, `#` comments,
    /// repeated words accumulating variants.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, Vec<PhonemeSequence>> = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts
                .next()
                .expect("non-empty line has a first token")
                .to_ascii_uppercase();
            let rest = parts.collect::<Vec<_>>().join(" ");
            let seq = PhonemeSequence::parse(&rest).map_err(|e| {
                PhoneticsError::LexiconFormat {
                    line: lineno + 1,
                    detail: e.to_string(),
                }
            })?;
            entries.entry(word).or_default().push(seq);
        }
        if entries.is_empty() {
            return Err(PhoneticsError::LexiconFormat {
                line: 0,
                detail: "dictionary contains no entries".into(),
            });
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// The compiled-in dictionary (CNC word lists and homophone pairs).
    pub fn embedded() -> &'static Lexicon {
        static EMBEDDED: OnceLock<Lexicon> = OnceLock::new();
        EMBEDDED.get_or_init(|| {
            Lexicon::parse(EMBEDDED_LEXICON).expect("embedded lexicon parses")
        })
    }

    pub fn lookup(&self, word: &str) -> Option<&[PhonemeSequence]> {
        self.entries
            .get(&word.to_ascii_uppercase())
            .map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// All pronunciation variants for a word. Dictionary words return their
    /// listed variants; anything else falls back to letter-to-sound rules
    /// and is flagged as out-of-vocabulary.
    pub fn to_phonemes(&self, word: &str) -> Result<Pronunciations> {
        validate_word(word)?;
        if let Some(variants) = self.lookup(word) {
            return Ok(Pronunciations {
                variants: variants.to_vec(),
                out_of_vocabulary: false,
            });
        }
        Ok(Pronunciations {
            variants: vec![letter_to_sound(word)?],
            out_of_vocabulary: true,
        })
    }
}

/// The pronunciation variants of one word, with a flag marking rule-based
/// fallback output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pronunciations {
    pub variants: Vec<PhonemeSequence>,
    pub out_of_vocabulary: bool,
}

fn validate_word(word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(PhoneticsError::InvalidWord {
            word: word.to_string(),
            detail: "empty word".into(),
        });
    }
    if let Some(bad) = word.chars().find(|c| !c.is_ascii_alphabetic() && *c != '\'') {
        return Err(PhoneticsError::InvalidWord {
            word: word.to_string(),
            detail: format!("unsupported character {bad:?}"),
        });
    }
    if !word.chars().any(|c| c.is_ascii_alphabetic()) {
        return Err(PhoneticsError::InvalidWord {
            word: word.to_string(),
            detail: "no letters".into(),
        });
    }
    Ok(())
}

/// Multi-letter spelling patterns tried longest-first at each position.
const DIGRAPHS: [(&str, &[&str]); 22] = [
    ("tch", &["CH"]),
    ("igh", &["AY"]),
    ("ch", &["CH"]),
    ("sh", &["SH"]),
    ("th", &["TH"]),
    ("ph", &["F"]),
    ("wh", &["W"]),
    ("ck", &["K"]),
    ("ng", &["NG"]),
    ("qu", &["K", "W"]),
    ("oo", &["UW"]),
    ("ee", &["IY"]),
    ("ea", &["IY"]),
    ("ai", &["EY"]),
    ("ay", &["EY"]),
    ("oa", &["OW"]),
    ("ou", &["AW"]),
    ("ow", &["AW"]),
    ("oi", &["OY"]),
    ("oy", &["OY"]),
    ("aw", &["AO"]),
    ("au", &["AO"]),
];

/// Deterministic letter-to-sound conversion for out-of-vocabulary words:
/// greedy longest-match digraph rules, doubled letters collapsed, a silent
/// final `e` dropped, then single-letter defaults. Crude by design; the
/// output is flagged so downstream consumers know it is rule-based.
pub(crate) fn letter_to_sound(word: &str) -> Result<PhonemeSequence> {
    let lower = word.to_ascii_lowercase();
    let mut letters: Vec<char> = lower.chars().filter(|c| *c != '\'').collect();
    // Silent final e after a consonant ("kite", "mode").
    if letters.len() > 2 {
        let last = letters[letters.len() - 1];
        let prev = letters[letters.len() - 2];
        if last == 'e' && !"aeiou".contains(prev) {
            letters.pop();
        }
    }

    let s: String = letters.iter().collect();
    let bytes = s.as_bytes();
    let mut symbols: Vec<&str> = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        for (pattern, output) in DIGRAPHS {
            if s[i..].starts_with(pattern) {
                symbols.extend_from_slice(output);
                i += pattern.len();
                continue 'outer;
            }
        }
        let c = bytes[i] as char;
        // Collapse doubled letters.
        if i + 1 < bytes.len() && bytes[i + 1] as char == c {
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).map(|b| *b as char);
        let soft = matches!(next, Some('e') | Some('i') | Some('y'));
        match c {
            'a' => symbols.push("AE"),
            'b' => symbols.push("B"),
            'c' => symbols.push(if soft { "S" } else { "K" }),
            'd' => symbols.push("D"),
            'e' => symbols.push("EH"),
            'f' => symbols.push("F"),
            'g' => symbols.push(if soft { "JH" } else { "G" }),
            'h' => symbols.push("HH"),
            'i' => symbols.push("IH"),
            'j' => symbols.push("JH"),
            'k' => symbols.push("K"),
            'l' => symbols.push("L"),
            'm' => symbols.push("M"),
            'n' => symbols.push("N"),
            'o' => symbols.push("AA"),
            'p' => symbols.push("P"),
            'q' => symbols.push("K"),
            'r' => symbols.push("R"),
            's' => symbols.push("S"),
            't' => symbols.push("T"),
            'u' => symbols.push("AH"),
            'v' => symbols.push("V"),
            'w' => symbols.push("W"),
            'x' => {
                symbols.push("K");
                symbols.push("S");
            }
            'y' => symbols.push(if i == 0 { "Y" } else { "IY" }),
            'z' => symbols.push("Z"),
            other => {
                return Err(PhoneticsError::InvalidWord {
                    word: word.to_string(),
                    detail: format!("unsupported character {other:?}"),
                })
            }
        }
        i += 1;
    }
    let phonemes = symbols
        .into_iter()
        .map(Phoneme::from_symbol)
        .collect::<Result<Vec<_>>>()?;
    PhonemeSequence::new(phonemes).map_err(|_| PhoneticsError::InvalidWord {
        word: word.to_string(),
        detail: "letter-to-sound produced no phonemes".into(),
    })
}
