//! The phoneme inventory and its articulatory feature table.
//!
//! Symbols follow the 39-phoneme ARPAbet (stress digits stripped). Every
//! phoneme carries voicing, a front-to-back place scalar, a manner class,
//! and height/backness/rounding for vowels (zero for consonants). The
//! weighted feature distance is a metric on the inventory with values in
//! [0, 1]; the weights sum to one and each component is itself a metric.

use crate::{PhoneticsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Manner {
    Stop,
    Fricative,
    Affricate,
    Nasal,
    Liquid,
    Glide,
    Vowel,
}

#[derive(Debug, Clone, Copy)]
pub struct Features {
    pub manner: Manner,
    pub voicing: f64,
    pub place: f64,
    pub height: f64,
    pub backness: f64,
    pub rounding: f64,
}

/// Distance weights; they sum to 1.0 so the distance stays in [0, 1].
const W_MANNER: f64 = 0.35;
const W_VOICING: f64 = 0.15;
const W_PLACE: f64 = 0.25;
const W_HEIGHT: f64 = 0.10;
const W_BACKNESS: f64 = 0.10;
const W_ROUNDING: f64 = 0.05;

macro_rules! features {
    ($manner:ident, $voicing:expr, $place:expr) => {
        Features {
            manner: Manner::$manner,
            voicing: $voicing,
            place: $place,
            height: 0.0,
            backness: 0.0,
            rounding: 0.0,
        }
    };
    (vowel, $height:expr, $backness:expr, $rounding:expr) => {
        Features {
            manner: Manner::Vowel,
            voicing: 1.0,
            place: 0.5,
            height: $height,
            backness: $backness,
            rounding: $rounding,
        }
    };
}

/// `(symbol, features)` for the full inventory. Place runs front (0.0,
/// bilabial) to back (1.0, glottal); vowel height runs open (0.0) to close
/// (1.0); vowel backness runs front (0.0) to back (1.0).
const INVENTORY: [(&str, Features); 39] = [
    // Stops
    ("P", features!(Stop, 0.0, 0.00)),
    ("B", features!(Stop, 1.0, 0.00)),
    ("T", features!(Stop, 0.0, 0.35)),
    ("D", features!(Stop, 1.0, 0.35)),
    ("K", features!(Stop, 0.0, 0.80)),
    ("G", features!(Stop, 1.0, 0.80)),
    // Fricatives
    ("F", features!(Fricative, 0.0, 0.10)),
    ("V", features!(Fricative, 1.0, 0.10)),
    ("TH", features!(Fricative, 0.0, 0.20)),
    ("DH", features!(Fricative, 1.0, 0.20)),
    ("S", features!(Fricative, 0.0, 0.35)),
    ("Z", features!(Fricative, 1.0, 0.35)),
    ("SH", features!(Fricative, 0.0, 0.50)),
    ("ZH", features!(Fricative, 1.0, 0.50)),
    ("HH", features!(Fricative, 0.0, 1.00)),
    // Affricates
    ("CH", features!(Affricate, 0.0, 0.50)),
    ("JH", features!(Affricate, 1.0, 0.50)),
    // Nasals
    ("M", features!(Nasal, 1.0, 0.00)),
    ("N", features!(Nasal, 1.0, 0.35)),
    ("NG", features!(Nasal, 1.0, 0.80)),
    // Liquids
    ("L", features!(Liquid, 1.0, 0.35)),
    ("R", features!(Liquid, 1.0, 0.45)),
    // Glides
    ("W", features!(Glide, 1.0, 0.05)),
    ("Y", features!(Glide, 1.0, 0.65)),
    // Vowels (height, backness, rounding)
    ("IY", features!(vowel, 1.00, 0.00, 0.0)),
    ("IH", features!(vowel, 0.75, 0.15, 0.0)),
    ("EY", features!(vowel, 0.60, 0.00, 0.0)),
    ("EH", features!(vowel, 0.40, 0.10, 0.0)),
    ("AE", features!(vowel, 0.15, 0.10, 0.0)),
    ("AA", features!(vowel, 0.00, 0.90, 0.0)),
    ("AO", features!(vowel, 0.25, 1.00, 0.6)),
    ("OW", features!(vowel, 0.60, 1.00, 0.8)),
    ("UH", features!(vowel, 0.75, 0.90, 0.7)),
    ("UW", features!(vowel, 1.00, 1.00, 0.9)),
    ("AH", features!(vowel, 0.35, 0.50, 0.0)),
    ("ER", features!(vowel, 0.50, 0.50, 0.0)),
    ("AY", features!(vowel, 0.35, 0.30, 0.0)),
    ("AW", features!(vowel, 0.35, 0.70, 0.4)),
    ("OY", features!(vowel, 0.50, 0.60, 0.4)),
];

/// One phoneme, stored as an index into the fixed inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phoneme(u8);

impl Phoneme {
    /// Parses an ARPAbet symbol, ignoring a trailing stress digit.
    pub fn from_symbol(symbol: &str) -> Result<Self> {
        let stripped = symbol.trim_end_matches(|c: char| c.is_ascii_digit());
        INVENTORY
            .iter()
            .position(|(s, _)| *s == stripped)
            .map(|i| Phoneme(i as u8))
            .ok_or_else(|| PhoneticsError::UnknownPhoneme(symbol.to_string()))
    }

    pub fn symbol(self) -> &'static str {
        INVENTORY[self.0 as usize].0
    }

    pub fn features(self) -> &'static Features {
        &INVENTORY[self.0 as usize].1
    }

    pub fn all() -> impl Iterator<Item = Phoneme> {
        (0..INVENTORY.len() as u8).map(Phoneme)
    }

    pub const COUNT: usize = INVENTORY.len();
}

impl std::fmt::Display for Phoneme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Weighted articulatory distance in [0, 1]. Zero exactly when the
/// phonemes are identical.
pub fn phoneme_distance(a: Phoneme, b: Phoneme) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = a.features();
    let fb = b.features();
    let manner = if fa.manner == fb.manner { 0.0 } else { 1.0 };
    W_MANNER * manner
        + W_VOICING * (fa.voicing - fb.voicing).abs()
        + W_PLACE * (fa.place - fb.place).abs()
        + W_HEIGHT * (fa.height - fb.height).abs()
        + W_BACKNESS * (fa.backness - fb.backness).abs()
        + W_ROUNDING * (fa.rounding - fb.rounding).abs()
}

/// An ordered, non-empty phoneme string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhonemeSequence {
    pub phonemes: Vec<Phoneme>,
}

impl PhonemeSequence {
    pub fn new(phonemes: Vec<Phoneme>) -> Result<Self> {
        if phonemes.is_empty() {
            return Err(PhoneticsError::EmptySequence);
        }
        Ok(Self { phonemes })
    }

    /// Parses a space-separated symbol string such as `"HH AE1 SH"`.
    pub fn parse(symbols: &str) -> Result<Self> {
        let phonemes = symbols
            .split_whitespace()
            .map(Phoneme::from_symbol)
            .collect::<Result<Vec<_>>>()?;
        Self::new(phonemes)
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }
}

impl std::fmt::Display for PhonemeSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, p) in self.phonemes.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(p.symbol())?;
        }
        Ok(())
    }
}
