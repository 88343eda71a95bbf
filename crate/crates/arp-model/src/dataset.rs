//! Manifest ingestion and deterministic train/val/test splitting for
//! annoyance-labelled audio corpora.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ArpError, Result};

/// Split sizes used when the corpus has the canonical 2890 clips.
pub const OFFICIAL_SPLIT: (usize, usize, usize) = (2200, 245, 445);

/// One labelled clip: a WAV filename (relative to the audio directory) and
/// its annoyance rating in [1, 10].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub file: String,
    pub annoyance: f64,
}

/// A labelled corpus partitioned into train, validation, and test splits.
///
/// The split vectors hold indices into `records`; no index appears in two
/// splits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaDataset {
    pub audio_dir: PathBuf,
    pub records: Vec<DeltaRecord>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Reads a two-column manifest CSV with the header `filename,annoyance`.
///
/// Labels must lie in [1, 10] and filenames must be unique; violations are
/// reported with their manifest line number.
pub fn read_manifest(path: &Path) -> Result<Vec<DeltaRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let expected = ["filename", "annoyance"];
    if headers.len() != expected.len()
        || headers.iter().zip(expected).any(|(got, want)| got != want)
    {
        return Err(ArpError::Manifest {
            line: 1,
            detail: format!(
                "header must be exactly \"filename,annoyance\", got {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        });
    }

    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for row in reader.records() {
        let row = row?;
        let line = row
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(records.len() + 2);
        if row.len() != 2 {
            return Err(ArpError::Manifest {
                line,
                detail: format!("expected 2 fields, got {}", row.len()),
            });
        }
        let file = row[0].to_string();
        if file.is_empty() {
            return Err(ArpError::Manifest {
                line,
                detail: "empty filename".into(),
            });
        }
        let annoyance: f64 = row[1].parse().map_err(|_| ArpError::Manifest {
            line,
            detail: format!("annoyance {:?} is not a number", &row[1]),
        })?;
        if !(1.0..=10.0).contains(&annoyance) {
            return Err(ArpError::LabelOutOfRange {
                line,
                value: annoyance,
            });
        }
        if !seen.insert(file.clone()) {
            return Err(ArpError::DuplicateFile(file));
        }
        records.push(DeltaRecord { file, annoyance });
    }
    Ok(records)
}

impl DeltaDataset {
    /// Builds a dataset with an explicit split, checking that the splits are
    /// disjoint, in range, and cover valid indices.
    pub fn with_split(
        audio_dir: PathBuf,
        records: Vec<DeltaRecord>,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let ds = DeltaDataset {
            audio_dir,
            records,
            train,
            val,
            test,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Partitions the records with a seeded shuffle.
    ///
    /// A corpus of exactly 2890 clips gets the canonical 2200/245/445 split;
    /// any other size is divided in the same proportions, rounding to the
    /// nearest clip.
    pub fn random_split(audio_dir: PathBuf, records: Vec<DeltaRecord>, seed: u64) -> Result<Self> {
        let n = records.len();
        let total = OFFICIAL_SPLIT.0 + OFFICIAL_SPLIT.1 + OFFICIAL_SPLIT.2;
        let (n_train, n_val) = if n == total {
            (OFFICIAL_SPLIT.0, OFFICIAL_SPLIT.1)
        } else {
            let share = |part: usize| {
                ((n as f64) * (part as f64) / (total as f64)).round() as usize
            };
            (share(OFFICIAL_SPLIT.0), share(OFFICIAL_SPLIT.1))
        };
        if n_train + n_val > n {
            return Err(ArpError::EmptySplit("test"));
        }

        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let train = order[..n_train].to_vec();
        let val = order[n_train..n_train + n_val].to_vec();
        let test = order[n_train + n_val..].to_vec();
        DeltaDataset::with_split(audio_dir, records, train, val, test)
    }

    /// Checks split disjointness, index bounds, and label ranges.
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(ArpError::EmptySplit("train"));
        }
        let mut seen = BTreeSet::new();
        for (name, split) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            for &idx in split {
                let record = self.records.get(idx).ok_or_else(|| ArpError::Manifest {
                    line: 0,
                    detail: format!("{name} split references record {idx} of {}", self.records.len()),
                })?;
                if !seen.insert(idx) {
                    return Err(ArpError::DuplicateFile(record.file.clone()));
                }
            }
        }
        for record in &self.records {
            if !(1.0..=10.0).contains(&record.annoyance) {
                return Err(ArpError::LabelOutOfRange {
                    line: 0,
                    value: record.annoyance,
                });
            }
        }
        Ok(())
    }

    /// Absolute path of the clip behind one record.
    pub fn clip_path(&self, idx: usize) -> PathBuf {
        self.audio_dir.join(&self.records[idx].file)
    }

    pub fn labels(&self, split: &[usize]) -> Vec<f64> {
        split.iter().map(|&i| self.records[i].annoyance).collect()
    }
}
