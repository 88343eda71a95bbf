//! Pipeline configuration: one commented TOML file naming the model
//! weights, feature settings, default listener profile, room reverberation
//! table, and the annoyance threshold for stratified evaluation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use audio_dsp::FeatureConfig;
use etv_model::UserProfile;
use serde::Deserialize;

use crate::{PipelineError, Result};

/// A commented example configuration, also used by the documentation.
pub const EXAMPLE_TOML: &str = r#"# Speech-adaptation pipeline configuration.
# All relative paths resolve against the directory containing this file.

[models]
# Annoyance-rating CNN weights (train with: voicepipe arp train).
arp_weights = "arp.bin"
# Environment-to-voice regressor weights (train with: voicepipe etv train).
etv_weights = "etv.bin"

# Log-mel feature extraction. Omitted keys keep the defaults shown here.
[features]
sample_rate_hz = 22050
window_len = 1024
hop_len = 683
n_mels = 64

# Listener profile used when the CLI flags are not given.
# hearing_difficulty: 1 (never struggles in noise) .. 5 (always).
# english_cefr: 1 (A1) .. 6 (C2).
[profile]
hearing_difficulty = 1
english_cefr = 4

# Named rooms and their reverberation times in seconds, for --room.
[rooms]
sound-studio = 0.04
meeting-room = 0.19
office = 0.32
laboratory = 0.43
lecture-hall = 0.56
dining-hall = 0.78

[evaluation]
# Pairs with annoyance at or above this fall in the high-annoyance stratum.
ar_threshold = 5.0
"#;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    models: RawModels,
    #[serde(default)]
    features: RawFeatures,
    #[serde(default)]
    profile: RawProfile,
    #[serde(default)]
    rooms: BTreeMap<String, f64>,
    #[serde(default)]
    evaluation: RawEvaluation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModels {
    arp_weights: PathBuf,
    etv_weights: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeatures {
    sample_rate_hz: Option<u32>,
    window_len: Option<usize>,
    hop_len: Option<usize>,
    n_mels: Option<usize>,
    f_min_hz: Option<f64>,
    f_max_hz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    hearing_difficulty: f64,
    english_cefr: f64,
}

impl Default for RawProfile {
    fn default() -> Self {
        RawProfile {
            hearing_difficulty: 1.0,
            english_cefr: 4.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaluation {
    ar_threshold: f64,
}

impl Default for RawEvaluation {
    fn default() -> Self {
        RawEvaluation { ar_threshold: 5.0 }
    }
}

/// Validated pipeline configuration with all paths resolved.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub arp_weights: PathBuf,
    pub etv_weights: PathBuf,
    pub default_profile: UserProfile,
    pub rooms: BTreeMap<String, f64>,
    pub ar_threshold: f64,
}

impl PipelineConfig {
    /// Loads and validates a configuration file. Relative paths resolve
    /// against the file's directory, and both weight files must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingFile {
            what: "configuration file",
            path: path.display().to_string(),
        })?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| PipelineError::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let config_error = |detail: String| PipelineError::Config {
            path: path.display().to_string(),
            detail,
        };

        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let arp_weights = resolve(&raw.models.arp_weights);
        if !arp_weights.is_file() {
            return Err(PipelineError::MissingFile {
                what: "ARP weights file",
                path: arp_weights.display().to_string(),
            });
        }
        let etv_weights = resolve(&raw.models.etv_weights);
        if !etv_weights.is_file() {
            return Err(PipelineError::MissingFile {
                what: "ETV weights file",
                path: etv_weights.display().to_string(),
            });
        }

        let mut features = FeatureConfig::default();
        if let Some(v) = raw.features.sample_rate_hz {
            features.sample_rate_hz = v;
        }
        if let Some(v) = raw.features.window_len {
            features.window_len = v;
        }
        if let Some(v) = raw.features.hop_len {
            features.hop_len = v;
        }
        if let Some(v) = raw.features.n_mels {
            features.n_mels = v;
        }
        if let Some(v) = raw.features.f_min_hz {
            features.f_min_hz = v;
        }
        if let Some(v) = raw.features.f_max_hz {
            features.f_max_hz = v;
        }

        let default_profile =
            UserProfile::new_integral(raw.profile.hearing_difficulty, raw.profile.english_cefr)
                .map_err(|e| config_error(format!("profile: {e}")))?;

        for (name, t30) in &raw.rooms {
            if !t30.is_finite() || *t30 <= 0.0 {
                return Err(config_error(format!(
                    "room {name:?} has reverberation time {t30}, which must be positive"
                )));
            }
        }
        if !raw.evaluation.ar_threshold.is_finite()
            || !(1.0..=10.0).contains(&raw.evaluation.ar_threshold)
        {
            return Err(config_error(format!(
                "ar_threshold {} must lie in [1, 10]",
                raw.evaluation.ar_threshold
            )));
        }

        Ok(PipelineConfig {
            features,
            arp_weights,
            etv_weights,
            default_profile,
            rooms: raw.rooms,
            ar_threshold: raw.evaluation.ar_threshold,
        })
    }

    /// Looks up a named room's reverberation time.
    pub fn room_t30(&self, name: &str) -> Result<f64> {
        self.rooms
            .get(name)
            .copied()
            .ok_or_else(|| PipelineError::UnknownRoom {
                name: name.to_string(),
                available: self.rooms.keys().cloned().collect(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_weights(dir: &Path) {
        // Content is irrelevant for config loading; existence is checked.
        std::fs::write(dir.join("arp.bin"), b"stub").unwrap();
        std::fs::write(dir.join("etv.bin"), b"stub").unwrap();
    }

    #[test]
    fn example_config_parses_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        write_weights(dir.path());
        let path = dir.path().join("pipeline.toml");
        std::fs::write(&path, EXAMPLE_TOML).unwrap();
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.features.n_mels, 64);
        assert_eq!(config.ar_threshold, 5.0);
        assert_eq!(config.default_profile.english_cefr, 4.0);
        assert_eq!(config.room_t30("office").unwrap(), 0.32);
        assert!(config.arp_weights.is_absolute() || config.arp_weights.starts_with(dir.path()));
        match config.room_t30("cathedral") {
            Err(PipelineError::UnknownRoom { name, available }) => {
                assert_eq!(name, "cathedral");
                assert_eq!(available.len(), 6);
            }
            other => panic!("expected unknown room, got {other:?}"),
        }
    }

    #[test]
    fn missing_weight_files_fail_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        std::fs::write(&path, EXAMPLE_TOML).unwrap();
        match PipelineConfig::load(&path) {
            Err(PipelineError::MissingFile { what, .. }) => {
                assert_eq!(what, "ARP weights file");
            }
            other => panic!("expected missing file, got {other:?}"),
        }
    }

    #[test]
    fn typos_and_bad_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_weights(dir.path());
        let path = dir.path().join("pipeline.toml");

        std::fs::write(
            &path,
            "[models]\narp_weights = \"arp.bin\"\netv_weights = \"etv.bin\"\n[profil]\n",
        )
        .unwrap();
        assert!(matches!(
            PipelineConfig::load(&path),
            Err(PipelineError::Config { .. })
        ));

        std::fs::write(
            &path,
            "[models]\narp_weights = \"arp.bin\"\netv_weights = \"etv.bin\"\n[rooms]\nvoid = -1.0\n",
        )
        .unwrap();
        assert!(matches!(
            PipelineConfig::load(&path),
            Err(PipelineError::Config { .. })
        ));

        std::fs::write(
            &path,
            "[models]\narp_weights = \"arp.bin\"\netv_weights = \"etv.bin\"\n[profile]\nhearing_difficulty = 2.5\nenglish_cefr = 4\n",
        )
        .unwrap();
        assert!(matches!(
            PipelineConfig::load(&path),
            Err(PipelineError::Config { .. })
        ));

        std::fs::write(
            &path,
            "[models]\narp_weights = \"arp.bin\"\netv_weights = \"etv.bin\"\n[evaluation]\nar_threshold = 0.5\n",
        )
        .unwrap();
        assert!(matches!(
            PipelineConfig::load(&path),
            Err(PipelineError::Config { .. })
        ));
    }
}
