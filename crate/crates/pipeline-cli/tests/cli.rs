//! End-to-end tests of the voicepipe binary: JSON-lines output on stdout,
//! a single JSON error object on stderr, and the documented exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use audio_dsp::{write_wav, AudioClip};
use etv_model::{
    filter_training_set, generate_corpus, train_etv, write_study_tuples, CorpusConfig,
    EtvConfig,
};

fn voicepipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voicepipe"))
        .args(args)
        .output()
        .expect("voicepipe runs")
}

fn stdout_lines(output: &Output) -> Vec<serde_json::Value> {
    String::from_utf8(output.stdout.clone())
        .unwrap()
        .lines()
        .map(|line| serde_json::from_str(line).expect("stdout is JSON lines"))
        .collect()
}

fn stderr_error(output: &Output) -> serde_json::Value {
    let text = String::from_utf8(output.stderr.clone()).unwrap();
    serde_json::from_str(text.trim()).expect("stderr is one JSON object")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

/// A deterministic test clip: summed tones with an exponential decay, long
/// enough for the spectrogram to clear the CNN's minimum input size.
fn test_clip(seconds: f64) -> AudioClip {
    let fs = 22050u32;
    let n = (seconds * fs as f64) as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs as f64;
            let tone: f64 = [250.0f64, 500.0, 1000.0, 2000.0]
                .iter()
                .map(|f| 0.2 * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum();
            tone * (-3.0 * t / 0.3).exp2().min(1.0)
        })
        .collect();
    AudioClip {
        samples,
        sample_rate: fs,
        channels: 1,
    }
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn score_word_reports_a_perfect_homophone() {
    let output = voicepipe(&["score-word", "--target", "flour", "--response", "flower"]);
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    let lines = stdout_lines(&output);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["event"], "score");
    assert_eq!(lines[0]["similarity"], 1.0);
    assert_eq!(lines[0]["cost"], 0.0);

    let output = voicepipe(&["score-word", "--target", "light", "--response", "right"]);
    let lines = stdout_lines(&output);
    let value = lines[0]["similarity"].as_f64().unwrap();
    assert!(value > 0.0 && value < 1.0);
}

#[test]
fn measure_t30_recovers_a_synthetic_decay() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("decay.wav");
    // 0.3 s decay time: amplitude falls 60 dB over 0.3 s in every band.
    let fs = 22050u32;
    let seconds = 0.3 * 1.2 + 0.4;
    let n = (seconds * fs as f64) as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs as f64;
            let tone: f64 = [250.0f64, 500.0, 1000.0, 2000.0]
                .iter()
                .map(|f| 0.25 * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum();
            tone * 10f64.powf(-3.0 * t / 0.3)
        })
        .collect();
    write_wav(
        &wav,
        &AudioClip {
            samples,
            sample_rate: fs,
            channels: 1,
        },
    )
    .unwrap();

    let output = voicepipe(&["measure-t30", "--input", wav.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    let lines = stdout_lines(&output);
    assert_eq!(lines[0]["event"], "t30");
    let t30 = lines[0]["t30_s"].as_f64().unwrap();
    assert!((t30 - 0.3).abs() / 0.3 < 0.05, "t30 {t30}");
}

#[test]
fn features_summarizes_the_spectrogram() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("clip.wav");
    write_wav(&wav, &test_clip(2.5)).unwrap();
    let output = voicepipe(&["features", "--input", wav.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0);
    let lines = stdout_lines(&output);
    assert_eq!(lines[0]["event"], "features");
    assert_eq!(lines[0]["n_mels"], 64);
    assert!(lines[0]["frames"].as_u64().unwrap() >= 64);
}

#[test]
fn bad_inputs_exit_two_with_a_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();

    // Malformed manifest: the error names the line and exits 2.
    let manifest = dir.path().join("m.csv");
    std::fs::write(&manifest, "filename,annoyance\na.wav,3.0\nb.wav,loud\n").unwrap();
    let output = voicepipe(&[
        "ingest",
        "--kind",
        "delta-manifest",
        "--path",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    let error = stderr_error(&output);
    assert_eq!(error["error"]["kind"], "arp");
    assert_eq!(error["error"]["exit_code"], 2);
    assert!(error["error"]["detail"].as_str().unwrap().contains("line 3"));
    assert!(output.stdout.is_empty());

    // Unknown ingest kind.
    let output = voicepipe(&[
        "ingest",
        "--kind",
        "parquet",
        "--path",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    assert_eq!(stderr_error(&output)["error"]["kind"], "validation");

    // Missing weights file.
    let output = voicepipe(&[
        "arp",
        "predict",
        "--weights",
        dir.path().join("nope.bin").to_str().unwrap(),
        "--input",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    assert_eq!(stderr_error(&output)["error"]["kind"], "missing-file");

    // Unknown flags are a usage error; clap exits 2 on its own.
    let output = voicepipe(&["score-word", "--target", "a", "--response", "b", "--frobnicate"]);
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn ingest_summarizes_each_valid_format() {
    let output = voicepipe(&[
        "ingest",
        "--kind",
        "study-tuples",
        "--path",
        fixtures_dir().join("evaluation_fixed.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0);
    let lines = stdout_lines(&output);
    assert_eq!(lines[0]["kind"], "study-tuples");
    assert_eq!(lines[0]["rows"], 810);
}

#[test]
fn evaluate_prints_the_three_strata_with_exact_cells() {
    let fixed = fixtures_dir().join("evaluation_fixed.csv");
    let adaptive = fixtures_dir().join("evaluation_adaptive.csv");
    let output = voicepipe(&[
        "evaluate",
        "--fixed",
        fixed.to_str().unwrap(),
        "--adaptive",
        adaptive.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    let lines = stdout_lines(&output);
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["stratum"], "all");
    assert_eq!(lines[0]["cells"]["fixed_score"], "0.73 \u{00b1} 0.31");
    assert_eq!(lines[0]["cells"]["adaptive_score"], "0.79 \u{00b1} 0.29");
    assert_eq!(lines[1]["stratum"], "low-annoyance");
    assert_eq!(lines[1]["cells"]["fixed_ux"], "6.60 \u{00b1} 2.36");
    assert_eq!(lines[2]["stratum"], "high-annoyance");
    assert_eq!(lines[2]["cells"]["adaptive_ux"], "6.34 \u{00b1} 2.52");

    // Misaligned conditions fail loudly.
    let output = voicepipe(&[
        "evaluate",
        "--fixed",
        fixed.to_str().unwrap(),
        "--adaptive",
        fixed.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    assert_eq!(stderr_error(&output)["error"]["kind"], "stats");
}

#[test]
fn etv_train_then_adapt_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let tuples_path = dir.path().join("tuples.csv");
    let weights = dir.path().join("etv.bin");

    let tuples = generate_corpus(&CorpusConfig {
        n_tuples: 600,
        n_subjects: 12,
        n_words: 20,
        seed: 5,
    })
    .unwrap();
    write_study_tuples(&tuples_path, &tuples).unwrap();

    let output = voicepipe(&[
        "etv",
        "train",
        "--tuples",
        tuples_path.to_str().unwrap(),
        "--weights",
        weights.to_str().unwrap(),
        "--epochs",
        "3",
        "--holdout",
        "0.2",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    let lines = stdout_lines(&output);
    assert_eq!(lines[0]["event"], "training-set");
    assert!(lines[0]["kept"].as_u64().unwrap() > 0);
    let last = lines.last().unwrap();
    assert_eq!(last["event"], "trained");
    assert_eq!(last["diverged"], false);
    assert!(weights.is_file());

    let output = voicepipe(&[
        "etv",
        "adapt",
        "--weights",
        weights.to_str().unwrap(),
        "--ar",
        "7.5",
        "--distance-cm",
        "250",
        "--t30",
        "0.4",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    let lines = stdout_lines(&output);
    assert_eq!(lines[0]["event"], "voice");
    assert_eq!(lines[0]["extrapolation"], false);
    let voice = &lines[0]["voice"];
    let volume = voice["volume"].as_f64().unwrap();
    let pitch = voice["pitch"].as_f64().unwrap();
    let speed = voice["speed"].as_f64().unwrap();
    let dv = voice["double_voice_level"].as_f64().unwrap();
    assert!((0.0..=2.0).contains(&volume));
    assert!((0.5..=2.0).contains(&pitch));
    assert!((0.4..=4.0).contains(&speed));
    assert!((0.0..=4.0).contains(&dv));
}

#[test]
fn adapt_runs_the_full_chain_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();

    // ETV weights: a quick real training run on corpus tuples.
    let tuples = generate_corpus(&CorpusConfig {
        n_tuples: 400,
        n_subjects: 10,
        n_words: 15,
        seed: 3,
    })
    .unwrap();
    let kept = filter_training_set(&tuples).unwrap();
    let outcome = train_etv(
        &kept,
        &EtvConfig {
            epochs: 3,
            holdout_fraction: 0.0,
            ..EtvConfig::default()
        },
    )
    .unwrap();
    outcome.model.save(&dir.path().join("etv.bin")).unwrap();

    // ARP weights: an untrained reduced network with valid structure.
    let arp = arp_model::build_arp(&arp_model::ArpConfig::desk_scale(), 7).unwrap();
    nn_core::save_weights(&arp, &dir.path().join("arp.bin")).unwrap();

    let config_path = dir.path().join("pipeline.toml");
    std::fs::write(
        &config_path,
        "[models]\narp_weights = \"arp.bin\"\netv_weights = \"etv.bin\"\n\
         [rooms]\noffice = 0.32\n",
    )
    .unwrap();

    let wav = dir.path().join("ambient.wav");
    write_wav(&wav, &test_clip(2.5)).unwrap();

    let output = voicepipe(&[
        "adapt",
        "--config",
        config_path.to_str().unwrap(),
        "--input",
        wav.to_str().unwrap(),
        "--distance-cm",
        "180",
        "--room",
        "office",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    let lines = stdout_lines(&output);
    assert_eq!(lines[0]["event"], "adaptation");
    let report = &lines[0]["report"];
    let ar = report["ar"].as_f64().unwrap();
    assert!((1.0..=10.0).contains(&ar));
    assert_eq!(report["context"]["t30_s"], 0.32);
    assert_eq!(report["context"]["extrapolation"], false);
    assert!(report["timings"]["total_s"].as_f64().unwrap() > 0.0);
    let volume = report["voice"]["volume"].as_f64().unwrap();
    assert!((0.0..=2.0).contains(&volume));

    // Unknown room: exit 2 and the error lists what is configured.
    let output = voicepipe(&[
        "adapt",
        "--config",
        config_path.to_str().unwrap(),
        "--input",
        wav.to_str().unwrap(),
        "--distance-cm",
        "180",
        "--room",
        "cathedral",
    ]);
    assert_eq!(exit_code(&output), 2);
    let error = stderr_error(&output);
    assert_eq!(error["error"]["kind"], "unknown-room");
    assert!(error["error"]["detail"].as_str().unwrap().contains("office"));

    // Giving both reverberation sources is rejected.
    let output = voicepipe(&[
        "adapt",
        "--config",
        config_path.to_str().unwrap(),
        "--input",
        wav.to_str().unwrap(),
        "--distance-cm",
        "180",
        "--room",
        "office",
        "--t30",
        "0.2",
    ]);
    assert_eq!(exit_code(&output), 2);
    assert_eq!(stderr_error(&output)["error"]["kind"], "validation");
}

#[test]
fn fit_glm_reports_coefficients_for_both_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let tuples_path = dir.path().join("tuples.csv");
    let tuples = generate_corpus(&CorpusConfig {
        n_tuples: 900,
        n_subjects: 15,
        n_words: 25,
        seed: 2,
    })
    .unwrap();
    write_study_tuples(&tuples_path, &tuples).unwrap();

    let output = voicepipe(&["fit-glm", "--tuples", tuples_path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    let lines = stdout_lines(&output);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["event"], "glm");
    assert_eq!(lines[0]["response"], "sp");
    assert_eq!(lines[1]["response"], "ux");
    let coefficients = lines[0]["fit"]["coefficients"].as_array().unwrap();
    let names: Vec<&str> = coefficients
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"volume:t30_s"));
    assert!(names.contains(&"ar"));
}
