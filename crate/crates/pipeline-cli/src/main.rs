//! voicepipe: command-line front end for the speech-adaptation pipeline.
//! Results stream to stdout as JSON lines; failures print one JSON error
//! object to stderr and exit 2 (bad input) or 3 (runtime failure).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pipeline::{
    ingest, run_evaluation, tuples_to_dataset, IngestKind, Pipeline, PipelineConfig,
    PipelineError, StratumReport,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "voicepipe",
    version,
    about = "Adaptive robot-speech pipeline: annoyance prediction, voice \
             adaptation, pronunciation scoring, and paired evaluation.",
    after_help = "Output is one JSON object per line on stdout. Errors are a \
                  single JSON object on stderr; exit code 2 means bad input, \
                  3 means a runtime failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract log-mel features from a WAV clip and summarize them.
    Features {
        /// Input WAV file.
        #[arg(long)]
        input: PathBuf,
        /// Pipeline configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Estimate reverberation time (T30) from an impulse-response WAV.
    MeasureT30 {
        /// Impulse-response recording.
        #[arg(long)]
        input: PathBuf,
    },
    /// Annoyance-rating model: train on a labelled manifest or predict.
    #[command(subcommand)]
    Arp(ArpCommand),
    /// Environment-to-voice model: train on study tuples or adapt once.
    #[command(subcommand)]
    Etv(EtvCommand),
    /// Score how close a response word sounds to the target word.
    ScoreWord {
        /// The word the robot said.
        #[arg(long)]
        target: String,
        /// The word the listener heard.
        #[arg(long)]
        response: String,
        /// Pronunciation lexicon file; the embedded one applies when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Fit the outcome regressions on study interaction tuples.
    FitGlm {
        /// Study tuples CSV.
        #[arg(long)]
        tuples: PathBuf,
        /// Which outcome to model: sp, ux, or both.
        #[arg(long, default_value = "both")]
        response: String,
        /// Also fit the inverse link and report which one fits better.
        #[arg(long)]
        compare_links: bool,
    },
    /// Run the full chain: clip to annoyance to voice parameters.
    Adapt(AdaptArgs),
    /// Compare fixed and adaptive conditions on paired study tuples.
    Evaluate {
        /// Tuples recorded under the fixed voice.
        #[arg(long)]
        fixed: PathBuf,
        /// Tuples recorded under the adaptive voice.
        #[arg(long)]
        adaptive: PathBuf,
        /// Annoyance at or above this counts as the high stratum.
        #[arg(long, default_value_t = 5.0)]
        threshold: f64,
    },
    /// Validate an external data file and summarize its contents.
    Ingest {
        /// Format: delta-manifest, study-tuples, or lexicon.
        #[arg(long)]
        kind: String,
        /// File to validate.
        #[arg(long)]
        path: PathBuf,
    },
}

#[derive(Subcommand)]
enum ArpCommand {
    /// Train the annoyance CNN on an annoyance-labelled clip manifest.
    Train {
        /// CSV manifest with filename,annoyance rows.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory the manifest's filenames resolve against.
        #[arg(long)]
        audio_dir: PathBuf,
        /// Where to write the trained weights.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 0.005)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the full filter widths instead of the reduced desk-scale ones.
        #[arg(long)]
        full_scale: bool,
        /// Negative control: re-shuffle labels every epoch.
        #[arg(long)]
        shuffle_labels: bool,
    },
    /// Predict the annoyance rating of one clip.
    Predict {
        /// Trained weights file.
        #[arg(long)]
        weights: PathBuf,
        /// Input WAV file.
        #[arg(long)]
        input: PathBuf,
        /// Pipeline configuration for feature settings; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EtvCommand {
    /// Train the voice regressor on study tuples (filtered to successful,
    /// well-rated interactions first).
    Train {
        /// Study tuples CSV.
        #[arg(long)]
        tuples: PathBuf,
        /// Where to write the trained weights.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        /// Fraction of tuples held out for the error report.
        #[arg(long, default_value_t = 0.1)]
        holdout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Jittered copies of each tuple to add before training.
        #[arg(long, default_value_t = 0)]
        augment_copies: usize,
        /// Jitter size as a fraction of each feature's spread.
        #[arg(long, default_value_t = 0.05)]
        noise_scale: f64,
    },
    /// Predict voice parameters for one listening context.
    Adapt {
        /// Trained weights file.
        #[arg(long)]
        weights: PathBuf,
        /// Annoyance rating of the ambient sound, 1 to 10.
        #[arg(long)]
        ar: f64,
        #[arg(long)]
        distance_cm: f64,
        /// Reverberation time in seconds.
        #[arg(long)]
        t30: f64,
        /// Listener hearing difficulty, 1 to 5.
        #[arg(long, default_value_t = 1.0)]
        hearing: f64,
        /// Listener English level, 1 (A1) to 6 (C2).
        #[arg(long, default_value_t = 4.0)]
        cefr: f64,
    },
}

#[derive(Args)]
struct AdaptArgs {
    /// Pipeline configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Ambient-sound WAV the annoyance prediction runs on.
    #[arg(long)]
    input: PathBuf,
    /// Listener distance in centimeters.
    #[arg(long)]
    distance_cm: f64,
    /// Reverberation time in seconds (alternative to --room).
    #[arg(long)]
    t30: Option<f64>,
    /// Named room from the configuration's table (alternative to --t30).
    #[arg(long)]
    room: Option<String>,
    /// Listener hearing difficulty; the configuration's default otherwise.
    #[arg(long)]
    hearing: Option<f64>,
    /// Listener English level; the configuration's default otherwise.
    #[arg(long)]
    cefr: Option<f64>,
}

fn emit(value: &serde_json::Value) -> pipeline::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn emit_serialize<T: serde::Serialize>(value: &T) -> pipeline::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn feature_config(config: &Option<PathBuf>) -> pipeline::Result<audio_dsp::FeatureConfig> {
    match config {
        Some(path) => Ok(PipelineConfig::load(path)?.features),
        None => Ok(audio_dsp::FeatureConfig::default()),
    }
}

fn run_features(input: &PathBuf, config: &Option<PathBuf>) -> pipeline::Result<()> {
    let (clip, name) = pipeline::read_clip(input)?;
    let features = audio_dsp::extract_log_mel(&clip, &feature_config(config)?)?;
    let n = features.data.len() as f64;
    let mean = features.data.iter().sum::<f64>() / n;
    let (lo, hi) = features
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, v| {
            (acc.0.min(*v), acc.1.max(*v))
        });
    emit(&json!({
        "event": "features",
        "clip": name,
        "duration_s": clip.duration_s(),
        "frames": features.frames,
        "n_mels": features.n_mels,
        "db_min": lo,
        "db_max": hi,
        "db_mean": mean,
    }))
}

fn run_measure_t30(input: &PathBuf) -> pipeline::Result<()> {
    let (clip, name) = pipeline::read_clip(input)?;
    let estimate = audio_dsp::estimate_t30(&clip)?;
    emit(&json!({
        "event": "t30",
        "clip": name,
        "t30_s": estimate.t30_s,
        "band_centers_hz": audio_dsp::OCTAVE_BAND_CENTERS_HZ,
        "band_t30_s": estimate.band_t30_s,
        "band_r2": estimate.band_r2,
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_arp_train(
    manifest: &PathBuf,
    audio_dir: &PathBuf,
    weights: &PathBuf,
    epochs: usize,
    batch: usize,
    lr: f64,
    seed: u64,
    full_scale: bool,
    shuffle_labels: bool,
) -> pipeline::Result<()> {
    let records = arp_model::read_manifest(manifest)?;
    let dataset = arp_model::DeltaDataset::random_split(audio_dir.clone(), records, seed)?;
    let mut config = if full_scale {
        arp_model::ArpConfig::default()
    } else {
        arp_model::ArpConfig::desk_scale()
    };
    config.epochs = epochs;
    config.batch_size = batch;
    config.learning_rate = lr;
    let options = arp_model::TrainOptions {
        seed,
        shuffle_labels,
    };
    let outcome = arp_model::train_arp(&dataset, &config, &options)?;
    for entry in &outcome.history {
        emit(&json!({
            "event": "epoch",
            "epoch": entry.epoch,
            "train_mse": entry.train_mse,
            "val_mse": entry.val_mse,
        }))?;
    }
    nn_core::save_weights(&outcome.model, weights)?;
    emit(&json!({
        "event": "trained",
        "model": "annoyance-rating",
        "weights": weights.display().to_string(),
        "best_epoch": outcome.best_epoch,
        "best_val_mse": outcome.best_val_mse,
        "test_mse": outcome.test_mse,
        "test_mae": outcome.test_mae,
        "diverged": outcome.diverged,
    }))
}

fn require_file(what: &'static str, path: &PathBuf) -> pipeline::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::MissingFile {
            what,
            path: path.display().to_string(),
        })
    }
}

fn run_arp_predict(
    weights: &PathBuf,
    input: &PathBuf,
    config: &Option<PathBuf>,
) -> pipeline::Result<()> {
    require_file("ARP weights file", weights)?;
    let model = nn_core::load_weights(weights)?;
    let (clip, name) = pipeline::read_clip(input)?;
    let features = audio_dsp::extract_log_mel(&clip, &feature_config(config)?)?;
    let rating = arp_model::predict_from_features(&model, &features)?;
    emit(&json!({
        "event": "prediction",
        "clip": name,
        "ar": rating.value,
        "ar_raw": rating.raw,
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_etv_train(
    tuples_path: &PathBuf,
    weights: &PathBuf,
    epochs: usize,
    batch: usize,
    lr: f64,
    holdout: f64,
    seed: u64,
    augment_copies: usize,
    noise_scale: f64,
) -> pipeline::Result<()> {
    let tuples = etv_model::read_study_tuples(tuples_path)?;
    let kept = etv_model::filter_training_set(&tuples)?;
    let training = if augment_copies > 0 {
        etv_model::augment(&kept, noise_scale, augment_copies, seed)?
    } else {
        kept.clone()
    };
    emit(&json!({
        "event": "training-set",
        "rows": tuples.len(),
        "kept": kept.len(),
        "after_augmentation": training.len(),
    }))?;
    let config = etv_model::EtvConfig {
        learning_rate: lr,
        epochs,
        batch_size: batch,
        holdout_fraction: holdout,
        seed,
    };
    let outcome = etv_model::train_etv(&training, &config)?;
    for entry in &outcome.history {
        emit(&json!({
            "event": "epoch",
            "epoch": entry.epoch,
            "train_mse": entry.train_mse,
            "holdout_mse": entry.holdout_mse,
        }))?;
    }
    outcome.model.save(weights)?;
    emit(&json!({
        "event": "trained",
        "model": "environment-to-voice",
        "weights": weights.display().to_string(),
        "final_train_mse": outcome.final_train_mse,
        "holdout_mse": outcome.holdout_mse,
        "n_train": outcome.n_train,
        "n_holdout": outcome.n_holdout,
        "diverged": outcome.diverged,
    }))
}

fn run_etv_adapt(
    weights: &PathBuf,
    ar: f64,
    distance_cm: f64,
    t30: f64,
    hearing: f64,
    cefr: f64,
) -> pipeline::Result<()> {
    require_file("ETV weights file", weights)?;
    let model = etv_model::EtvModel::load(weights)?;
    let env = etv_model::EnvironmentContext::extrapolated(ar, distance_cm, t30)?;
    let profile = etv_model::UserProfile::new(hearing, cefr)?;
    let voice = etv_model::adapt_voice(&model, &env, &profile)?;
    emit(&json!({
        "event": "voice",
        "ar": ar,
        "distance_cm": distance_cm,
        "t30_s": t30,
        "extrapolation": env.extrapolation,
        "voice": voice,
    }))
}

fn run_score_word(
    target: &str,
    response: &str,
    lexicon: &Option<PathBuf>,
) -> pipeline::Result<()> {
    let store;
    let lexicon = match lexicon {
        Some(path) => {
            store = phonetics::Lexicon::from_file(path)?;
            &store
        }
        None => phonetics::Lexicon::embedded(),
    };
    let score = phonetics::similarity_with(lexicon, target, response)?;
    let render = |seq: &phonetics::PhonemeSequence| -> String {
        seq.phonemes
            .iter()
            .map(|p| p.symbol())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let alignment: Vec<String> = score
        .alignment
        .iter()
        .map(|step| match step {
            phonetics::AlignmentStep::Substitute {
                target,
                response,
                cost,
            } => {
                if cost == &0.0 {
                    format!("match {}", target.symbol())
                } else {
                    format!(
                        "substitute {} -> {} (cost {:.3})",
                        target.symbol(),
                        response.symbol(),
                        cost
                    )
                }
            }
            phonetics::AlignmentStep::Delete { target } => {
                format!("delete {}", target.symbol())
            }
            phonetics::AlignmentStep::Insert { response } => {
                format!("insert {}", response.symbol())
            }
        })
        .collect();
    emit(&json!({
        "event": "score",
        "target": target,
        "response": response,
        "similarity": score.value,
        "target_pronunciation": render(&score.target_pronunciation),
        "response_pronunciation": render(&score.response_pronunciation),
        "cost": score.cost,
        "normalizer": score.normalizer,
        "target_oov": score.target_oov,
        "response_oov": score.response_oov,
        "alignment": alignment,
    }))
}

fn run_fit_glm(
    tuples_path: &PathBuf,
    response: &str,
    compare: bool,
) -> pipeline::Result<()> {
    let tuples = etv_model::read_study_tuples(tuples_path)?;
    let data = tuples_to_dataset(&tuples)?;
    let responses: Vec<stats::Response> = match response {
        "sp" => vec![stats::Response::Sp],
        "ux" => vec![stats::Response::Ux],
        "both" => vec![stats::Response::Sp, stats::Response::Ux],
        other => {
            return Err(PipelineError::Validation(format!(
                "unknown response {other:?}; expected sp, ux, or both"
            )))
        }
    };
    for r in responses {
        let name = match r {
            stats::Response::Sp => "sp",
            stats::Response::Ux => "ux",
        };
        let formula = stats::ModelFormula::for_response(r);
        if compare {
            let comparison = stats::compare_links(&data, &formula)?;
            emit(&json!({
                "event": "link-comparison",
                "response": name,
                "comparison": comparison,
            }))?;
        } else {
            let fit = stats::fit_gamma_glm(&data, &formula)?;
            emit(&json!({
                "event": "glm",
                "response": name,
                "fit": fit,
            }))?;
        }
    }
    Ok(())
}

fn run_adapt(args: &AdaptArgs) -> pipeline::Result<()> {
    let config = PipelineConfig::load(&args.config)?;
    let t30_s = match (&args.t30, &args.room) {
        (Some(t30), None) => *t30,
        (None, Some(room)) => config.room_t30(room)?,
        (Some(_), Some(_)) => {
            return Err(PipelineError::Validation(
                "--t30 and --room are alternatives; give exactly one".into(),
            ))
        }
        (None, None) => {
            return Err(PipelineError::Validation(
                "a reverberation time is required: --t30 seconds or --room name".into(),
            ))
        }
    };
    let profile = match (args.hearing, args.cefr) {
        (None, None) => config.default_profile,
        (hearing, cefr) => etv_model::UserProfile::new(
            hearing.unwrap_or(config.default_profile.hearing_difficulty),
            cefr.unwrap_or(config.default_profile.english_cefr),
        )?,
    };
    let pipeline = Pipeline::load(config)?;
    let (clip, name) = pipeline::read_clip(&args.input)?;
    let report = pipeline.adapt(&clip, &name, &profile, args.distance_cm, t30_s)?;
    emit(&json!({
        "event": "adaptation",
        "report": report,
    }))
}

fn stratum_line(report: &StratumReport) -> serde_json::Value {
    json!({
        "event": "stratum",
        "stratum": report.stratum,
        "n_pairs": report.n_pairs,
        "n_participants": report.n_participants,
        "cells": {
            "fixed_score": report.fixed.score.display(),
            "adaptive_score": report.adaptive.score.display(),
            "fixed_ux": report.fixed.ux.display(),
            "adaptive_ux": report.adaptive.ux.display(),
        },
        "fixed": report.fixed,
        "adaptive": report.adaptive,
        "score_test": report.score_test,
        "ux_test": report.ux_test,
    })
}

fn run_evaluate(fixed: &PathBuf, adaptive: &PathBuf, threshold: f64) -> pipeline::Result<()> {
    let fixed_rows = etv_model::read_study_tuples(fixed)?;
    let adaptive_rows = etv_model::read_study_tuples(adaptive)?;
    let report = run_evaluation(&fixed_rows, &adaptive_rows, threshold)?;
    emit(&stratum_line(&report.all))?;
    emit(&stratum_line(&report.low_annoyance))?;
    emit(&stratum_line(&report.high_annoyance))?;
    Ok(())
}

fn run_ingest(kind: &str, path: &PathBuf) -> pipeline::Result<()> {
    let kind = IngestKind::from_name(kind).ok_or_else(|| {
        PipelineError::Validation(format!(
            "unknown ingest kind {kind:?}; expected one of {:?}",
            IngestKind::NAMES
        ))
    })?;
    let summary = ingest(kind, path)?;
    emit_serialize(&summary)
}

fn run(cli: Cli) -> pipeline::Result<()> {
    match &cli.command {
        Command::Features { input, config } => run_features(input, config),
        Command::MeasureT30 { input } => run_measure_t30(input),
        Command::Arp(ArpCommand::Train {
            manifest,
            audio_dir,
            weights,
            epochs,
            batch,
            lr,
            seed,
            full_scale,
            shuffle_labels,
        }) => run_arp_train(
            manifest,
            audio_dir,
            weights,
            *epochs,
            *batch,
            *lr,
            *seed,
            *full_scale,
            *shuffle_labels,
        ),
        Command::Arp(ArpCommand::Predict {
            weights,
            input,
            config,
        }) => run_arp_predict(weights, input, config),
        Command::Etv(EtvCommand::Train {
            tuples,
            weights,
            epochs,
            batch,
            lr,
            holdout,
            seed,
            augment_copies,
            noise_scale,
        }) => run_etv_train(
            tuples,
            weights,
            *epochs,
            *batch,
            *lr,
            *holdout,
            *seed,
            *augment_copies,
            *noise_scale,
        ),
        Command::Etv(EtvCommand::Adapt {
            weights,
            ar,
            distance_cm,
            t30,
            hearing,
            cefr,
        }) => run_etv_adapt(weights, *ar, *distance_cm, *t30, *hearing, *cefr),
        Command::ScoreWord {
            target,
            response,
            lexicon,
        } => run_score_word(target, response, lexicon),
        Command::FitGlm {
            tuples,
            response,
            compare_links,
        } => run_fit_glm(tuples, response, *compare_links),
        Command::Adapt(args) => run_adapt(args),
        Command::Evaluate {
            fixed,
            adaptive,
            threshold,
        } => run_evaluate(fixed, adaptive, *threshold),
        Command::Ingest { kind, path } => run_ingest(kind, path),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        let payload = json!({
            "error": {
                "kind": error.kind(),
                "detail": error.to_string(),
                "exit_code": error.exit_code(),
            }
        });
        eprintln!("{payload}");
        std::process::exit(error.exit_code());
    }
}
