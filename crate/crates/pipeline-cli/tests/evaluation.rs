//! Paired-evaluation behavior on the shipped fixture and on synthetic
//! conditions with known answers.

use std::path::{Path, PathBuf};

use pipeline::{evaluation_fixture, run_evaluation, PipelineError, FIXTURE_CELLS};

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

#[test]
fn fixture_cells_match_the_published_table_exactly() {
    let (fixed, adaptive) = evaluation_fixture();
    let report = run_evaluation(&fixed, &adaptive, 5.0).unwrap();

    assert_eq!(report.all.n_pairs, 810);
    assert_eq!(report.all.n_participants, 27);
    assert_eq!(report.low_annoyance.n_pairs, 410);
    assert_eq!(report.high_annoyance.n_pairs, 400);

    for (stratum, expected) in [
        (&report.all, FIXTURE_CELLS[0]),
        (&report.low_annoyance, FIXTURE_CELLS[1]),
        (&report.high_annoyance, FIXTURE_CELLS[2]),
    ] {
        assert_eq!(stratum.stratum, expected.stratum);
        assert_eq!(stratum.fixed.score.display(), expected.fixed_score);
        assert_eq!(stratum.adaptive.score.display(), expected.adaptive_score);
        assert_eq!(stratum.fixed.ux.display(), expected.fixed_ux);
        assert_eq!(stratum.adaptive.ux.display(), expected.adaptive_ux);
    }

    // The adaptive voice scores higher in every stratum, so the paired
    // tests all point the same way.
    for stratum in [&report.all, &report.low_annoyance, &report.high_annoyance] {
        assert!(stratum.score_test.z_statistic <= 0.0);
        assert!(stratum.ux_test.z_statistic <= 0.0);
    }
}

#[test]
fn committed_fixture_files_are_byte_identical_to_the_generator() {
    let (fixed, adaptive) = evaluation_fixture();
    let dir = tempfile::tempdir().unwrap();
    for (rows, name) in [(&fixed, "evaluation_fixed.csv"), (&adaptive, "evaluation_adaptive.csv")] {
        let fresh = dir.path().join(name);
        etv_model::write_study_tuples(&fresh, rows).unwrap();
        let committed = std::fs::read(fixture_path(name)).unwrap();
        let generated = std::fs::read(&fresh).unwrap();
        assert_eq!(
            committed, generated,
            "{name} is stale; regenerate with: cargo run -p pipeline-cli --example regenerate_fixtures"
        );
    }
}

#[test]
fn committed_fixture_files_parse_back_to_the_same_tuples() {
    let (fixed, adaptive) = evaluation_fixture();
    let from_disk = etv_model::read_study_tuples(&fixture_path("evaluation_fixed.csv")).unwrap();
    assert_eq!(from_disk, fixed);
    let from_disk =
        etv_model::read_study_tuples(&fixture_path("evaluation_adaptive.csv")).unwrap();
    assert_eq!(from_disk, adaptive);
}

#[test]
fn a_uniform_improvement_of_a_tenth_is_strongly_detected() {
    // 27 participants by 30 words, scores varying with both indices, and
    // the adaptive condition better by exactly 0.1 everywhere. The paired
    // test on the 27 participant means must reject with room to spare.
    let (fixed, _) = evaluation_fixture();
    let mut base = fixed.clone();
    for (i, row) in base.iter_mut().enumerate() {
        row.phonetic_similarity = 0.3 + 0.5 * ((i * 37) % 101) as f64 / 100.0;
        row.ux = 3.0 + 4.0 * ((i * 53) % 97) as f64 / 96.0;
    }
    let mut improved = base.clone();
    for row in improved.iter_mut() {
        row.phonetic_similarity += 0.1;
        row.ux += 0.1;
    }
    let report = run_evaluation(&base, &improved, 5.0).unwrap();
    assert_eq!(report.all.score_test.n_effective, 27);
    assert!(report.all.score_test.z_statistic < 0.0);
    assert!(report.all.score_test.p_value < 0.01);
    assert!(report.all.ux_test.z_statistic < 0.0);
    assert!(report.all.ux_test.p_value < 0.01);
    // With every participant shifted the same way the signed ranks all
    // land on one side: the statistic is as negative as n = 27 allows.
    assert_eq!(report.all.score_test.w_statistic, 0.0);
    let mean_shift =
        report.all.adaptive.score.mean - report.all.fixed.score.mean;
    assert!((mean_shift - 0.1).abs() < 1e-12);
}

#[test]
fn a_threshold_sweeping_everything_into_one_stratum_errors() {
    let (fixed, adaptive) = evaluation_fixture();
    match run_evaluation(&fixed, &adaptive, 1.0) {
        Err(PipelineError::EmptyStratum { stratum }) => {
            assert_eq!(stratum, "low-annoyance")
        }
        other => panic!("expected an empty stratum, got {other:?}"),
    }
    match run_evaluation(&fixed, &adaptive, 10.0) {
        Err(PipelineError::EmptyStratum { stratum }) => {
            assert_eq!(stratum, "high-annoyance")
        }
        other => panic!("expected an empty stratum, got {other:?}"),
    }
}
