//! End-to-end harness behavior on desk-scale specs: determinism, pooling
//! arithmetic, thread-count independence, and significance comparison.

use diact::harness::{compare, run_experiment, ExperimentSpec};
use diact::metrics::aggregate_runs;

fn small_spec(mode: &str) -> ExperimentSpec {
    let raw = format!(
        r#"{{
        "name": "harness-smoke-{mode}",
        "corpus": {{"synthetic": {{"dialogs": 12, "mean_segments": 6.0}}, "seed": 5}},
        "mode": "{mode}",
        "folds": {{"k": 2, "seed": 1}},
        "runs": 2,
        "base_seed": 40,
        "training": {{"batch_size": 32, "max_epochs": 2, "patience": 5, "learning_rate": 0.005}},
        "configs": [
            {{"label": "cnn-narrow", "encoder": {{"variant": "cnn", "windows": [1,2,3], "filters_per_window": 4}}, "embedding_dim": 8, "max_len": 16}}
        ]
    }}"#
    );
    serde_json::from_str(&raw).unwrap()
}

#[test]
fn report_is_byte_identical_across_executions_and_thread_counts() {
    let spec = small_spec("l1");
    let a = run_experiment(&spec, 1).unwrap();
    let b = run_experiment(&spec, 1).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let parallel = run_experiment(&spec, 4).unwrap();
    assert_eq!(a.to_json(), parallel.to_json());
}

#[test]
fn report_round_trips_through_json() {
    let spec = small_spec("l2");
    let report = run_experiment(&spec, 2).unwrap();
    let back = diact::harness::ExperimentReport::from_json(&report.to_json()).unwrap();
    assert_eq!(report.to_json(), back.to_json());
}

#[test]
fn aggregates_recompute_from_retained_run_values() {
    let spec = small_spec("l2");
    let report = run_experiment(&spec, 2).unwrap();
    let config = &report.configs[0];
    for (key, stats) in &config.metrics {
        let raw: Vec<f64> = config
            .runs
            .iter()
            .map(|r| *r.metrics.get(key).unwrap())
            .collect();
        let recomputed = aggregate_runs(&raw).unwrap();
        assert!((recomputed.m - stats.m).abs() < 1e-12, "{key} mean");
        assert!((recomputed.s - stats.s).abs() < 1e-12, "{key} std");
    }
}

#[test]
fn correctness_vectors_align_with_segment_keys() {
    let spec = small_spec("l1");
    let report = run_experiment(&spec, 1).unwrap();
    let config = &report.configs[0];
    assert!(!config.segment_keys.is_empty());
    for run in &config.runs {
        assert_eq!(run.correct.len(), config.segment_keys.len());
    }
    // keys are sorted and unique
    let mut sorted = config.segment_keys.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, config.segment_keys);
}

#[test]
fn gate_segments_are_excluded_from_l2_pool_but_present_in_hierarchical() {
    let level_spec = small_spec("l2");
    let level_report = run_experiment(&level_spec, 1).unwrap();

    let mut hier_spec = small_spec("hierarchical");
    hier_spec.configs.clear();
    hier_spec.pipeline = Some(tiny_pipeline());
    let hier_report = run_experiment(&hier_spec, 2).unwrap();

    let corpus = level_spec.load_corpus().unwrap();
    let total = corpus.segment_count();
    let gated = corpus
        .segments()
        .filter(|s| corpus.label_space.is_gate(s.l1))
        .count();
    assert_eq!(
        level_report.configs[0].segment_keys.len(),
        total - gated,
        "standalone L2 evaluation must skip gate segments"
    );
    assert_eq!(
        hier_report.configs[0].segment_keys.len(),
        total,
        "hierarchical evaluation must cover every segment"
    );
}

fn tiny_pipeline() -> diact::harness::PipelineSpec {
    use diact::corpus::Level;
    use diact::models::{ClassifierConfig, ContextConfig, EncoderConfig};
    let tiny = |level: Level| ClassifierConfig {
        embedding_dim: 8,
        max_len: 16,
        ..ClassifierConfig::new(
            EncoderConfig::Cnn {
                windows: vec![1, 2, 3],
                filters_per_window: 4,
            },
            ContextConfig::best_reported(level),
        )
    };
    diact::harness::PipelineSpec {
        l1: tiny(Level::L1),
        l2: tiny(Level::L2),
        l3: tiny(Level::L3),
        predicted_context: false,
    }
}

#[test]
fn hierarchical_metrics_are_monotone_across_sections() {
    let mut spec = small_spec("hierarchical");
    spec.configs.clear();
    spec.pipeline = Some(tiny_pipeline());
    let report = run_experiment(&spec, 2).unwrap();
    let metrics = &report.configs[0].metrics;
    let l1 = metrics["l1_accuracy"].m;
    let l12 = metrics["mr_l12"].m;
    let l123 = metrics["mr_l123"].m;
    assert!(l1 >= l12 && l12 >= l123, "l1 {l1} l12 {l12} l123 {l123}");
}

#[test]
fn hierarchical_and_combined_reports_are_also_deterministic() {
    let mut hier = small_spec("hierarchical");
    hier.configs.clear();
    hier.pipeline = Some(tiny_pipeline());
    let a = run_experiment(&hier, 1).unwrap();
    let b = run_experiment(&hier, 3).unwrap();
    assert_eq!(a.to_json(), b.to_json());

    let mut combo = small_spec("combined");
    combo.configs.clear();
    let a = run_experiment(&combo, 1).unwrap();
    let b = run_experiment(&combo, 2).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn combined_mode_runs_and_reports_unseen_rate() {
    let mut spec = small_spec("combined");
    spec.configs.clear();
    spec.combined = Some(diact::models::ClassifierConfig {
        embedding_dim: 8,
        max_len: 16,
        ..diact::models::ClassifierConfig::new(
            diact::models::EncoderConfig::Cnn {
                windows: vec![1, 2, 3],
                filters_per_window: 4,
            },
            diact::models::ContextConfig::same_level(3),
        )
    });
    let report = run_experiment(&spec, 2).unwrap();
    let metrics = &report.configs[0].metrics;
    assert!(metrics.contains_key("accuracy"));
    assert!(metrics.contains_key("unseen_pct"));
}

#[test]
fn compare_report_with_itself_is_not_significant() {
    let spec = small_spec("l1");
    let report = run_experiment(&spec, 1).unwrap();
    let outcome = compare(&report, &report, None, None, 3).unwrap();
    assert_eq!(outcome.result.p_value, 1.0);
    assert!(!outcome.result.significant);
}

#[test]
fn compare_rejects_mismatched_segment_sets() {
    let l1 = run_experiment(&small_spec("l1"), 1).unwrap();
    let l2 = run_experiment(&small_spec("l2"), 1).unwrap();
    assert!(compare(&l1, &l2, None, None, 0).is_err());
}

#[test]
fn text_table_has_one_row_per_configuration() {
    let mut spec = small_spec("l1");
    let second = diact::harness::NamedConfig {
        label: "cnn-wide".into(),
        config: diact::models::ClassifierConfig {
            embedding_dim: 8,
            max_len: 16,
            ..diact::models::ClassifierConfig::new(
                diact::models::EncoderConfig::Cnn {
                    windows: vec![3, 4, 5],
                    filters_per_window: 4,
                },
                diact::models::ContextConfig::none(),
            )
        },
    };
    spec.configs.push(second);
    let report = run_experiment(&spec, 2).unwrap();
    let text = report.to_text();
    assert!(text.contains("cnn-narrow"));
    assert!(text.contains("cnn-wide"));
    let rows = text
        .lines()
        .filter(|l| l.starts_with("cnn-narrow") || l.starts_with("cnn-wide"))
        .count();
    assert!(rows >= 2, "{text}");
}

#[test]
fn pretrained_embedding_files_feed_the_harness() {
    let dir = tempfile::tempdir().unwrap();
    // toy word-vector file covering a few generator trigger words
    let vectors = "3 8\n\
        salida 1 0 0 0 0 0 0 0\n\
        cuesta 0 1 0 0 0 0 0 0\n\
        quería 0 0 1 0 0 0 0 0\n";
    let path = dir.path().join("vectors.txt");
    std::fs::write(&path, vectors).unwrap();
    let raw = format!(
        r#"{{
            "name": "pretrained-smoke",
            "corpus": {{"synthetic": {{"dialogs": 10, "mean_segments": 5.0}}, "seed": 2}},
            "mode": "l1",
            "folds": {{"k": 2, "seed": 0}},
            "runs": 1,
            "base_seed": 4,
            "embedding": {{"pretrained": {path:?}, "seed": 11}},
            "training": {{"batch_size": 32, "max_epochs": 2, "patience": 3, "learning_rate": 0.005}},
            "configs": [
                {{"label": "cnn", "encoder": {{"variant": "cnn", "windows": [1,2,3], "filters_per_window": 4}}, "embedding_dim": 8, "max_len": 16}}
            ]
        }}"#
    );
    let spec: ExperimentSpec = serde_json::from_str(&raw).unwrap();
    let a = run_experiment(&spec, 1).unwrap();
    let b = run_experiment(&spec, 1).unwrap();
    assert_eq!(a.to_json(), b.to_json());

    // a dimension mismatch in the file is a hard error
    let bad = spec_with_dim_mismatch(dir.path());
    assert!(run_experiment(&bad, 1).is_err());
}

fn spec_with_dim_mismatch(dir: &std::path::Path) -> ExperimentSpec {
    let path = dir.join("vectors300.txt");
    std::fs::write(&path, "1 300\n").unwrap();
    let raw = format!(
        r#"{{
            "name": "pretrained-mismatch",
            "corpus": {{"synthetic": {{"dialogs": 10, "mean_segments": 5.0}}, "seed": 2}},
            "mode": "l1",
            "folds": {{"k": 2, "seed": 0}},
            "runs": 1,
            "embedding": {{"pretrained": {path:?}}},
            "training": {{"batch_size": 32, "max_epochs": 2, "patience": 3, "learning_rate": 0.005}},
            "configs": [
                {{"label": "cnn", "encoder": {{"variant": "cnn", "windows": [1,2,3], "filters_per_window": 4}}, "embedding_dim": 8, "max_len": 16}}
            ]
        }}"#
    );
    serde_json::from_str(&raw).unwrap()
}
