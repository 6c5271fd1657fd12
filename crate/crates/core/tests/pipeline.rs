use std::fs;
use std::path::{Path, PathBuf};

use rainwarp_core::pipeline::{
    run_pipeline, ClusteringArtifact, PipelineConfig, PipelineError, PipelineOptions, StageStatus,
    TrendArtifact, YearStore,
};
use rainwarp_core::synthetic::{generate, SyntheticConfig};

/// Writes a small gauge and a config next to it; returns the config path.
fn setup(dir: &Path, years: usize) -> PathBuf {
    let gauge = generate(&SyntheticConfig {
        years,
        outage_days: 0,
        scattered_missing: 3,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let mut csv = Vec::new();
    gauge.write_csv(&mut csv).unwrap();
    fs::write(dir.join("gauge.csv"), csv).unwrap();
    let config = r#"{
        "input": "gauge.csv",
        "ingest": { "format": { "units": "mm-per-day" } },
        "clustering": { "k": 3, "seeds": [1, 2, 3] },
        "trend": { "length_years": 4, "step_years": 3 },
        "output_dir": "results"
    }"#;
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    path
}

fn statuses(reports: &[rainwarp_core::pipeline::StageReport]) -> Vec<StageStatus> {
    reports.iter().map(|r| r.status).collect()
}

#[test]
fn relative_paths_resolve_against_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = setup(tmp.path(), 8);
    let config = PipelineConfig::load(&config_path).unwrap();
    assert_eq!(config.input, tmp.path().join("gauge.csv"));
    run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap();
    let out = tmp.path().join("results");
    for name in [
        "years.json",
        "ingest_report.json",
        "dissim.csv",
        "dissim.svg",
        "outliers.json",
        "clustering.json",
        "indices.csv",
        "profiles.json",
        "trend.csv",
        "trend.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn artifacts_carry_provenance_without_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = setup(tmp.path(), 8);
    let config = PipelineConfig::load(&config_path).unwrap();
    run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap();
    let out = tmp.path().join("results");
    let tmp_str = tmp.path().to_string_lossy().into_owned();
    for entry in fs::read_dir(&out).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(!text.contains(&tmp_str), "absolute path leaked");
        assert!(text.contains("sha256"));
    }
    let (store, _) = YearStore::load(&out.join("years.json")).unwrap();
    assert_eq!(store.provenance.stage, "ingest");
    assert_eq!(store.provenance.inputs[0].name, "gauge.csv");
    let (clustering, _) = ClusteringArtifact::load(&out.join("clustering.json")).unwrap();
    assert_eq!(clustering.clustering.restarts.len(), 3);
    assert_eq!(clustering.provenance.inputs[0].name, "dissim.csv");
    let trend: TrendArtifact =
        serde_json::from_slice(&fs::read(out.join("trend.json")).unwrap()).unwrap();
    assert_eq!(trend.gradients.len(), 3);
    assert!(fs::read_to_string(out.join("trend.csv"))
        .unwrap()
        .lines()
        .last()
        .unwrap()
        .starts_with("gradient,,"));
}

#[test]
fn up_to_date_stages_are_skipped_unless_forced() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = setup(tmp.path(), 6);
    let config = PipelineConfig::load(&config_path).unwrap();
    let first = run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap();
    assert!(statuses(&first).iter().all(|s| *s == StageStatus::Ran));
    let bytes = fs::read(tmp.path().join("results/clustering.json")).unwrap();

    let second = run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap();
    assert!(statuses(&second).iter().all(|s| *s == StageStatus::Skipped));

    let forced = PipelineOptions {
        force: true,
        ..PipelineOptions::default()
    };
    let third = run_pipeline(&config, &config_path, &forced).unwrap();
    assert!(statuses(&third).iter().all(|s| *s == StageStatus::Ran));
    assert_eq!(
        fs::read(tmp.path().join("results/clustering.json")).unwrap(),
        bytes
    );
}

#[test]
fn touching_an_intermediate_reruns_downstream_only() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = setup(tmp.path(), 6);
    let config = PipelineConfig::load(&config_path).unwrap();
    run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    let matrix = tmp.path().join("results/dissim.csv");
    let bytes = fs::read(&matrix).unwrap();
    fs::write(&matrix, bytes).unwrap();
    let reports = run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap();
    assert_eq!(
        statuses(&reports),
        [
            StageStatus::Skipped,
            StageStatus::Skipped,
            StageStatus::Ran,
            StageStatus::Ran,
            StageStatus::Ran
        ]
    );
}

#[test]
fn corrupt_intermediate_stops_the_consuming_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = setup(tmp.path(), 6);
    let config = PipelineConfig::load(&config_path).unwrap();
    run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    let matrix = tmp.path().join("results/dissim.csv");
    let text = fs::read_to_string(&matrix)
        .unwrap()
        .replacen(",0,", ",-1,", 1);
    fs::write(&matrix, text).unwrap();
    let err = run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Corrupt { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("dissim.csv"));
}

#[test]
fn missing_gauge_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = setup(tmp.path(), 3);
    fs::remove_file(tmp.path().join("gauge.csv")).unwrap();
    let config = PipelineConfig::load(&config_path).unwrap();
    let err = run_pipeline(&config, &config_path, &PipelineOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("gauge.csv"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("config.json");
    fs::write(&path, r#"{"input": "g.csv", "warp": {"band": 3}}"#).unwrap();
    let err = PipelineConfig::load(&path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("band"), "{err}");
}
