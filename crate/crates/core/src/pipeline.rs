//! File-level stages and the end-to-end pipeline.
//!
//! Each stage reads its inputs from files, computes, and returns an artifact
//! that embeds a [`Provenance`] block: tool version, the stage configuration
//! and the SHA-256 of every input file. Only file names (never directories),
//! no timestamps and no worker counts go into artifacts, so identical inputs
//! produce byte-identical outputs wherever and however they are run.
//!
//! Artifact set written by [`run_pipeline`] into the output directory:
//!
//! | stage   | files                                   |
//! |---------|-----------------------------------------|
//! | ingest  | `years.json`, `ingest_report.json`      |
//! | dissim  | `dissim.csv`, `dissim.svg`, `outliers.json` |
//! | cluster | `clustering.json`                       |
//! | indices | `indices.csv`, `profiles.json`          |
//! | trend   | `trend.csv`, `trend.json`               |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clustering::{best_of_restarts, ClusterError, ClusteringRecord, DEFAULT_MAX_ITER};
use crate::figures;
use crate::indices::{
    compute_indices, profile_clusters, write_indices_csv, ClusterProfile, IndexError, IndexVector,
    DEFAULT_WET_THRESHOLD,
};
use crate::ingest::{
    hydro_year_len, parse_daily_text, split_hydro_years, CsvFormat, Exclusion, HydroYear,
    IngestError, MissingPolicy,
};
use crate::matrix::{
    build_matrix_with_progress, rank_outliers, DissimMatrix, MatrixError, Outlier,
};
use crate::trend::{
    frequency_table, gradient, make_windows, write_table_csv, FrequencyTable, Gradient,
    Normalization, TrendError, Window, WindowSpec,
};
use crate::warp::{ims_dtw, WarpConfig, WarpError};
use crate::Execution;

pub const TOOL: &str = "rainwarp";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("year {0} is not in the year store")]
    UnknownYear(i32),
    #[error("{path}: corrupt artifact: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("years {first} and {second}: {source}")]
    Warp {
        first: i32,
        second: i32,
        #[source]
        source: WarpError,
    },
    #[error(transparent)]
    Matrix(MatrixError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Trend(#[from] TrendError),
}

impl PipelineError {
    /// 2 for usage, configuration and input problems; 3 for failures while
    /// computing or when an intermediate artifact is unusable.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_)
            | PipelineError::Config(_)
            | PipelineError::Input { .. }
            | PipelineError::Ingest(_)
            | PipelineError::UnknownYear(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    /// File name without directories.
    pub name: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        InputDigest {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(stage: &str, config: &impl Serialize, inputs: Vec<InputDigest>) -> Self {
        Provenance {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            stage: stage.to_string(),
            config: serde_json::to_value(config).expect("configuration serializes"),
            inputs,
        }
    }

    /// The block as `#`-comment lines for CSV and SVG outputs.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("{} {} stage={}", self.tool, self.version, self.stage),
            format!("config {}", self.config),
        ];
        lines.extend(
            self.inputs
                .iter()
                .map(|i| format!("input {} sha256={}", i.name, i.sha256)),
        );
        lines
    }
}

/// Reads a file given as a stage input, returning its bytes and digest.
pub fn read_input(path: &Path) -> Result<(Vec<u8>, InputDigest), PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let digest = InputDigest::of_bytes(path, &bytes);
    Ok((bytes, digest))
}

fn parse_artifact<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, PipelineError> {
    serde_json::from_slice(bytes).map_err(|e| PipelineError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| PipelineError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

/// Renders with `render` into memory, then writes the file.
pub fn write_text(
    path: &Path,
    render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<(), PipelineError> {
    let mut bytes = Vec::new();
    render(&mut bytes).map_err(|source| PipelineError::Output {
        path: path.to_path_buf(),
        source,
    })?;
    write_bytes(path, &bytes)
}

// ---------------------------------------------------------------- settings

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSettings {
    pub format: CsvFormat,
    pub missing: MissingPolicy,
}

impl IngestSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.format
            .validate()
            .and_then(|_| self.missing.validate())
            .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSettings {
    pub k: usize,
    /// One K-medoids run per seed; the lowest-cost run is kept.
    pub seeds: Vec<u64>,
    pub max_iter: usize,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        ClusteringSettings {
            k: 4,
            seeds: (1..=10).collect(),
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl ClusteringSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k == 0 {
            return Err(PipelineError::Config(
                "clustering.k must be at least 1".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(PipelineError::Config(
                "clustering.seeds must not be empty".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(PipelineError::Config(
                "clustering.max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicesSettings {
    /// Daily accumulation (mm/day) at or above which a day is wet.
    pub wet_threshold: f64,
}

impl Default for IndicesSettings {
    fn default() -> Self {
        IndicesSettings {
            wet_threshold: DEFAULT_WET_THRESHOLD,
        }
    }
}

impl IndicesSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.wet_threshold.is_finite() && self.wet_threshold > 0.0) {
            return Err(PipelineError::Config(format!(
                "indices.wet_threshold must be positive, got {}",
                self.wet_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendSettings {
    /// Defaults to the first clustered year.
    pub first_start_year: Option<i32>,
    pub length_years: u32,
    pub step_years: u32,
    pub extend_last: bool,
    pub normalization: Normalization,
    /// Leave years without an assignment (e.g. excluded for missing data)
    /// out of their window instead of failing.
    pub skip_unassigned: bool,
}

impl Default for TrendSettings {
    fn default() -> Self {
        let spec = WindowSpec::default();
        TrendSettings {
            first_start_year: None,
            length_years: spec.length_years,
            step_years: spec.step_years,
            extend_last: spec.extend_last,
            normalization: Normalization::Row,
            skip_unassigned: false,
        }
    }
}

impl TrendSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.spec(0)
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    fn spec(&self, default_first: i32) -> WindowSpec {
        WindowSpec {
            first_start_year: self.first_start_year.unwrap_or(default_first),
            length_years: self.length_years,
            step_years: self.step_years,
            extend_last: self.extend_last,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_outliers() -> usize {
    3
}

/// Configuration of [`run_pipeline`]. Relative paths are resolved against
/// the directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub ingest: IngestSettings,
    #[serde(default)]
    pub warp: WarpConfig,
    #[serde(default)]
    pub clustering: ClusteringSettings,
    #[serde(default)]
    pub indices: IndicesSettings,
    #[serde(default)]
    pub trend: TrendSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Years listed in `outliers.json`.
    #[serde(default = "default_outliers")]
    pub outliers: usize,
    /// Worker threads for the pairwise stage: 0 for all cores, 1 for
    /// sequential. Does not affect any output.
    #[serde(default)]
    pub workers: usize,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.ingest.validate()?;
        self.warp
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.clustering.validate()?;
        self.indices.validate()?;
        self.trend.validate()
    }

    /// Reads, resolves and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let (bytes, _) = read_input(path)?;
        let mut config: PipelineConfig = serde_json::from_slice(&bytes)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.input = base.join(&config.input);
        config.output_dir = base.join(&config.output_dir);
        config.validate()?;
        Ok(config)
    }
}

// ------------------------------------------------------------------ ingest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearStore {
    pub provenance: Provenance,
    pub station_id: String,
    pub years: Vec<HydroYear>,
    pub excluded: Vec<Exclusion>,
}

impl YearStore {
    pub fn labels(&self) -> Vec<i32> {
        self.years.iter().map(|y| y.start_year).collect()
    }

    pub fn get(&self, year: i32) -> Result<&HydroYear, PipelineError> {
        self.years
            .iter()
            .find(|y| y.start_year == year)
            .ok_or(PipelineError::UnknownYear(year))
    }

    fn check(&self) -> Result<(), String> {
        for pair in self.years.windows(2) {
            if pair[1].start_year <= pair[0].start_year {
                return Err(format!(
                    "years out of order: {} then {}",
                    pair[0].start_year, pair[1].start_year
                ));
            }
        }
        for y in &self.years {
            if y.values.len() != hydro_year_len(y.start_year) {
                return Err(format!(
                    "year {} has {} values, expected {}",
                    y.start_year,
                    y.values.len(),
                    hydro_year_len(y.start_year)
                ));
            }
            if let Some(v) = y.values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(format!("year {} contains invalid value {v}", y.start_year));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, InputDigest), PipelineError> {
        let (bytes, digest) = read_input(path)?;
        let store: YearStore = parse_artifact(path, &bytes)?;
        store.check().map_err(|message| PipelineError::Corrupt {
            path: path.to_path_buf(),
            message,
        })?;
        Ok((store, digest))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub provenance: Provenance,
    pub station_id: String,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub days: usize,
    pub missing_days: usize,
    pub retained_years: usize,
    pub excluded: Vec<Exclusion>,
}

pub fn ingest_stage(
    input: &Path,
    settings: &IngestSettings,
) -> Result<(YearStore, IngestReport), PipelineError> {
    settings.validate()?;
    let (bytes, digest) = read_input(input)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| PipelineError::Input {
        path: input.to_path_buf(),
        message: format!("not UTF-8 text: {e}"),
    })?;
    let series = parse_daily_text(input, text, &settings.format)?;
    let split = split_hydro_years(&series, &settings.missing)?;
    let provenance = Provenance::new("ingest", settings, vec![digest]);
    let report = IngestReport {
        provenance: provenance.clone(),
        station_id: series.station_id.clone(),
        first_date: series.first_date().expect("non-empty series"),
        last_date: series.last_date().expect("non-empty series"),
        days: series.len(),
        missing_days: series
            .records()
            .iter()
            .filter(|r| r.value.is_none())
            .count(),
        retained_years: split.years.len(),
        excluded: split.excluded.clone(),
    };
    let store = YearStore {
        provenance,
        station_id: series.station_id.clone(),
        years: split.years,
        excluded: split.excluded,
    };
    Ok((store, report))
}

// ------------------------------------------------------------------ dissim

pub fn dissim_stage(
    store: &YearStore,
    store_digest: InputDigest,
    config: &WarpConfig,
    exec: Execution,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<(DissimMatrix, Provenance), PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let matrix =
        build_matrix_with_progress(&store.years, config, exec, progress).map_err(|e| match e {
            MatrixError::Pair {
                first,
                second,
                source,
            } => PipelineError::Warp {
                first,
                second,
                source,
            },
            other => PipelineError::Matrix(other),
        })?;
    Ok((
        matrix,
        Provenance::new("dissim", config, vec![store_digest]),
    ))
}

/// Loads a matrix in CSV or JSON form.
pub fn load_matrix(path: &Path) -> Result<(DissimMatrix, InputDigest), PipelineError> {
    let (bytes, digest) = read_input(path)?;
    let parsed = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        parse_artifact(path, &bytes)?
    } else {
        DissimMatrix::read_csv(&bytes[..], path).map_err(|e| PipelineError::Corrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
    };
    Ok((parsed, digest))
}

pub fn save_matrix(
    path: &Path,
    matrix: &DissimMatrix,
    provenance: &Provenance,
) -> Result<(), PipelineError> {
    matrix
        .save(path, &provenance.comment_lines())
        .map_err(|e| match e {
            MatrixError::Io { path, source } => PipelineError::Output { path, source },
            other => PipelineError::Matrix(other),
        })
}

pub fn write_heatmap(
    path: &Path,
    matrix: &DissimMatrix,
    provenance: &Provenance,
) -> Result<(), PipelineError> {
    let title = format!("Dissimilarity between {} hydrological years", matrix.len());
    let svg = figures::heatmap_svg(matrix, &title, &provenance.comment_lines());
    write_bytes(path, svg.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub provenance: Provenance,
    pub outliers: Vec<Outlier>,
}

pub fn outlier_report(matrix: &DissimMatrix, top: usize, provenance: &Provenance) -> OutlierReport {
    OutlierReport {
        provenance: provenance.clone(),
        outliers: rank_outliers(matrix, top.min(matrix.len())).expect("top clamped to matrix size"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentArtifact {
    pub provenance: Provenance,
    pub first: i32,
    pub second: i32,
    pub score: f64,
    pub total_cost: f64,
    pub max_offset: usize,
    /// `(day in first year, day in second year)` pairs.
    pub steps: Vec<(usize, usize)>,
}

/// Aligns two years of the store; returns the artifact and the SVG figure.
pub fn align_pair(
    store: &YearStore,
    store_digest: InputDigest,
    first: i32,
    second: i32,
    config: &WarpConfig,
) -> Result<(AlignmentArtifact, String), PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let (a, b) = (store.get(first)?, store.get(second)?);
    let (score, path) =
        ims_dtw(&a.values, &b.values, config).map_err(|source| PipelineError::Warp {
            first,
            second,
            source,
        })?;
    let provenance = Provenance::new(
        "align",
        &serde_json::json!({ "warp": config, "pair": [first, second] }),
        vec![store_digest],
    );
    let svg = figures::alignment_svg(
        (&first.to_string(), &second.to_string()),
        &a.values,
        &b.values,
        &path,
        &provenance.comment_lines(),
    );
    let artifact = AlignmentArtifact {
        provenance,
        first,
        second,
        score: score.value(),
        total_cost: path.total_cost,
        max_offset: path.max_offset(),
        steps: path.steps,
    };
    Ok((artifact, svg))
}

// ----------------------------------------------------------------- cluster

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringArtifact {
    pub provenance: Provenance,
    pub clustering: ClusteringRecord,
}

impl ClusteringArtifact {
    pub fn load(path: &Path) -> Result<(Self, InputDigest), PipelineError> {
        let (bytes, digest) = read_input(path)?;
        let artifact: ClusteringArtifact = parse_artifact(path, &bytes)?;
        artifact
            .clustering
            .validate()
            .map_err(|message| PipelineError::Corrupt {
                path: path.to_path_buf(),
                message,
            })?;
        Ok((artifact, digest))
    }
}

pub fn cluster_stage(
    matrix: &DissimMatrix,
    matrix_digest: InputDigest,
    settings: &ClusteringSettings,
    exec: Execution,
) -> Result<ClusteringArtifact, PipelineError> {
    settings.validate()?;
    let restarts = best_of_restarts(matrix, settings.k, &settings.seeds, settings.max_iter, exec)?;
    Ok(ClusteringArtifact {
        provenance: Provenance::new("cluster", settings, vec![matrix_digest]),
        clustering: ClusteringRecord::new(&restarts.best, matrix.labels(), restarts.runs),
    })
}

// ----------------------------------------------------------------- indices

#[derive(Debug, Clone, PartialEq)]
pub struct IndicesTable {
    pub provenance: Provenance,
    pub indices: BTreeMap<i32, IndexVector>,
}

impl IndicesTable {
    pub fn write_csv(&self, path: &Path) -> Result<(), PipelineError> {
        write_text(path, |out| {
            write_indices_csv(out, &self.indices, &self.provenance.comment_lines())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilesArtifact {
    pub provenance: Provenance,
    pub profiles: Vec<ClusterProfile>,
    pub warnings: Vec<String>,
}

pub fn indices_stage(
    store: &YearStore,
    store_digest: InputDigest,
    settings: &IndicesSettings,
) -> Result<IndicesTable, PipelineError> {
    settings.validate()?;
    let indices = store
        .years
        .iter()
        .map(|y| {
            Ok((
                y.start_year,
                compute_indices(&y.values, settings.wet_threshold)?,
            ))
        })
        .collect::<Result<BTreeMap<_, _>, IndexError>>()?;
    Ok(IndicesTable {
        provenance: Provenance::new("indices", settings, vec![store_digest]),
        indices,
    })
}

pub fn profiles_stage(
    table: &IndicesTable,
    clustering: &ClusteringArtifact,
    clustering_digest: InputDigest,
) -> Result<ProfilesArtifact, PipelineError> {
    let record = &clustering.clustering;
    let report = profile_clusters(record.k, &record.assignments, &table.indices)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut inputs = table.provenance.inputs.clone();
    inputs.push(clustering_digest);
    Ok(ProfilesArtifact {
        provenance: Provenance::new("profiles", &table.provenance.config, inputs),
        profiles: report.profiles,
        warnings: report.warnings,
    })
}

// ------------------------------------------------------------------- trend

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendArtifact {
    pub provenance: Provenance,
    pub windows: Vec<Window>,
    /// Years inside the domain that no window covers.
    pub uncovered: Vec<i32>,
    /// Years inside some window that have no assignment (only with
    /// `skip_unassigned`).
    pub unassigned: Vec<i32>,
    pub table: FrequencyTable,
    /// One per cluster; empty when fewer than two windows fit.
    pub gradients: Vec<Gradient>,
}

impl TrendArtifact {
    pub fn write_csv(&self, path: &Path) -> Result<(), PipelineError> {
        write_text(path, |out| {
            write_table_csv(
                out,
                &self.table,
                &self.gradients,
                &self.provenance.comment_lines(),
            )
        })
    }
}

pub fn trend_stage(
    clustering: &ClusteringArtifact,
    clustering_digest: InputDigest,
    settings: &TrendSettings,
) -> Result<TrendArtifact, PipelineError> {
    settings.validate()?;
    let record = &clustering.clustering;
    let (Some(&first), Some(&last)) = (
        record.assignments.keys().next(),
        record.assignments.keys().next_back(),
    ) else {
        return Err(PipelineError::Trend(TrendError::BadSpec(
            "clustering assigns no years".into(),
        )));
    };
    let set = make_windows(&settings.spec(first), last)?;
    let table = frequency_table(
        record.k,
        &record.assignments,
        &set.windows,
        settings.normalization,
        settings.skip_unassigned,
    )?;
    let unassigned: Vec<i32> = (first..=last)
        .filter(|y| !record.assignments.contains_key(y))
        .filter(|y| set.windows.iter().any(|w| (w.start..=w.end).contains(y)))
        .collect();
    let gradients = if set.windows.len() >= 2 {
        (0..record.k)
            .map(|c| gradient(&table.column(c)))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        log::warn!(
            "only {} window(s); gradients need at least two",
            set.windows.len()
        );
        Vec::new()
    };
    Ok(TrendArtifact {
        provenance: Provenance::new("trend", settings, vec![clustering_digest]),
        windows: set.windows,
        uncovered: set.uncovered,
        unassigned,
        table,
        gradients,
    })
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Rerun stages even when their outputs are up to date.
    pub force: bool,
    /// Overrides `workers` from the configuration.
    pub workers: Option<usize>,
    /// Overrides `output_dir` from the configuration.
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageReport {
    pub stage: &'static str,
    pub status: StageStatus,
    pub outputs: Vec<PathBuf>,
}

fn modified(path: &Path) -> Option<SystemTime> {
    fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// True when every output exists and none is older than any input.
fn up_to_date(inputs: &[&Path], outputs: &[PathBuf]) -> bool {
    let newest_input = inputs
        .iter()
        .map(|p| modified(p))
        .collect::<Option<Vec<_>>>();
    let oldest_output = outputs
        .iter()
        .map(|p| modified(p))
        .collect::<Option<Vec<_>>>();
    match (newest_input, oldest_output) {
        (Some(i), Some(o)) => o.iter().min() >= i.iter().max(),
        _ => false,
    }
}

/// Runs ingest, dissim, cluster, indices and trend in order. A stage whose
/// outputs are newer than its inputs (including `config_path`) is skipped
/// unless `options.force` is set; every later stage reads the artifacts on
/// disk, so a damaged intermediate file stops the run at the stage that
/// consumes it.
pub fn run_pipeline(
    config: &PipelineConfig,
    config_path: &Path,
    options: &PipelineOptions,
) -> Result<Vec<StageReport>, PipelineError> {
    config.validate()?;
    let dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| config.output_dir.clone());
    let exec = Execution::with_workers(options.workers.unwrap_or(config.workers));
    let out = |name: &str| dir.join(name);
    let mut reports = Vec::new();
    let mut stage = |stage: &'static str,
                     inputs: &[&Path],
                     outputs: Vec<PathBuf>,
                     run: &mut dyn FnMut() -> Result<(), PipelineError>|
     -> Result<(), PipelineError> {
        let mut all_inputs = vec![config_path];
        all_inputs.extend_from_slice(inputs);
        let status = if !options.force && up_to_date(&all_inputs, &outputs) {
            log::info!("{stage}: outputs up to date, skipped");
            StageStatus::Skipped
        } else {
            log::info!("{stage}: running");
            run()?;
            StageStatus::Ran
        };
        reports.push(StageReport {
            stage,
            status,
            outputs,
        });
        Ok(())
    };

    let (years_path, report_path) = (out("years.json"), out("ingest_report.json"));
    stage(
        "ingest",
        &[&config.input],
        vec![years_path.clone(), report_path.clone()],
        &mut || {
            let (store, report) = ingest_stage(&config.input, &config.ingest)?;
            write_json(&years_path, &store)?;
            write_json(&report_path, &report)
        },
    )?;

    let (matrix_path, heatmap_path, outliers_path) =
        (out("dissim.csv"), out("dissim.svg"), out("outliers.json"));
    stage(
        "dissim",
        &[&years_path],
        vec![
            matrix_path.clone(),
            heatmap_path.clone(),
            outliers_path.clone(),
        ],
        &mut || {
            let (store, digest) = YearStore::load(&years_path)?;
            let (matrix, provenance) =
                dissim_stage(&store, digest, &config.warp, exec, &log_progress)?;
            save_matrix(&matrix_path, &matrix, &provenance)?;
            write_heatmap(&heatmap_path, &matrix, &provenance)?;
            write_json(
                &outliers_path,
                &outlier_report(&matrix, config.outliers, &provenance),
            )
        },
    )?;

    let clustering_path = out("clustering.json");
    stage(
        "cluster",
        &[&matrix_path],
        vec![clustering_path.clone()],
        &mut || {
            let (matrix, digest) = load_matrix(&matrix_path)?;
            let artifact = cluster_stage(&matrix, digest, &config.clustering, exec)?;
            write_json(&clustering_path, &artifact)
        },
    )?;

    let (indices_path, profiles_path) = (out("indices.csv"), out("profiles.json"));
    stage(
        "indices",
        &[&years_path, &clustering_path],
        vec![indices_path.clone(), profiles_path.clone()],
        &mut || {
            let (store, digest) = YearStore::load(&years_path)?;
            let (clustering, clustering_digest) = ClusteringArtifact::load(&clustering_path)?;
            let table = indices_stage(&store, digest, &config.indices)?;
            table.write_csv(&indices_path)?;
            write_json(
                &profiles_path,
                &profiles_stage(&table, &clustering, clustering_digest)?,
            )
        },
    )?;

    let (trend_csv, trend_json) = (out("trend.csv"), out("trend.json"));
    stage(
        "trend",
        &[&clustering_path],
        vec![trend_csv.clone(), trend_json.clone()],
        &mut || {
            let (clustering, digest) = ClusteringArtifact::load(&clustering_path)?;
            let artifact = trend_stage(&clustering, digest, &config.trend)?;
            artifact.write_csv(&trend_csv)?;
            write_json(&trend_json, &artifact)
        },
    )?;

    Ok(reports)
}

/// Logs pairwise progress at every tenth of the work.
pub fn log_progress(done: usize, total: usize) {
    let tenth = (total / 10).max(1);
    if done.is_multiple_of(tenth) || done == total {
        log::info!("dissim: {done}/{total} pairs");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Usage("x".into()).exit_code(), 2);
        assert_eq!(PipelineError::UnknownYear(1890).exit_code(), 2);
        assert_eq!(
            PipelineError::Corrupt {
                path: "a".into(),
                message: "b".into()
            }
            .exit_code(),
            3
        );
        assert_eq!(
            PipelineError::Trend(TrendError::TooFewWindows(1)).exit_code(),
            3
        );
    }

    #[test]
    fn provenance_lines_use_file_names() {
        let d = InputDigest::of_bytes(Path::new("/tmp/some/dir/years.json"), b"abc");
        assert_eq!(d.name, "years.json");
        assert_eq!(
            d.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let p = Provenance::new("dissim", &WarpConfig::default(), vec![d]);
        let lines = p.comment_lines();
        assert!(lines[0].starts_with("rainwarp ") && lines[0].ends_with("stage=dissim"));
        assert!(lines[1].starts_with("config {") && lines[1].contains("\"band_days\":14"));
        assert!(lines[2].starts_with("input years.json sha256=ba7816"));
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        let bad: Result<PipelineConfig, _> =
            serde_json::from_str(r#"{"input": "g.csv", "bogus": 1}"#);
        assert!(bad.is_err());
        let mut cfg: PipelineConfig = serde_json::from_str(r#"{"input": "g.csv"}"#).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        assert_eq!(cfg.clustering.k, 4);
        cfg.validate().unwrap();
        cfg.clustering.seeds.clear();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn up_to_date_needs_every_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in");
        let output = dir.path().join("out");
        fs::write(&input, "x").unwrap();
        assert!(!up_to_date(&[&input], std::slice::from_ref(&output)));
        fs::write(&output, "y").unwrap();
        assert!(up_to_date(&[&input], std::slice::from_ref(&output)));
        assert!(!up_to_date(
            &[&input],
            &[output, dir.path().join("missing")]
        ));
    }

    #[test]
    fn year_store_check_catches_damage() {
        let prov = Provenance::new("ingest", &IngestSettings::default(), vec![]);
        let mut store = YearStore {
            provenance: prov,
            station_id: "s".into(),
            years: vec![HydroYear {
                start_year: 2001,
                values: vec![0.0; 365],
                missing_count: 0,
            }],
            excluded: vec![],
        };
        assert!(store.check().is_ok());
        store.years[0].values.pop();
        assert!(store.check().unwrap_err().contains("364 values"));
        assert!(matches!(
            store.get(1999),
            Err(PipelineError::UnknownYear(1999))
        ));
    }
}
