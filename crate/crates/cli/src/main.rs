//! `rainwarp`: command-line front end for the rainfall-year pipeline.
//!
//! Exit codes: 0 success, 2 usage, configuration or input error, 3 failure
//! while computing (including unusable intermediate files).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rainwarp_core::ingest::{Column, CsvFormat, DateFormat, HeaderMode, RainUnit};
use rainwarp_core::pipeline::{
    align_pair, cluster_stage, dissim_stage, indices_stage, ingest_stage, load_matrix,
    log_progress, outlier_report, profiles_stage, read_input, run_pipeline, save_matrix,
    trend_stage, write_heatmap, write_json, ClusteringArtifact, ClusteringSettings,
    IndicesSettings, IngestSettings, PipelineConfig, PipelineError, PipelineOptions, StageStatus,
    TrendSettings, YearStore,
};
use rainwarp_core::synthetic::{generate, SyntheticConfig, DEFAULT_SEED};
use rainwarp_core::trend::Normalization;
use rainwarp_core::warp::WarpConfig;
use rainwarp_core::Execution;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "rainwarp",
    version,
    about = "Shape-based clustering of annual rainfall series"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a daily gauge CSV and write the hydrological-year store.
    Ingest(IngestArgs),
    /// Pairwise multiscale DTW matrix, heatmap and single alignments.
    Dissim(DissimArgs),
    /// K-medoids over a dissimilarity matrix, best of several seeds.
    Cluster(ClusterArgs),
    /// Per-year precipitation indices and per-cluster profiles.
    Indices(IndicesArgs),
    /// Sliding-window cluster frequencies and gradients.
    Trend(TrendArgs),
    /// Run every stage from one configuration file.
    Pipeline(PipelineArgs),
    /// Write a synthetic multi-decade gauge record.
    Synth(SynthArgs),
}

fn parse_enum<T: DeserializeOwned>(raw: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(raw.to_string())).map_err(|e| e.to_string())
}

fn parse_char(raw: &str) -> Result<char, String> {
    let mut chars = raw.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => match raw {
            "tab" | "\\t" => Ok('\t'),
            _ => Err(format!("expected a single character, got '{raw}'")),
        },
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Year store (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Exclusion and coverage report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Ingest settings file ({"format": {...}, "missing": {...}}); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mm-per-hour or mm-per-day.
    #[arg(long, value_parser = parse_enum::<RainUnit>)]
    units: Option<RainUnit>,
    /// Date column: zero-based index or header name.
    #[arg(long)]
    date_column: Option<String>,
    /// Value column: zero-based index or header name.
    #[arg(long)]
    value_column: Option<String>,
    /// auto, present or absent.
    #[arg(long, value_parser = parse_enum::<HeaderMode>)]
    header: Option<HeaderMode>,
    /// auto, iso or dmy.
    #[arg(long, value_parser = parse_enum::<DateFormat>)]
    date_format: Option<DateFormat>,
    #[arg(long, value_parser = parse_char)]
    delimiter: Option<char>,
    #[arg(long, value_parser = parse_char)]
    decimal_separator: Option<char>,
    /// Value marking a missing day; repeatable. Replaces the default -9999.
    #[arg(long = "missing-code")]
    missing_codes: Vec<String>,
    #[arg(long)]
    station: Option<String>,
    /// Exclude years whose missing fraction exceeds this.
    #[arg(long)]
    max_missing: Option<f64>,
    /// Rain rate (mm/h) substituted for remaining missing days.
    #[arg(long)]
    fill_value: Option<f64>,
}

#[derive(Args)]
struct DissimArgs {
    #[arg(long)]
    years: PathBuf,
    /// Warp settings file (JSON); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix output; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    heatmap: Option<PathBuf>,
    /// Years ranked by mean dissimilarity (JSON).
    #[arg(long)]
    outliers: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    top: usize,
    /// Render one alignment: two year labels and an SVG path.
    #[arg(long, num_args = 3, value_names = ["YEAR1", "YEAR2", "SVG"])]
    align: Option<Vec<String>>,
    /// Also write the alignment path as JSON.
    #[arg(long, requires = "align")]
    align_json: Option<PathBuf>,
    #[arg(long)]
    band_days: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    coarsen_factor: Option<usize>,
    #[arg(long)]
    min_coarse_len: Option<usize>,
    #[arg(long)]
    cost_exponent: Option<u8>,
    /// Report total path cost instead of cost per step.
    #[arg(long)]
    no_normalize: bool,
    /// 0 all cores, 1 sequential.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated seeds, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct IndicesArgs {
    #[arg(long)]
    years: PathBuf,
    /// Index table (CSV).
    #[arg(long)]
    out: PathBuf,
    /// mm/day.
    #[arg(long)]
    wet_threshold: Option<f64>,
    #[arg(long, requires = "profiles")]
    clustering: Option<PathBuf>,
    /// Cluster profiles and labels (JSON).
    #[arg(long, requires = "clustering")]
    profiles: Option<PathBuf>,
}

#[derive(Args)]
struct TrendArgs {
    #[arg(long)]
    clustering: PathBuf,
    /// Frequency table (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Table with exact fractions, windows and gradients (JSON).
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    window_length: Option<u32>,
    #[arg(long)]
    step: Option<u32>,
    #[arg(long)]
    first_start: Option<i32>,
    /// Keep the last window at its nominal length.
    #[arg(long)]
    no_extend: bool,
    /// row or column.
    #[arg(long)]
    normalization: Option<Normalization>,
    #[arg(long)]
    skip_unassigned: bool,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Rerun stages whose outputs look up to date.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Gauge CSV (date, precip_mm).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    years: Option<usize>,
    #[arg(long)]
    first_year: Option<i32>,
    #[arg(long)]
    scattered_missing: Option<usize>,
    #[arg(long)]
    outage_days: Option<usize>,
    /// Ground-truth regime of each year (JSON).
    #[arg(long)]
    regimes: Option<PathBuf>,
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let (bytes, _) = read_input(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

fn cmd_ingest(args: IngestArgs) -> Result<(), PipelineError> {
    let mut settings: IngestSettings = match &args.config {
        Some(path) => load_json(path)?,
        None => IngestSettings::default(),
    };
    let f: &mut CsvFormat = &mut settings.format;
    if let Some(u) = args.units {
        f.units = u;
    }
    if let Some(c) = &args.date_column {
        f.date_column = Column::parse(c);
    }
    if let Some(c) = &args.value_column {
        f.value_column = Column::parse(c);
    }
    if let Some(h) = args.header {
        f.header = h;
    }
    if let Some(d) = args.date_format {
        f.date_format = d;
    }
    if let Some(d) = args.delimiter {
        f.delimiter = d;
    }
    if let Some(d) = args.decimal_separator {
        f.decimal_separator = d;
    }
    if !args.missing_codes.is_empty() {
        f.missing_codes = args.missing_codes.clone();
    }
    if let Some(s) = &args.station {
        f.station_id = Some(s.clone());
    }
    if let Some(m) = args.max_missing {
        settings.missing.max_missing_fraction = m;
    }
    if let Some(v) = args.fill_value {
        settings.missing.fill_value = v;
    }
    let (store, report) = ingest_stage(&args.input, &settings)?;
    write_json(&args.out, &store)?;
    log::info!(
        "{} years retained, {} excluded",
        store.years.len(),
        store.excluded.len()
    );
    for e in &store.excluded {
        log::warn!("year {} excluded: {}", e.year, e.reason);
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn cmd_dissim(args: DissimArgs) -> Result<(), PipelineError> {
    let mut cfg: WarpConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => WarpConfig::default(),
    };
    if let Some(v) = args.band_days {
        cfg.band_days = v;
    }
    if let Some(v) = args.radius {
        cfg.radius = v;
    }
    if let Some(v) = args.coarsen_factor {
        cfg.coarsen_factor = v;
    }
    if let Some(v) = args.min_coarse_len {
        cfg.min_coarse_len = v;
    }
    if let Some(v) = args.cost_exponent {
        cfg.cost_exponent = v;
    }
    if args.no_normalize {
        cfg.normalize = false;
    }
    cfg.validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let wants_matrix = args.out.is_some() || args.heatmap.is_some() || args.outliers.is_some();
    if !wants_matrix && args.align.is_none() {
        return Err(PipelineError::Usage(
            "nothing to do: give --out, --heatmap, --outliers or --align".into(),
        ));
    }
    let (store, digest) = YearStore::load(&args.years)?;

    if let Some(align) = &args.align {
        let year = |raw: &str| {
            raw.parse::<i32>()
                .map_err(|_| PipelineError::Usage(format!("--align: '{raw}' is not a year label")))
        };
        let (first, second) = (year(&align[0])?, year(&align[1])?);
        let (artifact, svg) = align_pair(&store, digest.clone(), first, second, &cfg)?;
        let svg_path = PathBuf::from(&align[2]);
        rainwarp_core::pipeline::write_text(&svg_path, |out| {
            use std::io::Write;
            out.write_all(svg.as_bytes())
        })?;
        log::info!(
            "{first} vs {second}: score {}, max offset {} days",
            artifact.score,
            artifact.max_offset
        );
        if let Some(path) = &args.align_json {
            write_json(path, &artifact)?;
        }
    }

    if wants_matrix {
        let exec = Execution::with_workers(args.workers);
        let (matrix, provenance) = dissim_stage(&store, digest, &cfg, exec, &log_progress)?;
        if let Some(path) = &args.out {
            save_matrix(path, &matrix, &provenance)?;
        }
        if let Some(path) = &args.heatmap {
            write_heatmap(path, &matrix, &provenance)?;
        }
        if let Some(path) = &args.outliers {
            write_json(path, &outlier_report(&matrix, args.top, &provenance))?;
        }
    }
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<(), PipelineError> {
    let defaults = ClusteringSettings::default();
    let settings = ClusteringSettings {
        k: args.k.unwrap_or(defaults.k),
        seeds: if args.seeds.is_empty() {
            defaults.seeds
        } else {
            args.seeds
        },
        max_iter: args.max_iter.unwrap_or(defaults.max_iter),
    };
    settings.validate()?;
    let (matrix, digest) = load_matrix(&args.matrix)?;
    if settings.k > matrix.len() {
        return Err(PipelineError::Config(format!(
            "k = {} exceeds the {} years in {}",
            settings.k,
            matrix.len(),
            args.matrix.display()
        )));
    }
    let artifact = cluster_stage(
        &matrix,
        digest,
        &settings,
        Execution::with_workers(args.workers),
    )?;
    let c = &artifact.clustering;
    log::info!(
        "k = {}: best seed {:?}, cost {}, medoids {:?}",
        c.k,
        c.seed,
        c.total_cost,
        c.medoids
    );
    if !c.converged {
        log::warn!("best run stopped at max_iter without converging");
    }
    write_json(&args.out, &artifact)
}

fn cmd_indices(args: IndicesArgs) -> Result<(), PipelineError> {
    let settings = IndicesSettings {
        wet_threshold: args
            .wet_threshold
            .unwrap_or(IndicesSettings::default().wet_threshold),
    };
    settings.validate()?;
    let (store, digest) = YearStore::load(&args.years)?;
    let table = indices_stage(&store, digest, &settings)?;
    table.write_csv(&args.out)?;
    if let (Some(clustering), Some(profiles)) = (&args.clustering, &args.profiles) {
        let (artifact, digest) = ClusteringArtifact::load(clustering)?;
        write_json(profiles, &profiles_stage(&table, &artifact, digest)?)?;
    }
    Ok(())
}

fn cmd_trend(args: TrendArgs) -> Result<(), PipelineError> {
    let mut settings = TrendSettings::default();
    if let Some(v) = args.window_length {
        settings.length_years = v;
    }
    if let Some(v) = args.step {
        settings.step_years = v;
    }
    settings.first_start_year = args.first_start;
    settings.extend_last = !args.no_extend;
    if let Some(n) = args.normalization {
        settings.normalization = n;
    }
    settings.skip_unassigned = args.skip_unassigned;
    settings.validate()?;
    let (clustering, digest) = ClusteringArtifact::load(&args.clustering)?;
    let artifact = trend_stage(&clustering, digest, &settings)?;
    artifact.write_csv(&args.out)?;
    if let Some(path) = &args.json {
        write_json(path, &artifact)?;
    }
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<(), PipelineError> {
    let config = PipelineConfig::load(&args.config)?;
    let options = PipelineOptions {
        force: args.force,
        workers: args.workers,
        output_dir: args.out_dir,
    };
    for report in run_pipeline(&config, &args.config, &options)? {
        let status = match report.status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "up to date",
        };
        println!("{:<8} {status}", report.stage);
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), PipelineError> {
    let defaults = SyntheticConfig::default();
    let config = SyntheticConfig {
        seed: args.seed,
        years: args.years.unwrap_or(defaults.years),
        first_year: args.first_year.unwrap_or(defaults.first_year),
        scattered_missing: args.scattered_missing.unwrap_or(defaults.scattered_missing),
        outage_days: args.outage_days.unwrap_or(defaults.outage_days),
        station_id: defaults.station_id,
    };
    let gauge = generate(&config)?;
    rainwarp_core::pipeline::write_text(&args.out, |out| gauge.write_csv(out))?;
    if let Some(path) = &args.regimes {
        write_json(
            path,
            &serde_json::json!({ "config": config, "regimes": gauge.regimes }),
        )?;
    }
    Ok(())
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Dissim(a) => cmd_dissim(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Indices(a) => cmd_indices(a),
        Command::Trend(a) => cmd_trend(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Error messages already embed their cause.
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
