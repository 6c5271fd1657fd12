//! Daily rain-gauge ingestion and hydrological-year splitting.
//!
//! Gauge files are CSV with one row per day. Values are stored internally as
//! rain rates in mm/h; gauges that report daily accumulations (mm/day) are
//! converted on load. Calendar gaps are materialized as missing records so a
//! [`DailySeries`] is always contiguous.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while reading or splitting a gauge record.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: file contains no data rows")]
    Empty { path: PathBuf },
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: NaiveDate },
    #[error("line {line}: date {date} is earlier than the preceding row ({previous})")]
    NonMonotone {
        line: u64,
        date: NaiveDate,
        previous: NaiveDate,
    },
    #[error("invalid ingest configuration: {0}")]
    Config(String),
    #[error("series {first}..={last} does not contain a complete September-to-August year")]
    TooShort { first: NaiveDate, last: NaiveDate },
}

/// Unit of the value column in the source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RainUnit {
    /// Rain rate, already in mm/h.
    #[default]
    MmPerHour,
    /// Daily accumulation in mm; divided by 24 on load.
    MmPerDay,
}

impl RainUnit {
    fn to_rate(self, value: f64) -> f64 {
        match self {
            RainUnit::MmPerHour => value,
            RainUnit::MmPerDay => value / 24.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DateFormat {
    /// Try ISO-8601 first, then DD/MM/YYYY.
    #[default]
    Auto,
    /// `YYYY-MM-DD`
    Iso,
    /// `DD/MM/YYYY`
    Dmy,
}

impl DateFormat {
    fn parse(self, raw: &str) -> Option<NaiveDate> {
        let raw = raw.trim();
        let iso = || NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok();
        let dmy = || NaiveDate::parse_from_str(raw, "%d/%m/%Y").ok();
        match self {
            DateFormat::Iso => iso(),
            DateFormat::Dmy => dmy(),
            DateFormat::Auto => iso().or_else(dmy),
        }
    }
}

/// Column selector: header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    /// Parses a command-line selector: all digits is an index, anything else a name.
    pub fn parse(raw: &str) -> Column {
        match raw.parse::<usize>() {
            Ok(idx) => Column::Index(idx),
            Err(_) => Column::Name(raw.to_string()),
        }
    }
}

/// Whether the first line is a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeaderMode {
    /// A first line whose date field does not parse is treated as a header.
    #[default]
    Auto,
    Present,
    Absent,
}

/// Column and unit configuration for [`parse_daily_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvFormat {
    pub date_column: Column,
    pub value_column: Column,
    pub header: HeaderMode,
    pub date_format: DateFormat,
    pub delimiter: char,
    pub decimal_separator: char,
    pub units: RainUnit,
    /// Field values mapped to the missing marker. Empty fields are always missing.
    pub missing_codes: Vec<String>,
    pub station_id: Option<String>,
}

impl Default for CsvFormat {
    fn default() -> Self {
        CsvFormat {
            date_column: Column::Index(0),
            value_column: Column::Index(1),
            header: HeaderMode::Auto,
            date_format: DateFormat::Auto,
            delimiter: ',',
            decimal_separator: '.',
            units: RainUnit::MmPerHour,
            missing_codes: vec!["-9999".to_string()],
            station_id: None,
        }
    }
}

impl CsvFormat {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !self.delimiter.is_ascii() {
            return Err(IngestError::Config(
                "delimiter must be an ASCII character".into(),
            ));
        }
        if self.decimal_separator == self.delimiter {
            return Err(IngestError::Config(
                "decimal separator and delimiter must differ".into(),
            ));
        }
        if self.header == HeaderMode::Absent
            && (matches!(self.date_column, Column::Name(_))
                || matches!(self.value_column, Column::Name(_)))
        {
            return Err(IngestError::Config(
                "columns selected by name require a header row".into(),
            ));
        }
        Ok(())
    }

    fn is_missing_code(&self, field: &str) -> bool {
        if field.is_empty() {
            return true;
        }
        self.missing_codes.iter().any(|code| {
            let code = code.trim();
            code == field
                || matches!(
                    (self.parse_number(code), self.parse_number(field)),
                    (Some(a), Some(b)) if a == b
                )
        })
    }

    fn parse_number(&self, field: &str) -> Option<f64> {
        if self.decimal_separator == '.' {
            field.parse().ok()
        } else {
            field.replace(self.decimal_separator, ".").parse().ok()
        }
    }
}

/// One day of gauge data; `value` is `None` for a missing observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Rain rate in mm/h.
    pub value: Option<f64>,
}

/// A contiguous daily record for one gauge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailySeries {
    pub station_id: String,
    records: Vec<DailyRecord>,
}

impl DailySeries {
    /// Builds a series from records that are strictly increasing by date.
    /// Calendar gaps are filled with missing records.
    pub fn from_records(
        station_id: impl Into<String>,
        records: Vec<DailyRecord>,
    ) -> Result<Self, IngestError> {
        let mut filled: Vec<DailyRecord> = Vec::with_capacity(records.len());
        for (idx, record) in records.into_iter().enumerate() {
            let line = idx as u64 + 1;
            validate_value(record.value, line)?;
            if let Some(prev) = filled.last().map(|r| r.date) {
                push_after(&mut filled, prev, record, line)?;
            } else {
                filled.push(record);
            }
        }
        Ok(DailySeries {
            station_id: station_id.into(),
            records: filled,
        })
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }

    /// Writes the series as `date,rain_rate_mm_h` in ISO dates, missing days
    /// as empty fields. [`parse_daily_csv`] with the default format reads it back.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), std::io::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["date", "rain_rate_mm_h"])?;
        for record in &self.records {
            let value = record.value.map(|v| v.to_string()).unwrap_or_default();
            out.write_record([record.date.format("%Y-%m-%d").to_string(), value])?;
        }
        out.flush()
    }
}

fn validate_value(value: Option<f64>, line: u64) -> Result<(), IngestError> {
    match value {
        Some(v) if !v.is_finite() => Err(IngestError::MalformedRow {
            line,
            message: format!("non-finite value {v}"),
        }),
        Some(v) if v < 0.0 => Err(IngestError::MalformedRow {
            line,
            message: format!("negative rain value {v}"),
        }),
        _ => Ok(()),
    }
}

fn push_after(
    filled: &mut Vec<DailyRecord>,
    previous: NaiveDate,
    record: DailyRecord,
    line: u64,
) -> Result<(), IngestError> {
    if record.date == previous {
        return Err(IngestError::DuplicateDate {
            line,
            date: record.date,
        });
    }
    if record.date < previous {
        return Err(IngestError::NonMonotone {
            line,
            date: record.date,
            previous,
        });
    }
    let mut next = previous + Duration::days(1);
    while next < record.date {
        filled.push(DailyRecord {
            date: next,
            value: None,
        });
        next += Duration::days(1);
    }
    filled.push(record);
    Ok(())
}

/// Reads a gauge CSV file into a contiguous [`DailySeries`].
pub fn parse_daily_csv(path: &Path, format: &CsvFormat) -> Result<DailySeries, IngestError> {
    let mut raw = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut raw))
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    parse_daily_text(path, &raw, format)
}

/// Parses gauge text already read from `path`. The station id defaults to
/// the file stem and errors name the file.
pub fn parse_daily_text(
    path: &Path,
    text: &str,
    format: &CsvFormat,
) -> Result<DailySeries, IngestError> {
    let station = format.station_id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    match parse_daily_str(text, format, station) {
        Err(IngestError::Empty { .. }) => Err(IngestError::Empty {
            path: path.to_path_buf(),
        }),
        other => other,
    }
}

pub fn parse_daily_str(
    text: &str,
    format: &CsvFormat,
    station_id: String,
) -> Result<DailySeries, IngestError> {
    format.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(format.delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut date_idx = None;
    let mut value_idx = None;
    let mut filled: Vec<DailyRecord> = Vec::new();
    let mut first = true;

    for row in reader.records() {
        let row = row.map_err(|e| IngestError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            let is_header = match format.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => {
                    let idx = match &format.date_column {
                        Column::Index(i) => Some(*i),
                        Column::Name(_) => None,
                    };
                    idx.and_then(|i| row.get(i))
                        .and_then(|f| format.date_format.parse(f))
                        .is_none()
                }
            };
            if is_header {
                date_idx = Some(resolve_column(&format.date_column, &row, line)?);
                value_idx = Some(resolve_column(&format.value_column, &row, line)?);
                continue;
            }
        }
        let d_idx = match (date_idx, &format.date_column) {
            (Some(i), _) => i,
            (None, Column::Index(i)) => *i,
            (None, Column::Name(name)) => {
                return Err(IngestError::MalformedRow {
                    line,
                    message: format!("column '{name}' requested but the file has no header"),
                })
            }
        };
        let v_idx = match (value_idx, &format.value_column) {
            (Some(i), _) => i,
            (None, Column::Index(i)) => *i,
            (None, Column::Name(name)) => {
                return Err(IngestError::MalformedRow {
                    line,
                    message: format!("column '{name}' requested but the file has no header"),
                })
            }
        };
        let date_field = row.get(d_idx).ok_or_else(|| IngestError::MalformedRow {
            line,
            message: format!("missing date column {d_idx}"),
        })?;
        let date =
            format
                .date_format
                .parse(date_field)
                .ok_or_else(|| IngestError::MalformedRow {
                    line,
                    message: format!("unparsable date '{date_field}'"),
                })?;
        let value_field = row.get(v_idx).ok_or_else(|| IngestError::MalformedRow {
            line,
            message: format!("missing value column {v_idx}"),
        })?;
        let value = if format.is_missing_code(value_field) {
            None
        } else {
            let v = format
                .parse_number(value_field)
                .ok_or_else(|| IngestError::MalformedRow {
                    line,
                    message: format!("unparsable value '{value_field}'"),
                })?;
            validate_value(Some(v), line)?;
            Some(format.units.to_rate(v))
        };
        let record = DailyRecord { date, value };
        match filled.last().map(|r| r.date) {
            Some(prev) => push_after(&mut filled, prev, record, line)?,
            None => filled.push(record),
        }
    }

    if filled.is_empty() {
        return Err(IngestError::Empty {
            path: PathBuf::new(),
        });
    }
    Ok(DailySeries {
        station_id,
        records: filled,
    })
}

fn resolve_column(
    column: &Column,
    header: &csv::StringRecord,
    line: u64,
) -> Result<usize, IngestError> {
    match column {
        Column::Index(i) if *i < header.len() => Ok(*i),
        Column::Index(i) => Err(IngestError::MalformedRow {
            line,
            message: format!("header has no column {i}"),
        }),
        Column::Name(name) => {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| IngestError::MalformedRow {
                    line,
                    message: format!("header has no column named '{name}'"),
                })
        }
    }
}

/// One September-to-August span of rain rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroYear {
    /// Year containing the September 1 start.
    pub start_year: i32,
    /// Rain rates in mm/h, 365 or 366 entries.
    pub values: Vec<f64>,
    /// Number of days that were missing before filling.
    pub missing_count: usize,
}

impl HydroYear {
    pub fn start_date(&self) -> NaiveDate {
        hydro_start(self.start_year)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn hydro_start(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 9, 1).expect("September 1 exists in every year")
}

/// Number of days in the hydrological year starting September 1 of `year`.
pub fn hydro_year_len(year: i32) -> usize {
    (hydro_start(year + 1) - hydro_start(year)).num_days() as usize
}

/// Missing-data handling for [`split_hydro_years`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissingPolicy {
    /// Years whose missing fraction exceeds this are excluded.
    pub max_missing_fraction: f64,
    /// Replacement for the remaining missing days, mm/h.
    pub fill_value: f64,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        MissingPolicy {
            max_missing_fraction: 0.05,
            fill_value: 0.0,
        }
    }
}

impl MissingPolicy {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(IngestError::Config(format!(
                "max_missing_fraction must lie in [0, 1], got {}",
                self.max_missing_fraction
            )));
        }
        if !self.fill_value.is_finite() || self.fill_value < 0.0 {
            return Err(IngestError::Config(format!(
                "fill_value must be finite and non-negative, got {}",
                self.fill_value
            )));
        }
        Ok(())
    }
}

/// A hydrological year dropped by the missing-data policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub year: i32,
    pub missing_count: usize,
    pub reason: String,
}

/// Result of [`split_hydro_years`]: retained years in chronological order plus exclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroSplit {
    pub years: Vec<HydroYear>,
    pub excluded: Vec<Exclusion>,
}

/// Cuts a series into complete September 1 to August 31 spans.
pub fn split_hydro_years(
    series: &DailySeries,
    policy: &MissingPolicy,
) -> Result<HydroSplit, IngestError> {
    policy.validate()?;
    let (first, last) = match (series.first_date(), series.last_date()) {
        (Some(f), Some(l)) => (f, l),
        _ => {
            return Err(IngestError::Empty {
                path: PathBuf::new(),
            })
        }
    };
    let mut year = if first <= hydro_start(first.year()) {
        first.year()
    } else {
        first.year() + 1
    };
    let mut split = HydroSplit {
        years: Vec::new(),
        excluded: Vec::new(),
    };
    let mut complete = 0usize;
    let records = series.records();
    loop {
        let start = hydro_start(year);
        let len = hydro_year_len(year);
        let end = start + Duration::days(len as i64 - 1);
        if end > last {
            break;
        }
        complete += 1;
        let offset = (start - first).num_days() as usize;
        let days = &records[offset..offset + len];
        let missing_count = days.iter().filter(|r| r.value.is_none()).count();
        let fraction = missing_count as f64 / len as f64;
        if fraction > policy.max_missing_fraction {
            split.excluded.push(Exclusion {
                year,
                missing_count,
                reason: format!(
                    "missing fraction {:.4} exceeds threshold {}",
                    fraction, policy.max_missing_fraction
                ),
            });
        } else {
            split.years.push(HydroYear {
                start_year: year,
                values: days
                    .iter()
                    .map(|r| r.value.unwrap_or(policy.fill_value))
                    .collect(),
                missing_count,
            });
        }
        year += 1;
    }
    if complete == 0 {
        return Err(IngestError::TooShort { first, last });
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn per_day() -> CsvFormat {
        CsvFormat {
            units: RainUnit::MmPerDay,
            ..CsvFormat::default()
        }
    }

    fn constant_series(from: NaiveDate, to: NaiveDate, value: Option<f64>) -> DailySeries {
        let records = from
            .iter_days()
            .take_while(|d| *d <= to)
            .map(|date| DailyRecord { date, value })
            .collect();
        DailySeries::from_records("test", records).unwrap()
    }

    #[test]
    fn mm_per_day_is_converted_to_rate() {
        let s = parse_daily_str("1873-09-01,4.8\n", &per_day(), "x".into()).unwrap();
        assert_eq!(s.records()[0].date, date(1873, 9, 1));
        assert_eq!(s.records()[0].value, Some(4.8 / 24.0));
        assert!((s.records()[0].value.unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn missing_codes_map_to_missing() {
        let s = parse_daily_str(
            "1900-01-01,-9999\n1900-01-02,\n1900-01-03,-9999.0\n",
            &per_day(),
            "x".into(),
        )
        .unwrap();
        assert!(s.records().iter().all(|r| r.value.is_none()));
    }

    #[test]
    fn gaps_are_materialized() {
        let s = parse_daily_str("1873-09-01,1\n1873-09-03,2\n", &per_day(), "x".into()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(
            s.records()[1],
            DailyRecord {
                date: date(1873, 9, 2),
                value: None
            }
        );
    }

    #[test]
    fn header_and_named_columns() {
        let text = "station;day;rr\nA;01/09/1873;1,5\nA;02/09/1873;0\n";
        let format = CsvFormat {
            date_column: Column::Name("day".into()),
            value_column: Column::Name("rr".into()),
            delimiter: ';',
            decimal_separator: ',',
            ..CsvFormat::default()
        };
        let s = parse_daily_str(text, &format, "x".into()).unwrap();
        assert_eq!(s.records()[0].date, date(1873, 9, 1));
        assert_eq!(s.records()[0].value, Some(1.5));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_daily_str(
            "date,v\n1900-01-01,1\nnot-a-date,2\n",
            &per_day(),
            "x".into(),
        )
        .unwrap_err();
        assert!(
            matches!(err, IngestError::MalformedRow { line: 3, .. }),
            "{err}"
        );

        let err =
            parse_daily_str("1900-01-01,1\n1900-01-01,2\n", &per_day(), "x".into()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateDate { line: 2, .. }));

        let err =
            parse_daily_str("1900-01-02,1\n1900-01-01,2\n", &per_day(), "x".into()).unwrap_err();
        assert!(matches!(err, IngestError::NonMonotone { line: 2, .. }));

        let err = parse_daily_str("1900-01-01,-3\n", &per_day(), "x".into()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 1, .. }));

        let err = parse_daily_str("1900-01-01,abc\n", &per_day(), "x".into()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { .. }));
    }

    #[test]
    fn empty_and_unreadable_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "date,value\n").unwrap();
        let err = parse_daily_csv(&path, &CsvFormat::default()).unwrap_err();
        assert!(err.to_string().contains("empty.csv"));
        let err = parse_daily_csv(&dir.path().join("nope.csv"), &CsvFormat::default()).unwrap_err();
        assert!(matches!(err, IngestError::Io { .. }));
    }

    #[test]
    fn full_record_splits_into_146_years() {
        let s = constant_series(date(1873, 9, 1), date(2019, 8, 31), Some(0.1));
        let split = split_hydro_years(&s, &MissingPolicy::default()).unwrap();
        assert_eq!(split.years.len(), 146);
        assert_eq!(split.years[0].start_year, 1873);
        assert_eq!(split.years[145].start_year, 2018);
        for y in &split.years {
            assert_eq!(y.len(), hydro_year_len(y.start_year));
        }
        // Sept 1895 - Aug 1896 contains Feb 29 1896; 1899-1900 does not (1900 not leap).
        assert_eq!(hydro_year_len(1895), 366);
        assert_eq!(hydro_year_len(1899), 365);
    }

    #[test]
    fn calendar_year_has_no_complete_span() {
        let s = constant_series(date(1900, 1, 1), date(1900, 12, 31), Some(0.0));
        assert!(matches!(
            split_hydro_years(&s, &MissingPolicy::default()),
            Err(IngestError::TooShort { .. })
        ));
    }

    #[test]
    fn partial_leading_year_is_skipped() {
        let s = constant_series(date(1900, 9, 2), date(1902, 8, 31), Some(0.0));
        let split = split_hydro_years(&s, &MissingPolicy::default()).unwrap();
        assert_eq!(
            split.years.iter().map(|y| y.start_year).collect::<Vec<_>>(),
            vec![1901]
        );
    }

    #[test]
    fn heavily_missing_year_is_excluded() {
        let mut records: Vec<DailyRecord> =
            constant_series(date(1900, 9, 1), date(1902, 8, 31), Some(0.3))
                .records()
                .to_vec();
        for r in records.iter_mut().skip(10).take(30) {
            r.value = None;
        }
        // the second year keeps 3 missing days, under the threshold
        for r in records.iter_mut().skip(400).take(3) {
            r.value = None;
        }
        let s = DailySeries::from_records("t", records).unwrap();
        let split = split_hydro_years(&s, &MissingPolicy::default()).unwrap();
        assert_eq!(split.excluded.len(), 1);
        assert_eq!(split.excluded[0].year, 1900);
        assert_eq!(split.excluded[0].missing_count, 30);
        assert_eq!(split.years.len(), 1);
        let kept = &split.years[0];
        assert_eq!(kept.missing_count, 3);
        assert_eq!(kept.values.iter().filter(|v| **v == 0.0).count(), 3);
    }

    #[test]
    fn csv_round_trip() {
        let mut records: Vec<DailyRecord> =
            constant_series(date(1999, 12, 25), date(2000, 3, 2), Some(1.0 / 3.0))
                .records()
                .to_vec();
        records[3].value = None;
        records[7].value = Some(0.0);
        records[9].value = Some(1e-7);
        let s = DailySeries::from_records("rt", records).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = parse_daily_str(
            std::str::from_utf8(&buf).unwrap(),
            &CsvFormat::default(),
            "rt".into(),
        )
        .unwrap();
        assert_eq!(back, s);
    }
}
