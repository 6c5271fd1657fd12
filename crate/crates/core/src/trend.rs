//! Sliding-window cluster frequencies and their gradient symbols.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slopes within this many percentage points per window count as flat.
pub const GRADIENT_DEAD_BAND: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrendError {
    #[error("invalid window specification: {0}")]
    BadSpec(String),
    #[error("years {first}..={last} cannot hold a {length}-year window")]
    DomainTooShort { first: i32, last: i32, length: u32 },
    #[error("year {year} in window {start}-{end} has no cluster assignment")]
    Unassigned { year: i32, start: i32, end: i32 },
    #[error("year {year} assigned to cluster {cluster}, but k = {k}")]
    ClusterOutOfRange { year: i32, cluster: usize, k: usize },
    #[error("window {start}-{end} contains no assigned years")]
    EmptyWindow { start: i32, end: i32 },
    #[error("a gradient needs at least 2 windows, got {0}")]
    TooFewWindows(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub first_start_year: i32,
    pub length_years: u32,
    pub step_years: u32,
    /// Stretch the final window to the last year.
    pub extend_last: bool,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            first_start_year: 0,
            length_years: 26,
            step_years: 19,
            extend_last: true,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), TrendError> {
        if self.length_years == 0 || self.step_years == 0 {
            return Err(TrendError::BadSpec(
                "length_years and step_years must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Years shared by consecutive windows; negative when windows leave gaps.
    pub fn overlap(&self) -> i64 {
        self.length_years as i64 - self.step_years as i64
    }
}

/// Inclusive range of hydrological start years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i32,
    pub end: i32,
}

impl Window {
    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    /// Years in `first_start_year..=last_year` not covered by any window.
    pub uncovered: Vec<i32>,
}

/// Windows starting every `step_years` from `first_start_year`, each
/// `length_years` long, for as long as a full window fits before `last_year`.
pub fn make_windows(spec: &WindowSpec, last_year: i32) -> Result<WindowSet, TrendError> {
    spec.validate()?;
    let len = spec.length_years as i64;
    let first = spec.first_start_year as i64;
    if (last_year as i64) < first + len - 1 {
        return Err(TrendError::DomainTooShort {
            first: spec.first_start_year,
            last: last_year,
            length: spec.length_years,
        });
    }
    let mut windows = Vec::new();
    let mut start = first;
    while start + len - 1 <= last_year as i64 {
        windows.push(Window {
            start: start as i32,
            end: (start + len - 1) as i32,
        });
        start += spec.step_years as i64;
    }
    if spec.extend_last {
        if let Some(w) = windows.last_mut() {
            w.end = last_year;
        }
    }
    let uncovered = (spec.first_start_year..=last_year)
        .filter(|y| !windows.iter().any(|w| (w.start..=w.end).contains(y)))
        .collect();
    Ok(WindowSet { windows, uncovered })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Share of each window's years held by each cluster.
    #[default]
    Row,
    /// Share of each cluster's (window-counted) years falling in each window.
    Column,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "row" => Ok(Normalization::Row),
            "column" => Ok(Normalization::Column),
            other => Err(format!("unknown normalization '{other}' (row|column)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub window: Window,
    pub counts: Vec<u64>,
    pub percentages: Vec<f64>,
    /// Exact percentages as reduced fractions, e.g. `"150/13"`.
    pub exact: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub k: usize,
    pub normalization: Normalization,
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyTable {
    /// Percentages of one cluster across windows.
    pub fn column(&self, cluster: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.percentages[cluster]).collect()
    }
}

/// Counts cluster membership per window and normalizes the counts.
///
/// With `skip_unassigned` years without an assignment are left out of the
/// window instead of raising [`TrendError::Unassigned`].
pub fn frequency_table(
    k: usize,
    assignments: &BTreeMap<i32, usize>,
    windows: &[Window],
    normalization: Normalization,
    skip_unassigned: bool,
) -> Result<FrequencyTable, TrendError> {
    let mut counts: Vec<Vec<u64>> = Vec::with_capacity(windows.len());
    for w in windows {
        let mut row = vec![0u64; k];
        for year in w.years() {
            match assignments.get(&year) {
                Some(&cluster) if cluster < k => row[cluster] += 1,
                Some(&cluster) => return Err(TrendError::ClusterOutOfRange { year, cluster, k }),
                None if skip_unassigned => {}
                None => {
                    return Err(TrendError::Unassigned {
                        year,
                        start: w.start,
                        end: w.end,
                    })
                }
            }
        }
        if row.iter().sum::<u64>() == 0 {
            return Err(TrendError::EmptyWindow {
                start: w.start,
                end: w.end,
            });
        }
        counts.push(row);
    }
    let column_totals: Vec<u64> = (0..k).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
    let rows = windows
        .iter()
        .zip(counts)
        .map(|(w, row)| {
            let row_total: u64 = row.iter().sum();
            let exact: Vec<Ratio<u64>> = row
                .iter()
                .enumerate()
                .map(|(c, &count)| {
                    let den = match normalization {
                        Normalization::Row => row_total,
                        Normalization::Column => column_totals[c],
                    };
                    if den == 0 {
                        Ratio::from_integer(0)
                    } else {
                        Ratio::new(100 * count, den)
                    }
                })
                .collect();
            FrequencyRow {
                window: *w,
                percentages: exact
                    .iter()
                    .map(|r| *r.numer() as f64 / *r.denom() as f64)
                    .collect(),
                exact: exact.iter().map(Ratio::to_string).collect(),
                counts: row,
            }
        })
        .collect();
    Ok(FrequencyTable {
        k,
        normalization,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gradient {
    Down,
    DownUp,
    UpDown,
    Up,
    Flat,
}

impl Gradient {
    pub fn arrows(self) -> &'static str {
        match self {
            Gradient::Down => "↘",
            Gradient::DownUp => "↘ ↗",
            Gradient::UpDown => "↗ ↘",
            Gradient::Up => "↗",
            Gradient::Flat => "→",
        }
    }
}

impl fmt::Display for Gradient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gradient::Down => "down",
            Gradient::DownUp => "down-up",
            Gradient::UpDown => "up-down",
            Gradient::Up => "up",
            Gradient::Flat => "flat",
        })
    }
}

fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (num, den) = ys
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(num, den), (x, y)| {
            let dx = x as f64 - x_mean;
            (num + dx * (y - y_mean), den + dx * dx)
        });
    num / den
}

fn sign(slope: f64) -> i8 {
    if slope > GRADIENT_DEAD_BAND {
        1
    } else if slope < -GRADIENT_DEAD_BAND {
        -1
    } else {
        0
    }
}

/// Least-squares slopes of the first and second half of a column (the middle
/// point belongs to both halves when the length is odd).
pub fn half_slopes(column: &[f64]) -> Result<(f64, f64), TrendError> {
    let n = column.len();
    if n < 2 {
        return Err(TrendError::TooFewWindows(n));
    }
    if n == 2 {
        let s = column[1] - column[0];
        return Ok((s, s));
    }
    let first = &column[..n / 2 + n % 2];
    let second = &column[n / 2..];
    Ok((ls_slope(first), ls_slope(second)))
}

/// Classifies a column of per-window percentages.
pub fn gradient(column: &[f64]) -> Result<Gradient, TrendError> {
    let (s1, s2) = half_slopes(column)?;
    Ok(match (sign(s1), sign(s2)) {
        (0, 0) => Gradient::Flat,
        (-1, 1) => Gradient::DownUp,
        (1, -1) => Gradient::UpDown,
        (a, b) if a + b < 0 => Gradient::Down,
        _ => Gradient::Up,
    })
}

/// Writes windows as rows and clusters as columns (one decimal), followed by
/// a `gradient` row.
pub fn write_table_csv<W: Write>(
    mut out: W,
    table: &FrequencyTable,
    gradients: &[Gradient],
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    write!(out, "start,end")?;
    for c in 0..table.k {
        write!(out, ",C{}", c + 1)?;
    }
    writeln!(out)?;
    for row in &table.rows {
        write!(out, "{},{}", row.window.start, row.window.end)?;
        for p in &row.percentages {
            write!(out, ",{p:.1}")?;
        }
        writeln!(out)?;
    }
    write!(out, "gradient,")?;
    for g in gradients {
        write!(out, ",{g}")?;
    }
    writeln!(out)
}
