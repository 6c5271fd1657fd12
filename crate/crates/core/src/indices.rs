//! Per-year precipitation indices and rule-based cluster labels.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::HydroYear;

/// Standard wet-day threshold, mm/day.
pub const DEFAULT_WET_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("wet-day threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
    #[error("year {0} is assigned to a cluster but has no indices")]
    MissingIndices(i32),
    #[error("year {0} has indices but no cluster assignment")]
    UnassignedYear(i32),
    #[error("year {year} assigned to cluster {cluster}, but k = {k}")]
    ClusterOutOfRange { year: i32, cluster: usize, k: usize },
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
}

/// Precipitation indices of one year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexVector {
    /// Maximum daily rain rate, mm/h.
    pub max_rr: f64,
    /// Population standard deviation of daily rain rates, mm/h.
    pub std_rr: f64,
    /// Accumulated precipitation, mm.
    pub total_amount: f64,
    pub wet_days: usize,
    /// Longest run of consecutive wet days.
    pub max_cwd: usize,
    /// Longest run of consecutive dry days.
    pub max_cdd: usize,
}

/// Indices of a rain-rate sequence (mm/h). A day is wet when its
/// accumulation (`rate * 24`) reaches `wet_threshold` mm.
pub fn compute_indices(rates: &[f64], wet_threshold: f64) -> Result<IndexVector, IndexError> {
    if !(wet_threshold.is_finite() && wet_threshold > 0.0) {
        return Err(IndexError::BadThreshold(wet_threshold));
    }
    // Welford keeps a constant series at exactly zero spread.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, v) in rates.iter().enumerate() {
        let d = v - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (v - mean);
    }
    let var = if rates.is_empty() {
        0.0
    } else {
        m2 / rates.len() as f64
    };
    let (mut wet_days, mut max_cwd, mut max_cdd, mut run_wet, mut run_dry) = (0, 0, 0, 0, 0);
    for v in rates {
        if v * 24.0 >= wet_threshold {
            wet_days += 1;
            run_wet += 1;
            run_dry = 0;
            max_cwd = max_cwd.max(run_wet);
        } else {
            run_dry += 1;
            run_wet = 0;
            max_cdd = max_cdd.max(run_dry);
        }
    }
    Ok(IndexVector {
        max_rr: rates.iter().copied().fold(0.0, f64::max),
        std_rr: var.sqrt(),
        total_amount: compensated_sum(rates.iter().map(|v| v * 24.0)),
        wet_days,
        max_cwd,
        max_cdd,
    })
}

/// Neumaier summation; a year of identical daily amounts totals exactly.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn year_indices(year: &HydroYear, wet_threshold: f64) -> Result<IndexVector, IndexError> {
    compute_indices(&year.values, wet_threshold)
}

/// Writes `year,max_rr,std_rr,total_amount,wet_days,max_cwd,max_cdd`, preceded by
/// `#` comment lines.
pub fn write_indices_csv<W: Write>(
    mut out: W,
    indices: &BTreeMap<i32, IndexVector>,
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(
        out,
        "year,max_rr,std_rr,total_amount,wet_days,max_cwd,max_cdd"
    )?;
    for (year, v) in indices {
        writeln!(
            out,
            "{year},{},{},{},{},{},{}",
            v.max_rr, v.std_rr, v.total_amount, v.wet_days, v.max_cwd, v.max_cdd
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLabel {
    Drought,
    ExtremeVariability,
    Normal,
}

/// Per-index statistic over the members of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub max_rr: f64,
    pub std_rr: f64,
    pub total_amount: f64,
    pub wet_days: f64,
    pub max_cwd: f64,
    pub max_cdd: f64,
}

impl IndexStats {
    fn from_fn(members: &[IndexVector], stat: impl Fn(Vec<f64>) -> f64) -> Self {
        let col = |f: fn(&IndexVector) -> f64| stat(members.iter().map(f).collect());
        IndexStats {
            max_rr: col(|v| v.max_rr),
            std_rr: col(|v| v.std_rr),
            total_amount: col(|v| v.total_amount),
            wet_days: col(|v| v.wet_days as f64),
            max_cwd: col(|v| v.max_cwd as f64),
            max_cdd: col(|v| v.max_cdd as f64),
        }
    }
}

fn mean(values: Vec<f64>) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Which extremal positions a cluster holds among all clusters' means.
/// A position shared by several clusters is held by none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleEvidence {
    pub lowest_total_amount: bool,
    pub highest_max_cdd: bool,
    pub highest_std_rr: bool,
    pub highest_max_rr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub members: usize,
    pub mean: IndexStats,
    pub median: IndexStats,
    pub label: ClusterLabel,
    pub evidence: RuleEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub profiles: Vec<ClusterProfile>,
    pub warnings: Vec<String>,
}

/// Index of the unique extreme value, or `None` on a tie.
fn unique_extreme(values: &[f64], highest: bool) -> Option<usize> {
    let pick = if highest { f64::max } else { f64::min };
    let target = values.iter().copied().reduce(pick)?;
    let mut hits = values.iter().enumerate().filter(|(_, &v)| v == target);
    let first = hits.next()?.0;
    hits.next().is_none().then_some(first)
}

/// Summarizes every cluster and labels it.
///
/// A cluster is `drought` when it alone has the lowest mean total amount and
/// the highest mean CDD, `extreme_variability` when it alone has the highest
/// mean standard deviation and the highest mean maximum rate, `normal`
/// otherwise.
pub fn profile_clusters(
    k: usize,
    assignments: &BTreeMap<i32, usize>,
    indices: &BTreeMap<i32, IndexVector>,
) -> Result<ProfileReport, IndexError> {
    if let Some(year) = indices.keys().find(|y| !assignments.contains_key(y)) {
        return Err(IndexError::UnassignedYear(*year));
    }
    let mut groups: Vec<Vec<IndexVector>> = vec![Vec::new(); k];
    for (&year, &cluster) in assignments {
        let v = indices.get(&year).ok_or(IndexError::MissingIndices(year))?;
        groups
            .get_mut(cluster)
            .ok_or(IndexError::ClusterOutOfRange { year, cluster, k })?
            .push(*v);
    }
    if let Some(c) = groups.iter().position(Vec::is_empty) {
        return Err(IndexError::EmptyCluster(c));
    }
    let means: Vec<IndexStats> = groups
        .iter()
        .map(|g| IndexStats::from_fn(g, mean))
        .collect();
    let column = |f: fn(&IndexStats) -> f64| means.iter().map(f).collect::<Vec<_>>();

    let mut warnings = Vec::new();
    let mut extreme = |name: &str, values: Vec<f64>, highest: bool| {
        let hit = unique_extreme(&values, highest);
        if hit.is_none() && k > 1 {
            warnings.push(format!(
                "{} mean {name} is shared by several clusters; no cluster holds it",
                if highest { "highest" } else { "lowest" }
            ));
        }
        hit
    };
    let lowest_total = extreme("total_amount", column(|s| s.total_amount), false);
    let highest_cdd = extreme("max_cdd", column(|s| s.max_cdd), true);
    let highest_std = extreme("std_rr", column(|s| s.std_rr), true);
    let highest_max = extreme("max_rr", column(|s| s.max_rr), true);

    let mut profiles = Vec::with_capacity(k);
    for (cluster, group) in groups.iter().enumerate() {
        let evidence = RuleEvidence {
            lowest_total_amount: lowest_total == Some(cluster),
            highest_max_cdd: highest_cdd == Some(cluster),
            highest_std_rr: highest_std == Some(cluster),
            highest_max_rr: highest_max == Some(cluster),
        };
        let drought = evidence.lowest_total_amount && evidence.highest_max_cdd;
        let extreme = evidence.highest_std_rr && evidence.highest_max_rr;
        let label = match (drought, extreme) {
            (true, true) => {
                warnings.push(format!(
                    "cluster {cluster} matches both drought and extreme-variability rules; labeled extreme_variability"
                ));
                ClusterLabel::ExtremeVariability
            }
            (false, true) => ClusterLabel::ExtremeVariability,
            (true, false) => ClusterLabel::Drought,
            (false, false) => ClusterLabel::Normal,
        };
        profiles.push(ClusterProfile {
            cluster,
            members: group.len(),
            mean: means[cluster],
            median: IndexStats::from_fn(group, median),
            label,
            evidence,
        });
    }
    Ok(ProfileReport { profiles, warnings })
}
