//! Pairwise dissimilarity matrix over hydrological years.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::ingest::HydroYear;
use crate::warp::{ims_dtw, WarpConfig, WarpError};

/// Entries further than this from their mirror are treated as corruption on load.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("no years to compare")]
    Empty,
    #[error("year labels must be strictly increasing ({previous} then {next})")]
    UnorderedLabels { previous: i32, next: i32 },
    #[error("years {first} and {second}: {source}")]
    Pair {
        first: i32,
        second: i32,
        #[source]
        source: WarpError,
    },
    #[error("requested top {top} of only {n} years")]
    TopTooLarge { top: usize, n: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("entry ({row},{col}) = {value} is not a finite non-negative number")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("diagonal entry {index} is {value}, expected 0")]
    NonZeroDiagonal { index: usize, value: f64 },
    #[error("entries ({row},{col}) and ({col},{row}) differ by {difference:e}")]
    Asymmetric {
        row: usize,
        col: usize,
        difference: f64,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Symmetric `N x N` matrix of non-negative scores with zero diagonal,
/// labelled by hydrological start year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct DissimMatrix {
    labels: Vec<i32>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    labels: Vec<i32>,
    values: Vec<Vec<f64>>,
}

impl From<DissimMatrix> for MatrixRepr {
    fn from(m: DissimMatrix) -> Self {
        MatrixRepr {
            values: m.rows().map(<[f64]>::to_vec).collect(),
            labels: m.labels,
        }
    }
}

impl TryFrom<MatrixRepr> for DissimMatrix {
    type Error = MatrixError;

    fn try_from(r: MatrixRepr) -> Result<Self, MatrixError> {
        DissimMatrix::from_rows(r.labels, r.values, SYMMETRY_TOLERANCE)
    }
}

fn check_labels(labels: &[i32]) -> Result<(), MatrixError> {
    if labels.is_empty() {
        return Err(MatrixError::Empty);
    }
    match labels.windows(2).find(|w| w[0] >= w[1]) {
        Some(w) => Err(MatrixError::UnorderedLabels {
            previous: w[0],
            next: w[1],
        }),
        None => Ok(()),
    }
}

impl DissimMatrix {
    /// Validates and assembles a matrix from nested rows. Pairs that differ by
    /// at most `tolerance` are accepted; the upper triangle is mirrored into
    /// the lower so the result is exactly symmetric.
    pub fn from_rows(
        labels: Vec<i32>,
        rows: Vec<Vec<f64>>,
        tolerance: f64,
    ) -> Result<Self, MatrixError> {
        check_labels(&labels)?;
        let n = labels.len();
        if rows.len() != n {
            return Err(MatrixError::Shape(format!(
                "{} labels but {} rows",
                n,
                rows.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(MatrixError::Shape(format!(
                "row {} has {} entries, expected {}",
                i,
                r.len(),
                n
            )));
        }
        for (row, r) in rows.iter().enumerate() {
            for (col, &value) in r.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(MatrixError::InvalidEntry { row, col, value });
                }
            }
            if r[row] != 0.0 {
                return Err(MatrixError::NonZeroDiagonal {
                    index: row,
                    value: r[row],
                });
            }
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let difference = (rows[i][j] - rows[j][i]).abs();
                if difference > tolerance {
                    return Err(MatrixError::Asymmetric {
                        row: i,
                        col: j,
                        difference,
                    });
                }
                values[i * n + j] = rows[i][j];
                values[j * n + i] = rows[i][j];
            }
        }
        Ok(DissimMatrix { labels, values })
    }

    /// Builds a matrix from the strict upper triangle in row-major order
    /// (`(0,1), (0,2), ..., (1,2), ...`).
    pub fn from_upper_triangle(labels: Vec<i32>, upper: &[f64]) -> Result<Self, MatrixError> {
        check_labels(&labels)?;
        let n = labels.len();
        if upper.len() != n * (n - 1) / 2 {
            return Err(MatrixError::Shape(format!(
                "{} upper-triangle entries for {} labels",
                upper.len(),
                n
            )));
        }
        let mut values = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("length checked above");
                if !v.is_finite() || v < 0.0 {
                    return Err(MatrixError::InvalidEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(DissimMatrix { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.len().max(1))
    }

    pub fn index_of(&self, label: i32) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Writes the CSV form: optional `#` comment lines, then
    /// `year,<label1>,...` and one row per year.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        write!(out, "year")?;
        for l in &self.labels {
            write!(out, ",{l}")?;
        }
        writeln!(out)?;
        for (label, row) in self.labels.iter().zip(self.rows()) {
            write!(out, "{label}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parses the CSV form, skipping `#` comment lines.
    pub fn read_csv<R: Read>(input: R, path: &Path) -> Result<Self, MatrixError> {
        let parse_err = |message: String| MatrixError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = BufReader::new(input)
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| {
                l.as_ref()
                    .map(|s| !s.trim_start().starts_with('#') && !s.trim().is_empty())
                    .unwrap_or(true)
            });
        let io = |source| MatrixError::Io {
            path: path.to_path_buf(),
            source,
        };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err("missing header".into()))?;
        let header = header.map_err(io)?;
        let mut fields = header.split(',').map(str::trim);
        if fields.next() != Some("year") {
            return Err(parse_err("header must start with 'year'".into()));
        }
        let labels = fields
            .map(|f| {
                f.parse::<i32>()
                    .map_err(|_| parse_err(format!("bad year label '{f}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::with_capacity(labels.len());
        for (line_no, line) in lines {
            let line = line.map_err(io)?;
            let mut fields = line.split(',').map(str::trim);
            let label = fields.next().unwrap_or_default();
            if let Some(expected) = labels.get(rows.len()) {
                if label.parse::<i32>().ok() != Some(*expected) {
                    return Err(parse_err(format!(
                        "line {line_no}: row label '{label}' does not match column label {expected}"
                    )));
                }
            }
            let row = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| parse_err(format!("line {line_no}: bad value '{f}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(labels, rows, SYMMETRY_TOLERANCE)
    }

    /// Saves as JSON when the extension is `.json`, CSV otherwise.
    pub fn save(&self, path: &Path, comments: &[String]) -> Result<(), MatrixError> {
        let io = |source| MatrixError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut buf = Vec::new();
        if is_json(path) {
            let mut doc = serde_json::to_value(self).expect("matrix serializes");
            if !comments.is_empty() {
                doc["comments"] = serde_json::json!(comments);
            }
            serde_json::to_writer(&mut buf, &doc).expect("json value serializes");
            buf.push(b'\n');
        } else {
            self.write_csv(&mut buf, comments).map_err(io)?;
        }
        fs::write(path, buf).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, MatrixError> {
        let file = fs::File::open(path).map_err(|source| MatrixError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if is_json(path) {
            // unknown top-level keys such as "comments" are ignored
            let repr: MatrixRepr =
                serde_json::from_reader(BufReader::new(file)).map_err(|e| MatrixError::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
            Self::try_from(repr)
        } else {
            Self::read_csv(file, path)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Strict upper-triangle index pairs in row-major order.
pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Computes the multiscale DTW score of every unordered pair of years.
pub fn build_matrix(
    years: &[HydroYear],
    config: &WarpConfig,
    exec: Execution,
) -> Result<DissimMatrix, MatrixError> {
    build_matrix_with_progress(years, config, exec, &|_, _| {})
}

/// [`build_matrix`] calling `progress(done, total)` after each pair evaluation.
pub fn build_matrix_with_progress(
    years: &[HydroYear],
    config: &WarpConfig,
    exec: Execution,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<DissimMatrix, MatrixError> {
    let labels: Vec<i32> = years.iter().map(|y| y.start_year).collect();
    check_labels(&labels)?;
    config.validate().map_err(|source| MatrixError::Pair {
        first: labels[0],
        second: labels[0],
        source,
    })?;
    let pairs = upper_pairs(years.len());
    let total = pairs.len();
    let done = AtomicUsize::new(0);
    let scores = exec.map(&pairs, |&(i, j)| {
        let r = ims_dtw(&years[i].values, &years[j].values, config).map(|(s, _)| s.value());
        progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
        r
    });
    let mut upper = Vec::with_capacity(total);
    for (&(i, j), score) in pairs.iter().zip(scores) {
        upper.push(score.map_err(|source| MatrixError::Pair {
            first: labels[i],
            second: labels[j],
            source,
        })?);
    }
    DissimMatrix::from_upper_triangle(labels, &upper)
}

/// A year standing out by its mean dissimilarity to all others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    /// 1-based chronological position of the year.
    pub index: usize,
    pub year: i32,
    pub mean_dissimilarity: f64,
}

/// The `top` years with the largest off-diagonal row mean; ties go to the earlier year.
pub fn rank_outliers(matrix: &DissimMatrix, top: usize) -> Result<Vec<Outlier>, MatrixError> {
    let n = matrix.len();
    if top > n {
        return Err(MatrixError::TopTooLarge { top, n });
    }
    let mut ranked: Vec<Outlier> = (0..n)
        .map(|i| Outlier {
            index: i + 1,
            year: matrix.labels()[i],
            mean_dissimilarity: if n > 1 {
                matrix.row(i).iter().sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            },
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.mean_dissimilarity
            .total_cmp(&a.mean_dissimilarity)
            .then(a.year.cmp(&b.year))
    });
    ranked.truncate(top);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn year(start_year: i32, values: Vec<f64>) -> HydroYear {
        HydroYear {
            start_year,
            values,
            missing_count: 0,
        }
    }

    fn m(rows: Vec<Vec<f64>>) -> DissimMatrix {
        let labels = (0..rows.len() as i32).map(|i| 2000 + i).collect();
        DissimMatrix::from_rows(labels, rows, 0.0).unwrap()
    }

    #[test]
    fn single_year_gives_zero() {
        let d = build_matrix(
            &[year(1900, vec![1.0; 365])],
            &WarpConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn identical_years_give_zero_matrix() {
        let v: Vec<f64> = (0..365).map(|i| (i % 7) as f64).collect();
        let d = build_matrix(
            &[year(1900, v.clone()), year(1901, v)],
            &WarpConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(d.rows().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn pair_errors_name_both_years() {
        let cfg = WarpConfig {
            band_days: 0,
            ..WarpConfig::default()
        };
        let err = build_matrix(
            &[year(1900, vec![1.0; 3]), year(1901, vec![1.0; 4])],
            &cfg,
            Execution::Sequential,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            MatrixError::Pair {
                first: 1900,
                second: 1901,
                ..
            }
        ));
    }

    #[test]
    fn unordered_years_rejected() {
        let err = build_matrix(
            &[year(1901, vec![1.0]), year(1900, vec![1.0])],
            &WarpConfig::default(),
            Execution::Sequential,
        )
        .unwrap_err();
        assert!(matches!(err, MatrixError::UnorderedLabels { .. }));
    }

    #[test]
    fn pair_count_is_n_choose_2() {
        assert_eq!(upper_pairs(146).len(), 10_585);
        assert_eq!(upper_pairs(1).len(), 0);
    }

    #[test]
    fn outlier_ranking() {
        let r = rank_outliers(&m(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), 1).unwrap();
        assert_eq!(
            (r[0].year, r[0].mean_dissimilarity, r[0].index),
            (2000, 1.0, 1)
        );

        let d = m(vec![
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 4.0],
            vec![1.0, 4.0, 0.0],
        ]);
        let r = rank_outliers(&d, 1).unwrap();
        assert_eq!((r[0].year, r[0].mean_dissimilarity), (2001, 2.5));

        let z = m(vec![vec![0.0; 3]; 3]);
        let r = rank_outliers(&z, 2).unwrap();
        assert_eq!(
            r.iter().map(|o| o.year).collect::<Vec<_>>(),
            vec![2000, 2001]
        );
        assert!(matches!(
            rank_outliers(&z, 4),
            Err(MatrixError::TopTooLarge { .. })
        ));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let d = m(vec![
            vec![0.0, 0.1, 1.0 / 3.0],
            vec![0.1, 0.0, 2e-12],
            vec![1.0 / 3.0, 2e-12, 0.0],
        ]);
        let dir = tempfile::tempdir().unwrap();
        for name in ["d.csv", "d.json"] {
            let p = dir.path().join(name);
            d.save(&p, &["provenance: {}".to_string()]).unwrap();
            assert_eq!(DissimMatrix::load(&p).unwrap(), d, "{name}");
        }
    }

    #[test]
    fn asymmetric_file_rejected() {
        let text = "year,1,2\n1,0,0.5\n2,0.6,0\n";
        let err = DissimMatrix::read_csv(text.as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, MatrixError::Asymmetric { .. }));
        // within tolerance is accepted
        let text = "year,1,2\n1,0,0.5\n2,0.5000000000001,0\n";
        assert!(DissimMatrix::read_csv(text.as_bytes(), Path::new("x.csv")).is_ok());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut text = String::from("year");
        for y in 0..145 {
            text.push_str(&format!(",{}", 1873 + y));
        }
        text.push('\n');
        for r in 0..146 {
            text.push_str(&format!("{}", 1873 + r));
            for _ in 0..145 {
                text.push_str(",0");
            }
            text.push('\n');
        }
        let err = DissimMatrix::read_csv(text.as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(
            matches!(err, MatrixError::Shape(_) | MatrixError::Parse { .. }),
            "{err}"
        );
    }

    #[test]
    fn nonzero_diagonal_rejected() {
        let text = "year,1,2\n1,0.2,0.5\n2,0.5,0\n";
        assert!(matches!(
            DissimMatrix::read_csv(text.as_bytes(), Path::new("x.csv")),
            Err(MatrixError::NonZeroDiagonal { .. })
        ));
    }
}
