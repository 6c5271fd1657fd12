//! Banded dynamic time warping and its iterative multiscale refinement.
//!
//! [`dtw_exact`] solves the full dynamic program inside a proportional band.
//! [`ims_dtw`] builds a pyramid of averaged series, solves the coarsest pair
//! exactly, and then walks back down the pyramid re-solving each level inside
//! the corridor projected from the level above (intersected with the band).
//! The score of a pair is the path cost divided by the number of path steps.

mod corridor;
mod dp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corridor::{expand_corridor, Corridor, Span};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpError {
    #[error("cannot align an empty series")]
    EmptyInput,
    #[error("series {series} has invalid value {value} at index {index}")]
    InvalidValue {
        series: char,
        index: usize,
        value: f64,
    },
    #[error("invalid warp configuration: {0}")]
    InvalidConfig(String),
    #[error("band of {band} steps admits no path between lengths {n} and {m}")]
    InfeasibleBand { n: usize, m: usize, band: usize },
    #[error(
        "refinement corridor admits no path at pyramid level {level} ({n}x{m}); widen radius or band"
    )]
    CorridorInfeasible { level: usize, n: usize, m: usize },
}

/// Knobs of the multiscale warping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpConfig {
    /// Maximum warp at the finest scale, in days.
    pub band_days: usize,
    pub coarsen_factor: usize,
    /// Coarsening stops once both series are at most this long.
    pub min_coarse_len: usize,
    /// Corridor half-width added around the projected path at each refinement.
    pub radius: usize,
    /// 1 for absolute difference, 2 for squared difference.
    pub cost_exponent: u8,
    /// Divide the path cost by the number of steps.
    pub normalize: bool,
}

impl Default for WarpConfig {
    fn default() -> Self {
        WarpConfig {
            band_days: 14,
            coarsen_factor: 2,
            min_coarse_len: 16,
            radius: 2,
            cost_exponent: 1,
            normalize: true,
        }
    }
}

impl WarpConfig {
    /// Default configuration with a band wide enough to never bind.
    pub fn unbounded() -> Self {
        WarpConfig {
            band_days: usize::MAX,
            ..WarpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), WarpError> {
        if self.coarsen_factor < 2 {
            return Err(WarpError::InvalidConfig(format!(
                "coarsen_factor must be >= 2, got {}",
                self.coarsen_factor
            )));
        }
        if self.min_coarse_len < 2 {
            return Err(WarpError::InvalidConfig(format!(
                "min_coarse_len must be >= 2, got {}",
                self.min_coarse_len
            )));
        }
        if !matches!(self.cost_exponent, 1 | 2) {
            return Err(WarpError::InvalidConfig(format!(
                "cost_exponent must be 1 or 2, got {}",
                self.cost_exponent
            )));
        }
        Ok(())
    }

    /// Local cost between two samples.
    #[inline]
    pub fn local_cost(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.cost_exponent == 2 {
            d * d
        } else {
            d
        }
    }
}

/// A monotone warping path with its accumulated cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPath {
    /// Index pairs `(i, j)` from `(0,0)` to `(n-1, m-1)`.
    pub steps: Vec<(usize, usize)>,
    pub total_cost: f64,
    pub normalized_cost: f64,
}

impl AlignmentPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Largest `|i - j|` along the path.
    pub fn max_offset(&self) -> usize {
        self.steps
            .iter()
            .map(|&(i, j)| i.abs_diff(j))
            .max()
            .unwrap_or(0)
    }

    /// Path with the roles of the two series swapped.
    pub fn transposed(&self) -> AlignmentPath {
        AlignmentPath {
            steps: self.steps.iter().map(|&(i, j)| (j, i)).collect(),
            ..*self
        }
    }

    /// Checks the boundary and step-pattern invariants for inputs of lengths `n`, `m`.
    pub fn is_valid_for(&self, n: usize, m: usize) -> bool {
        if n == 0 || m == 0 {
            return false;
        }
        let (Some(&first), Some(&last)) = (self.steps.first(), self.steps.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (n - 1, m - 1)
            && self.steps.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }
}

/// Dissimilarity between two series: the normalized cost of their alignment.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DissimScore(pub f64);

impl DissimScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_series(series: char, values: &[f64]) -> Result<(), WarpError> {
    if values.is_empty() {
        return Err(WarpError::EmptyInput);
    }
    match values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        Some((index, &value)) => Err(WarpError::InvalidValue {
            series,
            index,
            value,
        }),
        None => Ok(()),
    }
}

/// Exact DTW inside the proportional band of `config.band_days`.
pub fn dtw_exact(a: &[f64], b: &[f64], config: &WarpConfig) -> Result<AlignmentPath, WarpError> {
    config.validate()?;
    check_series('a', a)?;
    check_series('b', b)?;
    let band = Corridor::band(a.len(), b.len(), config.band_days);
    dp::solve(
        a,
        b,
        &band,
        |x, y| config.local_cost(x, y),
        config.normalize,
    )
    .ok_or(WarpError::InfeasibleBand {
        n: a.len(),
        m: b.len(),
        band: config.band_days,
    })
}

/// Block means of `a` over runs of `factor` samples; a trailing partial block
/// is averaged over its own size.
pub fn coarsen(a: &[f64], factor: usize) -> Result<Vec<f64>, WarpError> {
    if factor < 2 {
        return Err(WarpError::InvalidConfig(format!(
            "coarsen factor must be >= 2, got {factor}"
        )));
    }
    if a.is_empty() {
        return Err(WarpError::EmptyInput);
    }
    Ok(a.chunks(factor)
        .map(|block| block.iter().sum::<f64>() / block.len() as f64)
        .collect())
}

/// Iterative multiscale DTW.
///
/// The result is independent of argument order: the pair is solved in a
/// canonical orientation and the path transposed back when needed, so
/// `ims_dtw(a, b)` and `ims_dtw(b, a)` have bit-identical scores.
pub fn ims_dtw(
    a: &[f64],
    b: &[f64],
    config: &WarpConfig,
) -> Result<(DissimScore, AlignmentPath), WarpError> {
    config.validate()?;
    check_series('a', a)?;
    check_series('b', b)?;
    let path = if canonical_order(a, b) {
        ims_oriented(a, b, config)?
    } else {
        ims_oriented(b, a, config)?.transposed()
    };
    Ok((DissimScore(path.normalized_cost), path))
}

fn canonical_order(a: &[f64], b: &[f64]) -> bool {
    a.len()
        .cmp(&b.len())
        .then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .is_le()
}

fn ims_oriented(a: &[f64], b: &[f64], config: &WarpConfig) -> Result<AlignmentPath, WarpError> {
    let factor = config.coarsen_factor;
    let mut pyramid: Vec<(Vec<f64>, Vec<f64>)> = vec![(a.to_vec(), b.to_vec())];
    loop {
        let (la, lb) = pyramid.last().expect("pyramid has a base level");
        if la.len().max(lb.len()) <= config.min_coarse_len {
            break;
        }
        let next = (coarsen(la, factor)?, coarsen(lb, factor)?);
        pyramid.push(next);
    }

    let local = |x: f64, y: f64| config.local_cost(x, y);
    let coarsest = pyramid.len() - 1;
    let (ca, cb) = &pyramid[coarsest];
    let band = level_band(config.band_days, factor, coarsest);
    let mut path = dp::solve(
        ca,
        cb,
        &Corridor::band(ca.len(), cb.len(), band),
        local,
        config.normalize,
    )
    .ok_or(if coarsest == 0 {
        WarpError::InfeasibleBand {
            n: a.len(),
            m: b.len(),
            band: config.band_days,
        }
    } else {
        WarpError::CorridorInfeasible {
            level: coarsest,
            n: ca.len(),
            m: cb.len(),
        }
    })?;

    for level in (0..coarsest).rev() {
        let (fa, fb) = &pyramid[level];
        let (n, m) = (fa.len(), fb.len());
        let corridor = corridor::project_steps(&path.steps, factor, config.radius, n, m).intersect(
            &Corridor::band(n, m, level_band(config.band_days, factor, level)),
        );
        path = dp::solve(fa, fb, &corridor, local, config.normalize)
            .ok_or(WarpError::CorridorInfeasible { level, n, m })?;
    }
    Ok(path)
}

/// Band width at pyramid `level`: the finest band divided by the level's
/// scale, rounded up.
fn level_band(band: usize, factor: usize, level: usize) -> usize {
    let scale = (factor as u128).saturating_pow(level as u32);
    (band as u128).div_ceil(scale).min(usize::MAX as u128) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unbounded_p1() -> WarpConfig {
        WarpConfig::unbounded()
    }

    /// Minimum total cost over every monotone path, by exhaustive recursion.
    fn brute_force(a: &[f64], b: &[f64], cfg: &WarpConfig) -> f64 {
        fn go(i: usize, j: usize, a: &[f64], b: &[f64], cfg: &WarpConfig) -> f64 {
            let here = cfg.local_cost(a[i], b[j]);
            if i == a.len() - 1 && j == b.len() - 1 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(i + 1, j, a, b, cfg));
            }
            if j + 1 < b.len() {
                best = best.min(go(i, j + 1, a, b, cfg));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(i + 1, j + 1, a, b, cfg));
            }
            here + best
        }
        go(0, 0, a, b, cfg)
    }

    #[test]
    fn identity_follows_diagonal() {
        let a = [0.0, 1.0, 2.0, 0.0];
        let p = dtw_exact(&a, &a, &unbounded_p1()).unwrap();
        assert_eq!(p.total_cost, 0.0);
        assert_eq!(p.steps, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn exact_warp_has_zero_cost() {
        let p = dtw_exact(&[0.0, 5.0], &[0.0, 0.0, 5.0], &unbounded_p1()).unwrap();
        assert_eq!(p.total_cost, 0.0);
        assert_eq!(p.steps, vec![(0, 0), (0, 1), (1, 2)]);
        assert_eq!(p.normalized_cost, 0.0);
    }

    #[test]
    fn small_case_matches_enumeration() {
        let (a, b) = ([1.0, 3.0, 2.0], [1.0, 2.0]);
        let cfg = unbounded_p1();
        let p = dtw_exact(&a, &b, &cfg).unwrap();
        // enumeration: (0,0),(1,1),(2,1) costs 0 + 1 + 0
        assert_eq!(brute_force(&a, &b, &cfg), 1.0);
        assert_eq!(p.total_cost, 1.0);
        assert_eq!(p.steps, vec![(0, 0), (1, 1), (2, 1)]);
        assert!((p.normalized_cost - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn squared_cost_and_no_normalization() {
        let cfg = WarpConfig {
            cost_exponent: 2,
            normalize: false,
            ..WarpConfig::unbounded()
        };
        let p = dtw_exact(&[0.0, 3.0], &[1.0, 3.0], &cfg).unwrap();
        assert_eq!(p.total_cost, 1.0);
        assert_eq!(p.normalized_cost, 1.0);
    }

    #[test]
    fn input_errors() {
        let cfg = WarpConfig::default();
        assert_eq!(dtw_exact(&[], &[1.0], &cfg), Err(WarpError::EmptyInput));
        assert!(matches!(
            dtw_exact(&[1.0, -1.0], &[1.0], &cfg),
            Err(WarpError::InvalidValue {
                series: 'a',
                index: 1,
                ..
            })
        ));
        assert!(matches!(
            ims_dtw(&[1.0], &[f64::NAN], &cfg),
            Err(WarpError::InvalidValue { series: 'b', .. })
        ));
        let bad = WarpConfig {
            coarsen_factor: 1,
            ..cfg
        };
        assert!(matches!(
            dtw_exact(&[1.0], &[1.0], &bad),
            Err(WarpError::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_band_unequal_lengths_is_infeasible() {
        let cfg = WarpConfig {
            band_days: 0,
            ..WarpConfig::default()
        };
        assert_eq!(
            dtw_exact(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0], &cfg),
            Err(WarpError::InfeasibleBand {
                n: 3,
                m: 4,
                band: 0
            })
        );
        assert!(dtw_exact(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &cfg).is_ok());
    }

    #[test]
    fn coarsen_examples() {
        assert_eq!(coarsen(&[1.0, 3.0, 2.0, 4.0], 2).unwrap(), vec![2.0, 3.0]);
        assert_eq!(coarsen(&[1.0, 3.0, 2.0], 2).unwrap(), vec![2.0, 2.0]);
        assert_eq!(coarsen(&[5.0], 2).unwrap(), vec![5.0]);
        assert_eq!(
            coarsen(&[1.0, 2.0, 3.0, 4.0, 5.0], 3).unwrap(),
            vec![2.0, 4.5]
        );
        assert!(coarsen(&[1.0], 1).is_err());
        assert!(coarsen(&[], 2).is_err());
    }

    #[test]
    fn ims_identity_scores_zero() {
        let a: Vec<f64> = (0..366).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
        let (score, path) = ims_dtw(&a, &a, &WarpConfig::default()).unwrap();
        assert_eq!(score.value(), 0.0);
        assert_eq!(path.len(), 366);
    }

    #[test]
    fn ims_path_is_transposed_when_arguments_swap() {
        let a: Vec<f64> = (0..100).map(|i| ((i * 7) % 5) as f64).collect();
        let b: Vec<f64> = (0..97).map(|i| ((i * 3) % 4) as f64).collect();
        let cfg = WarpConfig {
            band_days: 10,
            ..WarpConfig::default()
        };
        let (s1, p1) = ims_dtw(&a, &b, &cfg).unwrap();
        let (s2, p2) = ims_dtw(&b, &a, &cfg).unwrap();
        assert_eq!(s1.value().to_bits(), s2.value().to_bits());
        assert_eq!(p1.steps, p2.transposed().steps);
        assert!(p1.is_valid_for(100, 97));
    }

    #[test]
    fn short_series_skip_the_pyramid() {
        let a = [1.0, 0.0, 2.0];
        let b = [1.0, 2.0];
        let cfg = WarpConfig::unbounded();
        let (_, ims) = ims_dtw(&a, &b, &cfg).unwrap();
        assert_eq!(ims.total_cost, dtw_exact(&a, &b, &cfg).unwrap().total_cost);
    }

    #[test]
    fn level_band_rounds_up() {
        assert_eq!(level_band(14, 2, 0), 14);
        assert_eq!(level_band(14, 2, 1), 7);
        assert_eq!(level_band(14, 2, 2), 4);
        assert_eq!(level_band(14, 2, 4), 1);
        assert_eq!(level_band(usize::MAX, 2, 3), usize::MAX / 8 + 1);
    }

    #[test]
    fn config_json_uses_field_names() {
        let json = serde_json::to_value(WarpConfig::default()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "band_days": 14, "coarsen_factor": 2, "min_coarse_len": 16,
                "radius": 2, "cost_exponent": 1, "normalize": true
            })
        );
        assert!(serde_json::from_str::<WarpConfig>(r#"{"band":3}"#).is_err());
    }
}
