//! K-medoids over a precomputed dissimilarity matrix.
//!
//! Alternates two steps until the medoids stop moving:
//!
//! 1. assign every year to its nearest medoid (raw dissimilarity, ties to the
//!    lowest cluster index; a medoid always belongs to its own cluster);
//! 2. move each medoid to the member minimizing the sum of *squared*
//!    dissimilarities to the other members (ties to the lowest year index).
//!
//! The objective is the sum over years of the squared dissimilarity to the
//! assigned medoid, which neither step can increase.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::matrix::DissimMatrix;

pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of years ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("max_iter must be at least 1")]
    ZeroMaxIter,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("initial medoids must be {k} distinct indices below {n}")]
    InvalidInitial { k: usize, n: usize },
}

/// Record of a medoid moved to fill a cluster left without members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repair {
    pub iteration: usize,
    pub cluster: usize,
    pub new_medoid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Cluster index of each year, in matrix order.
    pub assignments: Vec<usize>,
    /// Year index of each cluster's medoid.
    pub medoids: Vec<usize>,
    /// `None` when the run was started from explicit medoids.
    pub seed: Option<u64>,
    pub iterations: usize,
    pub converged: bool,
    pub total_cost: f64,
    /// Objective after the initial assignment and after every round.
    pub cost_history: Vec<f64>,
    pub repairs: Vec<Repair>,
}

impl Clustering {
    /// Objective recomputed from the matrix.
    pub fn recompute_cost(&self, matrix: &DissimMatrix) -> f64 {
        objective(matrix, &self.medoids, &self.assignments)
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(y, _)| y)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    /// Assignments keyed by year label.
    pub fn assignment_map(&self, labels: &[i32]) -> BTreeMap<i32, usize> {
        labels
            .iter()
            .copied()
            .zip(self.assignments.iter().copied())
            .collect()
    }
}

/// Sum of squared distances to the assigned medoid. Terms are added in
/// ascending order so equal multisets of distances give bit-equal costs
/// whatever the year order or cluster numbering.
fn objective(matrix: &DissimMatrix, medoids: &[usize], assignments: &[usize]) -> f64 {
    let mut terms: Vec<f64> = assignments
        .iter()
        .enumerate()
        .map(|(y, &c)| {
            let d = matrix.get(y, medoids[c]);
            d * d
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn assign(matrix: &DissimMatrix, medoids: &[usize]) -> Vec<usize> {
    (0..matrix.len())
        .map(|y| {
            if let Some(c) = medoids.iter().position(|&m| m == y) {
                return c;
            }
            let mut best = 0;
            for c in 1..medoids.len() {
                if matrix.get(y, medoids[c]) < matrix.get(y, medoids[best]) {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn update(matrix: &DissimMatrix, k: usize, assignments: &[usize], medoids: &[usize]) -> Vec<usize> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (y, &c) in assignments.iter().enumerate() {
        members[c].push(y);
    }
    members
        .iter()
        .enumerate()
        .map(|(c, group)| {
            let mut best = medoids[c];
            let mut best_sum = f64::INFINITY;
            for &j in group {
                let sum: f64 = group
                    .iter()
                    .map(|&i| {
                        let d = matrix.get(i, j);
                        d * d
                    })
                    .sum();
                if sum < best_sum {
                    best_sum = sum;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Gives every empty cluster a medoid: the non-medoid year farthest from its
/// current medoid (ties to the lowest year index), then reassigns.
fn repair_empty(
    matrix: &DissimMatrix,
    medoids: &mut [usize],
    assignments: &mut Vec<usize>,
    iteration: usize,
) -> Vec<Repair> {
    let mut repairs = Vec::new();
    loop {
        let mut sizes = vec![0usize; medoids.len()];
        for &c in assignments.iter() {
            sizes[c] += 1;
        }
        let Some(cluster) = sizes.iter().position(|&s| s == 0) else {
            return repairs;
        };
        let candidate = (0..matrix.len()).filter(|y| !medoids.contains(y)).fold(
            None::<(usize, f64)>,
            |best, y| {
                let d = matrix.get(y, medoids[assignments[y]]);
                match best {
                    Some((_, bd)) if d <= bd => best,
                    _ => Some((y, d)),
                }
            },
        );
        let Some((year, _)) = candidate else {
            return repairs;
        };
        medoids[cluster] = year;
        *assignments = assign(matrix, medoids);
        repairs.push(Repair {
            iteration,
            cluster,
            new_medoid: year,
        });
    }
}

fn check_k(matrix: &DissimMatrix, k: usize, max_iter: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > matrix.len() {
        return Err(ClusterError::KTooLarge { k, n: matrix.len() });
    }
    if max_iter == 0 {
        return Err(ClusterError::ZeroMaxIter);
    }
    Ok(())
}

/// Seeded K-medoids: `k` distinct initial medoids are drawn uniformly.
pub fn kmedoids(
    matrix: &DissimMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Clustering, ClusterError> {
    check_k(matrix, k, max_iter)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut initial = rand::seq::index::sample(&mut rng, matrix.len(), k).into_vec();
    initial.sort_unstable();
    let mut c = run(matrix, initial, max_iter);
    c.seed = Some(seed);
    Ok(c)
}

/// K-medoids from explicit initial medoids (cluster `c` starts at `initial[c]`).
pub fn kmedoids_from(
    matrix: &DissimMatrix,
    initial: &[usize],
    max_iter: usize,
) -> Result<Clustering, ClusterError> {
    let k = initial.len();
    check_k(matrix, k, max_iter)?;
    let n = matrix.len();
    let distinct = initial
        .iter()
        .enumerate()
        .all(|(i, &m)| m < n && !initial[..i].contains(&m));
    if !distinct {
        return Err(ClusterError::InvalidInitial { k, n });
    }
    Ok(run(matrix, initial.to_vec(), max_iter))
}

fn run(matrix: &DissimMatrix, mut medoids: Vec<usize>, max_iter: usize) -> Clustering {
    let k = medoids.len();
    let mut assignments = assign(matrix, &medoids);
    let mut repairs = repair_empty(matrix, &mut medoids, &mut assignments, 0);
    let mut cost_history = vec![objective(matrix, &medoids, &assignments)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next = update(matrix, k, &assignments, &medoids);
        if next == medoids {
            converged = true;
            break;
        }
        medoids = next;
        assignments = assign(matrix, &medoids);
        repairs.extend(repair_empty(
            matrix,
            &mut medoids,
            &mut assignments,
            iterations,
        ));
        cost_history.push(objective(matrix, &medoids, &assignments));
    }
    if !converged {
        log::warn!("k-medoids stopped after max_iter = {max_iter} rounds without converging");
    }
    Clustering {
        k,
        total_cost: objective(matrix, &medoids, &assignments),
        assignments,
        medoids,
        seed: None,
        iterations,
        converged,
        cost_history,
        repairs,
    }
}

/// Cost summary of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRun {
    pub seed: u64,
    pub total_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Restarts {
    pub best: Clustering,
    pub runs: Vec<RestartRun>,
}

/// Runs [`kmedoids`] for every seed and keeps the lowest-cost result
/// (ties to the earliest seed).
pub fn best_of_restarts(
    matrix: &DissimMatrix,
    k: usize,
    seeds: &[u64],
    max_iter: usize,
    exec: Execution,
) -> Result<Restarts, ClusterError> {
    if seeds.is_empty() {
        return Err(ClusterError::NoSeeds);
    }
    check_k(matrix, k, max_iter)?;
    let results = exec.map(seeds, |&s| kmedoids(matrix, k, s, max_iter));
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let runs = results
        .iter()
        .map(|c| RestartRun {
            seed: c.seed.expect("seeded run"),
            total_cost: c.total_cost,
            iterations: c.iterations,
            converged: c.converged,
        })
        .collect();
    let best = pick_best(results);
    Ok(Restarts { best, runs })
}

fn pick_best(results: Vec<Clustering>) -> Clustering {
    results
        .into_iter()
        .reduce(|best, c| {
            if c.total_cost < best.total_cost {
                c
            } else {
                best
            }
        })
        .expect("at least one run")
}

/// Serialized form of a clustering, keyed by year labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRecord {
    pub k: usize,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub converged: bool,
    pub total_cost: f64,
    /// Medoid year label of each cluster.
    pub medoids: Vec<i32>,
    pub assignments: BTreeMap<i32, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub restarts: Vec<RestartRun>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repairs: Vec<Repair>,
}

impl ClusteringRecord {
    pub fn new(clustering: &Clustering, labels: &[i32], restarts: Vec<RestartRun>) -> Self {
        ClusteringRecord {
            k: clustering.k,
            seed: clustering.seed,
            iterations: clustering.iterations,
            converged: clustering.converged,
            total_cost: clustering.total_cost,
            medoids: clustering.medoids.iter().map(|&m| labels[m]).collect(),
            assignments: clustering.assignment_map(labels),
            restarts,
            repairs: clustering.repairs.clone(),
        }
    }

    /// Checks cluster indices and medoid membership.
    pub fn validate(&self) -> Result<(), String> {
        if self.medoids.len() != self.k {
            return Err(format!("{} medoids for k = {}", self.medoids.len(), self.k));
        }
        if let Some((y, c)) = self.assignments.iter().find(|(_, &c)| c >= self.k) {
            return Err(format!("year {y} assigned to cluster {c} >= k"));
        }
        for (c, m) in self.medoids.iter().enumerate() {
            if self.assignments.get(m) != Some(&c) {
                return Err(format!("medoid {m} is not assigned to its cluster {c}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> DissimMatrix {
        let labels = (0..rows.len() as i32).collect();
        DissimMatrix::from_rows(labels, rows, 0.0).unwrap()
    }

    fn blocks() -> DissimMatrix {
        let rows = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| match (i == j, i / 3 == j / 3) {
                        (true, _) => 0.0,
                        (false, true) => 0.1,
                        (false, false) => 10.0,
                    })
                    .collect()
            })
            .collect();
        matrix(rows)
    }

    #[test]
    fn k_equals_n_is_trivial() {
        let d = matrix(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 3.0],
            vec![2.0, 3.0, 0.0],
        ]);
        let c = kmedoids(&d, 3, 7, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(c.total_cost, 0.0);
        assert_eq!(c.iterations, 1);
        assert!(c.converged);
        let mut m = c.medoids.clone();
        m.sort();
        assert_eq!(m, vec![0, 1, 2]);
        for (c_idx, &med) in c.medoids.iter().enumerate() {
            assert_eq!(c.assignments[med], c_idx);
        }
    }

    #[test]
    fn single_cluster_picks_squared_sum_minimizer() {
        // sums of squares: 17, 2, 17
        let d = matrix(vec![
            vec![0.0, 1.0, 4.0],
            vec![1.0, 0.0, 1.0],
            vec![4.0, 1.0, 0.0],
        ]);
        for seed in 0..5 {
            let c = kmedoids(&d, 1, seed, DEFAULT_MAX_ITER).unwrap();
            assert_eq!(c.medoids, vec![1]);
            assert_eq!(c.total_cost, 2.0);
        }
    }

    #[test]
    fn planted_blocks_are_recovered() {
        let d = blocks();
        for seed in 0..20 {
            let c = kmedoids(&d, 2, seed, DEFAULT_MAX_ITER).unwrap();
            let a = &c.assignments;
            assert!(a[0] == a[1] && a[1] == a[2], "seed {seed}: {a:?}");
            assert!(a[3] == a[4] && a[4] == a[5], "seed {seed}: {a:?}");
            assert_ne!(a[0], a[3]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let d = blocks();
        assert_eq!(
            kmedoids(&d, 2, 42, 10).unwrap(),
            kmedoids(&d, 2, 42, 10).unwrap()
        );
    }

    #[test]
    fn argument_errors() {
        let d = blocks();
        assert_eq!(
            kmedoids(&d, 7, 0, 10),
            Err(ClusterError::KTooLarge { k: 7, n: 6 })
        );
        assert_eq!(kmedoids(&d, 0, 0, 10), Err(ClusterError::ZeroK));
        assert_eq!(kmedoids(&d, 2, 0, 0), Err(ClusterError::ZeroMaxIter));
        assert!(matches!(
            best_of_restarts(&d, 2, &[], 10, Execution::Sequential),
            Err(ClusterError::NoSeeds)
        ));
        assert!(matches!(
            kmedoids_from(&d, &[1, 1], 10),
            Err(ClusterError::InvalidInitial { .. })
        ));
    }

    #[test]
    fn max_iter_stop_is_flagged() {
        // points on a line; the first update already moves the medoid to the centre
        let n = 8;
        let rows = (0..n)
            .map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect();
        let d = matrix(rows);
        let c = kmedoids_from(&d, &[0], 1).unwrap();
        assert!(!c.converged);
        assert_eq!(c.iterations, 1);
        assert_eq!(c.total_cost, c.recompute_cost(&d));
        let full = kmedoids_from(&d, &[0], 100).unwrap();
        assert!(full.converged);
        assert_eq!(full.medoids, vec![3]);
    }

    #[test]
    fn restart_selection_rules() {
        let d = blocks();
        let single = best_of_restarts(&d, 2, &[5], 10, Execution::Sequential).unwrap();
        assert_eq!(single.best, kmedoids(&d, 2, 5, 10).unwrap());

        let a = Clustering {
            k: 1,
            assignments: vec![0],
            medoids: vec![0],
            seed: Some(1),
            iterations: 1,
            converged: true,
            total_cost: 5.0,
            cost_history: vec![5.0],
            repairs: vec![],
        };
        let b = Clustering {
            seed: Some(2),
            total_cost: 3.0,
            ..a.clone()
        };
        let c = Clustering {
            seed: Some(3),
            total_cost: 3.0,
            ..a.clone()
        };
        assert_eq!(pick_best(vec![a.clone(), b.clone()]).seed, Some(2));
        assert_eq!(pick_best(vec![a, b, c]).seed, Some(2));
    }

    #[test]
    fn empty_cluster_is_reseated_at_farthest_year() {
        let d = matrix(vec![
            vec![0.0, 1.0, 5.0, 2.0],
            vec![1.0, 0.0, 4.0, 3.0],
            vec![5.0, 4.0, 0.0, 6.0],
            vec![2.0, 3.0, 6.0, 0.0],
        ]);
        // cluster 1 has lost every member, including its medoid
        let mut medoids = vec![0, 1];
        let mut assignments = vec![0, 0, 0, 0];
        let repairs = repair_empty(&d, &mut medoids, &mut assignments, 4);
        assert_eq!(
            repairs,
            vec![Repair {
                iteration: 4,
                cluster: 1,
                new_medoid: 2
            }]
        );
        assert_eq!(medoids, vec![0, 2]);
        assert_eq!(assignments, vec![0, 0, 1, 0]);
    }

    #[test]
    fn record_round_trip() {
        let d = blocks();
        let c = kmedoids(&d, 2, 3, 10).unwrap();
        let rec = ClusteringRecord::new(&c, d.labels(), vec![]);
        rec.validate().unwrap();
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"assignments\":{\"0\":"));
        let back: ClusteringRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }
}
