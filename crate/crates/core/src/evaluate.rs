//! Label-invariant state-sequence scores and posterior summaries of a fit.

use crate::error::{Error, Result};
use crate::model::PosteriorSamples;

/// Minimum-cost perfect assignment; `perm[row] = col`.
///
/// Among optimal assignments the lexicographically smallest is returned.
pub fn munkres(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if let Some(row) = cost.iter().find(|r| r.len() != n) {
        return Err(Error::NonSquare { rows: n, cols: row.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("assignment costs must be finite".into()));
    }
    let (best, _) = hungarian(cost);
    let tol = 1e-9 * (1.0 + best.abs());
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut fixed = 0.0;
    for i in 0..n {
        for j in 0..n {
            if used[j] {
                continue;
            }
            used[j] = true;
            let rest_rows: Vec<usize> = (i + 1..n).collect();
            let rest_cols: Vec<usize> = (0..n).filter(|&c| !used[c]).collect();
            let sub: Vec<Vec<f64>> =
                rest_rows.iter().map(|&r| rest_cols.iter().map(|&c| cost[r][c]).collect()).collect();
            let rest = if sub.is_empty() { 0.0 } else { hungarian(&sub).0 };
            if fixed + cost[i][j] + rest <= best + tol {
                perm[i] = j;
                fixed += cost[i][j];
                break;
            }
            used[j] = false;
        }
    }
    Ok(perm)
}

/// Shortest augmenting path with row and column potentials, O(n^3).
fn hungarian(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut done = vec![false; n + 1];
        loop {
            done[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if done[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if done[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (total, perm)
}

/// `overlap[e][t]`: times with estimated label `e` and true label `t`.
fn confusion(truth: &[usize], est: &[usize], n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (&t, &e) in truth.iter().zip(est) {
        m[e][t] += 1.0;
    }
    m
}

fn label_count(truth: &[usize], est: &[usize], n_states: usize) -> usize {
    let max = truth.iter().chain(est).copied().max().map_or(0, |m| m + 1);
    n_states.max(max)
}

/// Relabeling of `est` maximizing agreement with `reference`; `map[est_label] = reference_label`.
pub fn align_labels(reference: &[usize], est: &[usize], n_states: usize) -> Result<Vec<usize>> {
    if reference.len() != est.len() {
        return Err(Error::LengthMismatch { left: reference.len(), right: est.len() });
    }
    let n = label_count(reference, est, n_states);
    let cost: Vec<Vec<f64>> =
        confusion(reference, est, n).into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect();
    munkres(&cost)
}

/// Mismatch fraction after the best one-to-one relabeling of `est`.
pub fn hamming_distance(truth: &[usize], est: &[usize], n_states: usize) -> Result<f64> {
    let map = align_labels(truth, est, n_states)?;
    if truth.is_empty() {
        return Ok(0.0);
    }
    let misses = truth.iter().zip(est).filter(|(&t, &e)| map[e] != t).count();
    Ok(misses as f64 / truth.len() as f64)
}

fn require_snapshots(samples: &PosteriorSamples) -> Result<()> {
    if samples.snapshots.is_empty() {
        return Err(Error::InsufficientData("no posterior snapshots".into()));
    }
    Ok(())
}

/// Fraction of snapshots with `k_j > 1`, per lag.
pub fn lag_inclusion(samples: &PosteriorSamples) -> Result<Vec<f64>> {
    require_snapshots(samples)?;
    let q = samples.snapshots[0].factorization.order();
    let mut hits = vec![0usize; q];
    for s in &samples.snapshots {
        for (h, &kj) in hits.iter_mut().zip(&s.factorization.k) {
            *h += (kj > 1) as usize;
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / samples.snapshots.len() as f64).collect())
}

/// `hist[m]`: snapshots whose state sequence occupies exactly `m` distinct states.
pub fn state_count_distribution(samples: &PosteriorSamples) -> Result<Vec<usize>> {
    require_snapshots(samples)?;
    let n_states = samples.config.n_states;
    let mut hist = vec![0; n_states + 1];
    for s in &samples.snapshots {
        let mut seen = vec![false; n_states];
        for &c in &s.c {
            seen[c] = true;
        }
        hist[seen.iter().filter(|&&b| b).count()] += 1;
    }
    Ok(hist)
}

/// Per-time majority vote after aligning every snapshot to the first; ties go to the smaller label.
pub fn point_state_estimate(samples: &PosteriorSamples) -> Result<Vec<usize>> {
    require_snapshots(samples)?;
    let reference = &samples.snapshots[0].c;
    let n_states = samples.config.n_states;
    let len = reference.len();
    let mut votes = vec![vec![0usize; n_states]; len];
    for s in &samples.snapshots {
        let map = align_labels(reference, &s.c, n_states)?;
        for (t, &c) in s.c.iter().enumerate() {
            votes[t][map[c]] += 1;
        }
    }
    Ok(votes
        .iter()
        .map(|v| {
            let mut best = 0;
            for (c, &n) in v.iter().enumerate() {
                if n > v[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_cost_gives_identity() {
        let cost = vec![vec![0.0, 5.0, 5.0], vec![5.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]];
        assert_eq!(munkres(&cost).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn equal_costs_give_identity() {
        assert_eq!(munkres(&vec![vec![2.0; 4]; 4]).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(munkres(&[vec![1.0, 2.0]]), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn permuted_labels_have_zero_distance() {
        let truth = [0, 0, 1, 2, 1, 2];
        let est: Vec<usize> = truth.iter().map(|&c| [2, 0, 1][c]).collect();
        assert_eq!(hamming_distance(&truth, &est, 3).unwrap(), 0.0);
        assert_eq!(hamming_distance(&truth, &truth, 3).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(hamming_distance(&[0, 1], &[0], 2), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn hand_built_distance() {
        // best map sends est 1 -> 0, 0 -> 1, 2 -> 2: mismatches at t = 2, 5
        let truth = [0, 0, 1, 1, 2, 2];
        let est = [1, 1, 1, 0, 2, 0];
        assert!((hamming_distance(&truth, &est, 3).unwrap() - 2.0 / 6.0).abs() < 1e-15);
    }
}
