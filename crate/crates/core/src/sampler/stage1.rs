//! Lag selection under hard allocations: split/merge moves on each lag's
//! clustering and an annealed joint proposal for states and allocations.

use rand::Rng;

use crate::model::ChainState;
use crate::random::{categorical_log, log_sum_exp, open_unit};
use crate::transition::log_lag_prior;

use super::clustering::{canonical, hard_marginal_loglik, ln_stirling2, HardClustering};

/// `T(m) = max(T0^(1 - m / m0), 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub m0: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule { t0: 1000.0, m0: 1000.0 }
    }
}

impl AnnealSchedule {
    pub fn temperature(&self, m: usize) -> f64 {
        self.t0.powf(1.0 - m as f64 / self.m0).max(1.0)
    }
}

/// Probability of proposing a split at `k` clusters out of `n_states`.
fn p_split(k: usize, n_states: usize) -> f64 {
    if k == 1 {
        1.0
    } else if k == n_states {
        0.0
    } else {
        0.5
    }
}

/// Log prior of one lag's clustering: lag penalty, uniform over partitions with `k` blocks.
pub fn clustering_log_prior(lag: usize, k: usize, n_states: usize, varphi: f64) -> f64 {
    log_lag_prior(lag, n_states, varphi)[k - 1] - ln_stirling2(n_states, k)
}

fn n_bipartitions(m: usize) -> f64 {
    2f64.powi(m as i32 - 1) - 1.0
}

/// One split/merge proposal for lag `j` (0-based) with its log proposal correction.
fn propose<R: Rng + ?Sized>(labels: &[usize], rng: &mut R) -> (Vec<usize>, f64) {
    let n = labels.len();
    let k = labels.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let up = p_split(k, n);
    if rng.random::<f64>() < up {
        let splittable: Vec<usize> = (0..k).filter(|&h| sizes[h] >= 2).collect();
        let h = splittable[rng.random_range(0..splittable.len())];
        let members: Vec<usize> = (0..n).filter(|&w| labels[w] == h).collect();
        let flips = loop {
            let f: Vec<bool> = members.iter().map(|_| rng.random::<bool>()).collect();
            if f.iter().any(|&b| b) && f.iter().any(|&b| !b) {
                break f;
            }
        };
        let mut new = labels.to_vec();
        for (&w, &f) in members.iter().zip(&flips) {
            if f {
                new[w] = k;
            }
        }
        let new = canonical(&new);
        let fwd = up.ln() - (splittable.len() as f64).ln() - n_bipartitions(members.len()).ln();
        let pairs = ((k + 1) * k / 2) as f64;
        let rev = (1.0 - p_split(k + 1, n)).ln() - pairs.ln();
        (new, rev - fwd)
    } else {
        let a = rng.random_range(0..k);
        let b = loop {
            let b = rng.random_range(0..k);
            if b != a {
                break b;
            }
        };
        let merged = sizes[a] + sizes[b];
        let new: Vec<usize> = labels.iter().map(|&l| if l == b { a } else { l }).collect();
        let new = canonical(&new);
        let pairs = (k * (k - 1) / 2) as f64;
        let fwd = (1.0 - up).ln() - pairs.ln();
        let mut new_sizes = vec![0usize; k - 1];
        for &l in &new {
            new_sizes[l] += 1;
        }
        let splittable = new_sizes.iter().filter(|&&s| s >= 2).count() as f64;
        let rev = p_split(k - 1, n).ln() - splittable.ln() - n_bipartitions(merged).ln();
        (new, rev - fwd)
    }
}

/// Metropolis-Hastings split/merge on lag `j` (0-based). Returns whether it moved.
pub fn stage1_update_lag<R: Rng + ?Sized>(
    state: &ChainState,
    clusters: &mut HardClustering,
    j: usize,
    current_marginal: &mut f64,
    rng: &mut R,
) -> bool {
    let n_states = clusters.n_states();
    let q = clusters.order();
    let (proposal, log_q) = propose(&clusters.labels[j], rng);
    let k_old = clusters.n_clusters(j);
    let k_new = proposal.iter().max().unwrap() + 1;
    let other: usize = (0..q).filter(|&i| i != j).map(|i| clusters.n_clusters(i)).sum();
    if other + k_new <= q {
        return false;
    }
    let old_labels = std::mem::replace(&mut clusters.labels[j], proposal);
    let lambda0 = &state.factorization.lambda0;
    let marginal = hard_marginal_loglik(clusters, &state.c, state.alpha, lambda0);
    let log_ratio = marginal - *current_marginal + clustering_log_prior(j + 1, k_new, n_states, state.varphi)
        - clustering_log_prior(j + 1, k_old, n_states, state.varphi)
        + log_q;
    if open_unit(rng).ln() < log_ratio {
        *current_marginal = marginal;
        true
    } else {
        clusters.labels[j] = old_labels;
        false
    }
}

/// One split/merge attempt per lag, in lag order. Returns the number of accepted moves.
pub fn stage1_update_k<R: Rng + ?Sized>(state: &ChainState, clusters: &mut HardClustering, rng: &mut R) -> usize {
    let mut marginal = hard_marginal_loglik(clusters, &state.c, state.alpha, &state.factorization.lambda0);
    (0..clusters.order()).filter(|&j| stage1_update_lag(state, clusters, j, &mut marginal, rng)).count()
}

/// Bring `k`, the 0/1 mode weights and `z` in line with `clusters`.
///
/// Kernels are reset to `λ0` when the tuple layout changes; callers redraw them.
pub fn sync_hard_allocation(state: &mut ChainState, clusters: &HardClustering) {
    let k = clusters.k();
    let f = &mut state.factorization;
    if f.k != k {
        let n_tuples: usize = k.iter().product();
        f.lambda = f.lambda0.repeat(n_tuples);
        f.k = k;
    }
    f.pi = clusters.mode_weights();
    state.z = clusters.allocations(&state.c);
}

/// Outcome of one annealed state/allocation proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzMove {
    pub log_ratio: f64,
    pub accepted: bool,
}

/// Propose every `c_t` from `λ_{z_t}(c) f(y_t | c)` with the current `z`, rebuild `z`
/// from the clustering, and accept with the Metropolis-Hastings ratio raised to `1 / temp`.
///
/// `logf` is the `T x C` emission table.
pub fn stage1_update_cz<R: Rng + ?Sized>(
    state: &mut ChainState,
    clusters: &HardClustering,
    logf: &[f64],
    temp: f64,
    rng: &mut R,
) -> CzMove {
    let f = &state.factorization;
    let n_st = f.n_states();
    let q = f.order();
    let len = state.c.len();
    let lam = |tuple: usize, c: usize| f.lambda[tuple * n_st + c].ln();
    let old_tuples = clusters.tuples(&state.c);
    let mut proposal = vec![0usize; len];
    let mut log_norm_old = 0.0;
    let mut lw = vec![0.0; n_st];
    for t in 0..len {
        let row = &logf[t * n_st..(t + 1) * n_st];
        if t >= q {
            let h = old_tuples[t - q];
            for c in 0..n_st {
                lw[c] = row[c] + lam(h, c);
            }
            log_norm_old += log_sum_exp(&lw);
        } else {
            lw.copy_from_slice(row);
        }
        proposal[t] = categorical_log(&lw, rng);
    }
    let new_tuples = clusters.tuples(&proposal);
    let mut log_ratio = log_norm_old;
    for t in q..len {
        let (ho, hn) = (old_tuples[t - q], new_tuples[t - q]);
        let (co, cn) = (state.c[t], proposal[t]);
        log_ratio += lam(hn, cn) + lam(hn, co) - lam(ho, co) - lam(ho, cn);
        let row = &logf[t * n_st..(t + 1) * n_st];
        for c in 0..n_st {
            lw[c] = row[c] + lam(hn, c);
        }
        log_ratio -= log_sum_exp(&lw);
    }
    if proposal == state.c {
        log_ratio = 0.0;
    }
    let accepted = open_unit(rng).ln() < log_ratio / temp;
    if accepted {
        state.c = proposal;
        state.z = clusters.allocations(&state.c);
    }
    CzMove { log_ratio, accepted }
}
