//! Deterministic lag-level clusterings and their collapsed marginal likelihood.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Per lag, the cluster label of every state.
///
/// Labels are kept in restricted-growth form: the first state is in cluster 0
/// and each new label is one more than the largest seen so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HardClustering {
    pub labels: Vec<Vec<usize>>,
}

/// Relabel so that labels appear in order of first occurrence.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = vec![usize::MAX; labels.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}

impl HardClustering {
    pub fn new(labels: Vec<Vec<usize>>) -> Result<Self> {
        if labels.is_empty() || labels[0].is_empty() {
            return Err(Error::InvalidConfig("empty clustering".into()));
        }
        let c = labels[0].len();
        if labels.iter().any(|l| l.len() != c) {
            return Err(Error::DimensionMismatch("lags cluster different state counts".into()));
        }
        Ok(HardClustering { labels: labels.iter().map(|l| canonical(l)).collect() })
    }

    /// Every lag in one cluster except lag 1, split at random into two nonempty halves.
    pub fn initial<R: Rng + ?Sized>(n_states: usize, max_lag: usize, rng: &mut R) -> Self {
        let mut labels = vec![vec![0; n_states]; max_lag];
        labels[0] = random_bipartition(n_states, rng);
        HardClustering { labels: labels.iter().map(|l| canonical(l)).collect() }
    }

    /// One cluster per state at every lag.
    pub fn identity(n_states: usize, max_lag: usize) -> Self {
        HardClustering { labels: vec![(0..n_states).collect(); max_lag] }
    }

    pub fn n_states(&self) -> usize {
        self.labels[0].len()
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self, j: usize) -> usize {
        self.labels[j].iter().max().map_or(0, |m| m + 1)
    }

    pub fn k(&self) -> Vec<usize> {
        (0..self.order()).map(|j| self.n_clusters(j)).collect()
    }

    pub fn cluster_sizes(&self, j: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters(j)];
        for &l in &self.labels[j] {
            sizes[l] += 1;
        }
        sizes
    }

    /// Clusters are disjoint, nonempty and cover every state.
    pub fn is_valid(&self) -> bool {
        self.labels.iter().enumerate().all(|(j, l)| {
            let sizes = self.cluster_sizes(j);
            l.len() == self.n_states() && sizes.iter().all(|&s| s > 0)
        })
    }

    /// Class tuple of every transition `t >= q`, `h_1` most significant.
    pub fn tuples(&self, c: &[usize]) -> Vec<usize> {
        let q = self.order();
        let strides = crate::model::tuple_strides(&self.k());
        (q..c.len()).map(|t| (0..q).map(|j| self.labels[j][c[t - j - 1]] * strides[j]).sum()).collect()
    }

    /// 0/1 mode weights, `C x k_j` row-major per lag.
    pub fn mode_weights(&self) -> Vec<Vec<f64>> {
        (0..self.order())
            .map(|j| {
                let kj = self.n_clusters(j);
                let mut p = vec![0.0; self.n_states() * kj];
                for (w, &h) in self.labels[j].iter().enumerate() {
                    p[w * kj + h] = 1.0;
                }
                p
            })
            .collect()
    }

    /// `z[j][t - q]` induced by the clustering.
    pub fn allocations(&self, c: &[usize]) -> Vec<Vec<usize>> {
        let q = self.order();
        (0..q).map(|j| (q..c.len()).map(|t| self.labels[j][c[t - j - 1]]).collect()).collect()
    }
}

fn random_bipartition<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let l: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if l.contains(&0) && l.contains(&1) {
            return l;
        }
    }
}

/// `log Γ(a + n) - log Γ(a)` without cancellation for small counts.
#[inline]
pub fn ln_rising(a: f64, n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => a.ln(),
        2 => (a * (a + 1.0)).ln(),
        _ => ln_gamma(a + n as f64) - ln_gamma(a),
    }
}

/// Transition counts `n[h][c]` keyed by class tuple, occupied tuples only, in tuple order.
pub fn occupied_counts(tuples: &[usize], next: &[usize], n_states: usize) -> Vec<(usize, Vec<usize>)> {
    let mut pairs: Vec<(usize, usize)> = tuples.iter().copied().zip(next.iter().copied()).collect();
    pairs.sort_unstable();
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for (h, c) in pairs {
        match out.last_mut() {
            Some((last, counts)) if *last == h => counts[c] += 1,
            _ => {
                let mut counts = vec![0; n_states];
                counts[c] += 1;
                out.push((h, counts));
            }
        }
    }
    out
}

/// Collapsed Dirichlet-multinomial log likelihood of `c_{q+1..T}` under a hard clustering:
/// `sum_h log B(alpha lambda0 + n_h) - log B(alpha lambda0)`.
pub fn hard_marginal_loglik(clusters: &HardClustering, c: &[usize], alpha: f64, lambda0: &[f64]) -> f64 {
    let q = clusters.order();
    if c.len() <= q {
        return 0.0;
    }
    let tuples = clusters.tuples(c);
    dirichlet_multinomial_loglik(&occupied_counts(&tuples, &c[q..], lambda0.len()), alpha, lambda0)
}

pub fn dirichlet_multinomial_loglik(counts: &[(usize, Vec<usize>)], alpha: f64, lambda0: &[f64]) -> f64 {
    let mut total = 0.0;
    for (_, n) in counts {
        let n_tot: usize = n.iter().sum();
        total -= ln_rising(alpha, n_tot);
        for (&nc, &l) in n.iter().zip(lambda0) {
            total += ln_rising(alpha * l, nc);
        }
    }
    total
}

/// `log S(n, k)`, Stirling numbers of the second kind.
pub fn ln_stirling2(n: usize, k: usize) -> f64 {
    if k == 0 || k > n {
        return if n == 0 && k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    // S(i, j) = j S(i-1, j) + S(i-1, j-1), carried in log space row by row.
    let mut row = vec![f64::NEG_INFINITY; k + 1];
    row[0] = 0.0;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            let stay = (j as f64).ln() + row[j];
            let grow = row[j - 1];
            row[j] = crate::random::log_sum_exp(&[stay, grow]);
        }
        row[0] = f64::NEG_INFINITY;
    }
    row[k]
}
