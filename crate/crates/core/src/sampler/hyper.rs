//! Concentration and lag-penalty hyperparameters.

use rand::Rng;

use crate::model::ModelConfig;
use crate::random::{bernoulli, exponential, gamma, log_beta_variate};

/// `α | tables, counts` through per-restaurant auxiliaries `r ~ Beta(α + 1, n)`,
/// `s ~ Bern(n / (n + α))`, then `α ~ Ga(a + m0 - Σs, rate b - Σ log r)`.
///
/// `restaurant_totals` are the customer counts `n_h` of each tuple; empty ones are skipped.
pub fn sample_alpha<R: Rng + ?Sized>(
    alpha: f64,
    restaurant_totals: &[usize],
    total_tables: usize,
    cfg: &ModelConfig,
    rng: &mut R,
) -> f64 {
    let mut shape = cfg.a0_alpha + total_tables as f64;
    let mut rate = cfg.b0_alpha;
    for &n in restaurant_totals.iter().filter(|&&n| n > 0) {
        let n = n as f64;
        rate -= log_beta_variate(alpha + 1.0, n, rng);
        if bernoulli(n / (n + alpha), rng) {
            shape -= 1.0;
        }
    }
    gamma(shape, 1.0 / rate, rng)
}

/// `φ ~ Exp(φ0 + Σ_j j k_j)`.
pub fn sample_varphi<R: Rng + ?Sized>(k: &[usize], cfg: &ModelConfig, rng: &mut R) -> f64 {
    exponential(varphi_rate(k, cfg.varphi0), rng)
}

pub fn varphi_rate(k: &[usize], varphi0: f64) -> f64 {
    varphi0 + k.iter().enumerate().map(|(j, &kj)| ((j + 1) * kj) as f64).sum::<f64>()
}

/// Customers per restaurant from flat `tuple x C` counts.
pub fn restaurant_totals(counts: &[usize], n_states: usize) -> Vec<usize> {
    counts.chunks(n_states).map(|r| r.iter().sum()).collect()
}
