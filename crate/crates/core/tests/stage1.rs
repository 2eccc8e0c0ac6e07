//! Lag selection under hard allocations against exact enumeration.

mod common;

use hohmm::random::stream_rng;
use hohmm::sampler::clustering::{hard_marginal_loglik, HardClustering};
use hohmm::sampler::prior::sample_prior_chain;
use hohmm::sampler::stage1::clustering_log_prior;
use hohmm::sampler::stage1_update_k;
use hohmm::{Family, ModelConfig};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// All set partitions of `n` items in restricted-growth form.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                let next = p.iter().max().unwrap() + 1;
                (0..=next).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

/// Pólya-urn route: product of sequential predictive probabilities.
fn urn_loglik(labels: &[Vec<usize>], c: &[usize], alpha: f64, lambda0: &[f64]) -> f64 {
    let q = labels.len();
    let mut seen: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let mut total = 0.0;
    for t in q..c.len() {
        let key: Vec<usize> = (0..q).map(|j| labels[j][c[t - j - 1]]).collect();
        let pos = match seen.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                seen.push((key, vec![0.0; lambda0.len()]));
                seen.len() - 1
            }
        };
        let counts = &mut seen[pos].1;
        let n: f64 = counts.iter().sum();
        total += ((alpha * lambda0[c[t]] + counts[c[t]]) / (alpha + n)).ln();
        counts[c[t]] += 1.0;
    }
    total
}

/// Gamma-function route: product of Dirichlet-multinomial normalizers.
fn gamma_loglik(labels: &[Vec<usize>], c: &[usize], alpha: f64, lambda0: &[f64]) -> f64 {
    let q = labels.len();
    let n_st = lambda0.len();
    let n_tuples: usize = labels.iter().map(|l| l.iter().max().unwrap() + 1).product();
    let mut counts = vec![vec![0.0; n_st]; n_tuples];
    for t in q..c.len() {
        let mut h = 0;
        for j in 0..q {
            let kj = labels[j].iter().max().unwrap() + 1;
            h = h * kj + labels[j][c[t - j - 1]];
        }
        counts[h][c[t]] += 1.0;
    }
    counts
        .iter()
        .map(|n| {
            let tot: f64 = n.iter().sum();
            ln_gamma(alpha) - ln_gamma(alpha + tot)
                + n.iter().zip(lambda0).map(|(&m, &l)| ln_gamma(alpha * l + m) - ln_gamma(alpha * l)).sum::<f64>()
        })
        .sum()
}

#[test]
fn hard_marginal_matches_both_closed_forms() {
    let mut rng = stream_rng(7, 0);
    let lambda0 = [0.3, 0.7];
    let alpha = 1.7;
    for _ in 0..50 {
        let c: Vec<usize> = (0..6).map(|_| rng.random_range(0..2)).collect();
        for p in partitions(2) {
            let labels = vec![p];
            let h = HardClustering::new(labels.clone()).unwrap();
            let got = hard_marginal_loglik(&h, &c, alpha, &lambda0);
            assert!((got - gamma_loglik(&labels, &c, alpha, &lambda0)).abs() < 1e-10);
            assert!((got - urn_loglik(&labels, &c, alpha, &lambda0)).abs() < 1e-10);
        }
    }
    // three states, two lags: every partition pair
    let lambda0 = [0.2, 0.5, 0.3];
    let c: Vec<usize> = (0..20).map(|_| rng.random_range(0..3)).collect();
    for p1 in partitions(3) {
        for p2 in partitions(3) {
            let labels = vec![p1.clone(), p2];
            let h = HardClustering::new(labels.clone()).unwrap();
            let got = hard_marginal_loglik(&h, &c, 0.9, &lambda0);
            assert!((got - gamma_loglik(&labels, &c, 0.9, &lambda0)).abs() < 1e-10);
        }
    }
}

#[test]
fn partition_enumeration_counts_match_bell_numbers() {
    assert_eq!(partitions(3).len(), 5);
    assert_eq!(partitions(4).len(), 15);
}

#[test]
fn split_merge_chain_targets_the_enumerated_posterior() {
    let cfg = ModelConfig::new(Family::Normal, 3, 2);
    let mut rng = stream_rng(11, 0);
    let (mut state, _) = sample_prior_chain(&cfg, &[2, 2], 30, &mut rng).unwrap();
    state.alpha = 1.3;
    state.varphi = 0.4;
    state.factorization.lambda0 = vec![0.25, 0.4, 0.35];
    let parts = partitions(3);
    let mut cells = Vec::new();
    let mut logp = Vec::new();
    for p1 in &parts {
        for p2 in &parts {
            let k1 = p1.iter().max().unwrap() + 1;
            let k2 = p2.iter().max().unwrap() + 1;
            if k1 + k2 <= 2 {
                continue;
            }
            let h = HardClustering::new(vec![p1.clone(), p2.clone()]).unwrap();
            logp.push(
                hard_marginal_loglik(&h, &state.c, state.alpha, &state.factorization.lambda0)
                    + clustering_log_prior(1, k1, 3, state.varphi)
                    + clustering_log_prior(2, k2, 3, state.varphi),
            );
            cells.push(h.labels.clone());
        }
    }
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|v| v / z).collect();

    let mut clusters = HardClustering::initial(3, 2, &mut rng);
    let mut observed = vec![0.0; cells.len()];
    for i in 0..250_000 {
        stage1_update_k(&state, &mut clusters, &mut rng);
        if i % 50 == 0 {
            let idx = cells.iter().position(|l| *l == clusters.labels).unwrap();
            observed[idx] += 1.0;
        }
    }
    let (stat, p) = common::chi_square(&observed, &probs);
    assert!(p > 0.01, "chi-square {stat:.2}, p = {p:.4}");
}

#[test]
fn without_likelihood_lag_counts_follow_the_prior() {
    use hohmm::sampler::{RunConfig, Sampler};
    use hohmm::transition::log_lag_prior;
    let mut cfg = ModelConfig::new(Family::Normal, 3, 2);
    cfg.varphi0 = 1.0 / 0.6;
    let y: Vec<f64> = (0..15).map(|t| (t % 4) as f64).collect();
    let run = RunConfig {
        total: 1_000_000,
        burnin: 0,
        stage1: 1_000_000,
        ignore_likelihood: true,
        resample_varphi: false,
        anneal_t0: 1.0,
        ..RunConfig::default()
    };
    let mut rng = stream_rng(12, 0);
    let mut sampler = Sampler::new(&y, &cfg, &run, &mut rng).unwrap();
    let varphi = sampler.state().varphi;
    assert!((varphi - 0.6).abs() < 1e-12);
    let mut observed = vec![0.0; 9];
    for i in 0..run.total {
        sampler.step(&mut rng).unwrap();
        if i % 50 == 0 {
            let k = &sampler.state().factorization.k;
            observed[(k[0] - 1) * 3 + k[1] - 1] += 1.0;
        }
    }
    assert_eq!(observed[0], 0.0);
    let (p1, p2) = (log_lag_prior(1, 3, varphi), log_lag_prior(2, 3, varphi));
    let mut probs: Vec<f64> = (0..9).map(|i| if i == 0 { 0.0 } else { (p1[i / 3] + p2[i % 3]).exp() }).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    let (stat, p) = common::chi_square(&observed[1..], &probs[1..]);
    assert!(p > 0.001, "chi-square {stat:.2}, p = {p:.5}, observed {observed:?}");
}
