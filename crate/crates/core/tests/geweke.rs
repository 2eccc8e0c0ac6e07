//! Successive-conditional checks: alternating one sweep with a fresh `y | state`
//! must leave the joint prior invariant.

mod common;

use common::{batch_mean_se, iid_mean_se};
use hohmm::random::stream_rng;
use hohmm::sampler::prior::{regenerate_observations, sample_prior_chain};
use hohmm::sampler::Sampler;
use hohmm::{ChainState, EmissionModel, Family, ModelConfig, RunConfig};

fn statistics(s: &ChainState) -> Vec<(&'static str, f64)> {
    let f = &s.factorization;
    let mut out =
        vec![("alpha", s.alpha), ("lambda0_1", f.lambda0[0]), ("pi_1_1", f.pi[0][0]), ("lambda_1_1", f.lambda[0])];
    match &s.emission {
        EmissionModel::Normal { mu, sigmasq } => out.extend([("mu_1", mu[0]), ("sigmasq_1", sigmasq[0])]),
        EmissionModel::Poisson { mu } => out.extend([("mu_1", mu[0]), ("mu_2", mu[1])]),
        EmissionModel::Tmix { mu, eta, sigmasq_s, pi_eta } => out.extend([
            ("mu_1", mu[0]),
            ("eta_1", eta[0]),
            ("eta_2", eta[1]),
            ("sigmasq_s1", sigmasq_s[0]),
            ("pi_eta_1", pi_eta[0]),
        ]),
    }
    out
}

fn config(family: Family) -> ModelConfig {
    let mut cfg = ModelConfig::new(family, 2, 1);
    cfg.a0_alpha = 3.0;
    cfg.b0_alpha = 2.0;
    match family {
        Family::Poisson => {
            cfg.a0 = 3.0;
            cfg.b0 = 1.5;
        }
        _ => {
            cfg.a0 = 6.0;
            cfg.b0 = 5.0;
        }
    }
    if family == Family::Tmix {
        cfg.n_components = 3;
        cfg.alpha_eta = 6.0;
    }
    cfg
}

fn geweke(family: Family, len: usize, rounds: usize, seed: u64) {
    let cfg = config(family);
    let k = vec![2];
    let mut rng = stream_rng(seed, 0);
    let forward: Vec<_> =
        (0..rounds).map(|_| statistics(&sample_prior_chain(&cfg, &k, len, &mut rng).unwrap().0)).collect();
    let run = RunConfig { fixed_k: Some(k.clone()), resample_varphi: false, ..RunConfig::default() };
    let (state, y) = sample_prior_chain(&cfg, &k, len, &mut rng).unwrap();
    let mut sampler = Sampler::from_state(&y, &cfg, &run, state, None).unwrap();
    let mut chain = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        sampler.step(&mut rng).unwrap();
        let y = regenerate_observations(sampler.state_mut(), false, &mut rng);
        sampler.set_data(y);
        chain.push(statistics(sampler.state()));
    }
    let mut failures = Vec::new();
    for i in 0..forward[0].len() {
        let name = forward[0][i].0;
        for power in [1, 2] {
            let f: Vec<f64> = forward.iter().map(|s| s[i].1.powi(power)).collect();
            let g: Vec<f64> = chain.iter().map(|s| s[i].1.powi(power)).collect();
            let (mf, sf) = iid_mean_se(&f);
            let (mg, sg) = batch_mean_se(&g, 50);
            let z = (mf - mg) / (sf * sf + sg * sg).sqrt();
            if z.abs() >= 4.0 {
                failures.push(format!("{name}^{power}: forward {mf:.4} chain {mg:.4} z = {z:.2}"));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn normal_sweep_preserves_the_joint() {
    geweke(Family::Normal, 8, 100_000, 101);
}

#[test]
fn poisson_sweep_preserves_the_joint() {
    geweke(Family::Poisson, 8, 100_000, 102);
}

#[test]
fn translated_mixture_sweep_preserves_the_joint() {
    geweke(Family::Tmix, 8, 100_000, 103);
}
