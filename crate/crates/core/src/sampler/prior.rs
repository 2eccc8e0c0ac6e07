//! Forward simulation of the joint prior, for sampler validation.

use rand::Rng;

use crate::emissions::{sample_observation, sample_prior_emission};
use crate::error::Result;
use crate::model::{ChainState, EmissionModel, ModelConfig};
use crate::random::{categorical, exponential, gamma, normal};
use crate::transition::sample_prior_factorization;

/// Draw `(state, y)` from the prior with fixed cluster counts `k`.
///
/// The first `q` states are uniform; `z_{j,t} ~ π^(j)(c_{t-j})` and `c_t ~ λ_{z_t}`.
pub fn sample_prior_chain<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    k: &[usize],
    len: usize,
    rng: &mut R,
) -> Result<(ChainState, Vec<f64>)> {
    let n_st = cfg.n_states;
    let q = k.len();
    let alpha = gamma(cfg.a0_alpha, 1.0 / cfg.b0_alpha, rng);
    let factorization = sample_prior_factorization(cfg, k, alpha, rng)?;
    let emission = sample_prior_emission(cfg, rng);
    let strides = factorization.strides();
    let mut c: Vec<usize> = (0..q.min(len)).map(|_| rng.random_range(0..n_st)).collect();
    let mut z = vec![Vec::with_capacity(len.saturating_sub(q)); q];
    for t in q..len {
        let mut tuple = 0;
        for j in 0..q {
            let h = categorical(factorization.mode_weights(j, c[t - j - 1]), rng);
            z[j].push(h);
            tuple += h * strides[j];
        }
        c.push(categorical(factorization.kernel(tuple), rng));
    }
    let mut state =
        ChainState { c, z, s: Vec::new(), factorization, emission, alpha, varphi: exponential(cfg.varphi0, rng) };
    let y = regenerate_observations(&mut state, true, rng);
    Ok((state, y))
}

/// Fresh `y | c, emission`. Translated-mixture labels are redrawn only when `fresh_labels`.
pub fn regenerate_observations<R: Rng + ?Sized>(state: &mut ChainState, fresh_labels: bool, rng: &mut R) -> Vec<f64> {
    let len = state.c.len();
    match &state.emission {
        EmissionModel::Tmix { mu, eta, sigmasq_s, .. } if !fresh_labels && state.s.len() == len => (0..len)
            .map(|t| {
                let s = state.s[t];
                normal(mu[state.c[t]] + eta[s], sigmasq_s[s], rng)
            })
            .collect(),
        _ => {
            let mut labels = Vec::new();
            let y = (0..len)
                .map(|t| {
                    let (v, s) = sample_observation(&state.emission, state.c[t], rng);
                    if let Some(s) = s {
                        labels.push(s);
                    }
                    v
                })
                .collect();
            state.s = labels;
            y
        }
    }
}
