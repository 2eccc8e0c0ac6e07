//! Emission densities and their conjugate updates.
//!
//! Gamma is shape/scale (mean `a b`); Inv-Ga(a, b) has density `∝ x^(-a-1) e^(-b/x)`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{EmissionModel, Family, ModelConfig};
use crate::random::{categorical_log, dirichlet, gamma, inv_gamma, log_sum_exp, normal, open_unit};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn normal_log_pdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (y - mean) * (y - mean) / var)
}

pub fn check_count(y: f64, index: usize) -> Result<()> {
    if y < 0.0 || y.fract() != 0.0 || !y.is_finite() {
        return Err(Error::InvalidObservation { index, reason: format!("{y} is not a nonnegative integer") });
    }
    Ok(())
}

#[inline]
fn poisson_log_pmf(y: f64, mu: f64) -> f64 {
    if y == 0.0 {
        return -mu;
    }
    y * mu.ln() - mu - ln_gamma(y + 1.0)
}

/// `log f(y | c)`, or `log f(y | c, s)` when a mixture label is given.
pub fn log_density(e: &EmissionModel, y: f64, c: usize, s: Option<usize>) -> Result<f64> {
    match e {
        EmissionModel::Normal { mu, sigmasq } => Ok(normal_log_pdf(y, mu[c], sigmasq[c])),
        EmissionModel::Poisson { mu } => {
            check_count(y, 0)?;
            Ok(poisson_log_pmf(y, mu[c]))
        }
        EmissionModel::Tmix { mu, eta, sigmasq_s, pi_eta } => match s {
            Some(s) => Ok(normal_log_pdf(y, mu[c] + eta[s], sigmasq_s[s])),
            None => {
                let terms: Vec<f64> =
                    (0..eta.len()).map(|s| pi_eta[s].ln() + normal_log_pdf(y, mu[c] + eta[s], sigmasq_s[s])).collect();
                Ok(log_sum_exp(&terms))
            }
        },
    }
}

/// `log f(y | c, s_t)` for every state into `out`; `s` is ignored outside the mixture family.
pub fn log_density_states(e: &EmissionModel, y: f64, s: Option<usize>, out: &mut [f64]) {
    match e {
        EmissionModel::Normal { mu, sigmasq } => {
            for (c, o) in out.iter_mut().enumerate() {
                *o = normal_log_pdf(y, mu[c], sigmasq[c]);
            }
        }
        EmissionModel::Poisson { mu } => {
            let lf = if y == 0.0 { 0.0 } else { ln_gamma(y + 1.0) };
            for (c, o) in out.iter_mut().enumerate() {
                *o = if y == 0.0 { -mu[c] } else { y * mu[c].ln() - mu[c] - lf };
            }
        }
        EmissionModel::Tmix { .. } => {
            for (c, o) in out.iter_mut().enumerate() {
                *o = log_density(e, y, c, s).expect("mixture density is total");
            }
        }
    }
}

pub fn sample_prior_emission<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> EmissionModel {
    let c = cfg.n_states;
    match cfg.family {
        Family::Normal => EmissionModel::Normal {
            mu: (0..c).map(|_| normal(cfg.mu0, cfg.sigma0sq, rng)).collect(),
            sigmasq: (0..c).map(|_| inv_gamma(cfg.a0, cfg.b0, rng)).collect(),
        },
        Family::Poisson => EmissionModel::Poisson { mu: (0..c).map(|_| gamma(cfg.a0, cfg.b0, rng)).collect() },
        Family::Tmix => {
            let s = cfg.n_components;
            let mu = (0..c).map(|_| normal(cfg.mu0, cfg.sigma0sq, rng)).collect();
            let sigmasq_s = (0..s).map(|_| inv_gamma(cfg.a0, cfg.b0, rng)).collect();
            let pi_eta = dirichlet(&vec![cfg.alpha_eta / s as f64; s], rng);
            let eta = constrained_eta_draw(&vec![cfg.mu_eta0; s], &vec![cfg.sigma_eta0sq; s], &pi_eta, rng)
                .expect("dirichlet weights are positive");
            EmissionModel::Tmix { mu, eta, sigmasq_s, pi_eta }
        }
    }
}

/// One observation from state `c`, with its mixture label for the translated family.
pub fn sample_observation<R: Rng + ?Sized>(e: &EmissionModel, c: usize, rng: &mut R) -> (f64, Option<usize>) {
    match e {
        EmissionModel::Normal { mu, sigmasq } => (normal(mu[c], sigmasq[c], rng), None),
        EmissionModel::Poisson { mu } => {
            let y: f64 = Poisson::new(mu[c]).map(|p| p.sample(rng)).unwrap_or(0.0);
            (y, None)
        }
        EmissionModel::Tmix { mu, eta, sigmasq_s, pi_eta } => {
            let s = crate::random::categorical(pi_eta, rng);
            (normal(mu[c] + eta[s], sigmasq_s[s], rng), Some(s))
        }
    }
}

/// Mean and variance of `mu | sigma^2` from `n` observations summing to `sum`.
pub fn normal_mean_conditional(sum: f64, n: usize, sigmasq: f64, mu0: f64, sigma0sq: f64) -> (f64, f64) {
    let prec = 1.0 / sigma0sq + n as f64 / sigmasq;
    ((mu0 / sigma0sq + sum / sigmasq) / prec, 1.0 / prec)
}

/// `(shape, scale)` of the Gamma conditional of a Poisson rate.
pub fn poisson_rate_conditional(sum: f64, n: usize, a0: f64, b0: f64) -> (f64, f64) {
    (a0 + sum, b0 / (1.0 + n as f64 * b0))
}

fn family_error(expected: Family, e: &EmissionModel) -> Error {
    Error::InvalidConfig(format!("expected {expected} emissions, got {}", e.family()))
}

/// Per state: `mu | sigma^2` then `sigma^2 | mu`. Empty states draw from the prior.
pub fn gibbs_update_normal<R: Rng + ?Sized>(
    e: &EmissionModel,
    c: &[usize],
    y: &[f64],
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<EmissionModel> {
    let EmissionModel::Normal { sigmasq, .. } = e else {
        return Err(family_error(Family::Normal, e));
    };
    let k = sigmasq.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&ct, &yt) in c.iter().zip(y) {
        sums[ct] += yt;
        counts[ct] += 1;
    }
    let mut mu = vec![0.0; k];
    let mut var = vec![0.0; k];
    for s in 0..k {
        let (m, v) = normal_mean_conditional(sums[s], counts[s], sigmasq[s], cfg.mu0, cfg.sigma0sq);
        mu[s] = normal(m, v, rng);
    }
    let mut rss = vec![0.0; k];
    for (&ct, &yt) in c.iter().zip(y) {
        rss[ct] += (yt - mu[ct]).powi(2);
    }
    for s in 0..k {
        var[s] = inv_gamma(cfg.a0 + counts[s] as f64 / 2.0, cfg.b0 + rss[s] / 2.0, rng);
    }
    Ok(EmissionModel::Normal { mu, sigmasq: var })
}

pub fn gibbs_update_poisson<R: Rng + ?Sized>(
    e: &EmissionModel,
    c: &[usize],
    y: &[f64],
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<EmissionModel> {
    let EmissionModel::Poisson { mu } = e else {
        return Err(family_error(Family::Poisson, e));
    };
    let k = mu.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (t, (&ct, &yt)) in c.iter().zip(y).enumerate() {
        check_count(yt, t)?;
        sums[ct] += yt;
        counts[ct] += 1;
    }
    let mu = (0..k)
        .map(|s| {
            let (shape, scale) = poisson_rate_conditional(sums[s], counts[s], cfg.a0, cfg.b0);
            gamma(shape, scale, rng)
        })
        .collect();
    Ok(EmissionModel::Poisson { mu })
}

/// Translated-mixture sweep: labels, weights with shifts, variances, state means, then shifts.
///
/// Shifts go last so the mean restriction holds for the weights just drawn.
pub fn gibbs_update_translated<R: Rng + ?Sized>(
    e: &EmissionModel,
    c: &[usize],
    y: &[f64],
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<(EmissionModel, Vec<usize>)> {
    let EmissionModel::Tmix { mu, eta, sigmasq_s, pi_eta } = e else {
        return Err(family_error(Family::Tmix, e));
    };
    let n_comp = eta.len();
    let n_st = mu.len();
    let mut labels = Vec::with_capacity(y.len());
    let mut lw = vec![0.0; n_comp];
    for (&ct, &yt) in c.iter().zip(y) {
        for s in 0..n_comp {
            lw[s] = pi_eta[s].ln() + normal_log_pdf(yt, mu[ct] + eta[s], sigmasq_s[s]);
        }
        labels.push(categorical_log(&lw, rng));
    }
    let mut n_s = vec![0usize; n_comp];
    for &s in &labels {
        n_s[s] += 1;
    }
    // Weights and shifts move as a block: the weights by an independence Metropolis
    // step with the shifts integrated out, then the shifts given the new weights.
    let conc: Vec<f64> = n_s.iter().map(|&n| cfg.alpha_eta / n_comp as f64 + n as f64).collect();
    let post = eta_conditional(mu, sigmasq_s, c, y, &labels, cfg);
    let prior = (vec![cfg.mu_eta0; n_comp], vec![cfg.sigma_eta0sq; n_comp]);
    let log_m = |pi: &[f64]| constraint_log_density(&post, pi) - constraint_log_density(&prior, pi);
    let proposal = dirichlet(&conc, rng);
    let pi_new = if open_unit(rng).ln() < log_m(&proposal) - log_m(pi_eta) { proposal } else { pi_eta.clone() };
    let eta_mid = constrained_eta_draw(&post.0, &post.1, &pi_new, rng)?;

    let mut rss = vec![0.0; n_comp];
    for ((&ct, &yt), &s) in c.iter().zip(y).zip(&labels) {
        rss[s] += (yt - mu[ct] - eta_mid[s]).powi(2);
    }
    let var_new: Vec<f64> =
        (0..n_comp).map(|s| inv_gamma(cfg.a0 + n_s[s] as f64 / 2.0, cfg.b0 + rss[s] / 2.0, rng)).collect();

    // mu_c | rest uses residuals y_t - eta_{s_t} with component-specific precisions.
    let mut prec = vec![1.0 / cfg.sigma0sq; n_st];
    let mut num = vec![cfg.mu0 / cfg.sigma0sq; n_st];
    for ((&ct, &yt), &s) in c.iter().zip(y).zip(&labels) {
        prec[ct] += 1.0 / var_new[s];
        num[ct] += (yt - eta_mid[s]) / var_new[s];
    }
    let mu_new: Vec<f64> = (0..n_st).map(|k| normal(num[k] / prec[k], 1.0 / prec[k], rng)).collect();

    let (mean1, var1) = eta_conditional(&mu_new, &var_new, c, y, &labels, cfg);
    let eta_new = constrained_eta_draw(&mean1, &var1, &pi_new, rng)?;
    Ok((EmissionModel::Tmix { mu: mu_new, eta: eta_new, sigmasq_s: var_new, pi_eta: pi_new }, labels))
}

/// Unconstrained Gaussian conditional of the shifts: per-component means and variances.
fn eta_conditional(
    mu: &[f64],
    sigmasq_s: &[f64],
    c: &[usize],
    y: &[f64],
    labels: &[usize],
    cfg: &ModelConfig,
) -> (Vec<f64>, Vec<f64>) {
    let n_comp = sigmasq_s.len();
    let mut prec = vec![1.0 / cfg.sigma_eta0sq; n_comp];
    let mut num = vec![cfg.mu_eta0 / cfg.sigma_eta0sq; n_comp];
    for ((&ct, &yt), &s) in c.iter().zip(y).zip(labels) {
        prec[s] += 1.0 / sigmasq_s[s];
        num[s] += (yt - mu[ct]) / sigmasq_s[s];
    }
    ((0..n_comp).map(|s| num[s] / prec[s]).collect(), prec.iter().map(|p| 1.0 / p).collect())
}

/// Log density of `sum_s pi_s eta_s` at zero under independent `N(mean_s, var_s)` shifts.
fn constraint_log_density((mean, var): &(Vec<f64>, Vec<f64>), pi: &[f64]) -> f64 {
    let m: f64 = pi.iter().zip(mean).map(|(p, m)| p * m).sum();
    let v: f64 = pi.iter().zip(var).map(|(p, v)| p * p * v).sum();
    normal_log_pdf(0.0, m, v)
}

/// Family dispatch; returns the new parameters and, for the mixture family, fresh labels.
pub fn gibbs_update<R: Rng + ?Sized>(
    e: &EmissionModel,
    c: &[usize],
    y: &[f64],
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<(EmissionModel, Vec<usize>)> {
    match e.family() {
        Family::Normal => Ok((gibbs_update_normal(e, c, y, cfg, rng)?, Vec::new())),
        Family::Poisson => Ok((gibbs_update_poisson(e, c, y, cfg, rng)?, Vec::new())),
        Family::Tmix => gibbs_update_translated(e, c, y, cfg, rng),
    }
}

/// Draw from `N(mean, diag(var))` conditioned on `sum_s pi_s eta_s = 0`.
///
/// The largest weight (last on ties) is the pivot: the remaining coordinates are
/// drawn from their non-singular conditional and the pivot solves the constraint.
pub fn constrained_eta_draw<R: Rng + ?Sized>(mean: &[f64], var: &[f64], pi: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let n = mean.len();
    if var.len() != n || pi.len() != n {
        return Err(Error::DimensionMismatch("eta mean, variance and weights differ in length".into()));
    }
    let mut pivot = 0;
    for s in 0..n {
        if pi[s] >= pi[pivot] {
            pivot = s;
        }
    }
    if !(pi[pivot] > 0.0) {
        return Err(Error::Numerical("mixture weights have no positive entry".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&s| s != pivot).collect();
    let m = free.len();
    // cov(eta_i, eta_R) = pi_i var_i, var(eta_R) = sum pi_s^2 var_s
    let v_r: f64 = (0..n).map(|s| pi[s] * pi[s] * var[s]).sum();
    let e_r: f64 = (0..n).map(|s| pi[s] * mean[s]).sum();
    let cm: Vec<f64> = free.iter().map(|&i| mean[i] - pi[i] * var[i] * e_r / v_r).collect();
    let mut cov = vec![0.0; m * m];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            let diag = if i == j { var[i] } else { 0.0 };
            cov[a * m + b] = diag - pi[i] * var[i] * pi[j] * var[j] / v_r;
        }
    }
    let chol = cholesky(&cov, m)?;
    let z: Vec<f64> = (0..m).map(|_| normal(0.0, 1.0, rng)).collect();
    let mut eta = vec![0.0; n];
    for a in 0..m {
        let dev: f64 = (0..=a).map(|b| chol[a * m + b] * z[b]).sum();
        eta[free[a]] = cm[a] + dev;
    }
    let partial: f64 = free.iter().map(|&i| pi[i] * eta[i]).sum();
    eta[pivot] = -partial / pi[pivot];
    Ok(eta)
}

/// Lower Cholesky factor of a symmetric positive definite `m x m` matrix.
fn cholesky(a: &[f64], m: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * m + k] * l[j * m + k]).sum();
            if i == j {
                let d = a[i * m + i] - s;
                if !(d > 0.0) {
                    return Err(Error::Numerical("conditional eta covariance is not positive definite".into()));
                }
                l[i * m + i] = d.sqrt();
            } else {
                l[i * m + j] = (a[i * m + j] - s) / l[j * m + j];
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::stream_rng;

    #[test]
    fn standard_normal_at_zero() {
        let e = EmissionModel::Normal { mu: vec![0.0], sigmasq: vec![1.0] };
        assert!((log_density(&e, 0.0, 0, None).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn poisson_zero_count() {
        let e = EmissionModel::Poisson { mu: vec![1.0] };
        assert_eq!(log_density(&e, 0.0, 0, None).unwrap(), -1.0);
        assert!(log_density(&e, 1.5, 0, None).is_err());
        assert!(log_density(&e, -1.0, 0, None).is_err());
    }

    #[test]
    fn one_component_mixture_is_normal() {
        let t = EmissionModel::Tmix { mu: vec![0.4], eta: vec![0.0], sigmasq_s: vec![2.0], pi_eta: vec![1.0] };
        let n = EmissionModel::Normal { mu: vec![0.4], sigmasq: vec![2.0] };
        for y in [-3.0, 0.0, 1.7] {
            let a = log_density(&t, y, 0, None).unwrap();
            let b = log_density(&n, y, 0, None).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn state_vector_matches_scalar_density() {
        let e = EmissionModel::Poisson { mu: vec![0.5, 3.0] };
        let mut out = [0.0; 2];
        log_density_states(&e, 4.0, None, &mut out);
        for c in 0..2 {
            assert!((out[c] - log_density(&e, 4.0, c, None).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_component_symmetric_eta() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            let eta = constrained_eta_draw(&[0.3, -0.3], &[1.0, 1.0], &[0.5, 0.5], &mut rng).unwrap();
            assert_eq!(eta[0], -eta[1]);
        }
    }

    #[test]
    fn zero_weight_component_is_not_the_pivot() {
        let mut rng = stream_rng(2, 0);
        let pi = [0.6, 0.4, 0.0];
        let eta = constrained_eta_draw(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], &pi, &mut rng).unwrap();
        let r: f64 = pi.iter().zip(&eta).map(|(p, e)| p * e).sum();
        assert!(r.abs() < 1e-12);
        assert!(constrained_eta_draw(&[0.0], &[1.0], &[0.0], &mut rng).is_err());
    }

    #[test]
    fn wrong_family_is_rejected() {
        let cfg = ModelConfig::new(Family::Normal, 2, 1);
        let e = EmissionModel::Poisson { mu: vec![1.0, 2.0] };
        let mut rng = stream_rng(3, 0);
        assert!(gibbs_update_normal(&e, &[0], &[1.0], &cfg, &mut rng).is_err());
    }
}
