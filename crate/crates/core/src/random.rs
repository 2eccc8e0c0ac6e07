//! Random variate helpers used by the samplers.
//!
//! Everything takes an explicit `&mut R: Rng` so that chains stay reproducible
//! from a single seed. Gamma draws with small shapes go through log space so a
//! Dirichlet with concentrations like `0.01` never collapses to an all-zero vector.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Smallest value a simplex coordinate may take after a Dirichlet draw.
pub const SIMPLEX_FLOOR: f64 = 1e-300;

/// Chain RNG. ChaCha8 keeps streams stable across platforms and releases.
pub type ChainRng = ChaCha8Rng;

/// Independent RNG stream `stream` derived from a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on (0, 1].
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Natural log of a Gamma(shape, 1) variate.
pub fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0, "gamma shape must be positive, got {shape}");
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("valid gamma").sample(rng);
        return g.ln();
    }
    // Ga(a) = Ga(a + 1) * U^(1/a)
    let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("valid gamma").sample(rng);
    g.ln() + open_unit(rng).ln() / shape
}

/// Gamma variate with shape `shape` and scale `scale` (mean `shape * scale`).
pub fn gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    (log_gamma_variate(shape, rng)).exp() * scale
}

/// Inverse-Gamma variate with density proportional to `x^(-a-1) exp(-b/x)`.
pub fn inv_gamma<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    b / gamma(a, 1.0, rng)
}

pub fn normal<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

pub fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    -open_unit(rng).ln() / rate
}

pub fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}

/// Natural log of a Beta(a, b) variate.
pub fn log_beta_variate<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let la = log_gamma_variate(a, rng);
    let lb = log_gamma_variate(b, rng);
    la - log_sum_exp(&[la, lb])
}

/// Dirichlet draw, renormalized so the output sums to one to rounding.
pub fn dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; concentration.len()];
    dirichlet_into(concentration, rng, &mut out);
    out
}

pub fn dirichlet_into<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R, out: &mut [f64]) {
    debug_assert_eq!(concentration.len(), out.len());
    for (o, &a) in out.iter_mut().zip(concentration) {
        *o = log_gamma_variate(a, rng);
    }
    let lse = log_sum_exp(out);
    for o in out.iter_mut() {
        *o = (*o - lse).exp().max(SIMPLEX_FLOOR);
    }
    let total: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Inverse-CDF draw from unnormalized log weights, scanning in index order.
///
/// If every weight is `-inf` the draw is uniform.
pub fn categorical_log<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return rng.random_range(0..log_weights.len());
    }
    let total: f64 = log_weights.iter().map(|w| (w - m).exp()).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in log_weights.iter().enumerate() {
        acc += (w - m).exp();
        if u < acc {
            return i;
        }
    }
    last_positive(log_weights.iter().map(|w| *w > f64::NEG_INFINITY))
}

/// Inverse-CDF draw from nonnegative weights.
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return rng.random_range(0..weights.len());
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    last_positive(weights.iter().map(|w| *w > 0.0))
}

fn last_positive(flags: impl DoubleEndedIterator<Item = bool> + ExactSizeIterator) -> usize {
    let n = flags.len();
    flags.rev().position(|f| f).map(|p| n - 1 - p).unwrap_or(n - 1)
}
