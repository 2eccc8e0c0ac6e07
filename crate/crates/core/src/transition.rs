//! Transition tensor evaluation, prior draws and the exact first-order embedding.

use rand::Rng;

use crate::emissions;
use crate::error::{Error, Result};
use crate::model::{EmissionModel, ModelConfig, TensorFactorization};
use crate::random::{categorical, categorical_log, dirichlet, log_sum_exp};

/// Largest expanded state space `C^q` the first-order oracle will materialize.
pub const MAX_ORACLE_STATES: usize = 4096;
/// Relative accuracy target for stationary entries above `POWER_REL_FLOOR`.
const POWER_TOL: f64 = 1e-12;
const POWER_REL_FLOOR: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 100_000;

/// Anything that yields `p(c_t | c_{t-1}, .., c_{t-q})`.
///
/// `lags[j]` is the state `j + 1` steps back.
pub trait TransitionModel {
    fn n_states(&self) -> usize;
    fn order(&self) -> usize;
    fn next_probs(&self, lags: &[usize], out: &mut [f64]);
}

impl TransitionModel for TensorFactorization {
    fn n_states(&self) -> usize {
        TensorFactorization::n_states(self)
    }

    fn order(&self) -> usize {
        TensorFactorization::order(self)
    }

    fn next_probs(&self, lags: &[usize], out: &mut [f64]) {
        let c = self.n_states();
        // Contract the core tensor one lag at a time, least significant class first.
        let mut rows = self.n_tuples();
        let mut buf: Option<Vec<f64>> = None;
        for j in (0..self.order()).rev() {
            let kj = self.k[j];
            if kj == 1 {
                continue;
            }
            let w = self.mode_weights(j, lags[j]);
            let src: &[f64] = buf.as_deref().unwrap_or(&self.lambda);
            rows /= kj;
            let mut next = vec![0.0; rows * c];
            for (p, dst) in next.chunks_mut(c).enumerate() {
                for (h, &wh) in w.iter().enumerate() {
                    if wh == 0.0 {
                        continue;
                    }
                    let row = &src[(p * kj + h) * c..(p * kj + h + 1) * c];
                    for (d, l) in dst.iter_mut().zip(row) {
                        *d += wh * l;
                    }
                }
            }
            buf = Some(next);
        }
        out.copy_from_slice(&buf.as_deref().unwrap_or(&self.lambda)[..c]);
    }
}

/// `p(. | lags)` under the factorization; `lags[j]` is `c_{t-j-1}`.
pub fn transition_prob(f: &TensorFactorization, lags: &[usize]) -> Result<Vec<f64>> {
    f.check_dims()?;
    if lags.len() != f.order() {
        return Err(Error::DimensionMismatch(format!("{} lags given for an order {} model", lags.len(), f.order())));
    }
    if let Some(&bad) = lags.iter().find(|&&l| l >= f.n_states()) {
        return Err(Error::DimensionMismatch(format!("lag state {} out of range", bad + 1)));
    }
    let mut out = vec![0.0; f.n_states()];
    f.next_probs(lags, &mut out);
    Ok(out)
}

/// Free parameters of the factorization: `(C-1) prod k_j + C sum (k_j - 1)`.
pub fn param_count(k: &[usize], n_states: usize) -> usize {
    (n_states - 1) * k.iter().product::<usize>() + n_states * k.iter().map(|kj| kj - 1).sum::<usize>()
}

/// Dense order-`q` transition tensor.
///
/// Row `r` encodes the history `(c_{t-q}, .., c_{t-1})` in base `C` with the
/// oldest state most significant; `probs[r * C + c] = p(c_t = c | history)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransitionTensor {
    pub n_states: usize,
    pub order: usize,
    pub probs: Vec<f64>,
}

impl TransitionTensor {
    pub fn new(n_states: usize, order: usize, probs: Vec<f64>) -> Result<Self> {
        let rows = n_states
            .checked_pow(order as u32)
            .ok_or_else(|| Error::TooLarge(format!("{n_states}^{order} overflows")))?;
        if probs.len() != rows * n_states {
            return Err(Error::DimensionMismatch(format!(
                "tensor has {} entries, expected {}",
                probs.len(),
                rows * n_states
            )));
        }
        for row in probs.chunks(n_states) {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-10 {
                return Err(Error::DimensionMismatch("tensor rows must be probability vectors".into()));
            }
        }
        Ok(TransitionTensor { n_states, order, probs })
    }

    pub fn n_rows(&self) -> usize {
        self.probs.len() / self.n_states
    }

    /// Row for `lags` given most-recent-first.
    pub fn row_of_lags(&self, lags: &[usize]) -> usize {
        let mut row = 0;
        let mut weight = 1;
        for &l in lags {
            row += l * weight;
            weight *= self.n_states;
        }
        row
    }

    /// Row for a history given oldest-first.
    pub fn row_of_history(&self, history: &[usize]) -> usize {
        history.iter().fold(0, |acc, &h| acc * self.n_states + h)
    }

    pub fn history_of_row(&self, mut row: usize) -> Vec<usize> {
        let mut h = vec![0; self.order];
        for i in (0..self.order).rev() {
            h[i] = row % self.n_states;
            row /= self.n_states;
        }
        h
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.probs[row * self.n_states..(row + 1) * self.n_states]
    }

    /// Materialize a factorization as a dense tensor.
    pub fn from_factorization(f: &TensorFactorization) -> Result<Self> {
        f.check_dims()?;
        let c = f.n_states();
        let q = f.order();
        let rows = c
            .checked_pow(q as u32)
            .filter(|r| r.saturating_mul(c) <= 1 << 26)
            .ok_or_else(|| Error::TooLarge(format!("{c}^{q} rows")))?;
        let mut probs = vec![0.0; rows * c];
        let mut lags = vec![0; q];
        for row in 0..rows {
            let mut r = row;
            for l in lags.iter_mut() {
                *l = r % c;
                r /= c;
            }
            f.next_probs(&lags, &mut probs[row * c..(row + 1) * c]);
        }
        Ok(TransitionTensor { n_states: c, order: q, probs })
    }
}

impl TransitionModel for TransitionTensor {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn order(&self) -> usize {
        self.order
    }

    fn next_probs(&self, lags: &[usize], out: &mut [f64]) {
        out.copy_from_slice(self.row(self.row_of_lags(lags)));
    }
}

/// Factorization with `k_j = C` and indicator mode weights reproducing `tensor`.
pub fn indicator_factorization(tensor: &TransitionTensor) -> TensorFactorization {
    let c = tensor.n_states;
    let q = tensor.order;
    let k = vec![c; q];
    let pi = (0..q)
        .map(|_| {
            let mut p = vec![0.0; c * c];
            for w in 0..c {
                p[w * c + w] = 1.0;
            }
            p
        })
        .collect();
    // Class tuple (h_1..h_q) in mixed radix with h_1 most significant equals
    // lags (c_{t-1}..c_{t-q}); the tensor row puts c_{t-q} most significant.
    let strides = crate::model::tuple_strides(&k);
    let mut lambda = vec![0.0; c.pow(q as u32) * c];
    for row in 0..tensor.n_rows() {
        let hist = tensor.history_of_row(row);
        let tuple: usize = (0..q).map(|j| hist[q - 1 - j] * strides[j]).sum();
        lambda[tuple * c..(tuple + 1) * c].copy_from_slice(tensor.row(row));
    }
    let lambda0 = vec![1.0 / c as f64; c];
    TensorFactorization { k, lambda, lambda0, pi }
}

/// Prior draw of `lambda0`, the core kernels and the mode weights for fixed `k`.
pub fn sample_prior_factorization<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    k: &[usize],
    alpha: f64,
    rng: &mut R,
) -> Result<TensorFactorization> {
    let c = cfg.n_states;
    check_k(k, c)?;
    let lambda0 = dirichlet(&vec![cfg.alpha0 / c as f64; c], rng);
    let n_tuples: usize = k.iter().product();
    let base: Vec<f64> = lambda0.iter().map(|l| alpha * l).collect();
    let mut lambda = Vec::with_capacity(n_tuples * c);
    for _ in 0..n_tuples {
        lambda.extend(dirichlet(&base, rng));
    }
    let pi = k
        .iter()
        .map(|&kj| {
            let mut p = Vec::with_capacity(c * kj);
            for _ in 0..c {
                if kj == 1 {
                    p.push(1.0);
                } else {
                    p.extend(dirichlet(&vec![cfg.gamma_j_scale; kj], rng));
                }
            }
            p
        })
        .collect();
    Ok(TensorFactorization { k: k.to_vec(), lambda, lambda0, pi })
}

pub fn check_k(k: &[usize], n_states: usize) -> Result<()> {
    if k.is_empty() {
        return Err(Error::InvalidK("k is empty".into()));
    }
    if let Some((j, kj)) = k.iter().enumerate().find(|(_, &kj)| kj == 0 || kj > n_states) {
        return Err(Error::InvalidK(format!("k_{} = {kj} outside 1..={n_states}", j + 1)));
    }
    if k.iter().sum::<usize>() <= k.len() {
        return Err(Error::InvalidK("sum k_j must exceed q".into()));
    }
    Ok(())
}

/// Normalized `log p_{0,j}(k)` for `k = 1..=C`, lag `j` 1-based.
pub fn log_lag_prior(lag: usize, n_states: usize, varphi: f64) -> Vec<f64> {
    let rel: Vec<f64> = (0..n_states).map(|m| -varphi * lag as f64 * m as f64).collect();
    let tail: f64 = rel[1..].iter().map(|r| r.exp()).sum();
    let norm = tail.ln_1p();
    rel.into_iter().map(|r| r - norm).collect()
}

/// Unnormalized log prior of `k`: `-varphi sum_j j k_j`, or `-inf` when `sum k_j <= q`.
pub fn lag_prior_log_weight(k: &[usize], varphi: f64) -> f64 {
    if k.iter().sum::<usize>() <= k.len() {
        return f64::NEG_INFINITY;
    }
    -varphi * k.iter().enumerate().map(|(j, &kj)| ((j + 1) * kj) as f64).sum::<f64>()
}

/// Exact draw from `p(k) ∝ 1{sum k_j > q} prod_j exp(-varphi j k_j)`.
///
/// Lags are drawn in order; while every earlier lag is excluded, the weight of
/// `k_j = 1` is multiplied by the probability that some later lag is included.
pub fn sample_prior_k<R: Rng + ?Sized>(cfg: &ModelConfig, varphi: f64, rng: &mut R) -> Vec<usize> {
    let c = cfg.n_states;
    let q = cfg.max_lag;
    let priors: Vec<Vec<f64>> = (1..=q).map(|j| log_lag_prior(j, c, varphi)).collect();
    let mut k = Vec::with_capacity(q);
    let mut all_one = true;
    for j in 0..q {
        let mut lw = priors[j].clone();
        if all_one {
            let tail: f64 = priors[j + 1..].iter().map(|p| p[0]).sum();
            lw[0] += (-tail.exp_m1()).ln();
        }
        let v = categorical_log(&lw, rng) + 1;
        if v > 1 {
            all_one = false;
        }
        k.push(v);
    }
    k
}

/// Exact marginals `P(k_j = v)` under the constrained lag prior, `out[j][v - 1]`.
pub fn lag_prior_marginals(n_states: usize, max_lag: usize, varphi: f64) -> Vec<Vec<f64>> {
    let priors: Vec<Vec<f64>> = (1..=max_lag).map(|j| log_lag_prior(j, n_states, varphi)).collect();
    let log_all_one: f64 = priors.iter().map(|p| p[0]).sum();
    let z = -log_all_one.exp_m1();
    priors
        .iter()
        .map(|p| {
            let others = log_all_one - p[0];
            p.iter()
                .enumerate()
                .map(|(v, lp)| {
                    let feasible = if v == 0 { -others.exp_m1() } else { 1.0 };
                    lp.exp() * feasible / z
                })
                .collect()
        })
        .collect()
}

/// The order-`q` chain as a first-order chain on `C^q` tuples.
#[derive(Debug, Clone)]
pub struct FirstOrderOracle {
    pub tensor: TransitionTensor,
    /// Dense `C^q x C^q` row-stochastic matrix.
    pub ptilde: Vec<f64>,
    pub stationary: Vec<f64>,
}

impl FirstOrderOracle {
    pub fn n_tuples(&self) -> usize {
        self.stationary.len()
    }

    pub fn n_states(&self) -> usize {
        self.tensor.n_states
    }

    pub fn order(&self) -> usize {
        self.tensor.order
    }

    pub fn encode(&self, history: &[usize]) -> usize {
        self.tensor.row_of_history(history)
    }

    pub fn decode(&self, row: usize) -> Vec<usize> {
        self.tensor.history_of_row(row)
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.ptilde[from * self.n_tuples() + to]
    }

    /// One-coordinate stationary marginal, summing out all but the last state.
    pub fn state_marginal(&self) -> Vec<f64> {
        let c = self.n_states();
        let mut out = vec![0.0; c];
        for (row, p) in self.stationary.iter().enumerate() {
            out[row % c] += p;
        }
        out
    }

    #[inline]
    fn successor(&self, row: usize, next: usize) -> usize {
        (row * self.n_states()) % self.n_tuples() + next
    }
}

impl TransitionModel for FirstOrderOracle {
    fn n_states(&self) -> usize {
        self.tensor.n_states
    }

    fn order(&self) -> usize {
        self.tensor.order
    }

    fn next_probs(&self, lags: &[usize], out: &mut [f64]) {
        self.tensor.next_probs(lags, out)
    }
}

pub fn build_first_order(tensor: &TransitionTensor) -> Result<FirstOrderOracle> {
    let c = tensor.n_states;
    let n = tensor.n_rows();
    if n > MAX_ORACLE_STATES {
        return Err(Error::TooLarge(format!("C^q = {n} exceeds the oracle limit of {MAX_ORACLE_STATES}")));
    }
    let mut ptilde = vec![0.0; n * n];
    for row in 0..n {
        for next in 0..c {
            let col = (row * c) % n + next;
            ptilde[row * n + col] = tensor.probs[row * c + next];
        }
    }
    let mut oracle = FirstOrderOracle { tensor: tensor.clone(), ptilde, stationary: vec![1.0 / n as f64; n] };
    let mut x = oracle.stationary.clone();
    let mut next = vec![0.0; n];
    let mut prev_diff = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for row in 0..n {
            let mass = x[row];
            if mass == 0.0 {
                continue;
            }
            for s in 0..c {
                next[oracle.successor(row, s)] += mass * tensor.probs[row * c + s];
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        // Relative change, so small stationary entries are as accurate as large ones.
        let diff = x.iter().zip(&next).map(|(a, b)| (a - b).abs() / a.max(*b).max(POWER_REL_FLOOR)).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        // The distance to the fixed point is about diff * rho / (1 - rho) for contraction rate rho.
        let rho = if prev_diff > 0.0 { (diff / prev_diff).min(1.0) } else { 0.0 };
        prev_diff = diff;
        if diff == 0.0 || (diff < POWER_TOL && rho < 1.0 && diff * rho / (1.0 - rho) < POWER_TOL) {
            oracle.stationary = x;
            return Ok(oracle);
        }
    }
    Err(Error::NonErgodic(POWER_MAX_ITERS))
}

pub fn build_first_order_from(f: &TensorFactorization) -> Result<FirstOrderOracle> {
    build_first_order(&TransitionTensor::from_factorization(f)?)
}

/// `log p(y_1..T)` of the stationary chain, by a scaled forward pass on tuples.
pub fn exact_joint_loglik(oracle: &FirstOrderOracle, emission: &EmissionModel, y: &[f64]) -> Result<f64> {
    let q = oracle.order();
    let c = oracle.n_states();
    let n = oracle.n_tuples();
    if y.len() < q {
        return Err(Error::InsufficientData(format!("T = {} is smaller than q = {q}", y.len())));
    }
    let mut logf = vec![0.0; c];
    let emit = |t: usize, out: &mut [f64]| -> Result<()> {
        for (s, o) in out.iter_mut().enumerate() {
            *o = emissions::log_density(emission, y[t], s, None)?;
        }
        Ok(())
    };
    let mut per_time = Vec::with_capacity(q);
    for t in 0..q {
        emit(t, &mut logf)?;
        per_time.push(logf.clone());
    }
    let mut a: Vec<f64> = (0..n)
        .map(|row| {
            let hist = oracle.decode(row);
            let lp = oracle.stationary[row].ln();
            lp + hist.iter().enumerate().map(|(t, &s)| per_time[t][s]).sum::<f64>()
        })
        .collect();
    let mut ll = log_sum_exp(&a);
    if !ll.is_finite() {
        return Ok(ll);
    }
    a.iter_mut().for_each(|v| *v = (*v - ll).exp());
    let mut next = vec![0.0; n];
    for t in q..y.len() {
        emit(t, &mut logf)?;
        let m = logf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        next.iter_mut().for_each(|v| *v = 0.0);
        for row in 0..n {
            if a[row] == 0.0 {
                continue;
            }
            for s in 0..c {
                let p = oracle.tensor.probs[row * c + s];
                next[oracle.successor(row, s)] += a[row] * p * (logf[s] - m).exp();
            }
        }
        let total: f64 = next.iter().sum();
        ll += m + total.ln();
        if !(total > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        for (dst, src) in a.iter_mut().zip(&next) {
            *dst = src / total;
        }
    }
    Ok(ll)
}

/// Simulate `len` states from `model` starting after `init` (oldest-first).
pub fn simulate_states<M: TransitionModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    init: &[usize],
    len: usize,
    rng: &mut R,
) -> Vec<usize> {
    let q = model.order();
    let mut seq: Vec<usize> = init.to_vec();
    let mut probs = vec![0.0; model.n_states()];
    let mut lags = vec![0; q];
    for _ in 0..len {
        let t = seq.len();
        for (j, l) in lags.iter_mut().enumerate() {
            *l = seq[t - 1 - j];
        }
        model.next_probs(&lags, &mut probs);
        seq.push(categorical(&probs, rng));
    }
    seq.split_off(init.len())
}
