//! Full conditionals with `k` held fixed.
//!
//! Times are 0-based. Transitions exist for `t >= q`; `c_0..c_{q-1}` only enter
//! through the mode-weight factors of later times.

use rand::Rng;

use crate::model::{ChainState, ModelConfig};
use crate::random::{bernoulli, categorical_log, dirichlet_into};

/// `log f(y_t | c, s_t)` as a `T x C` table; zeros when the likelihood is off.
pub fn emission_table(state: &ChainState, y: &[f64], use_likelihood: bool) -> Vec<f64> {
    let c = state.emission.n_states();
    let mut out = vec![0.0; y.len() * c];
    if use_likelihood {
        for (t, &yt) in y.iter().enumerate() {
            let s = state.s.get(t).copied();
            crate::emissions::log_density_states(&state.emission, yt, s, &mut out[t * c..(t + 1) * c]);
        }
    }
    out
}

/// Each `c_t` in turn from `λ_{z_t}(c) ∏_j π^(j)_{z_{j,t+j}}(c) f(y_t | c)`.
pub fn gibbs_sample_c<R: Rng + ?Sized>(state: &mut ChainState, logf: &[f64], rng: &mut R) {
    let f = &state.factorization;
    let n_st = f.n_states();
    let q = f.order();
    let len = state.c.len();
    let strides = f.strides();
    let ln_lambda: Vec<f64> = f.lambda.iter().map(|v| v.ln()).collect();
    let ln_pi: Vec<Vec<f64>> = f.pi.iter().map(|p| p.iter().map(|v| v.ln()).collect()).collect();
    let mut lw = vec![0.0; n_st];
    for t in 0..len {
        lw.copy_from_slice(&logf[t * n_st..(t + 1) * n_st]);
        if t >= q {
            let tuple = state.tuple_at(t, &strides);
            for (c, w) in lw.iter_mut().enumerate() {
                *w += ln_lambda[tuple * n_st + c];
            }
        }
        for j in 0..q {
            let u = t + j + 1;
            if u >= q && u < len {
                let h = state.z[j][u - q];
                let kj = f.k[j];
                for (c, w) in lw.iter_mut().enumerate() {
                    *w += ln_pi[j][c * kj + h];
                }
            }
        }
        state.c[t] = categorical_log(&lw, rng);
    }
}

/// Single-site update with the class of lag 1 pinned to the previous state.
pub fn gibbs_sample_c_first_order<R: Rng + ?Sized>(state: &mut ChainState, logf: &[f64], rng: &mut R) {
    let n_st = state.factorization.n_states();
    let len = state.c.len();
    let ln_lambda: Vec<f64> = state.factorization.lambda.iter().map(|v| v.ln()).collect();
    let mut lw = vec![0.0; n_st];
    for t in 0..len {
        lw.copy_from_slice(&logf[t * n_st..(t + 1) * n_st]);
        if t >= 1 {
            let prev = state.c[t - 1];
            for (c, w) in lw.iter_mut().enumerate() {
                *w += ln_lambda[prev * n_st + c];
            }
        }
        if t + 1 < len {
            let next = state.c[t + 1];
            for (c, w) in lw.iter_mut().enumerate() {
                *w += ln_lambda[c * n_st + next];
            }
        }
        state.c[t] = categorical_log(&lw, rng);
    }
    state.z = vec![state.c[..len.saturating_sub(1)].to_vec()];
}

/// `z_{j,t} = h` with probability `∝ π^(j)_h(c_{t-j}) λ_{..h..}(c_t)`.
pub fn gibbs_sample_z<R: Rng + ?Sized>(state: &mut ChainState, rng: &mut R) {
    let f = &state.factorization;
    let n_st = f.n_states();
    let q = f.order();
    let strides = f.strides();
    let mut lw = Vec::new();
    for t in q..state.c.len() {
        let ct = state.c[t];
        let mut tuple = state.tuple_at(t, &strides);
        for j in 0..q {
            let kj = f.k[j];
            if kj == 1 {
                continue;
            }
            let w = state.c[t - j - 1];
            let base = tuple - state.z[j][t - q] * strides[j];
            lw.clear();
            for h in 0..kj {
                let lam = f.lambda[(base + h * strides[j]) * n_st + ct];
                lw.push(f.pi[j][w * kj + h].ln() + lam.ln());
            }
            let h = categorical_log(&lw, rng);
            state.z[j][t - q] = h;
            tuple = base + h * strides[j];
        }
    }
}

/// `π^(j)(w) ~ Dir(γ + n_{j,w})` with `n_{j,w}(h) = #{t : c_{t-j} = w, z_{j,t} = h}`.
pub fn gibbs_sample_pi<R: Rng + ?Sized>(state: &mut ChainState, cfg: &ModelConfig, rng: &mut R) {
    let q = state.factorization.order();
    let n_st = state.factorization.n_states();
    for j in 0..q {
        let kj = state.factorization.k[j];
        if kj == 1 {
            continue;
        }
        let mut counts = vec![cfg.gamma_j_scale; n_st * kj];
        for t in q..state.c.len() {
            counts[state.c[t - j - 1] * kj + state.z[j][t - q]] += 1.0;
        }
        let pi = &mut state.factorization.pi[j];
        for w in 0..n_st {
            dirichlet_into(&counts[w * kj..(w + 1) * kj], rng, &mut pi[w * kj..(w + 1) * kj]);
        }
    }
}

/// `n[h * C + c]`: transitions into `c` from class tuple `h`.
pub fn transition_counts(state: &ChainState) -> Vec<usize> {
    let f = &state.factorization;
    let n_st = f.n_states();
    let q = f.order();
    let strides = f.strides();
    let mut n = vec![0; f.n_tuples() * n_st];
    for t in q..state.c.len() {
        n[state.tuple_at(t, &strides) * n_st + state.c[t]] += 1;
    }
    n
}

/// `λ_h ~ Dir(α λ0 + n_h)` for every tuple, occupied or not.
pub fn gibbs_sample_lambda<R: Rng + ?Sized>(state: &mut ChainState, counts: &[usize], rng: &mut R) {
    let f = &mut state.factorization;
    let n_st = f.n_states();
    let base: Vec<f64> = f.lambda0.iter().map(|l| state.alpha * l).collect();
    let mut conc = vec![0.0; n_st];
    for (h, kernel) in f.lambda.chunks_mut(n_st).enumerate() {
        for c in 0..n_st {
            conc[c] = base[c] + counts[h * n_st + c] as f64;
        }
        dirichlet_into(&conc, rng, kernel);
    }
}

/// Occupied-table counts of the franchise: `m = sum_l Bern(a / (l - 1 + a))`, `a = α λ0(c)`.
pub fn sample_table_counts<R: Rng + ?Sized>(counts: &[usize], alpha: f64, lambda0: &[f64], rng: &mut R) -> Vec<usize> {
    let n_st = lambda0.len();
    counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let a = alpha * lambda0[i % n_st];
            (0..n).filter(|&l| bernoulli(a / (l as f64 + a), rng)).count()
        })
        .collect()
}

/// Tables, then `λ0 ~ Dir(α0 / C + m0)`. Returns the table counts for the `α` update.
pub fn gibbs_sample_lambda0<R: Rng + ?Sized>(
    state: &mut ChainState,
    counts: &[usize],
    cfg: &ModelConfig,
    rng: &mut R,
) -> Vec<usize> {
    let n_st = state.factorization.n_states();
    let tables = sample_table_counts(counts, state.alpha, &state.factorization.lambda0, rng);
    let mut conc = vec![cfg.alpha0 / n_st as f64; n_st];
    for (i, m) in tables.iter().enumerate() {
        conc[i % n_st] += *m as f64;
    }
    dirichlet_into(&conc, rng, &mut state.factorization.lambda0);
    tables
}
