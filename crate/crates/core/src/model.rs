//! Domain types shared by every module.
//!
//! Indexing convention: states, lag classes and mixture labels are 0-based in
//! memory and 1-based in every serialized artifact (JSON, CSV). The conversion
//! happens only in the `one_based` serde adapters below.
//!
//! The core tensor `lambda` is stored densely as a `prod(k) x C` row-major array.
//! A class tuple `(h_1, .., h_q)` maps to row `sum_j h_j * stride_j` with `h_1`
//! the most significant digit. Mode weights `pi[j]` are `C x k_j` row-major, so
//! `pi[j][w * k_j + h]` is the probability that lag `j + 1` at state `w` is
//! allocated to class `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for simplex constraints on kernels and mode weights.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Tolerance for the translated-mixture mean restriction.
pub const MEAN_RESTRICTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Poisson,
    Tmix,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "1" => Ok(Family::Normal),
            "poisson" | "2" => Ok(Family::Poisson),
            "tmix" | "translated" | "3" => Ok(Family::Tmix),
            other => Err(Error::Parse(format!("unknown emission family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Normal => "normal",
            Family::Poisson => "poisson",
            Family::Tmix => "tmix",
        })
    }
}

/// Model hyperparameters and truncation levels.
///
/// For the Normal and translated families `a0`, `b0` parameterize an
/// Inv-Ga prior on variances; for Poisson they are the shape and scale of the
/// Gamma prior on the rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "C")]
    pub n_states: usize,
    #[serde(rename = "q")]
    pub max_lag: usize,
    #[serde(rename = "S")]
    pub n_components: usize,
    pub family: Family,
    pub alpha0: f64,
    pub gamma_j_scale: f64,
    pub varphi0: f64,
    pub mu0: f64,
    pub sigma0sq: f64,
    pub a0: f64,
    pub b0: f64,
    pub mu_eta0: f64,
    pub sigma_eta0sq: f64,
    pub alpha_eta: f64,
    pub a0_alpha: f64,
    pub b0_alpha: f64,
}

impl ModelConfig {
    /// Defaults that do not depend on the data.
    pub fn new(family: Family, n_states: usize, max_lag: usize) -> Self {
        ModelConfig {
            n_states,
            max_lag,
            n_components: 5,
            family,
            alpha0: 1.0,
            gamma_j_scale: 1.0 / n_states.max(1) as f64,
            varphi0: 2.0,
            mu0: 0.0,
            sigma0sq: 1.0,
            a0: 1.0,
            b0: 1.0,
            mu_eta0: 0.0,
            sigma_eta0sq: 1.0,
            alpha_eta: 1.0,
            a0_alpha: 1.0,
            b0_alpha: 1.0,
        }
    }

    /// Defaults with emission hyperparameters tied to data moments.
    pub fn from_data(family: Family, n_states: usize, max_lag: usize, y: &[f64]) -> Self {
        let mut cfg = Self::new(family, n_states, max_lag);
        let (mean, var) = moments(y);
        let var = if var > 0.0 { var } else { 1.0 };
        match family {
            Family::Normal => {
                cfg.mu0 = mean;
                cfg.sigma0sq = 3.0 * var;
            }
            Family::Poisson => {
                // a0 * b0 = mean, a0 * b0^2 = 2 var
                let mean = mean.max(1e-3);
                cfg.b0 = 2.0 * var / mean;
                cfg.a0 = mean / cfg.b0;
            }
            Family::Tmix => {
                cfg.mu0 = mean;
                cfg.sigma0sq = 3.0 * var;
                cfg.mu_eta0 = 0.0;
                cfg.sigma_eta0sq = var;
                cfg.alpha_eta = cfg.n_components as f64;
            }
        }
        cfg
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_states < 2 {
            return bad("C must be at least 2");
        }
        if self.max_lag < 1 {
            return bad("q must be at least 1");
        }
        if self.n_components < 1 {
            return bad("S must be at least 1");
        }
        let positives = [
            ("alpha0", self.alpha0),
            ("gamma_j_scale", self.gamma_j_scale),
            ("varphi0", self.varphi0),
            ("sigma0sq", self.sigma0sq),
            ("a0", self.a0),
            ("b0", self.b0),
            ("sigma_eta0sq", self.sigma_eta0sq),
            ("alpha_eta", self.alpha_eta),
            ("a0_alpha", self.a0_alpha),
            ("b0_alpha", self.b0_alpha),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu0.is_finite() || !self.mu_eta0.is_finite() {
            return bad("mu0 and mu_eta0 must be finite");
        }
        Ok(())
    }
}

pub fn moments(y: &[f64]) -> (f64, f64) {
    if y.is_empty() {
        return (0.0, 0.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Transition model: core kernels, base vector, mode weights and lag class counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFactorization {
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
}

impl TensorFactorization {
    pub fn new(k: Vec<usize>, lambda: Vec<f64>, lambda0: Vec<f64>, pi: Vec<Vec<f64>>) -> Result<Self> {
        let f = TensorFactorization { k, lambda, lambda0, pi };
        f.check_dims()?;
        Ok(f)
    }

    pub fn check_dims(&self) -> Result<()> {
        let c = self.lambda0.len();
        if c == 0 {
            return Err(Error::DimensionMismatch("lambda0 is empty".into()));
        }
        if self.pi.len() != self.k.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} lags in k but {} mode weight blocks",
                self.k.len(),
                self.pi.len()
            )));
        }
        for (j, (&kj, p)) in self.k.iter().zip(&self.pi).enumerate() {
            if kj == 0 || kj > c {
                return Err(Error::InvalidK(format!("k_{} = {kj} outside 1..={c}", j + 1)));
            }
            if p.len() != c * kj {
                return Err(Error::DimensionMismatch(format!(
                    "pi for lag {} has {} entries, expected {}",
                    j + 1,
                    p.len(),
                    c * kj
                )));
            }
        }
        if self.lambda.len() != self.n_tuples() * c {
            return Err(Error::DimensionMismatch(format!(
                "lambda has {} entries, expected {}",
                self.lambda.len(),
                self.n_tuples() * c
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.lambda0.len()
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.k.len()
    }

    pub fn n_tuples(&self) -> usize {
        self.k.iter().product()
    }

    /// Mixed-radix strides, `h_1` most significant.
    pub fn strides(&self) -> Vec<usize> {
        tuple_strides(&self.k)
    }

    #[inline]
    pub fn kernel(&self, tuple: usize) -> &[f64] {
        let c = self.n_states();
        &self.lambda[tuple * c..(tuple + 1) * c]
    }

    /// Mode weights of lag `j + 1` at state `w`.
    #[inline]
    pub fn mode_weights(&self, j: usize, w: usize) -> &[f64] {
        let kj = self.k[j];
        &self.pi[j][w * kj..(w + 1) * kj]
    }

    /// Lags with `k_j > 1`, as 1-based lag numbers.
    pub fn important_lags(&self) -> Vec<usize> {
        self.k.iter().enumerate().filter(|(_, &kj)| kj > 1).map(|(j, _)| j + 1).collect()
    }
}

pub fn tuple_strides(k: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; k.len()];
    for j in (0..k.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * k[j + 1];
    }
    strides
}

/// Emission distribution parameters, one variant per family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum EmissionModel {
    Normal { mu: Vec<f64>, sigmasq: Vec<f64> },
    Poisson { mu: Vec<f64> },
    Tmix { mu: Vec<f64>, eta: Vec<f64>, sigmasq_s: Vec<f64>, pi_eta: Vec<f64> },
}

impl EmissionModel {
    pub fn family(&self) -> Family {
        match self {
            EmissionModel::Normal { .. } => Family::Normal,
            EmissionModel::Poisson { .. } => Family::Poisson,
            EmissionModel::Tmix { .. } => Family::Tmix,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            EmissionModel::Normal { mu, .. } | EmissionModel::Poisson { mu } | EmissionModel::Tmix { mu, .. } => {
                mu.len()
            }
        }
    }

    /// Marginal mean of state `c`.
    pub fn state_mean(&self, c: usize) -> f64 {
        match self {
            EmissionModel::Normal { mu, .. } | EmissionModel::Poisson { mu } => mu[c],
            EmissionModel::Tmix { mu, eta, pi_eta, .. } => {
                mu[c] + pi_eta.iter().zip(eta).map(|(p, e)| p * e).sum::<f64>()
            }
        }
    }
}

/// One full MCMC state.
///
/// `z[j][t - q]` is the class of lag `j + 1` at time `t` (0-based, `t >= q`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    #[serde(with = "one_based")]
    pub c: Vec<usize>,
    #[serde(with = "one_based::nested")]
    pub z: Vec<Vec<usize>>,
    #[serde(with = "one_based", default)]
    pub s: Vec<usize>,
    pub factorization: TensorFactorization,
    pub emission: EmissionModel,
    pub alpha: f64,
    pub varphi: f64,
}

impl ChainState {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Lag `j + 1` class tuple index at time `t >= q`.
    pub fn tuple_at(&self, t: usize, strides: &[usize]) -> usize {
        let q = self.z.len();
        (0..q).map(|j| self.z[j][t - q] * strides[j]).sum()
    }
}

/// Thinned post-burn-in output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub config: ModelConfig,
    pub total: usize,
    pub burnin: usize,
    pub thin: usize,
    pub stage1: usize,
    pub seed: u64,
    pub hdp_hmm_mode: bool,
    /// Observations the chain was fitted to.
    pub data: Vec<f64>,
    pub iterations: Vec<usize>,
    pub loglik: Vec<f64>,
    pub snapshots: Vec<ChainState>,
}

impl PosteriorSamples {
    pub fn expected_len(total: usize, burnin: usize, thin: usize) -> usize {
        (total - burnin) / thin
    }
}

/// Reasons a state violates the model invariants; empty when the state is valid.
pub fn validate(state: &ChainState, cfg: &ModelConfig) -> Vec<String> {
    let mut out = Vec::new();
    let f = &state.factorization;
    let c = cfg.n_states;
    if let Err(e) = f.check_dims() {
        out.push(e.to_string());
        return out;
    }
    if f.n_states() != c {
        out.push(format!("factorization has {} states, config has {c}", f.n_states()));
        return out;
    }
    if f.order() != cfg.max_lag {
        out.push(format!("factorization has order {}, config has q={}", f.order(), cfg.max_lag));
    }
    let q = f.order();
    if f.k.iter().sum::<usize>() <= q {
        out.push("sum k_j must exceed q".into());
    }
    if !is_simplex(&f.lambda0) {
        out.push("lambda0 not normalized".into());
    }
    if f.lambda.chunks(c).any(|row| !is_simplex(row)) {
        out.push("lambda not normalized".into());
    }
    for (j, &kj) in f.k.iter().enumerate() {
        if f.pi[j].chunks(kj).any(|row| !is_simplex(row)) {
            out.push(format!("pi for lag {} not normalized", j + 1));
        }
    }
    let t = state.c.len();
    if state.c.iter().any(|&v| v >= c) {
        out.push("state outside 1..=C".into());
    }
    if state.z.len() != q {
        out.push(format!("z has {} lag rows, expected {q}", state.z.len()));
    } else {
        for (j, row) in state.z.iter().enumerate() {
            if row.len() != t.saturating_sub(q) {
                out.push(format!("z row {} has length {}, expected {}", j + 1, row.len(), t.saturating_sub(q)));
            }
            if row.iter().any(|&h| h >= f.k[j]) {
                out.push(format!("z for lag {} exceeds k_{}", j + 1, j + 1));
            }
        }
    }
    if state.emission.n_states() != c {
        out.push("emission state count differs from C".into());
    }
    match &state.emission {
        EmissionModel::Normal { sigmasq, .. } => {
            if sigmasq.iter().any(|v| !(*v > 0.0)) {
                out.push("nonpositive variance".into());
            }
        }
        EmissionModel::Poisson { mu } => {
            if mu.iter().any(|v| !(*v > 0.0)) {
                out.push("nonpositive Poisson rate".into());
            }
        }
        EmissionModel::Tmix { eta, sigmasq_s, pi_eta, .. } => {
            if !is_simplex(pi_eta) {
                out.push("pi_eta not normalized".into());
            }
            let r: f64 = pi_eta.iter().zip(eta).map(|(p, e)| p * e).sum();
            if r.abs() > MEAN_RESTRICTION_TOL {
                out.push("mean restriction violated".into());
            }
            if sigmasq_s.iter().any(|v| !(*v > 0.0)) {
                out.push("nonpositive variance".into());
            }
            if state.s.len() != t || state.s.iter().any(|&s| s >= eta.len()) {
                out.push("mixture labels invalid".into());
            }
        }
    }
    if !(state.alpha > 0.0) {
        out.push("alpha must be positive".into());
    }
    if !(state.varphi > 0.0) {
        out.push("varphi must be positive".into());
    }
    out
}

pub fn is_simplex(v: &[f64]) -> bool {
    v.iter().all(|x| *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

/// Serde adapters writing 0-based indices as 1-based integers.
pub mod one_based {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x + 1).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        raw.into_iter()
            .map(|x| x.checked_sub(1).ok_or_else(|| serde::de::Error::custom("indices are 1-based; found 0")))
            .collect()
    }

    pub mod nested {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|row| row.iter().map(|x| x + 1).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
            let raw = Vec::<Vec<usize>>::deserialize(d)?;
            raw.into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|x| {
                            x.checked_sub(1).ok_or_else(|| serde::de::Error::custom("indices are 1-based; found 0"))
                        })
                        .collect()
                })
                .collect()
        }
    }
}
