//! Two-stage MCMC.
//!
//! Stage 1 selects the lag cluster counts `k` under deterministic (hard)
//! allocations with an annealed joint state proposal. Stage 2 fixes `k` and runs
//! the full Gibbs sampler with soft allocations. Kernels, the base vector, `α`,
//! `φ` and the emissions use the same conditionals in both stages.

pub mod clustering;
pub mod gibbs;
pub mod hyper;
pub mod init;
pub mod prior;
pub mod stage1;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emissions;
use crate::error::{Error, Result};
use crate::model::{validate, ChainState, EmissionModel, Family, ModelConfig, PosteriorSamples, TensorFactorization};
use crate::random::{categorical, dirichlet, stream_rng};
use crate::transition::check_k;

pub use clustering::{hard_marginal_loglik, HardClustering};
pub use stage1::{stage1_update_cz, stage1_update_k, AnnealSchedule};

/// Run lengths, seed and mode switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub total: usize,
    pub burnin: usize,
    pub thin: usize,
    /// Iterations spent in lag selection before `k` is frozen.
    pub stage1: usize,
    pub seed: u64,
    /// First-order HDP-HMM: `q = 1`, `k = (C)`, identity mode weights.
    pub hdp_hmm_mode: bool,
    /// Skip lag selection and run stage 2 with these cluster counts.
    pub fixed_k: Option<Vec<usize>>,
    /// Sample from the prior: emission terms are dropped everywhere.
    pub ignore_likelihood: bool,
    pub resample_varphi: bool,
    pub anneal_t0: f64,
    pub anneal_m0: f64,
    /// Clusters used for the k-means start; `C` when unset.
    pub kmeans_clusters: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            total: 5000,
            burnin: 2000,
            thin: 5,
            stage1: 3000,
            seed: 0,
            hdp_hmm_mode: false,
            fixed_k: None,
            ignore_likelihood: false,
            resample_varphi: true,
            anneal_t0: 1000.0,
            anneal_m0: 1000.0,
            kmeans_clusters: None,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.total == 0 {
            return bad("total must be positive".into());
        }
        if self.burnin >= self.total {
            return bad(format!("burnin {} must be below total {}", self.burnin, self.total));
        }
        if self.thin == 0 {
            return bad("thin must be positive".into());
        }
        if !(self.anneal_t0 >= 1.0) || !(self.anneal_m0 >= 1.0) {
            return bad("annealing needs T0 >= 1 and m0 >= 1".into());
        }
        if self.kmeans_clusters == Some(0) {
            return bad("kmeans_clusters must be positive".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule { t0: self.anneal_t0, m0: self.anneal_m0 }
    }
}

/// Progress report, emitted every 100 iterations by [`run_with_progress`].
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub temperature: f64,
    pub loglik: f64,
    pub k: Vec<usize>,
}

pub fn check_data(y: &[f64], family: Family) -> Result<()> {
    for (index, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidObservation { index, reason: "not finite".into() });
        }
        if family == Family::Poisson {
            emissions::check_count(v, index)?;
        }
    }
    Ok(())
}

/// One chain with its data and stage bookkeeping.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: ModelConfig,
    run: RunConfig,
    y: Vec<f64>,
    state: ChainState,
    clusters: Option<HardClustering>,
    iteration: usize,
}

impl Sampler {
    /// k-means states, `k = (2, 1, .., 1)` with a random split of lag 1, flat base vector.
    pub fn new<R: Rng + ?Sized>(y: &[f64], cfg: &ModelConfig, run: &RunConfig, rng: &mut R) -> Result<Self> {
        run.check()?;
        let mut cfg = cfg.clone();
        if run.hdp_hmm_mode {
            cfg.max_lag = 1;
        }
        cfg.check()?;
        check_data(y, cfg.family)?;
        let (n_st, q) = (cfg.n_states, cfg.max_lag);
        if y.len() <= q {
            return Err(Error::InsufficientData(format!("T = {} must exceed q = {q}", y.len())));
        }
        let n_init = run.kmeans_clusters.unwrap_or(n_st).min(n_st);
        let (c, centers) = init::kmeans(y, n_init, rng);
        let emission = if run.ignore_likelihood {
            emissions::sample_prior_emission(&cfg, rng)
        } else {
            initial_emission(&cfg, y, &c, &centers)
        };
        let s = match &emission {
            EmissionModel::Tmix { pi_eta, .. } => (0..y.len()).map(|_| categorical(pi_eta, rng)).collect(),
            _ => Vec::new(),
        };
        let lambda0 = vec![1.0 / n_st as f64; n_st];
        let clusters = if run.hdp_hmm_mode {
            Some(HardClustering::identity(n_st, 1))
        } else if run.fixed_k.is_some() {
            None
        } else {
            Some(HardClustering::initial(n_st, q, rng))
        };
        let k = match (&clusters, &run.fixed_k) {
            (Some(h), _) => h.k(),
            (None, Some(k)) => k.clone(),
            (None, None) => unreachable!(),
        };
        if k.len() != q {
            return Err(Error::InvalidK(format!("fixed k has {} lags, q = {q}", k.len())));
        }
        check_k(&k, n_st)?;
        let n_tuples: usize = k.iter().product();
        let factorization = TensorFactorization {
            lambda: lambda0.repeat(n_tuples),
            lambda0,
            pi: k.iter().map(|&kj| vec![1.0 / kj as f64; n_st * kj]).collect(),
            k,
        };
        let mut state =
            ChainState { c, z: Vec::new(), s, factorization, emission, alpha: 1.0, varphi: 1.0 / cfg.varphi0 };
        match &clusters {
            Some(h) => stage1::sync_hard_allocation(&mut state, h),
            None => {
                for j in 0..q {
                    let kj = state.factorization.k[j];
                    if kj > 1 {
                        let p: Vec<f64> =
                            (0..n_st).flat_map(|_| dirichlet(&vec![cfg.gamma_j_scale; kj], rng)).collect();
                        state.factorization.pi[j] = p;
                    }
                }
                state.z = (0..q)
                    .map(|j| {
                        (q..y.len())
                            .map(|t| categorical(state.factorization.mode_weights(j, state.c[t - j - 1]), rng))
                            .collect()
                    })
                    .collect();
            }
        }
        let counts = gibbs::transition_counts(&state);
        gibbs::gibbs_sample_lambda(&mut state, &counts, rng);
        Ok(Sampler { cfg, run: run.clone(), y: y.to_vec(), state, clusters, iteration: 0 })
    }

    /// Resume from an explicit state. With `clusters` the chain starts in stage 1.
    pub fn from_state(
        y: &[f64],
        cfg: &ModelConfig,
        run: &RunConfig,
        state: ChainState,
        clusters: Option<HardClustering>,
    ) -> Result<Self> {
        run.check()?;
        cfg.check()?;
        check_data(y, cfg.family)?;
        if y.len() != state.len() {
            return Err(Error::LengthMismatch { left: y.len(), right: state.len() });
        }
        let problems = validate(&state, cfg);
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems.join("; ")));
        }
        Ok(Sampler { cfg: cfg.clone(), run: run.clone(), y: y.to_vec(), state, clusters, iteration: 0 })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ChainState {
        &mut self.state
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn clusters(&self) -> Option<&HardClustering> {
        self.clusters.as_ref()
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    /// Replace the observations, e.g. after regenerating them from the current state.
    pub fn set_data(&mut self, y: Vec<f64>) {
        debug_assert_eq!(y.len(), self.state.len());
        self.y = y;
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn in_stage1(&self) -> bool {
        !self.run.hdp_hmm_mode && self.clusters.is_some()
    }

    /// Temperature the next stage-1 sweep uses.
    pub fn temperature(&self) -> f64 {
        if self.in_stage1() {
            self.run.schedule().temperature(self.iteration)
        } else {
            1.0
        }
    }

    /// One iteration; leaves stage 1 after `run.stage1` iterations.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.in_stage1() && self.iteration >= self.run.stage1 {
            self.clusters = None;
        }
        if self.in_stage1() {
            self.sweep_stage1(rng)?;
        } else {
            self.sweep_stage2(rng)?;
        }
        self.iteration += 1;
        Ok(())
    }

    pub fn sweep_stage1<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let temp = self.temperature();
        let clusters = self.clusters.as_mut().ok_or_else(|| Error::InvalidConfig("no hard clustering".into()))?;
        let logf = gibbs::emission_table(&self.state, &self.y, !self.run.ignore_likelihood);
        stage1_update_cz(&mut self.state, clusters, &logf, temp, rng);
        stage1_update_k(&self.state, clusters, rng);
        stage1::sync_hard_allocation(&mut self.state, clusters);
        self.update_transition_parameters(rng);
        self.update_emissions(rng)?;
        self.update_varphi(rng);
        Ok(())
    }

    pub fn sweep_stage2<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let logf = gibbs::emission_table(&self.state, &self.y, !self.run.ignore_likelihood);
        if self.run.hdp_hmm_mode {
            gibbs::gibbs_sample_c_first_order(&mut self.state, &logf, rng);
        } else {
            gibbs::gibbs_sample_c(&mut self.state, &logf, rng);
            gibbs::gibbs_sample_z(&mut self.state, rng);
            gibbs::gibbs_sample_pi(&mut self.state, &self.cfg, rng);
        }
        self.update_transition_parameters(rng);
        self.update_emissions(rng)?;
        self.update_varphi(rng);
        Ok(())
    }

    /// Tables, `λ0`, `α`, then kernels; the kernels go last because the first three
    /// updates are collapsed over them.
    fn update_transition_parameters<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let counts = gibbs::transition_counts(&self.state);
        let tables = gibbs::gibbs_sample_lambda0(&mut self.state, &counts, &self.cfg, rng);
        let totals = hyper::restaurant_totals(&counts, self.cfg.n_states);
        let m0: usize = tables.iter().sum();
        self.state.alpha = hyper::sample_alpha(self.state.alpha, &totals, m0, &self.cfg, rng);
        gibbs::gibbs_sample_lambda(&mut self.state, &counts, rng);
    }

    fn update_emissions<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.run.ignore_likelihood {
            let e = emissions::sample_prior_emission(&self.cfg, rng);
            if let EmissionModel::Tmix { pi_eta, .. } = &e {
                self.state.s = (0..self.y.len()).map(|_| categorical(pi_eta, rng)).collect();
            }
            self.state.emission = e;
            return Ok(());
        }
        let (e, s) = emissions::gibbs_update(&self.state.emission, &self.state.c, &self.y, &self.cfg, rng)?;
        self.state.emission = e;
        if !s.is_empty() {
            self.state.s = s;
        }
        Ok(())
    }

    fn update_varphi<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.run.resample_varphi {
            self.state.varphi = hyper::sample_varphi(&self.state.factorization.k, &self.cfg, rng);
        }
    }

    /// Complete-data log likelihood `Σ_t log f(y_t | c_t, s_t) + Σ_{t>q} log λ_{z_t}(c_t)`.
    pub fn complete_loglik(&self) -> f64 {
        complete_loglik(&self.state, &self.y)
    }
}

pub fn complete_loglik(state: &ChainState, y: &[f64]) -> f64 {
    let f = &state.factorization;
    let q = f.order();
    let strides = f.strides();
    let mut total = 0.0;
    for (t, &yt) in y.iter().enumerate() {
        let s = state.s.get(t).copied();
        total += emissions::log_density(&state.emission, yt, state.c[t], s).unwrap_or(f64::NEG_INFINITY);
    }
    for t in q..state.c.len() {
        total += f.kernel(state.tuple_at(t, &strides))[state.c[t]].ln();
    }
    total
}

fn initial_emission(cfg: &ModelConfig, y: &[f64], c: &[usize], centers: &[f64]) -> EmissionModel {
    let n_st = cfg.n_states;
    let (mean, var) = crate::model::moments(y);
    let var = if var > 0.0 { var } else { 1.0 };
    let used = centers.len();
    let mut mu: Vec<f64> = vec![mean; n_st];
    mu[..used].copy_from_slice(centers);
    // States without a k-means cluster are spread over the data range.
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let spare = n_st - used;
    for (i, m) in mu[used..].iter_mut().enumerate() {
        *m = lo + (hi - lo) * (i as f64 + 0.5) / spare as f64;
    }
    let rss: f64 = c.iter().zip(y).map(|(&ct, &yt)| (yt - mu[ct]).powi(2)).sum();
    let pooled = (rss / y.len() as f64).max(1e-2 * var);
    match cfg.family {
        Family::Normal => {
            let mut sigmasq = vec![var; n_st];
            sigmasq[..used].iter_mut().for_each(|v| *v = pooled);
            EmissionModel::Normal { mu, sigmasq }
        }
        Family::Poisson => EmissionModel::Poisson { mu: mu.into_iter().map(|m| m.max(0.1)).collect() },
        Family::Tmix => {
            let s = cfg.n_components;
            EmissionModel::Tmix { mu, eta: vec![0.0; s], sigmasq_s: vec![pooled; s], pi_eta: vec![1.0 / s as f64; s] }
        }
    }
}

/// Run a full chain and keep every `thin`-th state after burn-in.
pub fn run<R: Rng + ?Sized>(y: &[f64], cfg: &ModelConfig, run: &RunConfig, rng: &mut R) -> Result<PosteriorSamples> {
    run_with_progress(y, cfg, run, rng, |_| {})
}

/// [`run`] seeded from `run.seed` on stream 0.
pub fn run_seeded(y: &[f64], cfg: &ModelConfig, run_cfg: &RunConfig) -> Result<PosteriorSamples> {
    let mut rng = stream_rng(run_cfg.seed, 0);
    run(y, cfg, run_cfg, &mut rng)
}

pub fn run_with_progress<R: Rng + ?Sized, F: FnMut(&Progress)>(
    y: &[f64],
    cfg: &ModelConfig,
    run_cfg: &RunConfig,
    rng: &mut R,
    mut progress: F,
) -> Result<PosteriorSamples> {
    let mut sampler = Sampler::new(y, cfg, run_cfg, rng)?;
    let mut out = PosteriorSamples {
        config: sampler.config().clone(),
        total: run_cfg.total,
        burnin: run_cfg.burnin,
        thin: run_cfg.thin,
        stage1: run_cfg.stage1,
        seed: run_cfg.seed,
        hdp_hmm_mode: run_cfg.hdp_hmm_mode,
        data: y.to_vec(),
        iterations: Vec::new(),
        loglik: Vec::new(),
        snapshots: Vec::new(),
    };
    for m in 1..=run_cfg.total {
        let temperature = sampler.temperature();
        sampler.step(rng)?;
        let keep = m > run_cfg.burnin && (m - run_cfg.burnin).is_multiple_of(run_cfg.thin);
        if keep || m.is_multiple_of(100) {
            let ll = sampler.complete_loglik();
            if m % 100 == 0 {
                progress(&Progress {
                    iteration: m,
                    temperature,
                    loglik: ll,
                    k: sampler.state().factorization.k.clone(),
                });
            }
            if keep {
                let problems = validate(sampler.state(), sampler.config());
                if !problems.is_empty() {
                    return Err(Error::Numerical(format!("iteration {m}: {}", problems.join("; "))));
                }
                out.iterations.push(m);
                out.loglik.push(ll);
                out.snapshots.push(sampler.state().clone());
            }
        }
    }
    Ok(out)
}
