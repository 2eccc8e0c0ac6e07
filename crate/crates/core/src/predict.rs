//! r-step-ahead predictive densities and their integrated squared error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emissions::log_density;
use crate::error::{Error, Result};
use crate::model::{moments, ChainState, EmissionModel, Family, PosteriorSamples};
use crate::transition::{FirstOrderOracle, TransitionModel};

pub const MAX_STEPS: usize = 50;
pub const CONTINUOUS_POINTS: usize = 512;

/// Density values on a grid. Discrete grids hold consecutive integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub discrete: bool,
}

impl DensityGrid {
    pub fn zeros_like(grid: &Grid) -> Self {
        DensityGrid { points: grid.points.clone(), values: vec![0.0; grid.points.len()], discrete: grid.discrete }
    }

    /// Trapezoid area for continuous grids, plain sum for discrete ones.
    pub fn mass(&self) -> f64 {
        if self.discrete {
            return self.values.iter().sum();
        }
        self.points.windows(2).zip(self.values.windows(2)).map(|(p, v)| 0.5 * (v[0] + v[1]) * (p[1] - p[0])).sum()
    }
}

/// Evaluation points only.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    pub discrete: bool,
}

impl Grid {
    /// 512 points over `[min - 3 sd, max + 3 sd]`, or the integers `max(0, min - 1)..=max + 1`.
    pub fn for_data(y: &[f64], family: Family) -> Result<Grid> {
        if y.is_empty() {
            return Err(Error::InsufficientData("no observations to span a grid".into()));
        }
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if family == Family::Poisson {
            let start = (lo - 1.0).max(0.0) as i64;
            let end = hi as i64 + 1;
            return Ok(Grid { points: (start..=end).map(|i| i as f64).collect(), discrete: true });
        }
        let sd = moments(y).1.sqrt();
        Ok(Grid::linspace(lo - 3.0 * sd, hi + 3.0 * sd, CONTINUOUS_POINTS))
    }

    pub fn linspace(lo: f64, hi: f64, n: usize) -> Grid {
        let step = (hi - lo) / (n - 1) as f64;
        Grid { points: (0..n).map(|i| lo + step * i as f64).collect(), discrete: false }
    }
}

/// Distribution of `c_{T+r}` given the most recent states (oldest first).
///
/// Only the window spanned by lags the model uses is tracked.
pub fn state_distribution<M: TransitionModel + ?Sized>(
    model: &M,
    history: &[usize],
    window: usize,
    r: usize,
) -> Result<Vec<f64>> {
    if r == 0 || r > MAX_STEPS {
        return Err(Error::InvalidConfig(format!("prediction horizon r = {r} outside 1..={MAX_STEPS}")));
    }
    let c = model.n_states();
    let q = model.order();
    let window = window.clamp(1, q);
    if history.len() < window {
        return Err(Error::InsufficientData(format!("{} past states for a window of {window}", history.len())));
    }
    let n_codes = c.pow(window as u32);
    // Window code: oldest state most significant.
    let start = history[history.len() - window..].iter().fold(0, |acc, &h| acc * c + h);
    let mut dist: BTreeMap<usize, f64> = BTreeMap::new();
    dist.insert(start, 1.0);
    let mut lags = vec![0; q];
    let mut probs = vec![0.0; c];
    for _ in 0..r {
        let mut next = BTreeMap::new();
        for (&code, &p) in &dist {
            let mut rest = code;
            for l in lags.iter_mut().take(window) {
                *l = rest % c;
                rest /= c;
            }
            model.next_probs(&lags, &mut probs);
            let shifted = (code * c) % n_codes;
            for (s, &ps) in probs.iter().enumerate() {
                if ps > 0.0 {
                    *next.entry(shifted + s).or_insert(0.0) += p * ps;
                }
            }
        }
        dist = next;
    }
    let mut marginal = vec![0.0; c];
    for (code, p) in dist {
        marginal[code % c] += p;
    }
    Ok(marginal)
}

/// `Σ_c w_c f(y | c)` at every grid point.
pub fn mixture_density(emission: &EmissionModel, weights: &[f64], grid: &Grid) -> Result<DensityGrid> {
    let mut out = DensityGrid::zeros_like(grid);
    for (v, &y) in out.values.iter_mut().zip(&grid.points) {
        let mut acc = 0.0;
        for (c, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w * log_density(emission, y, c, None)?.exp();
            }
        }
        *v = acc;
    }
    Ok(out)
}

/// Predictive density of one snapshot, seeded at its own terminal states.
pub fn snapshot_density(state: &ChainState, r: usize, grid: &Grid) -> Result<DensityGrid> {
    let f = &state.factorization;
    let window = f.important_lags().last().copied().unwrap_or(1);
    let weights = state_distribution(f, &state.c, window, r)?;
    mixture_density(&state.emission, &weights, grid)
}

/// Monte Carlo average of [`snapshot_density`] over all snapshots, in snapshot order.
pub fn predictive_density(samples: &PosteriorSamples, r: usize, grid: &Grid) -> Result<DensityGrid> {
    Ok(predictive_bands(samples, r, grid)?.mean)
}

/// Pointwise mean and 5/50/95% quantiles across snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveBands {
    pub mean: DensityGrid,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
}

pub fn predictive_bands(samples: &PosteriorSamples, r: usize, grid: &Grid) -> Result<PredictiveBands> {
    if samples.snapshots.is_empty() {
        return Err(Error::InsufficientData("no posterior snapshots".into()));
    }
    let per: Vec<DensityGrid> =
        samples.snapshots.iter().map(|s| snapshot_density(s, r, grid)).collect::<Result<_>>()?;
    let n = per.len() as f64;
    let mut mean = DensityGrid::zeros_like(grid);
    for d in &per {
        for (m, v) in mean.values.iter_mut().zip(&d.values) {
            *m += v;
        }
    }
    mean.values.iter_mut().for_each(|m| *m /= n);
    let mut q05 = Vec::with_capacity(grid.points.len());
    let mut q50 = Vec::with_capacity(grid.points.len());
    let mut q95 = Vec::with_capacity(grid.points.len());
    let mut column = vec![0.0; per.len()];
    for i in 0..grid.points.len() {
        for (slot, d) in column.iter_mut().zip(&per) {
            *slot = d.values[i];
        }
        column.sort_by(f64::total_cmp);
        q05.push(quantile_sorted(&column, 0.05));
        q50.push(quantile_sorted(&column, 0.5));
        q95.push(quantile_sorted(&column, 0.95));
    }
    Ok(PredictiveBands { mean, q05, q50, q95 })
}

/// Linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// The exact r-step predictive density of a known chain from known past states.
pub fn exact_predictive_density(
    oracle: &FirstOrderOracle,
    emission: &EmissionModel,
    history: &[usize],
    r: usize,
    grid: &Grid,
) -> Result<DensityGrid> {
    let weights = state_distribution(&oracle.tensor, history, oracle.order(), r)?;
    mixture_density(emission, &weights, grid)
}

/// Stationary mixture `Σ_c π(c) f(y | c)`, the long-horizon limit of the predictive density.
pub fn stationary_density(oracle: &FirstOrderOracle, emission: &EmissionModel, grid: &Grid) -> Result<DensityGrid> {
    mixture_density(emission, &oracle.state_marginal(), grid)
}

/// `Σ_i (f0 - f)^2 Δ_i` with `Δ_i = y_i - y_{i-1}`, or the plain sum on discrete grids.
pub fn ise(est: &DensityGrid, truth: &DensityGrid) -> Result<f64> {
    if est.points != truth.points || est.discrete != truth.discrete {
        return Err(Error::GridMismatch("estimate and truth use different grids".into()));
    }
    let sq = |i: usize| (truth.values[i] - est.values[i]).powi(2);
    if est.discrete {
        return Ok((0..est.points.len()).map(sq).sum());
    }
    Ok((1..est.points.len()).map(|i| sq(i) * (est.points[i] - est.points[i - 1])).sum())
}

/// `Σ_i |f0 - f| Δ_i`, or the plain sum on discrete grids.
pub fn l1_distance(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    if a.points != b.points || a.discrete != b.discrete {
        return Err(Error::GridMismatch("densities use different grids".into()));
    }
    let d = |i: usize| (a.values[i] - b.values[i]).abs();
    if a.discrete {
        return Ok((0..a.points.len()).map(d).sum());
    }
    Ok((1..a.points.len()).map(|i| d(i) * (a.points[i] - a.points[i - 1])).sum())
}
