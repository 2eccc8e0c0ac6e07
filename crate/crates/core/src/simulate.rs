//! Synthetic benchmarks: stick-breaking transition tensors over a few important
//! lags and the fixed emission truths of the three families.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emissions::sample_observation;
use crate::error::{Error, Result};
use crate::model::{one_based, EmissionModel, Family};
use crate::transition::{simulate_states, TransitionTensor};

/// Steps discarded before recording so the chain is close to stationarity.
pub const BURN_STEPS: usize = 200;

/// `u^2 / (u^2 + (1 - u)^2)`.
pub fn stick_transform(u: f64) -> f64 {
    let a = u * u;
    a / (a + (1.0 - u) * (1.0 - u))
}

/// One stick-breaking probability vector over `n_states` categories.
pub fn stick_breaking_row<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> Vec<f64> {
    let mut row = Vec::with_capacity(n_states);
    let mut rest = 1.0;
    for _ in 0..n_states - 1 {
        let p = stick_transform(rng.random::<f64>()) * rest;
        row.push(p);
        rest -= p;
    }
    row.push(rest.max(0.0));
    row
}

/// Order-`max(lags)` tensor whose rows depend only on the listed (1-based) lags.
pub fn generate_true_tensor<R: Rng + ?Sized>(
    n_states: usize,
    important_lags: &[usize],
    rng: &mut R,
) -> Result<TransitionTensor> {
    if n_states < 2 {
        return Err(Error::InvalidConfig("at least two states are needed".into()));
    }
    if important_lags.is_empty() || important_lags.contains(&0) {
        return Err(Error::InvalidConfig("important lags must be nonempty and 1-based".into()));
    }
    let mut lags = important_lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let order = *lags.last().unwrap();
    let combos = n_states.pow(lags.len() as u32);
    let rows: Vec<Vec<f64>> = (0..combos).map(|_| stick_breaking_row(n_states, rng)).collect();
    let n_rows = n_states.pow(order as u32);
    let mut probs = Vec::with_capacity(n_rows * n_states);
    for row in 0..n_rows {
        // row digit j (least significant first) is the state at lag j + 1
        let mut combo = 0;
        for &lag in &lags {
            combo = combo * n_states + (row / n_states.pow(lag as u32 - 1)) % n_states;
        }
        probs.extend_from_slice(&rows[combo]);
    }
    TransitionTensor::new(n_states, order, probs)
}

/// Simulate `len` observations; the initial lags are uniform and burned in.
pub fn generate_sequence<R: Rng + ?Sized>(
    tensor: &TransitionTensor,
    emission: &EmissionModel,
    len: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let init: Vec<usize> = (0..tensor.order).map(|_| rng.random_range(0..tensor.n_states)).collect();
    let mut c = simulate_states(tensor, &init, BURN_STEPS + len, rng);
    let c = c.split_off(BURN_STEPS);
    let mut s = Vec::new();
    let y = c
        .iter()
        .map(|&ct| {
            let (v, label) = sample_observation(emission, ct, rng);
            s.extend(label);
            v
        })
        .collect();
    (y, c, s)
}

/// Emission truth of each family for three states.
pub fn true_emission(family: Family) -> EmissionModel {
    match family {
        Family::Normal => EmissionModel::Normal { mu: vec![-2.0, 0.0, 2.0], sigmasq: vec![0.25; 3] },
        Family::Poisson => EmissionModel::Poisson { mu: vec![1.0, 8.0, 15.0] },
        // The last shift is 4/3 so that the weighted shifts sum to zero exactly.
        Family::Tmix => EmissionModel::Tmix {
            mu: vec![-4.0, 0.0, 4.0],
            eta: vec![-2.0, 0.0, 4.0 / 3.0],
            sigmasq_s: vec![0.25; 3],
            pi_eta: vec![0.2, 0.5, 0.3],
        },
    }
}

/// A named benchmark scenario: state count and important lags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n_states: usize,
    pub lags: Vec<usize>,
}

pub const SCENARIO_NAMES: [&str; 5] = ["A", "B", "C", "D", "E"];

pub fn scenario(name: &str) -> Result<Scenario> {
    let lags = match name.to_ascii_uppercase().as_str() {
        "A" => vec![1],
        "B" => vec![1, 2, 3],
        "C" => vec![1, 2, 4],
        "D" => vec![1, 3, 5],
        "E" => vec![1, 4, 8],
        other => return Err(Error::Parse(format!("unknown scenario `{other}`"))),
    };
    Ok(Scenario { name: name.to_ascii_uppercase(), n_states: 3, lags })
}

/// Parse `B`, `B1`, `c3`: a scenario letter with an optional family digit.
pub fn parse_scenario(spec: &str) -> Result<(Scenario, Option<Family>)> {
    let spec = spec.trim();
    let mut chars = spec.chars();
    let letter = chars.next().ok_or_else(|| Error::Parse("empty scenario".into()))?;
    let rest: String = chars.collect();
    let family = if rest.is_empty() { None } else { Some(rest.parse::<Family>()?) };
    Ok((scenario(&letter.to_string())?, family))
}

/// Ground truth of one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedData {
    pub scenario: Scenario,
    pub family: Family,
    pub seed: u64,
    pub tensor: TransitionTensor,
    pub emission: EmissionModel,
    #[serde(with = "one_based")]
    pub c: Vec<usize>,
    #[serde(with = "one_based", default)]
    pub s: Vec<usize>,
    pub y: Vec<f64>,
}

pub fn simulate_dataset<R: Rng + ?Sized>(
    scenario: &Scenario,
    family: Family,
    len: usize,
    seed: u64,
    rng: &mut R,
) -> Result<SimulatedData> {
    let tensor = generate_true_tensor(scenario.n_states, &scenario.lags, rng)?;
    let emission = true_emission(family);
    let (y, c, s) = generate_sequence(&tensor, &emission, len, rng);
    Ok(SimulatedData { scenario: scenario.clone(), family, seed, tensor, emission, c, s, y })
}
