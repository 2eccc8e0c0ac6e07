//! Browser bindings for the demo page in `www/`.
//!
//! Results cross the boundary as JSON strings so the page needs no glue beyond
//! `JSON.parse`. Everything is seeded; the same inputs redraw the same plots.

use hohmm::evaluate::{lag_inclusion, point_state_estimate};
use hohmm::predict::{predictive_bands, Grid};
use hohmm::random::stream_rng;
use hohmm::simulate::{parse_scenario, simulate_dataset};
use hohmm::transition::lag_prior_marginals;
use hohmm::{Family, ModelConfig, RunConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Demo fits stay small enough to finish in a page.
pub const MAX_DEMO_ITERS: usize = 3000;
pub const MAX_DEMO_LEN: usize = 2000;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn family(name: &str) -> Result<Family, JsValue> {
    name.parse().map_err(js_err)
}

/// Simulated series: `{"y": [..], "c": [..]}` with 1-based states.
#[wasm_bindgen]
pub fn simulate(scenario: &str, family_name: &str, len: usize, seed: u32) -> Result<String, JsValue> {
    let (sc, _) = parse_scenario(scenario).map_err(js_err)?;
    let len = len.clamp(sc.lags.iter().max().copied().unwrap_or(1) + 2, MAX_DEMO_LEN);
    let mut rng = stream_rng(seed as u64, 1);
    let d = simulate_dataset(&sc, family(family_name)?, len, seed as u64, &mut rng).map_err(js_err)?;
    let c: Vec<usize> = d.c.iter().map(|c| c + 1).collect();
    Ok(json!({ "y": d.y, "c": c }).to_string())
}

/// Fit and one-step prediction: band arrays, lag inclusion and the point state estimate.
#[wasm_bindgen]
pub fn fit_predict(
    y: Vec<f64>,
    family_name: &str,
    max_states: usize,
    max_lag: usize,
    iters: usize,
    seed: u32,
    hdp_hmm: bool,
) -> Result<String, JsValue> {
    let fam = family(family_name)?;
    let total = iters.clamp(50, MAX_DEMO_ITERS);
    let cfg = ModelConfig::from_data(fam, max_states, max_lag, &y);
    let run = RunConfig {
        total,
        burnin: total * 2 / 5,
        stage1: total * 3 / 5,
        thin: 5,
        seed: seed as u64,
        hdp_hmm_mode: hdp_hmm,
        ..RunConfig::default()
    };
    let samples = hohmm::sampler::run_seeded(&y, &cfg, &run).map_err(js_err)?;
    let grid = Grid::for_data(&y, fam).map_err(js_err)?;
    let bands = predictive_bands(&samples, 1, &grid).map_err(js_err)?;
    let states: Vec<usize> = point_state_estimate(&samples).map_err(js_err)?.iter().map(|c| c + 1).collect();
    Ok(json!({
        "points": bands.mean.points,
        "mean": bands.mean.values,
        "q05": bands.q05,
        "q95": bands.q95,
        "inclusion": lag_inclusion(&samples).map_err(js_err)?,
        "states": states,
    })
    .to_string())
}

/// `P(k_j = v)` under the lag prior, one row per lag.
#[wasm_bindgen]
pub fn lag_prior(max_states: usize, max_lag: usize, varphi: f64) -> Result<String, JsValue> {
    if max_states < 2 || max_lag < 1 || varphi.is_nan() || varphi <= 0.0 {
        return Err(js_err("need C >= 2, q >= 1 and varphi > 0"));
    }
    serde_json::to_string(&lag_prior_marginals(max_states, max_lag, varphi)).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_then_fit_round_trips_through_json() {
        let sim: serde_json::Value = serde_json::from_str(&simulate("A", "normal", 120, 4).unwrap()).unwrap();
        let y: Vec<f64> = serde_json::from_value(sim["y"].clone()).unwrap();
        assert_eq!(y.len(), 120);
        let fit: serde_json::Value =
            serde_json::from_str(&fit_predict(y, "normal", 4, 2, 100, 4, false).unwrap()).unwrap();
        assert_eq!(fit["inclusion"].as_array().unwrap().len(), 2);
        assert_eq!(fit["points"].as_array().unwrap().len(), fit["q95"].as_array().unwrap().len());
    }

    #[test]
    fn lag_prior_rows_are_distributions() {
        let rows: Vec<Vec<f64>> = serde_json::from_str(&lag_prior(4, 3, 0.8).unwrap()).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
