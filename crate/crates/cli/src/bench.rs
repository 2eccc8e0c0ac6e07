//! Scoring a fit against simulated truth, and replicated benchmarks.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use hohmm::evaluate::{hamming_distance, lag_inclusion, point_state_estimate, state_count_distribution};
use hohmm::predict::{ise, mixture_density, predictive_density, state_distribution, Grid};
use hohmm::simulate::{parse_scenario, SimulatedData};
use hohmm::{Error, Family, PosteriorSamples};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{fit, simulate};
use crate::config::{resolve_model, resolve_run, FileConfig, ModelOverrides, RunOverrides};
use crate::{CliError, Result};

/// Horizons scored by ISE.
pub const ISE_HORIZONS: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Factorized higher-order model with lag selection.
    Ctf,
    /// First-order HDP-HMM baseline.
    Hdp,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ctf" => Ok(Method::Ctf),
            "hdp" | "hdp-hmm" => Ok(Method::Hdp),
            other => Err(format!("unknown method `{other}` (expected ctf or hdp)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ctf => "ctf",
            Method::Hdp => "hdp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub dataset_id: String,
    pub method: Method,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianRow {
    pub scenario: String,
    pub method: Method,
    pub metric: String,
    pub median: f64,
    pub replicates: usize,
}

fn family_digit(f: Family) -> u8 {
    match f {
        Family::Normal => 1,
        Family::Poisson => 2,
        Family::Tmix => 3,
    }
}

/// Scenario letter plus family digit, e.g. `B1`.
pub fn scenario_label(truth: &SimulatedData) -> String {
    format!("{}{}", truth.scenario.name, family_digit(truth.family))
}

pub fn dataset_id(truth: &SimulatedData) -> String {
    format!("{}-s{}", scenario_label(truth), truth.seed)
}

/// ISE at horizons 1..3, Hamming of the point estimate, lag inclusion and state-count shares.
///
/// The true predictive runs on the dense tensor directly, so long-memory
/// scenarios are not limited by the first-order embedding's size cap.
pub fn score_fit(samples: &PosteriorSamples, truth: &SimulatedData) -> Result<Vec<(String, f64)>> {
    if samples.data.len() != truth.y.len() {
        return Err(Error::LengthMismatch { left: samples.data.len(), right: truth.y.len() }.into());
    }
    let grid = Grid::for_data(&truth.y, truth.family)?;
    let mut out = Vec::new();
    for r in ISE_HORIZONS {
        let weights = state_distribution(&truth.tensor, &truth.c, truth.tensor.order, r)?;
        let f0 = mixture_density(&truth.emission, &weights, &grid)?;
        let fhat = predictive_density(samples, r, &grid)?;
        out.push((format!("ise_r{r}"), ise(&fhat, &f0)?));
    }
    let estimate = point_state_estimate(samples)?;
    let n_labels = samples.config.n_states.max(truth.scenario.n_states);
    out.push(("hamming".into(), hamming_distance(&truth.c, &estimate, n_labels)?));
    for (j, p) in lag_inclusion(samples)?.into_iter().enumerate() {
        out.push((format!("incl_lag{}", j + 1), p));
    }
    let hist = state_count_distribution(samples)?;
    let n = samples.snapshots.len() as f64;
    for (m, &h) in hist.iter().enumerate().skip(1) {
        out.push((format!("nstates_{m}"), h as f64 / n));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    /// Scenario letters with optional family digits, e.g. `B1`.
    pub scenarios: Vec<String>,
    pub replicates: usize,
    pub len: usize,
    /// Replicate `i` simulates and fits with seed `seed + i`.
    pub seed: u64,
    pub methods: Vec<Method>,
    pub model: ModelOverrides,
    pub run: RunOverrides,
    pub file: FileConfig,
    /// Worker threads; all available cores when `None`.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub scores: Vec<ScoreRow>,
    pub medians: Vec<MedianRow>,
    /// One line per fit, in replicate order.
    pub log: Vec<String>,
}

impl BenchmarkResult {
    pub fn median(&self, scenario: &str, method: Method, metric: &str) -> Option<f64> {
        self.medians
            .iter()
            .find(|m| m.scenario == scenario && m.method == method && m.metric == metric)
            .map(|m| m.median)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

type FitOutcome = (Vec<ScoreRow>, String);

fn run_one(spec: &BenchmarkSpec, scenario: &str, replicate: usize, method: Method) -> Result<FitOutcome> {
    let (sc, digit_family) = parse_scenario(scenario)?;
    let family = digit_family.or(spec.model.family).unwrap_or(Family::Normal);
    let seed = spec.seed + replicate as u64;
    let truth = simulate(&sc, family, spec.len, seed)?;
    let model = ModelOverrides { family: Some(family), ..spec.model.clone() };
    let cfg = resolve_model(&spec.file, &model, &truth.y)?;
    let run_flags = RunOverrides { hdp_hmm_mode: method == Method::Hdp, ..spec.run.clone() };
    let run = resolve_run(&spec.file, &run_flags, seed)?;
    let samples = fit(&truth.y, &cfg, &run, |_| {})?;
    let id = dataset_id(&truth);
    let scores = score_fit(&samples, &truth)?;
    let value = |name: &str| scores.iter().find(|(m, _)| m == name).map_or(f64::NAN, |s| s.1);
    let line = format!("{id} {method} ise_r1 {:.6e} hamming {:.4}", value("ise_r1"), value("hamming"));
    let rows =
        scores.into_iter().map(|(metric, value)| ScoreRow { dataset_id: id.clone(), method, metric, value }).collect();
    Ok((rows, line))
}

/// Simulate, fit and score every (scenario, replicate, method), then take medians.
///
/// Fits run on a worker pool; results are keyed by task so the output does not
/// depend on scheduling.
pub fn benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkResult> {
    if spec.replicates == 0 || spec.scenarios.is_empty() || spec.methods.is_empty() {
        return Err(CliError::Usage("benchmark needs at least one scenario, method and replicate".into()));
    }
    let mut labels = Vec::new();
    for s in &spec.scenarios {
        let (sc, fam) = parse_scenario(s)?;
        labels.push(format!("{}{}", sc.name, family_digit(fam.or(spec.model.family).unwrap_or(Family::Normal))));
    }
    let tasks: Vec<(usize, usize, Method)> = (0..spec.scenarios.len())
        .flat_map(|i| (0..spec.replicates).flat_map(move |r| spec.methods.iter().map(move |&m| (i, r, m))))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = spec.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let results: BTreeMap<(usize, usize, Method), Result<FitOutcome>> = pool
        .install(|| tasks.par_iter().map(|&(i, r, m)| ((i, r, m), run_one(spec, &spec.scenarios[i], r, m))).collect());

    let mut scores = Vec::new();
    let mut log = Vec::new();
    let mut groups: Vec<((usize, Method, String), Vec<f64>)> = Vec::new();
    let mut index: HashMap<(usize, Method, String), usize> = HashMap::new();
    for ((i, _, method), res) in results {
        let (rows, line) = res?;
        log.push(line);
        for row in rows {
            let key = (i, method, row.metric.clone());
            let g = *index.entry(key.clone()).or_insert_with(|| {
                groups.push((key, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(row.value);
            scores.push(row);
        }
    }
    // Scenario order as given, CTF before HDP, metrics in first-seen order.
    groups.sort_by_key(|((i, m, _), _)| (*i, *m));
    let medians = groups
        .into_iter()
        .map(|((i, method, metric), values)| MedianRow {
            scenario: labels[i].clone(),
            method,
            metric,
            median: median(&values),
            replicates: values.len(),
        })
        .collect();
    Ok(BenchmarkResult { scores, medians, log })
}
