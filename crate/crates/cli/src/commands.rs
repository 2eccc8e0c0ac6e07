//! Command implementations. Each writes only into its `--out` directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use hohmm::io::{read_observations, read_posterior, write_bands, write_observations, write_posterior};
use hohmm::predict::{predictive_bands, Grid};
use hohmm::random::stream_rng;
use hohmm::sampler::run_with_progress;
use hohmm::simulate::{parse_scenario, simulate_dataset, Scenario, SimulatedData};
use hohmm::{Family, ModelConfig, PosteriorSamples, RunConfig};

use crate::args::{BenchmarkArgs, Command, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs};
use crate::bench::{benchmark, dataset_id, score_fit, BenchmarkSpec, Method, ScoreRow};
use crate::config::{resolve_model, resolve_run, resolve_seed, FileConfig, ModelOverrides, RunOverrides};
use crate::{CliError, Result};

/// RNG stream for data generation; fits use stream 0 of the same seed.
pub const DATA_STREAM: u64 = 1;

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
    }
}

pub fn simulate(scenario: &Scenario, family: Family, len: usize, seed: u64) -> Result<SimulatedData> {
    if len <= scenario.lags.iter().copied().max().unwrap_or(0) {
        return Err(CliError::Usage(format!("T = {len} must exceed the scenario's largest lag")));
    }
    let mut rng = stream_rng(seed, DATA_STREAM);
    Ok(simulate_dataset(scenario, family, len, seed, &mut rng)?)
}

/// Run one chain, reporting a progress line every 100 iterations.
pub fn fit<F: FnMut(String)>(y: &[f64], cfg: &ModelConfig, run: &RunConfig, mut log: F) -> Result<PosteriorSamples> {
    let mut rng = stream_rng(run.seed, 0);
    let samples = run_with_progress(y, cfg, run, &mut rng, |p| {
        let k: Vec<String> = p.k.iter().map(|k| k.to_string()).collect();
        log(format!("iter {} temp {:.4} loglik {:.6} k {}", p.iteration, p.temperature, p.loglik, k.join(",")));
    })?;
    Ok(samples)
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_lines(out: &Path, name: &str, lines: &[String]) -> Result<()> {
    let mut w = create(out, name)?;
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_csv<T: serde::Serialize>(out: &Path, name: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(out, name)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| hohmm::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))).into())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let (sc, digit) = parse_scenario(&a.scenario)?;
    let family = a.family.or(digit).unwrap_or(Family::Normal);
    let seed = resolve_seed(a.seed, &FileConfig::default())?;
    let data = simulate(&sc, family, a.len, seed)?;
    let mut w = create(&a.out, "data.csv")?;
    write_observations(&mut w, &data.y)?;
    w.flush()?;
    let mut w = create(&a.out, "truth.json")?;
    serde_json::to_writer(&mut w, &data).map_err(hohmm::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    println!("{}: T = {} written to {}", dataset_id(&data), a.len, a.out.display());
    Ok(())
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let file = FileConfig::load(a.run.config.as_deref())?;
    let y = read_observations(open(&a.data)?)?;
    let seed = resolve_seed(a.seed, &file)?;
    let cfg = resolve_model(&file, &ModelOverrides::from(&a.model), &y)?;
    let run = resolve_run(&file, &RunOverrides { hdp_hmm_mode: a.hdp_hmm, ..RunOverrides::from(&a.run) }, seed)?;
    let mut log = vec![
        format!("model {}", serde_json::to_string(&cfg).map_err(hohmm::Error::from)?),
        format!("run {}", serde_json::to_string(&run).map_err(hohmm::Error::from)?),
        format!("observations {}", y.len()),
    ];
    let result = fit(&y, &cfg, &run, |l| log.push(l));
    let samples = match result {
        Ok(s) => s,
        Err(e) => {
            log.push(format!("error {e}"));
            write_lines(&a.out, "run.log", &log)?;
            return Err(e);
        }
    };
    log.push(format!("kept {} snapshots", samples.snapshots.len()));
    let mut w = create(&a.out, "posterior.jsonl")?;
    write_posterior(&mut w, &samples)?;
    w.flush()?;
    write_lines(&a.out, "run.log", &log)?;
    println!("{} snapshots written to {}", samples.snapshots.len(), a.out.join("posterior.jsonl").display());
    Ok(())
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let samples = read_posterior(open(&a.posterior)?)?;
    let grid = Grid::for_data(&samples.data, samples.config.family)?;
    for &r in &a.r {
        let bands = predictive_bands(&samples, r, &grid)?;
        let mut w = create(&a.out, &format!("pred_r{r}.csv"))?;
        write_bands(&mut w, &bands)?;
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let samples = read_posterior(open(&a.posterior)?)?;
    let truth: SimulatedData = serde_json::from_reader(open(&a.truth)?).map_err(hohmm::Error::from)?;
    let method = if samples.hdp_hmm_mode { Method::Hdp } else { Method::Ctf };
    let id = dataset_id(&truth);
    let rows: Vec<ScoreRow> = score_fit(&samples, &truth)?
        .into_iter()
        .map(|(metric, value)| ScoreRow { dataset_id: id.clone(), method, metric, value })
        .collect();
    write_csv(&a.out, "scores.csv", &rows)
}

pub fn cmd_benchmark(a: &BenchmarkArgs) -> Result<()> {
    let file = FileConfig::load(a.run.config.as_deref())?;
    let spec = BenchmarkSpec {
        scenarios: a.scenario.clone(),
        replicates: a.replicates,
        len: a.len,
        seed: resolve_seed(a.seed, &file)?,
        methods: a.methods.clone(),
        model: ModelOverrides::from(&a.model),
        run: RunOverrides::from(&a.run),
        file,
        jobs: a.jobs,
    };
    let result = benchmark(&spec)?;
    write_csv(&a.out, "scores.csv", &result.scores)?;
    write_csv(&a.out, "medians.csv", &result.medians)?;
    write_lines(&a.out, "run.log", &result.log)?;
    for m in result.medians.iter().filter(|m| m.metric == "ise_r1" || m.metric == "hamming") {
        println!("{} {} {} {:.6}", m.scenario, m.method, m.metric, m.median);
    }
    Ok(())
}
