//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hohmm::Family;

use crate::bench::Method;

#[derive(Debug, Parser)]
#[command(name = "hohmm", version, about = "Fit and benchmark higher-order hidden Markov models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: data.csv and truth.json.
    Simulate(SimulateArgs),
    /// Run the sampler on a data file: posterior.jsonl and run.log.
    Fit(FitArgs),
    /// Posterior predictive densities with 5/50/95% bands: pred_r{r}.csv.
    Predict(PredictArgs),
    /// Score a fit against simulated truth: scores.csv.
    Evaluate(EvaluateArgs),
    /// Simulate, fit and score replicates: scores.csv and medians.csv.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Emission family.
    #[arg(long, value_parser = parse_family)]
    pub family: Option<Family>,
    /// State truncation C.
    #[arg(long)]
    pub max_states: Option<usize>,
    /// Maximal lag q.
    #[arg(long)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with [model] and [run] tables; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total MCMC iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Iterations discarded before keeping snapshots (default 40% of iters).
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Keep every n-th iteration after burn-in.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Iterations of lag selection before k is frozen (default 60% of iters).
    #[arg(long)]
    pub stage1: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario letter A-E with an optional family digit, e.g. B1.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<Family>,
    /// Sequence length.
    #[arg(long = "T", default_value_t = 500)]
    pub len: usize,
    /// Falls back to HOHMM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Observation CSV; the first column is used.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// First-order HDP-HMM baseline.
    #[arg(long)]
    pub hdp_hmm: bool,
    /// Falls back to HOHMM_SEED, then the config file, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub posterior: PathBuf,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub r: Vec<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub posterior: PathBuf,
    /// truth.json written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Scenarios, comma separated, e.g. A1,B1.
    #[arg(long, value_delimiter = ',', default_value = "A1,B1")]
    pub scenario: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    /// Sequence length.
    #[arg(long = "T", default_value_t = 500)]
    pub len: usize,
    /// Base seed; replicate i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "ctf,hdp", value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: hohmm::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "hohmm",
            "fit",
            "--data",
            "d.csv",
            "--family",
            "poisson",
            "--max-lag",
            "3",
            "--iters",
            "100",
            "--hdp-hmm",
        ])
        .unwrap();
        let Command::Fit(f) = cli.command else { panic!("expected fit") };
        assert_eq!(f.model.family, Some(Family::Poisson));
        assert_eq!(f.model.max_lag, Some(3));
        assert_eq!(f.run.iters, Some(100));
        assert!(f.hdp_hmm);
    }

    #[test]
    fn benchmark_lists_split_on_commas() {
        let cli = Cli::try_parse_from(["hohmm", "benchmark", "--scenario", "A1,B2", "--methods", "hdp", "--T", "80"])
            .unwrap();
        let Command::Benchmark(b) = cli.command else { panic!("expected benchmark") };
        assert_eq!(b.scenario, vec!["A1", "B2"]);
        assert_eq!(b.methods, vec![Method::Hdp]);
        assert_eq!(b.len, 80);
    }

    #[test]
    fn unknown_family_is_a_usage_error() {
        assert!(Cli::try_parse_from(["hohmm", "simulate", "--scenario", "A", "--family", "gamma"]).is_err());
    }
}
