//! On-disk formats: observation CSV, line-delimited posterior output and density grids.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainState, ModelConfig, PosteriorSamples};
use crate::predict::{DensityGrid, PredictiveBands};

/// One value per line under a `y` header. Floats use the shortest round-trip form.
pub fn write_observations<W: Write>(mut w: W, y: &[f64]) -> Result<()> {
    writeln!(w, "y")?;
    for v in y {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

/// Reads a single column; a non-numeric first line is taken as the header. Blank lines are skipped.
pub fn read_observations<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut y = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => y.push(v),
            Ok(_) => {
                return Err(Error::InvalidObservation { index: y.len(), reason: format!("non-finite value `{field}`") })
            }
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(Error::InvalidObservation {
                    index: y.len(),
                    reason: format!("line {}: `{field}` is not a number", i + 1),
                })
            }
        }
    }
    Ok(y)
}

/// First line of a posterior file: everything except the per-snapshot records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorHeader {
    pub config: ModelConfig,
    pub total: usize,
    pub burnin: usize,
    pub thin: usize,
    pub stage1: usize,
    pub seed: u64,
    pub hdp_hmm_mode: bool,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub iteration: usize,
    pub loglik: f64,
    pub state: ChainState,
}

/// Header line followed by one JSON object per snapshot.
pub fn write_posterior<W: Write>(mut w: W, samples: &PosteriorSamples) -> Result<()> {
    let header = PosteriorHeader {
        config: samples.config.clone(),
        total: samples.total,
        burnin: samples.burnin,
        thin: samples.thin,
        stage1: samples.stage1,
        seed: samples.seed,
        hdp_hmm_mode: samples.hdp_hmm_mode,
        data: samples.data.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for ((&iteration, &loglik), state) in samples.iterations.iter().zip(&samples.loglik).zip(&samples.snapshots) {
        serde_json::to_writer(&mut w, &SnapshotRecord { iteration, loglik, state: state.clone() })?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_posterior<R: BufRead>(r: R) -> Result<PosteriorSamples> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty posterior file".into()))??;
    let h: PosteriorHeader = serde_json::from_str(&first)?;
    let mut out = PosteriorSamples {
        config: h.config,
        total: h.total,
        burnin: h.burnin,
        thin: h.thin,
        stage1: h.stage1,
        seed: h.seed,
        hdp_hmm_mode: h.hdp_hmm_mode,
        data: h.data,
        iterations: Vec::new(),
        loglik: Vec::new(),
        snapshots: Vec::new(),
    };
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SnapshotRecord = serde_json::from_str(&line)?;
        out.iterations.push(rec.iteration);
        out.loglik.push(rec.loglik);
        out.snapshots.push(rec.state);
    }
    Ok(out)
}

/// Two columns, `point,value`.
pub fn write_density<W: Write>(mut w: W, d: &DensityGrid) -> Result<()> {
    writeln!(w, "point,value")?;
    for (p, v) in d.points.iter().zip(&d.values) {
        writeln!(w, "{p:?},{v:?}")?;
    }
    Ok(())
}

/// `point,value,q05,q50,q95`, where `value` is the posterior mean.
pub fn write_bands<W: Write>(mut w: W, b: &PredictiveBands) -> Result<()> {
    writeln!(w, "point,value,q05,q50,q95")?;
    for i in 0..b.mean.points.len() {
        writeln!(w, "{:?},{:?},{:?},{:?},{:?}", b.mean.points[i], b.mean.values[i], b.q05[i], b.q50[i], b.q95[i])?;
    }
    Ok(())
}

/// Reads the first two columns of a density CSV with a header line.
pub fn read_density<R: BufRead>(r: R, discrete: bool) -> Result<DensityGrid> {
    let mut d = DensityGrid { points: Vec::new(), values: Vec::new(), discrete };
    for (i, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = || -> Result<f64> {
            let f = cols.next().ok_or_else(|| Error::Parse(format!("line {}: missing column", i + 1)))?;
            f.trim().parse().map_err(|_| Error::Parse(format!("line {}: `{f}` is not a number", i + 1)))
        };
        d.points.push(next()?);
        d.values.push(next()?);
    }
    Ok(d)
}
