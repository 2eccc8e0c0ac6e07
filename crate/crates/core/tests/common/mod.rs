#![allow(dead_code)]

/// Mean and standard error from `n_batches` batch means.
pub fn batch_mean_se(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let n = xs.len() / n_batches;
    let means: Vec<f64> = xs.chunks(n).take(n_batches).map(|b| b.iter().sum::<f64>() / n as f64).collect();
    let m = means.iter().sum::<f64>() / n_batches as f64;
    let v = means.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (xs.iter().sum::<f64>() / xs.len() as f64, (v / n_batches as f64).sqrt())
}

/// Mean and standard error of independent draws.
pub fn iid_mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Pearson statistic and upper-tail p-value, pooling cells with expectation below 5.
pub fn chi_square(observed: &[f64], expected_prob: &[f64]) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: f64 = observed.iter().sum();
    let (mut stat, mut cells, mut pool_o, mut pool_e) = (0.0, 0usize, 0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_prob) {
        let e = n * p;
        if e < 5.0 {
            pool_o += o;
            pool_e += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e.max(1e-300);
        cells += 1;
    }
    let df = (cells.max(2) - 1) as f64;
    (stat, 1.0 - ChiSquared::new(df).unwrap().cdf(stat))
}
