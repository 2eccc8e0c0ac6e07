//! Starting values: one-dimensional k-means for the states.

use rand::Rng;

const LLOYD_ITERS: usize = 50;

/// Lloyd's algorithm with a k-means++ start. Labels are ordered by centroid.
pub fn kmeans<R: Rng + ?Sized>(y: &[f64], k: usize, rng: &mut R) -> (Vec<usize>, Vec<f64>) {
    let n = y.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(y[rng.random_range(0..n)]);
    let mut d2 = vec![0.0; n];
    while centers.len() < k {
        for (d, &v) in d2.iter_mut().zip(y) {
            *d = centers.iter().map(|c| (v - c) * (v - c)).fold(f64::INFINITY, f64::min);
        }
        let next = crate::random::categorical(&d2, rng);
        centers.push(y[next]);
    }
    let mut labels = vec![0usize; n];
    for _ in 0..LLOYD_ITERS {
        let mut changed = false;
        for (l, &v) in labels.iter_mut().zip(y) {
            let best = nearest(&centers, v);
            if best != *l {
                *l = best;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&l, &v) in labels.iter().zip(y) {
            sums[l] += v;
            counts[l] += 1;
        }
        for h in 0..k {
            if counts[h] > 0 {
                centers[h] = sums[h] / counts[h] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut rank = vec![0; k];
    for (r, &h) in order.iter().enumerate() {
        rank[h] = r;
    }
    let labels = labels.into_iter().map(|l| rank[l]).collect();
    let centers = order.iter().map(|&h| centers[h]).collect();
    (labels, centers)
}

fn nearest(centers: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (h, c) in centers.iter().enumerate() {
        if (v - c).abs() < (v - centers[best]).abs() {
            best = h;
        }
    }
    best
}
