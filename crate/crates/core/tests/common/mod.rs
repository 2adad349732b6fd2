#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rgbm::data::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Dense n × p Gaussian features; labels from a noisy linear score, either
/// real-valued or thresholded to ±1.
pub fn synthetic_dataset(n: usize, p: usize, seed: u64, classification: bool) -> Dataset {
    let mut r = rng(seed);
    let w = gaussian_vec(&mut r, p);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = gaussian_vec(&mut r, p);
        let score: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.5 * r.sample::<f64, _>(StandardNormal);
        labels.push(if classification { if score > 0.0 { 1.0 } else { -1.0 } } else { score });
        rows.push(x);
    }
    Dataset::from_dense(&rows, labels).unwrap()
}

/// n × p matrix with orthonormal columns, from the QR factor of a Gaussian matrix.
pub fn orthonormal_columns(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let g = DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    (0..p).map(|j| q.column(j).iter().copied().collect()).collect()
}

/// min over β of ½‖y − Bβ‖², via an SVD least-squares solve.
pub fn least_squares_optimum(columns: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let b = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let yv = DVector::from_column_slice(y);
    let beta = b.clone().svd(true, true).solve(&yv, 1e-12).unwrap();
    let r = yv - b * beta;
    0.5 * r.norm_squared()
}

/// Random nonincreasing weights summing to one.
pub fn random_gamma(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    g.sort_by(|a, b| b.total_cmp(a));
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= s);
    g
}

/// Random contiguous group sizes summing to k.
pub fn random_sizes(rng: &mut impl Rng, k: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = k;
    while left > 0 {
        let s = rng.random_range(1..=left.min(4));
        sizes.push(s);
        left -= s;
    }
    sizes
}

/// All t-subsets of 0..n, lexicographic.
pub fn subsets(n: usize, t: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, t, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, t, &mut Vec::new(), &mut out);
    out
}

pub fn synthetic_libsvm_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic_5000.libsvm")
}
