//! Small statistics toolkit: one-sample KS, means with standard errors,
//! Pearson correlation and a block bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Significance level of a KS test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KsLevel {
    Five,
    One,
}

impl KsLevel {
    /// Asymptotic critical coefficient `c` with threshold `c / sqrt(n)`.
    pub fn coefficient(self) -> f64 {
        match self {
            KsLevel::Five => 1.36,
            KsLevel::One => 1.63,
        }
    }

    pub fn critical(self, n: usize) -> f64 {
        self.coefficient() / (n as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub critical: f64,
    pub passed: bool,
}

pub fn exp_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |t| if t <= 0.0 { 0.0 } else { 1.0 - (-rate * t).exp() }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64, level: KsLevel) -> KsResult {
    let statistic = ks_statistic(samples, cdf);
    let critical = level.critical(samples.len());
    KsResult { n: samples.len(), statistic, critical, passed: statistic < critical }
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Sum and count of one bootstrap block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub sum: f64,
    pub count: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub mean: f64,
    pub se: f64,
    pub blocks: usize,
    pub resamples: usize,
}

/// Ratio estimate `Σsum / Σcount` with a standard error from resampling
/// whole blocks with replacement.
pub fn block_bootstrap(blocks: &[Block], resamples: usize, seed: u64) -> BootstrapEstimate {
    let total: f64 = blocks.iter().map(|b| b.sum).sum();
    let count: f64 = blocks.iter().map(|b| b.count).sum();
    let mean = total / count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = blocks.len();
    let mut est = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut s, mut c) = (0.0, 0.0);
        for _ in 0..k {
            let b = &blocks[rng.random_range(0..k)];
            s += b.sum;
            c += b.count;
        }
        if c > 0.0 {
            est.push(s / c);
        }
    }
    let m = est.iter().sum::<f64>() / est.len() as f64;
    let var = est.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (est.len() as f64 - 1.0);
    BootstrapEstimate { mean, se: var.sqrt(), blocks: k, resamples }
}

/// Tiles a `width × height` row-major grid into square blocks of side `side`.
/// Partial tiles at the far edges are kept as smaller blocks.
pub fn grid_blocks(values: &[f64], width: usize, height: usize, side: usize) -> Vec<Block> {
    assert_eq!(values.len(), width * height);
    let mut out = Vec::new();
    for by in (0..height).step_by(side) {
        for bx in (0..width).step_by(side) {
            let mut b = Block::default();
            for y in by..(by + side).min(height) {
                for x in bx..(bx + side).min(width) {
                    b.sum += values[y * width + x];
                    b.count += 1.0;
                }
            }
            out.push(b);
        }
    }
    out
}

/// Consecutive runs of `len` values.
pub fn run_blocks(values: &[f64], len: usize) -> Vec<Block> {
    values
        .chunks(len)
        .map(|c| Block { sum: c.iter().sum(), count: c.len() as f64 })
        .collect()
}
