use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ray_site, sub_seed};
use crate::busemann::Horizon;
use crate::error::{domain, geometry, Result};
use crate::lattice::{Site, Step};
use crate::stationary::direction_of_alpha;
use crate::stats::{block_bootstrap, Block};
use crate::trees::PointClass;

/// Transition matrix of the class chain in the order `s, c, h, v`.
pub fn markov_target(alpha: f64) -> [[f64; 4]; 4] {
    let b = 1.0 - alpha;
    [[0.0, b, alpha, 0.0], [alpha, 0.0, 0.0, b], [0.0, b, alpha, 0.0], [alpha, 0.0, 0.0, b]]
}

pub fn invariant_target(alpha: f64) -> [f64; 4] {
    let b = 1.0 - alpha;
    [alpha * b, alpha * b, alpha * alpha, b * b]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub alpha: f64,
    pub n: i64,
    pub replicas: usize,
    pub segments_per_replica: usize,
    pub segment_len: usize,
    pub transitions: u64,
    pub counts: [[u64; 4]; 4],
    pub frequencies: [[f64; 4]; 4],
    pub target: [[f64; 4]; 4],
    pub invariant: [f64; 4],
    pub invariant_se: [f64; 4],
    pub invariant_target: [f64; 4],
    /// Largest entrywise `|frequency - target|`.
    pub max_abs_deviation: f64,
    pub ties: u64,
}

impl MarkovReport {
    /// Classes whose frequency lies outside `sigmas` standard errors of the target.
    pub fn invariant_outliers(&self, sigmas: f64) -> Vec<PointClass> {
        PointClass::ALL
            .into_iter()
            .filter(|c| {
                let i = c.index();
                (self.invariant[i] - self.invariant_target[i]).abs() > sigmas * self.invariant_se[i]
            })
            .collect()
    }
}

const SEGMENTS: usize = 64;
const SEGMENT_LEN: i64 = 64;
const SPACING: i64 = 16;

fn summarize(
    alpha: f64,
    n: i64,
    replicas: usize,
    segments_per_replica: usize,
    segments: &[Vec<PointClass>],
    blocks_of: usize,
    ties: u64,
    seed: u64,
) -> MarkovReport {
    let mut counts = [[0u64; 4]; 4];
    for s in segments {
        for w in s.windows(2) {
            counts[w[0].index()][w[1].index()] += 1;
        }
    }
    let target = markov_target(alpha);
    let mut frequencies = [[0.0; 4]; 4];
    let mut max_abs_deviation: f64 = 0.0;
    for i in 0..4 {
        let row: u64 = counts[i].iter().sum();
        for j in 0..4 {
            frequencies[i][j] = if row > 0 { counts[i][j] as f64 / row as f64 } else { f64::NAN };
            max_abs_deviation = max_abs_deviation.max((frequencies[i][j] - target[i][j]).abs());
        }
    }
    let mut invariant = [0.0; 4];
    let mut invariant_se = [0.0; 4];
    for c in PointClass::ALL {
        let blocks: Vec<Block> = segments
            .chunks(blocks_of)
            .map(|g| {
                let sites: usize = g.iter().map(Vec::len).sum();
                let hits = g.iter().flatten().filter(|&&x| x == c).count();
                Block { sum: hits as f64, count: sites as f64 }
            })
            .collect();
        let est = block_bootstrap(&blocks, 400, sub_seed(seed, 1000 + c.index() as u64));
        invariant[c.index()] = est.mean;
        invariant_se[c.index()] = est.se;
    }
    MarkovReport {
        alpha,
        n,
        replicas,
        segments_per_replica,
        segment_len: segments.first().map_or(0, Vec::len),
        transitions: counts.iter().flatten().sum(),
        counts,
        frequencies,
        target,
        invariant,
        invariant_se,
        invariant_target: invariant_target(alpha),
        max_abs_deviation: if max_abs_deviation.is_nan() { f64::INFINITY } else { max_abs_deviation },
        ties,
    }
}

/// Class sequences on antidiagonal segments of 64 sites, centred on the ray
/// from the origin away from `v = round(N·u)` and spaced 16 levels apart, 64
/// segments per field; enough fields to reach `chain_length` transitions.
/// Invariant frequencies get bootstrap errors resampling whole fields, since
/// classes are correlated across all segments of one field.
pub fn run_markov_chain(alpha: f64, n: i64, chain_length: u64, seed: u64) -> Result<MarkovReport> {
    let u1 = direction_of_alpha(alpha)?;
    if chain_length == 0 {
        return domain("chain length must be positive");
    }
    let per_field = SEGMENTS as u64 * (SEGMENT_LEN as u64 - 1);
    let replicas = chain_length.div_ceil(per_field) as usize;
    let centres: Vec<Site> = (0..SEGMENTS as i64).map(|i| ray_site(-i * SPACING, u1)).collect();
    let half = SEGMENT_LEN / 2;
    let mut lo = Site::ORIGIN;
    for c in &centres {
        lo = lo.min(*c + Site::new(-half, half - 1)).min(*c + Site::new(half - 1, -half));
    }
    let lo = lo - Site::DIAG;
    let h = Horizon::new(alpha, n)?.with_lower(lo)?;
    let trusted = h.trusted()?;
    let top = centres[0] + Site::new(half - 1, half);
    if !top.le(trusted.hi) {
        return geometry(format!("segments near the origin leave trusted window {trusted}; increase N"));
    }
    let per: Vec<Result<(Vec<Vec<PointClass>>, u64)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let f = h.build_seeded(sub_seed(seed, r))?;
            let mut ties = 0;
            let mut arrow = |x: Site| {
                let (a, b) = (f.b1(x).unwrap(), f.b2(x).unwrap());
                ties += (a == b) as u64;
                if a <= b { Step::E1 } else { Step::E2 }
            };
            let segs = centres
                .iter()
                .map(|&c| {
                    (-half..half)
                        .map(|k| {
                            let z = c + Site::new(k, -k);
                            PointClass::from_arrows(arrow(z - Site::E1), arrow(z - Site::E2))
                        })
                        .collect()
                })
                .collect();
            Ok((segs, ties))
        })
        .collect();
    let mut segments = Vec::new();
    let mut ties = 0;
    for p in per {
        let (s, t) = p?;
        segments.extend(s);
        ties += t;
    }
    Ok(summarize(alpha, n, replicas, SEGMENTS, &segments, SEGMENTS, ties, seed))
}

/// The same statistics for `ξ_j = (a_{j-1}, a_j)` relabelled, with `a_j` i.i.d.
/// `e1` with probability `α`; errors from runs of 32 sites.
pub fn bernoulli_oracle(alpha: f64, length: u64, seed: u64) -> Result<MarkovReport> {
    direction_of_alpha(alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prev = if rng.random::<f64>() < alpha { Step::E1 } else { Step::E2 };
    let seq: Vec<PointClass> = (0..=length)
        .map(|_| {
            let a = if rng.random::<f64>() < alpha { Step::E1 } else { Step::E2 };
            let c = PointClass::from_arrows(prev, a);
            prev = a;
            c
        })
        .collect();
    let runs: Vec<Vec<PointClass>> = seq.chunks(32).map(<[PointClass]>::to_vec).collect();
    // Transitions are counted on the full sequence, not per run.
    let mut r = summarize(alpha, 0, 1, 1, std::slice::from_ref(&seq), 1, 0, seed);
    let blocked = summarize(alpha, 0, 1, 1, &runs, 1, 0, seed);
    r.invariant_se = blocked.invariant_se;
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub alpha: f64,
    pub source_density: f64,
    pub se: f64,
    pub target: f64,
}

/// Empirical source density over a grid of `α`.
pub fn source_density_scan(alphas: &[f64], n: i64, chain_length: u64, seed: u64) -> Result<Vec<ScanRow>> {
    alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let r = run_markov_chain(a, n, chain_length, sub_seed(seed, i as u64))?;
            let s = PointClass::Source.index();
            Ok(ScanRow { alpha: a, source_density: r.invariant[s], se: r.invariant_se[s], target: r.invariant_target[s] })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_rows_are_stochastic_and_mu_is_invariant() {
        for a in [0.2, 1.0 / 3.0, 0.5, 0.9] {
            let p = markov_target(a);
            let mu = invariant_target(a);
            assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for j in 0..4 {
                assert!((p[j].iter().sum::<f64>() - 1.0).abs() < 1e-15);
                let flow: f64 = (0..4).map(|i| mu[i] * p[i][j]).sum();
                assert!((flow - mu[j]).abs() < 1e-15);
            }
        }
        let mu = invariant_target(1.0 / 3.0);
        assert!((mu[0] - 2.0 / 9.0).abs() < 1e-15 && (mu[2] - 1.0 / 9.0).abs() < 1e-15 && (mu[3] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_reproduces_targets() {
        let r = bernoulli_oracle(1.0 / 3.0, 100_000, 4).unwrap();
        assert_eq!(r.transitions, 100_000);
        assert!(r.max_abs_deviation < 0.02, "{r:?}");
        assert!(r.invariant_outliers(3.0).is_empty(), "{r:?}");
        for (i, row) in r.frequencies.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12, "row {i}");
        }
    }

    #[test]
    fn short_chain_on_the_diagonal() {
        let r = run_markov_chain(0.5, 400, 20_000, 9).unwrap();
        assert!(r.transitions >= 20_000);
        assert!(r.max_abs_deviation < 0.04, "{r:?}");
        // Structural zeros are exact.
        assert_eq!(r.counts[0][0] + r.counts[0][3] + r.counts[1][1] + r.counts[1][2], 0);
    }
}
