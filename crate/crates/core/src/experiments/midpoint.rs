use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sub_seed;
use crate::busemann::terminal_for;
use crate::error::{domain, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::lpp::{backtrack_geodesic, brute_force_lpp, forward_lpp};
use crate::stats::mean_se;
use crate::weights::make_weight_field;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidpointRow {
    pub n: i64,
    pub probability: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidpointReport {
    pub u1: f64,
    pub replicas: usize,
    pub batches: usize,
    pub rows: Vec<MidpointRow>,
    /// `batch_probabilities[b][i]`: batch `b` at `ns[i]`.
    pub batch_probabilities: Vec<Vec<f64>>,
    /// Fraction of batches strictly decreasing along `ns`.
    pub decreasing_fraction: f64,
    /// Pooled probability at the largest `n` over that at the smallest.
    pub final_ratio: f64,
}

fn endpoints(u1: f64, n: i64) -> (Site, Site) {
    let v = terminal_for(n, u1);
    (-v, v)
}

fn hit(u1: f64, n: i64, seed: u64, shift: Site) -> Result<bool> {
    let (a, b) = endpoints(u1, n);
    let win = LatticeWindow::new(a + shift, b + shift)?;
    let w = make_weight_field(seed, win, 1.0)?;
    let g = forward_lpp(&w, win.lo, win)?;
    Ok(backtrack_geodesic(&g, win.lo, win.hi)?.contains(shift))
}

fn hits_to_estimate(hits: Vec<Result<bool>>) -> Result<(f64, f64)> {
    let xs: Vec<f64> = hits.into_iter().map(|h| h.map(|b| b as u8 as f64)).collect::<Result<_>>()?;
    Ok(mean_se(&xs))
}

/// Fraction of `replicas` fields in which the geodesic from
/// `z - round(n·u)` to `z + round(n·u)` passes through `z = shift`.
pub fn midpoint_probability(u1: f64, n: i64, replicas: usize, seed: u64, shift: Site) -> Result<(f64, f64)> {
    if n < 1 {
        return domain(format!("n must be positive, got {n}"));
    }
    hits_to_estimate((0..replicas as u64).into_par_iter().map(|r| hit(u1, n, sub_seed(seed, r), shift)).collect())
}

/// The same probability with geodesics found by exhaustive path enumeration.
pub fn midpoint_brute_force(u1: f64, n: i64, replicas: usize, seed: u64) -> Result<(f64, f64)> {
    let (a, b) = endpoints(u1, n);
    let win = LatticeWindow::new(a, b)?;
    hits_to_estimate(
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let w = make_weight_field(sub_seed(seed, r), win, 1.0)?;
                Ok(brute_force_lpp(&w, a, b)?.1.contains(Site::ORIGIN))
            })
            .collect(),
    )
}

/// `batches` independent batches of `replicas` fields, each batch reused
/// across all `ns`.
pub fn run_midpoint(u1: f64, ns: &[i64], replicas: usize, batches: usize, seed: u64) -> Result<MidpointReport> {
    if ns.is_empty() || batches == 0 || replicas == 0 {
        return domain("need at least one n, one batch and one replica");
    }
    let mut batch_probabilities = Vec::with_capacity(batches);
    let mut pooled = vec![Vec::new(); ns.len()];
    for b in 0..batches {
        let mut row = Vec::with_capacity(ns.len());
        for (i, &n) in ns.iter().enumerate() {
            let hits: Vec<f64> = (0..replicas as u64)
                .into_par_iter()
                .map(|r| hit(u1, n, sub_seed(seed, (b * replicas) as u64 + r), Site::ORIGIN).map(|h| h as u8 as f64))
                .collect::<Result<_>>()?;
            row.push(hits.iter().sum::<f64>() / replicas as f64);
            pooled[i].extend(hits);
        }
        batch_probabilities.push(row);
    }
    let rows: Vec<MidpointRow> = ns
        .iter()
        .zip(&pooled)
        .map(|(&n, h)| {
            let (p, se) = mean_se(h);
            MidpointRow { n, probability: p, se }
        })
        .collect();
    let dec = batch_probabilities.iter().filter(|r| r.windows(2).all(|w| w[1] < w[0])).count();
    Ok(MidpointReport {
        u1,
        replicas,
        batches,
        final_ratio: rows[rows.len() - 1].probability / rows[0].probability,
        rows,
        batch_probabilities,
        decreasing_fraction: dec as f64 / batches as f64,
    })
}
