use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sub_seed;
use crate::busemann::{busemann_with_margin, terminal_for, Horizon};
use crate::error::{domain, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::lpp::shape_gradient;
use crate::weights::make_weight_field;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityBin {
    /// `|v - x|_1` range `[d_lo, d_hi)`.
    pub d_lo: i64,
    pub d_hi: i64,
    pub sites: u64,
    pub agreement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub alpha: f64,
    pub n: i64,
    pub factor: f64,
    pub replicas: usize,
    pub bins: Vec<StabilityBin>,
    /// Agreement on the `17 × 17` box around the origin.
    pub center_agreement: f64,
    /// Smallest distance from which every farther bin agrees at least 95%,
    /// ignoring bins with under 1% of the largest bin's sites.
    pub suggested_distance: Option<i64>,
}

/// Arrow agreement between horizons `N` and `factor·N` on shared weights, by
/// `ℓ¹` distance to the smaller terminal.
pub fn run_arrow_stability(alpha: f64, n: i64, factor: f64, replicas: usize, seed: u64) -> Result<StabilityReport> {
    if !(factor > 1.0) {
        return domain(format!("factor must exceed 1, got {factor}"));
    }
    let h = Horizon::new(alpha, n)?;
    let v = h.terminal;
    let big = terminal_for((factor * n as f64).round() as i64, h.u1);
    let small_win = h.window;
    let big_win = LatticeWindow::new(small_win.lo, big)?;
    let sites = LatticeWindow::new(small_win.lo, v - Site::DIAG)?;
    let width = (n / 8).max(1);
    let nbins = ((v - small_win.lo).l1() / width + 1) as usize;
    let per: Vec<Result<(Vec<(u64, u64)>, (u64, u64))>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let w = make_weight_field(sub_seed(seed, r), big_win, 1.0)?;
            let a = busemann_with_margin(&w, v, small_win, Site::DIAG)?;
            let b = busemann_with_margin(&w, big, big_win, Site::DIAG)?;
            let mut bins = vec![(0u64, 0u64); nbins];
            let mut centre = (0u64, 0u64);
            for x in sites.sites() {
                let ea = a.b1(x).unwrap() <= a.b2(x).unwrap();
                let eb = b.b1(x).unwrap() <= b.b2(x).unwrap();
                let bin = &mut bins[((v - x).l1() / width) as usize];
                bin.0 += (ea == eb) as u64;
                bin.1 += 1;
                if x.x1.abs() <= 8 && x.x2.abs() <= 8 {
                    centre.0 += (ea == eb) as u64;
                    centre.1 += 1;
                }
            }
            Ok((bins, centre))
        })
        .collect();
    let mut bins = vec![(0u64, 0u64); nbins];
    let mut centre = (0u64, 0u64);
    for p in per {
        let (b, c) = p?;
        for (acc, x) in bins.iter_mut().zip(b) {
            acc.0 += x.0;
            acc.1 += x.1;
        }
        centre.0 += c.0;
        centre.1 += c.1;
    }
    let bins: Vec<StabilityBin> = bins
        .into_iter()
        .enumerate()
        .filter(|(_, b)| b.1 > 0)
        .map(|(i, b)| StabilityBin {
            d_lo: i as i64 * width,
            d_hi: (i as i64 + 1) * width,
            sites: b.1,
            agreement: b.0 as f64 / b.1 as f64,
        })
        .collect();
    // Corner bins with a handful of sites are too noisy to veto a suggestion.
    let floor = bins.iter().map(|b| b.sites).max().unwrap_or(0) / 100;
    let suggested_distance = (0..bins.len())
        .find(|&i| bins[i..].iter().filter(|b| b.sites >= floor).all(|b| b.agreement >= 0.95))
        .map(|i| bins[i].d_lo);
    Ok(StabilityReport {
        alpha,
        n,
        factor,
        replicas,
        bins,
        center_agreement: centre.0 as f64 / centre.1.max(1) as f64,
        suggested_distance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRow {
    pub radius: i64,
    /// `max_{|x|_1 ≤ r} |B(0, x) - ∇g(u)·x| / r` over trusted sites.
    pub max_deviation: f64,
}

/// Sublinearity of the centred cocycle on one field. No rate is known, so
/// this is reported without a gate.
pub fn ergodic_diagnostic(alpha: f64, n: i64, radii: &[i64], seed: u64) -> Result<Vec<ErgodicRow>> {
    let h = Horizon::new(alpha, n)?;
    let f = h.build_seeded(seed)?;
    let (g1, g2) = shape_gradient(h.u1, 1.0 - h.u1)?;
    let t = f.trusted();
    Ok(radii
        .iter()
        .map(|&r| {
            let mut worst: f64 = 0.0;
            for x in t.sites().filter(|x| x.l1() <= r) {
                let dev = f.b(Site::ORIGIN, x).unwrap() - g1 * x.x1 as f64 - g2 * x.x2 as f64;
                worst = worst.max(dev.abs() / r as f64);
            }
            ErgodicRow { radius: r, max_deviation: worst }
        })
        .collect())
}
