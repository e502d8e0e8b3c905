use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sub_seed;
use crate::busemann::Horizon;
use crate::error::{domain, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::trees::{arrow_field, cluster_sizes, coalescence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub k: u64,
    /// Fraction of decided sites with `|C| > k`.
    pub survival: f64,
    /// Sites whose cluster is either untruncated or already larger than `k`.
    pub decided: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceReport {
    pub alpha: f64,
    pub n: i64,
    pub trusted_side: i64,
    pub trials: usize,
    pub coalesced: usize,
    pub fraction: f64,
    pub mean_meeting_steps: f64,
    pub survival: Vec<SurvivalRow>,
    /// Fraction of interior sites with truncated clusters.
    pub truncated_fraction: f64,
}

/// Paths from the lower corner of a `side × side` trusted window and its
/// `e2` neighbour, one field per trial; cluster survival `P(|C| > k)` over
/// the interior sub-window at least `side/2` from the lower corner.
pub fn run_coalescence(alpha: f64, n: i64, side: i64, trials: usize, ks: &[u64], seed: u64) -> Result<CoalescenceReport> {
    if side < 4 || trials == 0 {
        return domain("need side >= 4 and at least one trial");
    }
    let base = Horizon::new(alpha, n)?;
    let hi = base.trusted()?.hi;
    let lo = hi - Site::new(side - 1, side - 1);
    let h = base.with_lower(lo)?;
    let interior = LatticeWindow::new(lo + Site::new(side / 2, side / 2), hi)?;
    let per: Vec<Result<(Option<usize>, Vec<(u64, u64)>, u64, u64)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let f = h.build_seeded(sub_seed(seed, t))?;
            let arrows = arrow_field(&f);
            let c = coalescence(&arrows, lo, lo + Site::E2)?;
            let (sizes, trunc) = cluster_sizes(&arrows);
            let w = arrows.window();
            let mut rows = vec![(0u64, 0u64); ks.len()];
            let (mut inner, mut cut) = (0u64, 0u64);
            for x in interior.sites() {
                let i = w.index(x).unwrap();
                inner += 1;
                cut += trunc[i] as u64;
                for (r, &k) in rows.iter_mut().zip(ks) {
                    if !trunc[i] || sizes[i] > k {
                        r.1 += 1;
                        r.0 += (sizes[i] > k) as u64;
                    }
                }
            }
            Ok((c.meet.map(|_| c.steps_x.max(c.steps_y)), rows, inner, cut))
        })
        .collect();
    let mut coalesced = 0;
    let mut steps = 0.0;
    let mut rows = vec![(0u64, 0u64); ks.len()];
    let (mut inner, mut cut) = (0u64, 0u64);
    for p in per {
        let (m, r, i, c) = p?;
        if let Some(s) = m {
            coalesced += 1;
            steps += s as f64;
        }
        for (acc, x) in rows.iter_mut().zip(r) {
            acc.0 += x.0;
            acc.1 += x.1;
        }
        inner += i;
        cut += c;
    }
    Ok(CoalescenceReport {
        alpha,
        n,
        trusted_side: side,
        trials,
        coalesced,
        fraction: coalesced as f64 / trials as f64,
        mean_meeting_steps: steps / coalesced.max(1) as f64,
        survival: ks
            .iter()
            .zip(rows)
            .map(|(&k, (hits, decided))| SurvivalRow { k, survival: hits as f64 / decided as f64, decided })
            .collect(),
        truncated_fraction: cut as f64 / inner as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_window_coalescence() {
        let r = run_coalescence(0.5, 200, 200, 20, &[10, 100], 3).unwrap();
        assert!(r.fraction >= 0.8, "{r:?}");
        assert!(r.survival[1].survival < r.survival[0].survival);
        assert!(r.truncated_fraction < 1.0);
    }
}
