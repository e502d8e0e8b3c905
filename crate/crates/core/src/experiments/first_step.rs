use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ray_site, sub_seed};
use crate::busemann::Horizon;
use crate::error::{geometry, Result};
use crate::lattice::{Site, Step};
use crate::lpp::PathOrientation;
use crate::stats::{block_bootstrap, grid_blocks, mean_se, Block};
use crate::trees::{arrow_field, follow_geodesic};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstStepReport {
    pub alpha: f64,
    pub n: i64,
    pub replicas: usize,
    pub u1: f64,
    /// Rows of the sampling band (one per antidiagonal below the origin).
    pub band_rows: usize,
    /// Sites per row.
    pub band_width: usize,
    pub frequency: f64,
    /// Bootstrap error resampling whole replicas.
    pub se: f64,
    /// Bootstrap error resampling `block_side²` tiles; arrows are correlated
    /// across a whole field, so this one is too small.
    pub tile_se: f64,
    pub tiles: usize,
    pub ties: u64,
    pub along_steps: usize,
    pub along_mean: f64,
    pub along_se: f64,
}

const BAND_WIDTH: i64 = 32;

/// Frequency of `e1` arrows on a band of antidiagonal rows centred on the ray
/// from the origin away from `v`, with bootstrap errors over replicas and over
/// square tiles;
/// and the density of `e1` steps along the geodesic from the origin over its
/// first `N/2` steps.
pub fn run_first_step(alpha: f64, n: i64, replicas: usize, seed: u64, block_side: usize) -> Result<FirstStepReport> {
    let base = Horizon::new(alpha, n)?;
    let rows = ((n / 2).min(256) as usize / block_side).max(1) * block_side;
    let half = BAND_WIDTH / 2;
    let band: Vec<Site> = (0..rows as i64)
        .flat_map(|t| {
            let c = ray_site(-t, base.u1);
            (-half..half).map(move |k| c + Site::new(k, -k))
        })
        .collect();
    // Values at the band do not depend on the lower corner, so the window
    // only needs to reach one site below the band.
    let lo = band.iter().fold(Site::ORIGIN, |a, &x| a.min(x)) - Site::DIAG;
    let h = if base.window.lo.le(lo) { base.with_lower(lo)? } else { base };
    let trusted = h.trusted()?;
    if let Some(x) = band.iter().find(|&&x| !trusted.contains(x)) {
        return geometry(format!("sampling band site {x} leaves trusted window {trusted}"));
    }
    let steps = (n / 2) as usize;
    let per: Vec<Result<(Vec<f64>, u64, f64)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let f = h.with_margin(Site::DIAG).build_seeded(sub_seed(seed, r))?;
            let mut ties = 0;
            let ind = band
                .iter()
                .map(|&x| {
                    let (a, b) = (f.b1(x).unwrap(), f.b2(x).unwrap());
                    ties += (a == b) as u64;
                    (a <= b) as u8 as f64
                })
                .collect();
            let p = follow_geodesic(&arrow_field(&f), Site::ORIGIN, steps)?;
            debug_assert_eq!(p.orientation, PathOrientation::UpRight);
            let along = p.steps.iter().filter(|&&s| s == Step::E1).count() as f64 / p.len() as f64;
            Ok((ind, ties, along))
        })
        .collect();
    let mut tiles = Vec::new();
    let mut whole = Vec::new();
    let mut along = Vec::new();
    let mut ties = 0;
    for p in per {
        let (ind, t, a) = p?;
        whole.push(Block { sum: ind.iter().sum(), count: ind.len() as f64 });
        tiles.extend(grid_blocks(&ind, BAND_WIDTH as usize, rows, block_side));
        along.push(a);
        ties += t;
    }
    let est = block_bootstrap(&whole, 400, sub_seed(seed, u64::MAX));
    let tile = block_bootstrap(&tiles, 400, sub_seed(seed, u64::MAX - 1));
    let (along_mean, along_se) = mean_se(&along);
    Ok(FirstStepReport {
        alpha,
        n,
        replicas,
        u1: h.u1,
        band_rows: rows,
        band_width: BAND_WIDTH as usize,
        frequency: est.mean,
        se: est.se,
        tile_se: tile.se,
        tiles: tile.blocks,
        ties,
        along_steps: steps,
        along_mean,
        along_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_first_step_is_fair() {
        let r = run_first_step(0.5, 400, 40, 3, 32).unwrap();
        assert!((r.frequency - 0.5).abs() <= 3.0 * r.se, "{r:?}");
        assert_eq!(r.tiles, 40 * 6);
        assert!(r.se > r.tile_se);
        assert!((r.along_mean - 0.5).abs() <= 3.0 * r.along_se, "{r:?}");
    }

    #[test]
    fn band_must_fit() {
        assert!(run_first_step(0.05, 400, 1, 3, 32).is_err());
    }
}
