use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::lpp::{forward_lpp, shape_function};
use crate::weights::make_weight_field;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub sizes: Vec<i64>,
    pub seeds: Vec<u64>,
    /// `gaps[i][s]`: gap at `sizes[i]` for `seeds[s]`.
    pub gaps: Vec<Vec<f64>>,
    pub max_gap: Vec<f64>,
    /// Fraction of seeds whose gap at the largest size is below the gap at the smallest.
    pub paired_decrease: f64,
}

/// `max_{|x|_1 = N, x ≥ 0} |G_{0,x} - g(x)| / N` from one forward table on `[0, N]²`.
pub fn antidiagonal_gap(n: i64, seed: u64) -> Result<f64> {
    let win = LatticeWindow::new(Site::ORIGIN, Site::new(n, n))?;
    let w = make_weight_field(seed, win, 1.0)?;
    let g = forward_lpp(&w, Site::ORIGIN, win)?;
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let x = Site::new(k, n - k);
        let dev = (g.value(x).unwrap() - shape_function(k as f64, (n - k) as f64)?).abs();
        worst = worst.max(dev / n as f64);
    }
    Ok(worst)
}

pub fn run_shape_convergence(sizes: &[i64], seeds: &[u64]) -> Result<ShapeReport> {
    if sizes.is_empty() || seeds.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return domain("sizes must be nonempty and strictly ascending, seeds nonempty");
    }
    let gaps: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| seeds.par_iter().map(|&s| antidiagonal_gap(n, s)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let max_gap = gaps.iter().map(|g| g.iter().cloned().fold(0.0, f64::max)).collect();
    let (first, last) = (&gaps[0], &gaps[gaps.len() - 1]);
    let dec = first.iter().zip(last).filter(|(a, b)| b < a).count();
    Ok(ShapeReport {
        sizes: sizes.to_vec(),
        seeds: seeds.to_vec(),
        gaps,
        max_gap,
        paired_decrease: dec as f64 / seeds.len() as f64,
    })
}
