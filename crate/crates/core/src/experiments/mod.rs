//! Monte Carlo experiments and the pass/fail gates built on them.
//!
//! Every experiment is a pure function of its parameters and seed; replicas
//! run in parallel and are aggregated in replica order.

mod coalescence;
pub mod criteria;
mod first_step;
mod markov;
mod midpoint;
mod shape;
mod stability;

pub use coalescence::{run_coalescence, CoalescenceReport, SurvivalRow};
pub use first_step::{run_first_step, FirstStepReport};
pub use markov::{
    bernoulli_oracle, invariant_target, markov_target, run_markov_chain, source_density_scan, MarkovReport,
    ScanRow,
};
pub use midpoint::{midpoint_brute_force, midpoint_probability, run_midpoint, MidpointReport, MidpointRow};
pub use shape::{antidiagonal_gap, run_shape_convergence, ShapeReport};
pub use stability::{ergodic_diagnostic, run_arrow_stability, ErgodicRow, StabilityBin, StabilityReport};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::Site;
use crate::weights::mix64;

/// One machine-readable pass/fail check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    pub detail: String,
}

impl Gate {
    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Gate { name: name.into(), passed: observed <= bound, observed, bound, detail: format!("{observed:.4e} <= {bound:.4e}") }
    }

    pub fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Gate { name: name.into(), passed: observed >= bound, observed, bound, detail: format!("{observed:.4} >= {bound:.4}") }
    }

    /// `|observed - target| <= tol`.
    pub fn within(name: impl Into<String>, observed: f64, target: f64, tol: f64) -> Self {
        let dev = (observed - target).abs();
        Gate {
            name: name.into(),
            passed: dev <= tol,
            observed,
            bound: tol,
            detail: format!("{observed:.5} vs {target:.5}, |dev| {dev:.5} <= {tol:.5}"),
        }
    }

    pub fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Gate { name: name.into(), passed, observed: passed as u8 as f64, bound: 1.0, detail: detail.into() }
    }
}

/// Parameters shared by the experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub n: i64,
    pub replicas: usize,
    pub seed: u64,
    /// Side of the bootstrap blocks.
    pub block_side: usize,
    /// Width of the statistical bands in standard errors.
    pub sigmas: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { alpha: 0.5, n: 400, replicas: 200, seed: 1, block_side: 32, sigmas: 3.0 }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(4..=20_000).contains(&self.n) {
            return domain(format!("n must lie in [4, 20000], got {}", self.n));
        }
        if self.replicas == 0 {
            return domain("replicas must be positive");
        }
        if self.block_side == 0 {
            return domain("block_side must be positive");
        }
        if !(self.sigmas > 0.0) {
            return domain(format!("sigmas must be positive, got {}", self.sigmas));
        }
        Ok(())
    }
}

/// Independent seed stream `tag` derived from `seed`.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag.wrapping_add(0x5eed)))
}

/// The site on antidiagonal `level` closest to the ray through the origin
/// in direction `(u1, 1 - u1)`.
pub fn ray_site(level: i64, u1: f64) -> Site {
    let x1 = (level as f64 * u1).round() as i64;
    Site::new(x1, level - x1)
}
