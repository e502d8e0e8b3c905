//! Exponential corner growth model laboratory.
//!
//! Last-passage values, increment-stationary quadrants, finite-horizon
//! Busemann fields, geodesic trees with their duals, boundary LPP with
//! competition interfaces, and the Monte Carlo harness that checks them.

pub mod busemann;
pub mod competition;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod lpp;
pub mod stationary;
pub mod stats;
pub mod trees;
pub mod wavefront;
pub mod weights;

pub use error::{LabError, Result};
pub use lattice::{LatticeWindow, Site, Step};
pub use weights::{exp_sample, make_weight_field, SiteWeights, WeightField};
