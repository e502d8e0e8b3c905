//! Counter-based exponential weights keyed by `(seed, lane, site)`.
//!
//! Every sample is snapped to the dyadic grid `2^-32 Z`. Sums and differences
//! of grid values below `2^21` in magnitude are then exact in `f64`, so the
//! structural identities checked elsewhere hold bit-for-bit rather than up
//! to rounding.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::lattice::{LatticeWindow, Site};

/// Weight quantum `2^-32`.
pub const QUANTUM: f64 = 1.0 / 4_294_967_296.0;

const U_FLOOR: f64 = 1.0 / 18_446_744_073_709_551_616.0; // 2^-64
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SECOND: u64 = 0xC2B2_AE3D_27D4_EB4F;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Purpose tag mixed into the seed so that independent families of weights
/// never share hash inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lane {
    /// Bulk weights `Y` of the LPP process.
    Bulk,
    /// Axis increments `I` of a stationary quadrant.
    BoundaryI,
    /// Axis increments `J` of a stationary quadrant.
    BoundaryJ,
    /// Bulk weights `ζ` of a stationary quadrant.
    Zeta,
    Custom(u64),
}

impl Lane {
    fn tag(self) -> u64 {
        match self {
            Lane::Bulk => 0,
            Lane::BoundaryI => 0x4930_0000_0000_0001,
            Lane::BoundaryJ => 0x4A30_0000_0000_0002,
            Lane::Zeta => 0x5A30_0000_0000_0003,
            Lane::Custom(t) => mix64(t ^ 0x0C05_7000_0000_0000),
        }
    }

    pub fn key(self, seed: u64) -> u64 {
        mix64(seed ^ self.tag())
    }
}

/// Uniform in `(0, 1)` from a hash key and a site.
#[inline]
pub fn site_uniform(key: u64, x: Site) -> f64 {
    let h1 = mix64(key ^ (x.x1 as u64).wrapping_mul(GOLDEN));
    let h2 = mix64(h1 ^ (x.x2 as u64).wrapping_mul(SECOND));
    (((h2 >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)).max(U_FLOOR)
}

/// Inverse CDF `-ln(u)/rate`, snapped to the weight quantum and kept positive.
#[inline]
pub fn exp_from_uniform(u: f64, rate: f64) -> f64 {
    let t = -u.ln() / rate;
    ((t / QUANTUM).round() * QUANTUM).max(QUANTUM)
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        domain(format!("rate must be positive and finite, got {rate}"))
    }
}

/// Bulk-lane Exp(`rate`) sample at `site`.
pub fn exp_sample(seed: u64, site: Site, rate: f64) -> Result<f64> {
    exp_sample_lane(seed, Lane::Bulk, site, rate)
}

pub fn exp_sample_lane(seed: u64, lane: Lane, site: Site, rate: f64) -> Result<f64> {
    check_rate(rate)?;
    Ok(exp_from_uniform(site_uniform(lane.key(seed), site), rate))
}

/// Anything that assigns a weight to each site.
pub trait SiteWeights: Sync {
    fn weight(&self, x: Site) -> f64;

    /// Weights over `window` in storage order.
    fn materialize(&self, window: &LatticeWindow) -> Vec<f64> {
        let w = window.width();
        let mut out = vec![0.0; window.area()];
        out.par_chunks_mut(w).enumerate().for_each(|(row, chunk)| {
            let x2 = window.lo.x2 + row as i64;
            for (col, slot) in chunk.iter_mut().enumerate() {
                *slot = self.weight(Site::new(window.lo.x1 + col as i64, x2));
            }
        });
        out
    }
}

impl<T: SiteWeights + ?Sized> SiteWeights for &T {
    fn weight(&self, x: Site) -> f64 {
        (**self).weight(x)
    }
}

/// Lazily evaluated i.i.d. exponential field.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightField {
    seed: u64,
    window: LatticeWindow,
    rate: f64,
    lane: Lane,
    offset: Site,
    key: u64,
}

pub fn make_weight_field(seed: u64, window: LatticeWindow, rate: f64) -> Result<WeightField> {
    WeightField::new(seed, window, rate, Lane::Bulk)
}

impl WeightField {
    pub fn new(seed: u64, window: LatticeWindow, rate: f64, lane: Lane) -> Result<Self> {
        check_rate(rate)?;
        LatticeWindow::new(window.lo, window.hi)?;
        Ok(WeightField { seed, window, rate, lane, offset: Site::ORIGIN, key: lane.key(seed) })
    }

    /// Field whose hash key is translated by `z`: `shifted(z).weight(x) == weight(x + z)`.
    pub fn shifted(&self, z: Site) -> Self {
        WeightField { offset: self.offset + z, ..self.clone() }
    }

    pub fn with_window(&self, window: LatticeWindow) -> Self {
        WeightField { window, ..self.clone() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn lane(&self) -> Lane {
        self.lane
    }

    pub fn offset(&self) -> Site {
        self.offset
    }
}

impl SiteWeights for WeightField {
    #[inline]
    fn weight(&self, x: Site) -> f64 {
        exp_from_uniform(site_uniform(self.key, x + self.offset), self.rate)
    }
}

/// Explicit weights on a window, for fixtures and precomputed fields.
/// Querying outside the window panics.
#[derive(Clone, Debug, PartialEq)]
pub struct GridWeights {
    window: LatticeWindow,
    values: Vec<f64>,
}

impl GridWeights {
    pub fn new(window: LatticeWindow, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.area() {
            return domain(format!(
                "grid has {} values but window {} has {} sites",
                values.len(),
                window,
                window.area()
            ));
        }
        Ok(GridWeights { window, values })
    }

    pub fn from_fn(window: LatticeWindow, f: impl Fn(Site) -> f64) -> Self {
        let values = window.sites().map(f).collect();
        GridWeights { window, values }
    }

    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl SiteWeights for GridWeights {
    fn weight(&self, x: Site) -> f64 {
        match self.window.index(x) {
            Some(i) => self.values[i],
            None => panic!("site {x} outside fixture window {}", self.window),
        }
    }
}

/// Every site has the same weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantWeights(pub f64);

impl SiteWeights for ConstantWeights {
    fn weight(&self, _x: Site) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{exp_cdf, ks_test, pearson, KsLevel};

    fn win(a: i64, b: i64, c: i64, d: i64) -> LatticeWindow {
        LatticeWindow::new(Site::new(a, b), Site::new(c, d)).unwrap()
    }

    #[test]
    fn inverse_cdf_at_e_inverse() {
        assert_eq!(exp_from_uniform((-1.0f64).exp(), 1.0), 1.0);
        assert_eq!(exp_from_uniform((-1.0f64).exp(), 2.0), 0.5);
    }

    #[test]
    fn samples_are_deterministic_and_positive() {
        let x = Site::new(17, -4);
        let a = exp_sample(9, x, 1.0).unwrap();
        let b = exp_sample(9, x, 1.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a > 0.0);
        assert_ne!(a, exp_sample(10, x, 1.0).unwrap());
    }

    #[test]
    fn nonpositive_rate_is_a_domain_error() {
        assert!(exp_sample(1, Site::ORIGIN, 0.0).is_err());
        assert!(exp_sample(1, Site::ORIGIN, -1.0).is_err());
        assert!(make_weight_field(1, win(0, 0, 1, 1), f64::NAN).is_err());
    }

    #[test]
    fn samples_sit_on_the_quantum_grid() {
        let f = make_weight_field(3, win(0, 0, 9, 9), 0.3).unwrap();
        for x in f.window().sites() {
            let w = f.weight(x);
            assert_eq!((w / QUANTUM).fract(), 0.0);
            assert!(w >= QUANTUM);
        }
    }

    #[test]
    fn single_site_window() {
        let f = make_weight_field(1, win(0, 0, 0, 0), 1.0).unwrap();
        assert_eq!(f.window().area(), 1);
        assert_eq!(f.materialize(&f.window()).len(), 1);
    }

    #[test]
    fn overlapping_windows_agree() {
        let a = make_weight_field(5, win(0, 0, 20, 20), 1.0).unwrap();
        let b = make_weight_field(5, win(10, 10, 40, 30), 1.0).unwrap();
        let overlap = a.window().intersect(&b.window()).unwrap();
        let va = a.materialize(&overlap);
        let vb = b.materialize(&overlap);
        assert_eq!(va, vb);
    }

    #[test]
    fn key_shift_is_translation() {
        let f = make_weight_field(11, win(-5, -5, 5, 5), 1.0).unwrap();
        let z = Site::new(7, -3);
        let g = f.shifted(z);
        for x in f.window().sites() {
            assert_eq!(g.weight(x), f.weight(x + z));
        }
    }

    #[test]
    fn lanes_are_distinct() {
        let x = Site::new(2, 3);
        let vals: Vec<f64> = [Lane::Bulk, Lane::BoundaryI, Lane::BoundaryJ, Lane::Zeta]
            .iter()
            .map(|&l| exp_sample_lane(4, l, x, 1.0).unwrap())
            .collect();
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                assert_ne!(vals[i], vals[j]);
            }
        }
    }

    #[test]
    fn mean_over_a_million_sites() {
        let f = make_weight_field(2024, win(0, 0, 999, 999), 1.0).unwrap();
        let v = f.materialize(&f.window());
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn ks_passes_in_most_seeds() {
        let window = win(0, 0, 999, 99);
        let passes = (0..100u64)
            .filter(|&s| {
                let f = make_weight_field(s, window, 1.0).unwrap();
                ks_test(&f.materialize(&window), exp_cdf(1.0), KsLevel::Five).passed
            })
            .count();
        assert!(passes >= 90, "{passes}/100");
    }

    #[test]
    fn lag_one_correlations_are_small() {
        let window = win(0, 0, 299, 299);
        let f = make_weight_field(77, window, 1.0).unwrap();
        let v = f.materialize(&window);
        let w = window.width();
        let (mut a, mut b, mut c, mut d) = (vec![], vec![], vec![], vec![]);
        for r in 0..w - 1 {
            for col in 0..w - 1 {
                a.push(v[r * w + col]);
                b.push(v[r * w + col + 1]);
                c.push(v[r * w + col]);
                d.push(v[(r + 1) * w + col]);
            }
        }
        let bound = 4.0 / (a.len() as f64).sqrt();
        assert!(pearson(&a, &b).abs() < bound);
        assert!(pearson(&c, &d).abs() < bound);
    }
}
