//! Increment-stationary exponential-α systems on a quadrant.
//!
//! Sites are `(i, j)` with `0 ≤ i ≤ m`, `0 ≤ j ≤ n`. `I_x` lives on sites with
//! `i ≥ 1` (the increment across the edge `{x-e1, x}`), `J_x` on sites with
//! `j ≥ 1`, `ζ_x` on bulk sites `i, j ≥ 1`, and `η_y` on `[0, m-1] × [0, n-1]`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::lpp::{LppTable, Orientation};
use crate::stats::{exp_cdf, ks_test, pearson, KsLevel};
use crate::wavefront;
use crate::weights::{exp_from_uniform, site_uniform, Lane};

fn check_unit(name: &str, t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, 1), got {t}"))
    }
}

/// `α(u) = √u1 / (√u1 + √(1-u1))`.
pub fn alpha_of_direction(u1: f64) -> Result<f64> {
    check_unit("u1", u1)?;
    let (a, b) = (u1.sqrt(), (1.0 - u1).sqrt());
    Ok(a / (a + b))
}

/// `u1(α) = α² / ((1-α)² + α²)`.
pub fn direction_of_alpha(alpha: f64) -> Result<f64> {
    check_unit("alpha", alpha)?;
    let b = 1.0 - alpha;
    Ok(alpha * alpha / (b * b + alpha * alpha))
}

/// A direction `u = (u1, 1-u1)` together with its parameter `α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionParam {
    pub u1: f64,
    pub alpha: f64,
}

impl DirectionParam {
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Ok(DirectionParam { u1: direction_of_alpha(alpha)?, alpha })
    }

    pub fn from_u1(u1: f64) -> Result<Self> {
        Ok(DirectionParam { u1, alpha: alpha_of_direction(u1)? })
    }

    pub fn u2(&self) -> f64 {
        1.0 - self.u1
    }
}

/// Quadrant realisation of the exponential-α system.
#[derive(Clone, Debug, PartialEq)]
pub struct StationarySystem {
    pub alpha: f64,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    i_vals: Vec<f64>,
    j_vals: Vec<f64>,
    zeta: Vec<f64>,
    eta: Vec<f64>,
}

impl StationarySystem {
    /// Assembles a system from explicit arrays. Lengths: `I` is `m × (n+1)`
    /// (rows `j = 0..=n`, columns `i = 1..=m`), `J` is `(m+1) × n`, `ζ` and
    /// `η` are `m × n`. Used by fixtures; no invariant is enforced.
    pub fn from_arrays(
        alpha: f64,
        m: usize,
        n: usize,
        i_vals: Vec<f64>,
        j_vals: Vec<f64>,
        zeta: Vec<f64>,
        eta: Vec<f64>,
    ) -> Result<Self> {
        if i_vals.len() != m * (n + 1)
            || j_vals.len() != (m + 1) * n
            || zeta.len() != m * n
            || eta.len() != m * n
        {
            return domain("array lengths do not match the quadrant size");
        }
        Ok(StationarySystem { alpha, seed: 0, m, n, i_vals, j_vals, zeta, eta })
    }

    fn in_range(&self, x: Site) -> bool {
        x.x1 >= 0 && x.x2 >= 0 && x.x1 as usize <= self.m && x.x2 as usize <= self.n
    }

    /// `I_x`, defined for `x1 ≥ 1`.
    pub fn i_at(&self, x: Site) -> Option<f64> {
        (self.in_range(x) && x.x1 >= 1)
            .then(|| self.i_vals[x.x2 as usize * self.m + (x.x1 as usize - 1)])
    }

    /// `J_x`, defined for `x2 ≥ 1`.
    pub fn j_at(&self, x: Site) -> Option<f64> {
        (self.in_range(x) && x.x2 >= 1)
            .then(|| self.j_vals[(x.x2 as usize - 1) * (self.m + 1) + x.x1 as usize])
    }

    /// `ζ_x`, defined for `x1, x2 ≥ 1`.
    pub fn zeta_at(&self, x: Site) -> Option<f64> {
        (self.in_range(x) && x.x1 >= 1 && x.x2 >= 1)
            .then(|| self.zeta[(x.x2 as usize - 1) * self.m + (x.x1 as usize - 1)])
    }

    /// `η_x`, defined for `x ≤ (m-1, n-1)`.
    pub fn eta_at(&self, x: Site) -> Option<f64> {
        (x.x1 >= 0 && x.x2 >= 0 && (x.x1 as usize) < self.m && (x.x2 as usize) < self.n)
            .then(|| self.eta[x.x2 as usize * self.m + x.x1 as usize])
    }

    pub fn eta_values(&self) -> &[f64] {
        &self.eta
    }

    pub fn window(&self) -> LatticeWindow {
        LatticeWindow { lo: Site::ORIGIN, hi: Site::new(self.m as i64, self.n as i64) }
    }
}

fn pos(t: f64) -> f64 {
    t.max(0.0)
}

/// Builds the quadrant from independent axis increments
/// `I_{(i,0)} ~ Exp(α)`, `J_{(0,j)} ~ Exp(1-α)` and bulk `ζ ~ Exp(1)`.
pub fn build_stationary_quadrant(alpha: f64, seed: u64, m: usize, n: usize) -> Result<StationarySystem> {
    check_unit("alpha", alpha)?;
    if m == 0 || n == 0 {
        return domain(format!("quadrant size must be at least 1x1, got {m}x{n}"));
    }
    let (ki, kj, kz) = (Lane::BoundaryI.key(seed), Lane::BoundaryJ.key(seed), Lane::Zeta.key(seed));
    let bi: Vec<f64> =
        (1..=m).map(|i| exp_from_uniform(site_uniform(ki, Site::new(i as i64, 0)), alpha)).collect();
    let bj: Vec<f64> = (1..=n)
        .map(|j| exp_from_uniform(site_uniform(kj, Site::new(0, j as i64)), 1.0 - alpha))
        .collect();
    // Cell state: [I_x, J_x, ζ_x, η_{x-e1-e2}].
    let cells = wavefront::fill(m, n, |i, j, left: Option<[f64; 4]>, down: Option<[f64; 4]>| {
        let x = Site::new(i as i64 + 1, j as i64 + 1);
        let i_below = down.map_or(bi[i], |c| c[0]);
        let j_left = left.map_or(bj[j], |c| c[1]);
        let z = exp_from_uniform(site_uniform(kz, x), 1.0);
        let d = i_below - j_left;
        [z + pos(d), z + pos(-d), z, i_below.min(j_left)]
    });
    let mut i_vals = vec![0.0; m * (n + 1)];
    let mut j_vals = vec![0.0; (m + 1) * n];
    let mut zeta = vec![0.0; m * n];
    let mut eta = vec![0.0; m * n];
    i_vals[..m].copy_from_slice(&bi);
    for (j, &v) in bj.iter().enumerate() {
        j_vals[j * (m + 1)] = v;
    }
    for j in 0..n {
        for i in 0..m {
            let c = cells[j * m + i];
            i_vals[(j + 1) * m + i] = c[0];
            j_vals[j * (m + 1) + i + 1] = c[1];
            zeta[j * m + i] = c[2];
            eta[j * m + i] = c[3];
        }
    }
    Ok(StationarySystem { alpha, seed, m, n, i_vals, j_vals, zeta, eta })
}

/// Largest absolute residual of each structural equation over the bulk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub sites: usize,
    /// `η_{x-e1-e2} = I_{x-e2} ∧ J_{x-e1}`.
    pub eta_residual: f64,
    /// `I_x = ζ_x + (I_{x-e2} - J_{x-e1})⁺`.
    pub i_residual: f64,
    /// `J_x = ζ_x + (I_{x-e2} - J_{x-e1})⁻`.
    pub j_residual: f64,
    /// `ζ_x = I_x ∧ J_x`.
    pub zeta_residual: f64,
}

impl StructureReport {
    pub fn max_residual(&self) -> f64 {
        self.eta_residual.max(self.i_residual).max(self.j_residual).max(self.zeta_residual)
    }
}

pub fn check_structure(sys: &StationarySystem) -> StructureReport {
    let mut r = StructureReport::default();
    for j in 1..=sys.n as i64 {
        for i in 1..=sys.m as i64 {
            let x = Site::new(i, j);
            let ib = sys.i_at(x - Site::E2).unwrap();
            let jl = sys.j_at(x - Site::E1).unwrap();
            let (ix, jx, z) = (sys.i_at(x).unwrap(), sys.j_at(x).unwrap(), sys.zeta_at(x).unwrap());
            let eta = sys.eta_at(x - Site::DIAG).unwrap();
            r.eta_residual = r.eta_residual.max((eta - ib.min(jl)).abs());
            r.i_residual = r.i_residual.max((ix - (z + pos(ib - jl))).abs());
            r.j_residual = r.j_residual.max((jx - (z + pos(jl - ib))).abs());
            r.zeta_residual = r.zeta_residual.max((z - ix.min(jx)).abs());
            r.sites += 1;
        }
    }
    r
}

/// `G^α` on the quadrant: `G_0 = 0`, axis partial sums of `I`/`J`, and
/// `G_x = ζ_x + G_{x-e1} ∨ G_{x-e2}` in the bulk.
pub fn stationary_lpp(sys: &StationarySystem) -> LppTable {
    let (w, h) = (sys.m + 1, sys.n + 1);
    let values = wavefront::fill(w, h, |i, j, left: Option<f64>, down: Option<f64>| {
        let x = Site::new(i as i64, j as i64);
        match (left, down) {
            (None, None) => 0.0,
            (Some(l), None) => l + sys.i_at(x).unwrap(),
            (None, Some(d)) => d + sys.j_at(x).unwrap(),
            (Some(l), Some(d)) => sys.zeta_at(x).unwrap() + l.max(d),
        }
    });
    LppTable::from_parts(Site::ORIGIN, Orientation::Forward, sys.window(), values, 0)
}

/// Largest `|G_x - G_{x-e1} - I_x|` and `|G_x - G_{x-e2} - J_x|`.
pub fn increment_residual(sys: &StationarySystem, g: &LppTable) -> f64 {
    let mut worst: f64 = 0.0;
    for x in sys.window().sites() {
        let gx = g.value(x).unwrap();
        if let Some(i) = sys.i_at(x) {
            worst = worst.max((gx - g.value(x - Site::E1).unwrap() - i).abs());
        }
        if let Some(j) = sys.j_at(x) {
            worst = worst.max((gx - g.value(x - Site::E2).unwrap() - j).abs());
        }
    }
    worst
}

/// Finite slice of a down-right path: each step is `+e1` or `-e2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownRightPath {
    sites: Vec<Site>,
}

impl DownRightPath {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return domain("a down-right path needs at least one site");
        }
        for w in sites.windows(2) {
            let d = w[1] - w[0];
            if d != Site::E1 && d != -Site::E2 {
                return domain(format!("{} -> {} is not a down-right step", w[0], w[1]));
            }
        }
        Ok(DownRightPath { sites })
    }

    /// Alternating staircase `start, start+e1, start+e1-e2, …` with `2·pairs` steps.
    pub fn staircase(start: Site, pairs: usize) -> Self {
        let mut sites = vec![start];
        let mut x = start;
        for _ in 0..pairs {
            x = x + Site::E1;
            sites.push(x);
            x = x - Site::E2;
            sites.push(x);
        }
        DownRightPath { sites }
    }

    /// `…, c-2e1, c-e1, c, c-e2, c-2e2, …`: west arm then south arm.
    pub fn corner(c: Site, west: usize, south: usize) -> Self {
        let mut sites: Vec<Site> = (0..=west as i64).rev().map(|k| c - Site::new(k, 0)).collect();
        sites.extend((1..=south as i64).map(|k| c - Site::new(0, k)));
        DownRightPath { sites }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn position(&self, x: Site) -> Option<usize> {
        self.sites.iter().position(|&y| y == x)
    }
}

/// Which increment an edge of a down-right path carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    I,
    J,
}

/// Edge variables along `path`: an `e1` step into `y` gives `I_y`, a `-e2`
/// step out of `y` gives `J_y`.
pub fn path_edge_values(sys: &StationarySystem, path: &DownRightPath) -> Result<Vec<(EdgeKind, f64)>> {
    let mut out = Vec::with_capacity(path.len().saturating_sub(1));
    for w in path.sites().windows(2) {
        let v = if w[1] - w[0] == Site::E1 {
            sys.i_at(w[1]).map(|t| (EdgeKind::I, t))
        } else {
            sys.j_at(w[0]).map(|t| (EdgeKind::J, t))
        };
        match v {
            Some(e) => out.push(e),
            None => return domain(format!("edge {} -> {} leaves the quadrant", w[0], w[1])),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DownRightLawReport {
    pub alpha: f64,
    pub replicas: usize,
    pub edges: usize,
    /// Fraction of replicas whose I-edges pass a 1% KS test against Exp(α).
    pub i_ks_pass_fraction: f64,
    /// Same for J-edges against Exp(1-α).
    pub j_ks_pass_fraction: f64,
    /// Pooled correlation of standardized neighbouring edge variables.
    pub neighbour_correlation: f64,
    /// Pooled correlation of each edge with the η just south-west of it.
    pub edge_eta_correlation: f64,
    pub correlation_samples: usize,
    pub correlation_bound: f64,
}

impl DownRightLawReport {
    pub fn passed(&self, min_pass_fraction: f64) -> bool {
        self.i_ks_pass_fraction >= min_pass_fraction
            && self.j_ks_pass_fraction >= min_pass_fraction
            && self.neighbour_correlation.abs() < self.correlation_bound
            && self.edge_eta_correlation.abs() < self.correlation_bound
    }
}

/// Marginal and pairwise-correlation tests for the edge variables of `path`
/// over `replicas` independent quadrants of size `m × n`.
pub fn check_downright_law(
    alpha: f64,
    m: usize,
    n: usize,
    path: &DownRightPath,
    replicas: usize,
    seed: u64,
) -> Result<DownRightLawReport> {
    use rayon::prelude::*;
    let per: Vec<Result<(bool, bool, Vec<(f64, f64)>, Vec<(f64, f64)>)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let sys = build_stationary_quadrant(alpha, seed.wrapping_add(r), m, n)?;
            let edges = path_edge_values(&sys, path)?;
            let std = |&(k, t): &(EdgeKind, f64)| match k {
                EdgeKind::I => alpha * t - 1.0,
                EdgeKind::J => (1.0 - alpha) * t - 1.0,
            };
            let is: Vec<f64> = edges.iter().filter(|e| e.0 == EdgeKind::I).map(|e| e.1).collect();
            let js: Vec<f64> = edges.iter().filter(|e| e.0 == EdgeKind::J).map(|e| e.1).collect();
            let i_ok = is.is_empty() || ks_test(&is, exp_cdf(alpha), KsLevel::One).passed;
            let j_ok = js.is_empty() || ks_test(&js, exp_cdf(1.0 - alpha), KsLevel::One).passed;
            let nb: Vec<(f64, f64)> = edges.windows(2).map(|w| (std(&w[0]), std(&w[1]))).collect();
            let mut sw = Vec::new();
            for (k, w) in path.sites().windows(2).enumerate() {
                // The η strictly south-west of the edge endpoint nearest the quadrant corner.
                let base = w[0].min(w[1]) - Site::DIAG;
                if let Some(e) = sys.eta_at(base) {
                    sw.push((std(&edges[k]), e - 1.0));
                }
            }
            Ok((i_ok, j_ok, nb, sw))
        })
        .collect();
    let mut i_pass = 0;
    let mut j_pass = 0;
    let (mut nb, mut sw) = (Vec::new(), Vec::new());
    for p in per {
        let (a, b, c, d) = p?;
        i_pass += a as usize;
        j_pass += b as usize;
        nb.extend(c);
        sw.extend(d);
    }
    let corr = |v: &[(f64, f64)]| {
        let (a, b): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
        pearson(&a, &b)
    };
    let samples = nb.len().min(sw.len());
    Ok(DownRightLawReport {
        alpha,
        replicas,
        edges: path.len() - 1,
        i_ks_pass_fraction: i_pass as f64 / replicas as f64,
        j_ks_pass_fraction: j_pass as f64 / replicas as f64,
        neighbour_correlation: corr(&nb),
        edge_eta_correlation: corr(&sw),
        correlation_samples: samples,
        correlation_bound: 4.0 / (samples as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;
    use proptest::prelude::*;

    #[test]
    fn direction_examples() {
        assert!((alpha_of_direction(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((direction_of_alpha(1.0 / 3.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((alpha_of_direction(0.2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((alpha_of_direction(0.8).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(alpha_of_direction(0.0).is_err());
        assert!(direction_of_alpha(1.0).is_err());
        assert!(direction_of_alpha(1.2).is_err());
    }

    #[test]
    fn hand_evaluated_cell() {
        // Inputs (I_{x-e2}, J_{x-e1}) = (2, 1) with ζ_x = 1.
        let (ib, jl, z) = (2.0, 1.0, 1.0);
        let (ix, jx) = (z + pos(ib - jl), z + pos(jl - ib));
        assert_eq!((ix, jx), (2.0, 1.0));
        let sys = StationarySystem::from_arrays(
            0.5,
            1,
            1,
            vec![ib, ix],
            vec![jl, jx],
            vec![z],
            vec![ib.min(jl)],
        )
        .unwrap();
        assert_eq!(sys.eta_at(Site::ORIGIN), Some(1.0));
        assert_eq!(check_structure(&sys).max_residual(), 0.0);
    }

    #[test]
    fn forced_tie_gives_equal_outputs() {
        let z = 0.7;
        let (ib, jl) = (1.25, 1.25);
        assert_eq!(z + pos(ib - jl), z);
        assert_eq!(z + pos(jl - ib), z);
    }

    #[test]
    fn invalid_inputs() {
        assert!(build_stationary_quadrant(0.0, 1, 5, 5).is_err());
        assert!(build_stationary_quadrant(0.5, 1, 0, 5).is_err());
        assert!(DownRightPath::new(vec![Site::ORIGIN, Site::E2]).is_err());
    }

    #[test]
    fn structure_and_increments_are_exact() {
        for seed in 0..5 {
            let sys = build_stationary_quadrant(0.37, seed, 60, 45).unwrap();
            assert_eq!(check_structure(&sys).max_residual(), 0.0);
            let g = stationary_lpp(&sys);
            assert_eq!(increment_residual(&sys, &g), 0.0);
            let mut s = 0.0;
            for k in 1..=60 {
                s += sys.i_at(Site::new(k, 0)).unwrap();
                assert_eq!(g.value(Site::new(k, 0)), Some(s));
            }
        }
    }

    #[test]
    fn eta_is_exponential() {
        let passes = (0..200u64)
            .filter(|&s| {
                let sys = build_stationary_quadrant(0.5, s, 100, 100).unwrap();
                ks_test(sys.eta_values(), exp_cdf(1.0), KsLevel::Five).passed
            })
            .count();
        assert!(passes >= 180, "{passes}/200");
    }

    #[test]
    fn mean_of_g_at_a_corner_point() {
        let alpha = 0.4;
        let vals: Vec<f64> = (0..600u64)
            .map(|s| {
                let sys = build_stationary_quadrant(alpha, 1000 + s, 20, 20).unwrap();
                stationary_lpp(&sys).value(Site::new(20, 20)).unwrap()
            })
            .collect();
        let (m, se) = mean_se(&vals);
        let target = 20.0 / alpha + 20.0 / (1.0 - alpha);
        assert!((m - target).abs() < 3.0 * se, "{m} vs {target} (se {se})");
    }

    #[test]
    fn staircase_law_through_the_centre() {
        let path = DownRightPath::staircase(Site::new(10, 50), 20);
        let r = check_downright_law(0.5, 60, 60, &path, 500, 7).unwrap();
        assert!(r.passed(0.95), "{r:?}");
    }

    #[test]
    fn axis_path_passes() {
        let path = DownRightPath::corner(Site::ORIGIN, 0, 0);
        assert_eq!(path.len(), 1);
        let mut sites: Vec<Site> = (0..=30).rev().map(|j| Site::new(0, j)).collect();
        sites.extend((1..=30).map(|i| Site::new(i, 0)));
        let axes = DownRightPath::new(sites).unwrap();
        let r = check_downright_law(0.3, 30, 30, &axes, 200, 3).unwrap();
        assert!(r.i_ks_pass_fraction >= 0.95 && r.j_ks_pass_fraction >= 0.95, "{r:?}");
    }

    #[test]
    fn burke_property_above_an_interior_path() {
        // Edges of a staircase deep in the quadrant keep the boundary laws.
        let path = DownRightPath::staircase(Site::new(25, 70), 30);
        let r = check_downright_law(0.7, 80, 80, &path, 300, 11).unwrap();
        assert!(r.passed(0.95), "{r:?}");
    }

    proptest! {
        #[test]
        fn direction_round_trip(a in 0.001f64..0.999) {
            let u = direction_of_alpha(a).unwrap();
            prop_assert!((alpha_of_direction(u).unwrap() - a).abs() < 1e-12);
        }

        #[test]
        fn structure_is_exact_for_any_seed(seed in any::<u64>(), alpha in 0.05f64..0.95, m in 1usize..40, n in 1usize..40) {
            let sys = build_stationary_quadrant(alpha, seed, m, n).unwrap();
            prop_assert_eq!(check_structure(&sys).max_residual(), 0.0);
            prop_assert_eq!(increment_residual(&sys, &stationary_lpp(&sys)), 0.0);
        }
    }
}
