//! Finite-horizon Busemann fields `B_v(x, y) = G_{x,v} - G_{y,v}` and the dual
//! weights `X_x = B_v(x-e1, x) ∧ B_v(x-e2, x)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, geometry, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::lpp::{backward_from_grid, LppTable};
use crate::stationary::direction_of_alpha;
use crate::stats::{exp_cdf, ks_test, mean_se, KsLevel};
use crate::weights::{make_weight_field, SiteWeights};

/// `round(N·u)` with round-half-up per coordinate, then the larger coordinate
/// absorbs any excess so that `|v|_1 = N`.
pub fn terminal_for(n: i64, u1: f64) -> Site {
    let r = |t: f64| (t + 0.5).floor() as i64;
    let (mut a, mut b) = (r(n as f64 * u1), r(n as f64 * (1.0 - u1)));
    let excess = a + b - n;
    if a >= b {
        a -= excess;
    } else {
        b -= excess;
    }
    Site::new(a, b)
}

/// Geometry of one finite-horizon experiment: terminal `v = round(N·u(α))`,
/// window `[lo, v]` (default `lo = -v`) and trust margin. The default margin
/// is a quarter of the window extent per coordinate, i.e. `N/4` on the diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub alpha: f64,
    pub u1: f64,
    pub n: i64,
    pub terminal: Site,
    pub window: LatticeWindow,
    pub margin: Site,
}

fn quarter_margin(window: &LatticeWindow) -> Site {
    let ext = window.hi - window.lo;
    Site::new(((ext.x1 + 2) / 4).max(1), ((ext.x2 + 2) / 4).max(1))
}

impl Horizon {
    pub fn new(alpha: f64, n: i64) -> Result<Self> {
        let u1 = direction_of_alpha(alpha)?;
        if n < 4 {
            return domain(format!("horizon N must be at least 4, got {n}"));
        }
        let v = terminal_for(n, u1);
        let window = LatticeWindow::new(-v, v)?;
        Ok(Horizon { alpha, u1, n, terminal: v, window, margin: quarter_margin(&window) })
    }

    /// Moves the lower corner; the margin is kept.
    pub fn with_lower(mut self, lo: Site) -> Result<Self> {
        self.window = LatticeWindow::new(lo, self.terminal)?;
        Ok(self)
    }

    pub fn with_margin(mut self, margin: Site) -> Self {
        self.margin = margin;
        self
    }

    pub fn trusted(&self) -> Result<LatticeWindow> {
        trusted_window(&self.window, self.margin)
    }

    pub fn build<W: SiteWeights + ?Sized>(&self, weights: &W) -> Result<BusemannField> {
        busemann_with_margin(weights, self.terminal, self.window, self.margin)
    }

    /// Field for bulk seed `seed`.
    pub fn build_seeded(&self, seed: u64) -> Result<BusemannField> {
        self.build(&make_weight_field(seed, self.window, 1.0)?)
    }
}

fn trusted_window(window: &LatticeWindow, margin: Site) -> Result<LatticeWindow> {
    if margin.x1 < 1 || margin.x2 < 1 {
        return domain(format!("trust margin must be at least (1, 1), got {margin}"));
    }
    let hi = window.hi - margin;
    if !window.lo.le(hi) {
        return geometry(format!("trust margin {margin} leaves nothing of {window}"));
    }
    LatticeWindow::new(window.lo, hi)
}

#[derive(Clone, Debug)]
pub struct BusemannField {
    terminal: Site,
    window: LatticeWindow,
    trusted: LatticeWindow,
    y: Vec<f64>,
    g: LppTable,
}

/// Field for terminal `v = window.hi` with the default quarter-extent margin.
pub fn busemann_from_terminal<W: SiteWeights + ?Sized>(
    weights: &W,
    v: Site,
    window: LatticeWindow,
) -> Result<BusemannField> {
    busemann_with_margin(weights, v, window, quarter_margin(&window))
}

pub fn busemann_with_margin<W: SiteWeights + ?Sized>(
    weights: &W,
    v: Site,
    window: LatticeWindow,
    margin: Site,
) -> Result<BusemannField> {
    if window.hi != v {
        return geometry(format!("terminal {v} must be the upper corner of {window}"));
    }
    let trusted = trusted_window(&window, margin)?;
    let y = weights.materialize(&window);
    let g = backward_from_grid(&y, window);
    Ok(BusemannField { terminal: v, window, trusted, y, g })
}

impl BusemannField {
    pub fn terminal(&self) -> Site {
        self.terminal
    }

    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    pub fn trusted(&self) -> LatticeWindow {
        self.trusted
    }

    pub fn table(&self) -> &LppTable {
        &self.g
    }

    pub fn weight(&self, x: Site) -> Option<f64> {
        self.window.index(x).map(|i| self.y[i])
    }

    /// `G_{x,v}`.
    pub fn g(&self, x: Site) -> Option<f64> {
        self.g.value(x)
    }

    /// `B_v(x, y) = G_{x,v} - G_{y,v}`.
    pub fn b(&self, x: Site, y: Site) -> Option<f64> {
        Some(self.g(x)? - self.g(y)?)
    }

    /// `B_v(x, x+e1)`.
    #[inline]
    pub fn b1(&self, x: Site) -> Option<f64> {
        self.b(x, x + Site::E1)
    }

    /// `B_v(x, x+e2)`.
    #[inline]
    pub fn b2(&self, x: Site) -> Option<f64> {
        self.b(x, x + Site::E2)
    }

    /// `B_v(x-e1, x)`.
    #[inline]
    pub fn sw1(&self, x: Site) -> Option<f64> {
        self.b(x - Site::E1, x)
    }

    /// `B_v(x-e2, x)`.
    #[inline]
    pub fn sw2(&self, x: Site) -> Option<f64> {
        self.b(x - Site::E2, x)
    }

    /// Dual weight `X_x`.
    pub fn dual_x(&self, x: Site) -> Option<f64> {
        Some(self.sw1(x)?.min(self.sw2(x)?))
    }

    /// Sum of unit increments along an up-right path, starting at `path[0]`.
    pub fn path_sum(&self, path: &[Site]) -> Option<f64> {
        let mut s = 0.0;
        for w in path.windows(2) {
            s += if w[1] - w[0] == Site::E1 { self.b1(w[0])? } else { self.b2(w[0])? };
        }
        Some(s)
    }
}

/// The bulk weights `Y` the field was built from.
impl SiteWeights for BusemannField {
    fn weight(&self, x: Site) -> f64 {
        self.y[self.window.index(x).unwrap_or_else(|| panic!("weight requested outside {}", self.window))]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CocycleReport {
    pub squares: usize,
    pub max_square_residual: f64,
    pub recovery_sites: usize,
    pub max_recovery_residual: f64,
    pub path_pairs: usize,
    pub max_path_residual: f64,
}

impl CocycleReport {
    pub fn max_residual(&self) -> f64 {
        self.max_square_residual.max(self.max_recovery_residual).max(self.max_path_residual)
    }
}

fn random_staircase(rng: &mut ChaCha8Rng, x: Site, y: Site) -> Vec<Site> {
    let mut p = vec![x];
    let mut c = x;
    while c != y {
        let need = y - c;
        let east = if need.x1 == 0 {
            false
        } else if need.x2 == 0 {
            true
        } else {
            rng.random_range(0..need.x1 + need.x2) < need.x1
        };
        c = c + if east { Site::E1 } else { Site::E2 };
        p.push(c);
    }
    p
}

/// Exact checks on the trusted window: unit-square closure
/// `B1(x) + B2(x+e1) = B2(x) + B1(x+e2)`, recovery `Y_x = B1(x) ∧ B2(x)`,
/// and path independence for `pairs` random pairs of staircases.
pub fn check_cocycle(field: &BusemannField, pairs: usize, seed: u64) -> CocycleReport {
    let t = field.trusted();
    let mut r = CocycleReport::default();
    for x in t.sites() {
        let (b1, b2) = (field.b1(x).unwrap(), field.b2(x).unwrap());
        r.max_recovery_residual =
            r.max_recovery_residual.max((field.weight(x).unwrap() - b1.min(b2)).abs());
        r.recovery_sites += 1;
        if x.x1 < t.hi.x1 && x.x2 < t.hi.x2 {
            let lhs = b1 + field.b2(x + Site::E1).unwrap();
            let rhs = b2 + field.b1(x + Site::E2).unwrap();
            r.max_square_residual = r.max_square_residual.max((lhs - rhs).abs());
            r.squares += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let a = t.site(rng.random_range(0..t.area()));
        let b = t.site(rng.random_range(0..t.area()));
        let (x, y) = (a.min(b), a.max(b));
        let p = random_staircase(&mut rng, x, y);
        let q = random_staircase(&mut rng, x, y);
        let (sp, sq) = (field.path_sum(&p).unwrap(), field.path_sum(&q).unwrap());
        let direct = field.b(x, y).unwrap();
        r.max_path_residual = r.max_path_residual.max((sp - sq).abs()).max((sp - direct).abs());
        r.path_pairs += 1;
    }
    r
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub v_left: Site,
    pub v_right: Site,
    pub sites: usize,
    pub b1_violations: usize,
    pub b2_violations: usize,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.b1_violations == 0 && self.b2_violations == 0
    }
}

/// Sitewise ordering between two terminals with `v_right - v_left = (p, -q)`,
/// `p, q ≥ 0`: `B1` under `v_left` dominates `B1` under `v_right`, and the
/// reverse holds for `B2`. Checked on `[lo, v_left ∧ v_right - (1,1)]`.
pub fn check_direction_monotonicity<W: SiteWeights + ?Sized>(
    weights: &W,
    v_left: Site,
    v_right: Site,
    lo: Site,
) -> Result<MonotonicityReport> {
    let d = v_right - v_left;
    if d.x1 < 0 || d.x2 > 0 || d == Site::ORIGIN {
        return domain(format!(
            "terminals {v_left} and {v_right} are not ordered by +e1/-e2 moves"
        ));
    }
    let common = LatticeWindow::new(lo, v_left.min(v_right) - Site::DIAG)?;
    let left = busemann_with_margin(weights, v_left, LatticeWindow::new(lo, v_left)?, Site::DIAG)?;
    let right = busemann_with_margin(weights, v_right, LatticeWindow::new(lo, v_right)?, Site::DIAG)?;
    let mut r = MonotonicityReport { v_left, v_right, ..Default::default() };
    for x in common.sites() {
        if left.b1(x).unwrap() < right.b1(x).unwrap() {
            r.b1_violations += 1;
        }
        if left.b2(x).unwrap() > right.b2(x).unwrap() {
            r.b2_violations += 1;
        }
        r.sites += 1;
    }
    Ok(r)
}

/// `B1` at `c+(k,-k)` and `B2` at `c+(k+1,-k-1)` for `|k| ≤ half`: the edge
/// increments of one down-right staircase through `c`.
pub fn staircase_samples(field: &BusemannField, c: Site, half: i64) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = field.trusted();
    let mut b1 = Vec::new();
    let mut b2 = Vec::new();
    for k in -half..=half {
        let x = c + Site::new(k, -k);
        let y = c + Site::new(k + 1, -k - 1);
        if !t.contains(x) || !t.contains(y) {
            return geometry(format!("staircase through {c} of half-length {half} leaves {t}"));
        }
        b1.push(field.b1(x).unwrap());
        b2.push(field.b2(y).unwrap());
    }
    Ok((b1, b2))
}

/// Staircase half-length used by the marginal statistics: short enough that
/// the direction to `v` barely changes along it.
pub fn sample_half_length(n: i64) -> i64 {
    (n / 20).max(3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub alpha: f64,
    pub n: i64,
    pub terminal: Site,
    pub replicas: usize,
    pub samples_per_replica: usize,
    pub mean_b1: f64,
    pub se_b1: f64,
    pub target_b1: f64,
    pub mean_b2: f64,
    pub se_b2: f64,
    pub target_b2: f64,
    pub mean_x: f64,
    pub se_x: f64,
    pub ks_pass_b1: f64,
    pub ks_pass_b2: f64,
    pub ks_pass_x: f64,
}

impl MarginalReport {
    pub fn rel_err_b1(&self) -> f64 {
        (self.mean_b1 - self.target_b1).abs() / self.target_b1
    }

    pub fn rel_err_b2(&self) -> f64 {
        (self.mean_b2 - self.target_b2).abs() / self.target_b2
    }
}

/// Staircase samples through the origin for `replicas` seeds: KS tests of
/// `B1` against Exp(α), `B2` against Exp(1-α), `X` against Exp(1), and the
/// pooled means.
pub fn marginal_statistics(alpha: f64, n: i64, replicas: usize, seed: u64) -> Result<MarginalReport> {
    let h = Horizon::new(alpha, n)?;
    let half = sample_half_length(n);
    let per: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let f = h.build_seeded(seed.wrapping_add(r))?;
            let (b1, b2) = staircase_samples(&f, Site::ORIGIN, half)?;
            let xs = (-half..=half).map(|k| f.dual_x(Site::new(k, -k)).unwrap()).collect();
            Ok((b1, b2, xs))
        })
        .collect();
    let mut all = (Vec::new(), Vec::new(), Vec::new());
    let mut pass = (0usize, 0usize, 0usize);
    let mut per_len = 0;
    for p in per {
        let (b1, b2, xs) = p?;
        per_len = b1.len();
        pass.0 += ks_test(&b1, exp_cdf(alpha), KsLevel::Five).passed as usize;
        pass.1 += ks_test(&b2, exp_cdf(1.0 - alpha), KsLevel::Five).passed as usize;
        pass.2 += ks_test(&xs, exp_cdf(1.0), KsLevel::Five).passed as usize;
        all.0.extend(b1);
        all.1.extend(b2);
        all.2.extend(xs);
    }
    // Replica means are independent; samples within a replica are nearly so.
    let (mean_b1, se_b1) = mean_se(&all.0);
    let (mean_b2, se_b2) = mean_se(&all.1);
    let (mean_x, se_x) = mean_se(&all.2);
    let k = replicas as f64;
    Ok(MarginalReport {
        alpha,
        n,
        terminal: h.terminal,
        replicas,
        samples_per_replica: per_len,
        mean_b1,
        se_b1,
        target_b1: 1.0 / alpha,
        mean_b2,
        se_b2,
        target_b2: 1.0 / (1.0 - alpha),
        mean_x,
        se_x,
        ks_pass_b1: pass.0 as f64 / k,
        ks_pass_b2: pass.1 as f64 / k,
        ks_pass_x: pass.2 as f64 / k,
    })
}

/// The same statistics over a ladder of horizons, to expose the finite-N bias.
pub fn marginal_bias_ladder(alpha: f64, ns: &[i64], replicas: usize, seed: u64) -> Result<Vec<MarginalReport>> {
    ns.iter().map(|&n| marginal_statistics(alpha, n, replicas, seed)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub shift: Site,
    pub mean_plain: f64,
    pub mean_shifted: f64,
    pub se_difference: f64,
    pub passed: bool,
}

/// Mean of `B1` on the origin staircase with hash keys shifted by `shift`
/// against unshifted keys; agreement within 3 standard errors.
pub fn check_shift_stationarity(alpha: f64, n: i64, shift: Site, replicas: usize, seed: u64) -> Result<ShiftReport> {
    let h = Horizon::new(alpha, n)?;
    let half = sample_half_length(n);
    let run = |offset: Site| -> Result<Vec<f64>> {
        let per: Vec<Result<f64>> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let w = make_weight_field(seed.wrapping_add(r), h.window, 1.0)?.shifted(offset);
                let f = h.build(&w)?;
                let (b1, _) = staircase_samples(&f, Site::ORIGIN, half)?;
                Ok(b1.iter().sum::<f64>() / b1.len() as f64)
            })
            .collect();
        per.into_iter().collect()
    };
    let (m0, s0) = mean_se(&run(Site::ORIGIN)?);
    let (m1, s1) = mean_se(&run(shift)?);
    let se = (s0 * s0 + s1 * s1).sqrt();
    Ok(ShiftReport { shift, mean_plain: m0, mean_shifted: m1, se_difference: se, passed: (m0 - m1).abs() <= 3.0 * se })
}

/// Dual weights `X` on `[lo+(1,1), v]` and their reflection `Ỹ_x = X_{-x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualWeightField {
    window: LatticeWindow,
    x: Vec<f64>,
    excluded: usize,
}

pub fn dual_weights(field: &BusemannField) -> Result<DualWeightField> {
    let w = field.window();
    let window = LatticeWindow::new(w.lo + Site::DIAG, w.hi)?;
    let x = window.sites().map(|s| field.dual_x(s).unwrap()).collect();
    Ok(DualWeightField { window, x, excluded: w.area() - window.area() })
}

impl DualWeightField {
    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    /// Window sites without both south-west neighbours.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    pub fn x(&self, s: Site) -> Option<f64> {
        self.window.index(s).map(|i| self.x[i])
    }

    pub fn tilde_y(&self, s: Site) -> Option<f64> {
        self.x(-s)
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }
}

impl SiteWeights for DualWeightField {
    fn weight(&self, s: Site) -> f64 {
        self.x(s).unwrap_or_else(|| panic!("dual weight requested outside {}", self.window))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::GridWeights;

    #[test]
    fn terminal_rounding() {
        assert_eq!(terminal_for(400, 0.5), Site::new(200, 200));
        assert_eq!(terminal_for(5, 0.5), Site::new(2, 3));
        assert_eq!(terminal_for(7, 0.3), Site::new(2, 5));
        let u = direction_of_alpha(0.3).unwrap();
        let v = terminal_for(400, u);
        assert_eq!(v.x1 + v.x2, 400);
        assert_eq!(v, Site::new(62, 338));
    }

    #[test]
    fn default_horizon_geometry() {
        let h = Horizon::new(0.5, 400).unwrap();
        assert_eq!(h.window, LatticeWindow::new(Site::new(-200, -200), Site::new(200, 200)).unwrap());
        assert_eq!(h.margin, Site::new(100, 100));
        assert_eq!(h.trusted().unwrap().hi, Site::new(100, 100));
        assert!(Horizon::new(1.0, 400).is_err());
    }

    #[test]
    fn hand_evaluated_corner_square() {
        // x = (0,0), v = (1,1); storage order (0,0), (1,0), (0,1), (1,1).
        let win = LatticeWindow::new(Site::new(0, 0), Site::new(1, 1)).unwrap();
        let y = GridWeights::new(win, vec![0.5, 2.0, 3.0, 1.0]).unwrap();
        let f = busemann_with_margin(&y, win.hi, win, Site::DIAG).unwrap();
        let x = Site::ORIGIN;
        // G_{x,v} = 0.5 + max(2, 3) + 1 = 4.5; G_{x+e1,v} = 3; G_{x+e2,v} = 4.
        assert_eq!(f.b1(x), Some(1.5));
        assert_eq!(f.b2(x), Some(0.5));
        assert_eq!(f.b1(x).unwrap().min(f.b2(x).unwrap()), 0.5);
    }

    #[test]
    fn terminal_must_be_corner() {
        let win = LatticeWindow::new(Site::new(0, 0), Site::new(9, 9)).unwrap();
        let w = make_weight_field(1, win, 1.0).unwrap();
        assert!(busemann_from_terminal(&w, Site::new(8, 9), win).is_err());
        assert!(busemann_with_margin(&w, win.hi, win, Site::new(0, 1)).is_err());
        assert!(busemann_with_margin(&w, win.hi, win, Site::new(10, 1)).is_err());
    }

    #[test]
    fn cocycle_is_exact_on_a_hundred_square() {
        let win = LatticeWindow::new(Site::new(0, 0), Site::new(130, 130)).unwrap();
        let w = make_weight_field(21, win, 1.0).unwrap();
        let f = busemann_with_margin(&w, win.hi, win, Site::new(30, 30)).unwrap();
        let r = check_cocycle(&f, 100, 3);
        assert_eq!(r.squares, 100 * 100);
        assert_eq!(r.path_pairs, 100);
        assert!(r.max_residual() <= 1e-9, "{r:?}");
    }

    #[test]
    fn monotonicity_single_steps() {
        for seed in 0..20u64 {
            let win = LatticeWindow::new(Site::new(0, 0), Site::new(41, 41)).unwrap();
            let w = make_weight_field(seed, win, 1.0).unwrap();
            let v = Site::new(40, 40);
            assert!(check_direction_monotonicity(&w, v, v + Site::E1, win.lo).unwrap().passed());
            assert!(check_direction_monotonicity(&w, v + Site::E2, v, win.lo).unwrap().passed());
            let far = check_direction_monotonicity(&w, Site::new(30, 41), Site::new(41, 30), win.lo).unwrap();
            assert!(far.passed() && far.sites == 30 * 30);
        }
        let w = make_weight_field(0, LatticeWindow::new(Site::new(0, 0), Site::new(9, 9)).unwrap(), 1.0).unwrap();
        assert!(check_direction_monotonicity(&w, Site::new(5, 5), Site::new(4, 6), Site::ORIGIN).is_err());
    }

    #[test]
    fn dual_weights_relation_to_southwest_increments() {
        let h = Horizon::new(0.5, 120).unwrap();
        let f = h.build_seeded(8).unwrap();
        let d = dual_weights(&f).unwrap();
        assert_eq!(d.excluded(), f.window().width() + f.window().height() - 1);
        for x in f.trusted().sites().filter(|&x| d.window().contains(x)) {
            let (a, b, xx) = (f.sw1(x).unwrap(), f.sw2(x).unwrap(), d.x(x).unwrap());
            assert!(xx <= a);
            assert_eq!(xx == a, a <= b || a == b);
            assert_eq!(d.tilde_y(-x), Some(xx));
        }
    }

    #[test]
    fn diagonal_marginals_at_n400() {
        let r = marginal_statistics(0.5, 400, 200, 100).unwrap();
        assert!((1.9..=2.1).contains(&r.mean_b1), "{r:?}");
        let diff = (r.mean_b1 - r.mean_b2).abs();
        assert!(diff <= 3.0 * (r.se_b1 * r.se_b1 + r.se_b2 * r.se_b2).sqrt(), "{r:?}");
        assert!(r.ks_pass_x >= 0.9, "{r:?}");
    }

    #[test]
    fn off_diagonal_marginals_at_n400() {
        let r = marginal_statistics(0.3, 400, 100, 500).unwrap();
        assert!(r.rel_err_b1() < 0.05, "{r:?}");
    }

    #[test]
    fn shifted_keys_keep_the_mean() {
        let r = check_shift_stationarity(0.5, 200, Site::new(1000, -777), 60, 4).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
