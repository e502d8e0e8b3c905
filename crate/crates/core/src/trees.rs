//! Arrow fields read off a finite-horizon Busemann field: forward and
//! southwest geodesics, the dual tree, coalescence, point classes and
//! backward clusters.
//!
//! Dual sites `d + (½, ½)` are stored by their base site `d`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::busemann::{BusemannField, DualWeightField};
use crate::error::{domain, geometry, Result};
use crate::lattice::{LatticeWindow, Site, Step};
use crate::lpp::{forward_lpp, GeodesicPath, PathOrientation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrowKind {
    /// Steps `+e1`/`+e2` along the minimal outgoing increment.
    Forward,
    /// Steps `-e1`/`-e2` along the minimal incoming increment.
    Southwest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrowField {
    kind: ArrowKind,
    window: LatticeWindow,
    east: Vec<bool>,
    ties: u64,
}

/// Forward arrows on the trusted window: `e1` iff `B1(x) ≤ B2(x)`.
pub fn arrow_field(field: &BusemannField) -> ArrowField {
    let window = field.trusted();
    let mut ties = 0;
    let east = window
        .sites()
        .map(|x| {
            let (a, b) = (field.b1(x).unwrap(), field.b2(x).unwrap());
            ties += (a == b) as u64;
            a <= b
        })
        .collect();
    ArrowField { kind: ArrowKind::Forward, window, east, ties }
}

/// Southwest arrows on `[lo+(1,1), trusted.hi]`: `-e1` iff
/// `B(x-e1, x) ≤ B(x-e2, x)`.
pub fn southwest_arrows(field: &BusemannField) -> Result<ArrowField> {
    let window = LatticeWindow::new(field.window().lo + Site::DIAG, field.trusted().hi)?;
    let mut ties = 0;
    let east = window
        .sites()
        .map(|x| {
            let (a, b) = (field.sw1(x).unwrap(), field.sw2(x).unwrap());
            ties += (a == b) as u64;
            a <= b
        })
        .collect();
    Ok(ArrowField { kind: ArrowKind::Southwest, window, east, ties })
}

impl ArrowField {
    /// Builds a field from explicit arrows, `true` meaning the `e1` direction.
    pub fn from_arrows(kind: ArrowKind, window: LatticeWindow, east: Vec<bool>) -> Result<Self> {
        if east.len() != window.area() {
            return domain(format!("{} arrows for a window of {} sites", east.len(), window.area()));
        }
        Ok(ArrowField { kind, window, east, ties: 0 })
    }

    pub fn kind(&self) -> ArrowKind {
        self.kind
    }

    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    /// Exact ties resolved toward `e1`.
    pub fn ties(&self) -> u64 {
        self.ties
    }

    pub fn east_values(&self) -> &[bool] {
        &self.east
    }

    pub fn step(&self, x: Site) -> Option<Step> {
        self.window.index(x).map(|i| if self.east[i] { Step::E1 } else { Step::E2 })
    }

    /// Site the arrow at `x` points to.
    pub fn target(&self, x: Site) -> Option<Site> {
        self.step(x).map(|s| match self.kind {
            ArrowKind::Forward => x.step(s),
            ArrowKind::Southwest => x.step_back(s),
        })
    }

    /// Fraction of `e1` arrows.
    pub fn e1_fraction(&self) -> f64 {
        self.east.iter().filter(|&&e| e).count() as f64 / self.east.len() as f64
    }
}

fn follow(arrows: &ArrowField, kind: ArrowKind, x: Site, max_steps: usize) -> Result<GeodesicPath> {
    if arrows.kind != kind {
        return domain(format!("expected {kind:?} arrows, got {:?}", arrows.kind));
    }
    if !arrows.window.contains(x) {
        return geometry(format!("start {x} outside arrow window {}", arrows.window));
    }
    let orientation = match kind {
        ArrowKind::Forward => PathOrientation::UpRight,
        ArrowKind::Southwest => PathOrientation::DownLeft,
    };
    let mut sites = vec![x];
    let mut steps = Vec::new();
    let mut c = x;
    while steps.len() < max_steps {
        let s = arrows.step(c).unwrap();
        let next = arrows.target(c).unwrap();
        if !arrows.window.contains(next) {
            break;
        }
        steps.push(s);
        sites.push(next);
        c = next;
    }
    Ok(GeodesicPath { orientation, sites, steps })
}

/// Follows forward arrows from `x` for at most `max_steps` steps; stops at
/// the last site inside the window.
pub fn follow_geodesic(arrows: &ArrowField, x: Site, max_steps: usize) -> Result<GeodesicPath> {
    follow(arrows, ArrowKind::Forward, x, max_steps)
}

pub fn follow_southwest(arrows: &ArrowField, x: Site, max_steps: usize) -> Result<GeodesicPath> {
    follow(arrows, ArrowKind::Southwest, x, max_steps)
}

/// `(end - start) / |end - start|_1`, sign-corrected so that both coordinates
/// are nonnegative for either orientation.
pub fn path_direction(path: &GeodesicPath) -> (f64, f64) {
    let d = path.end() - path.start();
    let l = d.l1() as f64;
    ((d.x1 as f64 / l).abs(), (d.x2 as f64 / l).abs())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeIdentityReport {
    /// Max of `|Y_x - B(x, x + arrow)|` over the forward window.
    pub forward_recovery: f64,
    /// Max of `|X_x - B(x - arrow, x)|` over the southwest window.
    pub southwest_recovery: f64,
    /// Max of `|G(γ_m, γ_n) - B(γ_m, γ_n) - Y_{γ_n}|` along sampled forward paths.
    pub forward_path: f64,
    /// The same along southwest paths with weights `X`.
    pub southwest_path: f64,
    pub sites: usize,
    pub paths: usize,
}

impl TreeIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.forward_recovery.max(self.southwest_recovery).max(self.forward_path).max(self.southwest_path)
    }
}

/// Checks the exact arrow identities at every site and the geodesic identity
/// along `paths` sampled forward and southwest paths of at most `len` steps.
/// One LPP table per path: forward paths test `G(γ_0, γ_n)` for every `n`,
/// southwest paths test `G^X(γ_end, γ_m)` for every `m`.
pub fn check_tree_identities(
    field: &BusemannField,
    dual: &DualWeightField,
    fwd: &ArrowField,
    sw: &ArrowField,
    paths: usize,
    len: usize,
    seed: u64,
) -> Result<TreeIdentityReport> {
    let mut r = TreeIdentityReport::default();
    for x in fwd.window().sites() {
        let t = fwd.target(x).unwrap();
        r.forward_recovery = r.forward_recovery.max((field.weight(x).unwrap() - field.b(x, t).unwrap()).abs());
        r.sites += 1;
    }
    for x in sw.window().sites() {
        let t = sw.target(x).unwrap();
        r.southwest_recovery = r.southwest_recovery.max((dual.x(x).unwrap() - field.b(t, x).unwrap()).abs());
        r.sites += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let yw = |s: Site| field.weight(s).unwrap();
    for _ in 0..paths {
        let x = fwd.window().site(rng.random_range(0..fwd.window().area()));
        let p = follow_geodesic(fwd, x, len)?;
        let box_ = LatticeWindow::new(p.start(), p.end())?;
        let g = forward_lpp(field, p.start(), box_)?;
        for &s in &p.sites[1..] {
            let lhs = g.value(s).unwrap();
            r.forward_path = r.forward_path.max((lhs - field.b(p.start(), s).unwrap() - yw(s)).abs());
        }
        let z = sw.window().site(rng.random_range(0..sw.window().area()));
        let q = follow_southwest(sw, z, len)?;
        let box_ = LatticeWindow::new(q.end(), q.start())?;
        let gx = forward_lpp(dual, q.end(), box_)?;
        for &s in &q.sites[..q.sites.len() - 1] {
            let lhs = gx.value(s).unwrap();
            r.southwest_path =
                r.southwest_path.max((lhs - field.b(q.end(), s).unwrap() - dual.x(q.end()).unwrap()).abs());
        }
        r.paths += 2;
    }
    Ok(r)
}

/// Dual arrows on base sites: `true` means the dual arrow at `d + (½,½)` is `-e1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualArrowField {
    window: LatticeWindow,
    west: Vec<bool>,
}

impl DualArrowField {
    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    pub fn step(&self, d: Site) -> Option<Step> {
        self.window.index(d).map(|i| if self.west[i] { Step::E1 } else { Step::E2 })
    }

    pub fn target(&self, d: Site) -> Option<Site> {
        self.step(d).map(|s| d.step_back(s))
    }
}

/// Dual arrows read off primal arrows sitewise.
pub fn dual_from_primal(arrows: &ArrowField) -> Result<DualArrowField> {
    if arrows.kind != ArrowKind::Forward {
        return domain("dual arrows are derived from forward arrows");
    }
    Ok(DualArrowField { window: arrows.window, west: arrows.east.clone() })
}

/// Dual arrows as shifted southwest arrows: the arrow at `d + (½,½)` is the
/// southwest arrow at `d + (1,1)`.
pub fn dual_from_southwest(sw: &ArrowField) -> Result<DualArrowField> {
    if sw.kind != ArrowKind::Southwest {
        return domain("expected southwest arrows");
    }
    Ok(DualArrowField { window: sw.window.translate(-Site::DIAG), west: sw.east.clone() })
}

pub fn follow_dual(dual: &DualArrowField, d: Site, max_steps: usize) -> Result<Vec<Site>> {
    if !dual.window.contains(d) {
        return geometry(format!("dual start {d} outside {}", dual.window));
    }
    let mut out = vec![d];
    let mut c = d;
    while out.len() <= max_steps {
        let n = dual.target(c).unwrap();
        if !dual.window.contains(n) {
            break;
        }
        out.push(n);
        c = n;
    }
    Ok(out)
}

/// Primal edge `{x, x + e_k}` stored as `(x, k)`.
pub type PrimalEdge = (Site, Step);
/// Dual edge between base sites `d - e_k` and `d`, stored as `(d, k)`.
pub type DualEdge = (Site, Step);

/// The dual edge crossing `{x, x + e_k}` joins bases `x - e_{3-k}` and `x`.
pub fn dual_of(e: PrimalEdge) -> DualEdge {
    (e.0, e.1.other())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub sitewise_checked: usize,
    pub sitewise_mismatches: usize,
    pub edges_checked: usize,
    pub xor_violations: usize,
    pub path_pairs: usize,
    pub crossings: usize,
}

impl DualityReport {
    pub fn passed(&self) -> bool {
        self.sitewise_mismatches == 0 && self.xor_violations == 0 && self.crossings == 0
    }
}

/// Compares primal arrows with independently computed dual arrows: sitewise
/// equivalence, edge XOR on every interior edge of `region`, and
/// non-crossing of `pairs` sampled primal/dual path pairs.
pub fn check_duality(
    arrows: &ArrowField,
    dual: &DualArrowField,
    region: LatticeWindow,
    pairs: usize,
    seed: u64,
) -> Result<DualityReport> {
    if !arrows.window.contains_window(&region) || !dual.window.contains_window(&region) {
        return geometry(format!("region {region} must lie in both arrow windows"));
    }
    let mut r = DualityReport::default();
    let tree: HashSet<PrimalEdge> = region.sites().map(|x| (x, arrows.step(x).unwrap())).collect();
    let dual_tree: HashSet<DualEdge> = region.sites().map(|d| (d, dual.step(d).unwrap())).collect();
    for x in region.sites() {
        r.sitewise_checked += 1;
        r.sitewise_mismatches += (arrows.step(x) != dual.step(x)) as usize;
        for k in [Step::E1, Step::E2] {
            // Interior: both primal ends and both dual ends inside the region.
            let e = (x, k);
            let (d, j) = dual_of(e);
            if !region.contains(x.step(k)) || !region.contains(d.step_back(j)) {
                continue;
            }
            r.edges_checked += 1;
            if tree.contains(&e) == dual_tree.contains(&(d, j)) {
                r.xor_violations += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let x = region.site(rng.random_range(0..region.area()));
        let d = region.site(rng.random_range(0..region.area()));
        let p = follow_geodesic(arrows, x, usize::MAX)?;
        let q = follow_dual(dual, d, usize::MAX)?;
        let dual_edges: HashSet<DualEdge> = q.windows(2).map(|w| (w[0], if w[0] - w[1] == Site::E1 { Step::E1 } else { Step::E2 })).collect();
        r.crossings += p.sites.iter().zip(&p.steps).filter(|&(&s, &k)| dual_edges.contains(&dual_of((s, k)))).count();
        r.path_pairs += 1;
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub sites: usize,
    pub arrow_mismatches: usize,
    pub max_recovery_residual: f64,
}

/// With `B̃(x, y) = B(-y, -x)` and `Ỹ_x = X_{-x}`: the southwest arrow at
/// `-x` is `-e1` iff `B̃(x, x+e1) ≤ B̃(x, x+e2)`, and `Ỹ_x = B̃(x,x+e1) ∧ B̃(x,x+e2)`.
pub fn check_reflection(field: &BusemannField, dual: &DualWeightField, sw: &ArrowField) -> ReflectionReport {
    let bt = |x: Site, y: Site| field.b(-y, -x).unwrap();
    let mut r = ReflectionReport::default();
    for z in sw.window().sites() {
        let x = -z;
        let (a, b) = (bt(x, x + Site::E1), bt(x, x + Site::E2));
        let forward_east = a <= b;
        r.arrow_mismatches += (forward_east != (sw.step(z) == Some(Step::E1))) as usize;
        r.max_recovery_residual = r.max_recovery_residual.max((dual.tilde_y(x).unwrap() - a.min(b)).abs());
        r.sites += 1;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coalescence {
    pub meet: Option<Site>,
    pub steps_x: usize,
    pub steps_y: usize,
}

/// First common site of the forward paths from `x` and `y`, or `None` if a
/// path leaves the window first.
pub fn coalescence(arrows: &ArrowField, x: Site, y: Site) -> Result<Coalescence> {
    for s in [x, y] {
        if !arrows.window.contains(s) {
            return geometry(format!("start {s} outside arrow window {}", arrows.window));
        }
    }
    let (mut a, mut b) = (x, y);
    let mut r = Coalescence { meet: None, steps_x: 0, steps_y: 0 };
    while a != b {
        if a.level() <= b.level() {
            a = arrows.target(a).unwrap();
            r.steps_x += 1;
            if !arrows.window.contains(a) {
                return Ok(r);
            }
        } else {
            b = arrows.target(b).unwrap();
            r.steps_y += 1;
            if !arrows.window.contains(b) {
                return Ok(r);
            }
        }
    }
    r.meet = Some(a);
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointClass {
    Source,
    Coalescence,
    Horizontal,
    Vertical,
}

impl PointClass {
    pub const ALL: [PointClass; 4] =
        [PointClass::Source, PointClass::Coalescence, PointClass::Horizontal, PointClass::Vertical];

    /// Class of `z` from the arrows at `z - e1` and `z - e2`.
    pub fn from_arrows(at_minus_e1: Step, at_minus_e2: Step) -> Self {
        match (at_minus_e1, at_minus_e2) {
            (Step::E2, Step::E1) => PointClass::Source,
            (Step::E1, Step::E2) => PointClass::Coalescence,
            (Step::E1, Step::E1) => PointClass::Horizontal,
            (Step::E2, Step::E2) => PointClass::Vertical,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['s', 'c', 'h', 'v'][self.index()]
    }
}

/// `z_j = (level + j, -j)`.
pub fn antidiagonal_site(level: i64, j: i64) -> Site {
    Site::new(level + j, -j)
}

/// Classes of `z_j` for `j` in `range`.
pub fn classify_points(arrows: &ArrowField, level: i64, range: std::ops::Range<i64>) -> Result<Vec<PointClass>> {
    if arrows.kind != ArrowKind::Forward {
        return domain("classification uses forward arrows");
    }
    range
        .map(|j| {
            let z = antidiagonal_site(level, j);
            match (arrows.step(z - Site::E1), arrows.step(z - Site::E2)) {
                (Some(a), Some(b)) => Ok(PointClass::from_arrows(a, b)),
                _ => geometry(format!("neighbours of {z} leave arrow window {}", arrows.window)),
            }
        })
        .collect()
}

/// `a_j`: the arrow at `(level + j, -j - 1) = z_j - e2 = z_{j+1} - e1`.
pub fn a_sequence(arrows: &ArrowField, level: i64, range: std::ops::Range<i64>) -> Result<Vec<Step>> {
    range
        .map(|j| {
            let s = antidiagonal_site(level, j) - Site::E2;
            arrows.step(s).map_or_else(|| geometry(format!("{s} outside {}", arrows.window)), Ok)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub root: Site,
    pub sites: Vec<Site>,
    /// Set when the cluster may continue outside the window or past the cap.
    pub truncated: bool,
}

/// All window sites whose forward path passes through `x`, including `x`.
pub fn backward_cluster(arrows: &ArrowField, x: Site, cap: usize) -> Result<Cluster> {
    if !arrows.window.contains(x) {
        return geometry(format!("{x} outside arrow window {}", arrows.window));
    }
    let mut sites = vec![x];
    let mut truncated = false;
    let mut i = 0;
    while i < sites.len() {
        let s = sites[i];
        for k in [Step::E1, Step::E2] {
            let c = s.step_back(k);
            match arrows.step(c) {
                None => truncated = true,
                Some(a) if a == k => {
                    if sites.len() >= cap {
                        truncated = true;
                    } else {
                        sites.push(c);
                    }
                }
                _ => {}
            }
        }
        i += 1;
    }
    Ok(Cluster { root: x, sites, truncated })
}

/// Cluster size and truncation flag at every window site, in window order.
pub fn cluster_sizes(arrows: &ArrowField) -> (Vec<u64>, Vec<bool>) {
    let w = arrows.window;
    let mut size = vec![1u64; w.area()];
    let mut trunc = vec![false; w.area()];
    for (i, s) in w.sites().enumerate() {
        for k in [Step::E1, Step::E2] {
            let c = s.step_back(k);
            match w.index(c) {
                None => trunc[i] = true,
                Some(ci) => {
                    if arrows.east[ci] == (k == Step::E1) {
                        size[i] += size[ci];
                        trunc[i] |= trunc[ci];
                    }
                }
            }
        }
    }
    (size, trunc)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub starts: usize,
    pub levels: usize,
    pub violations: usize,
}

/// For terminals `v_left` and `v_right` (the latter further in `e1`) over
/// the same weights and lower corner, the path from `x` under `right` never
/// sits strictly left of the path under `left` on a common antidiagonal.
pub fn check_direction_ordering(left: &ArrowField, right: &ArrowField, starts: &[Site]) -> Result<OrderingReport> {
    let mut r = OrderingReport::default();
    for &x in starts {
        let p = follow_geodesic(left, x, usize::MAX)?;
        let q = follow_geodesic(right, x, usize::MAX)?;
        for (a, b) in p.sites.iter().zip(&q.sites) {
            r.levels += 1;
            r.violations += (b.x1 < a.x1) as usize;
        }
        r.starts += 1;
    }
    Ok(r)
}
