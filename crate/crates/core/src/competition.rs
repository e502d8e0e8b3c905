//! Boundary LPP on a finite down-right slice `y_0, …, y_L` with Busemann
//! boundary values, and its competition interfaces.
//!
//! `Plus` uses the dual weights `X` on the region above-right of the slice
//! with boundary values `B(y_0, y_k)`; `Minus` uses the bulk weights `Y` below-left
//! with boundary values `B(y_k, y_0)`. Predecessors outside the stored region or
//! on diagonals the slice does not cover count as absent.

use serde::{Deserialize, Serialize};

use crate::busemann::{BusemannField, DualWeightField};
use crate::error::{domain, geometry, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::lpp::NEG_SENTINEL;
use crate::stationary::DownRightPath;
use crate::trees::{ArrowField, ArrowKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Slice(usize),
    Above,
    Below,
    /// On a diagonal the slice does not cross.
    Uncovered,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryLpp {
    side: Side,
    region: LatticeWindow,
    boundary: DownRightPath,
    h: Vec<f64>,
    role: Vec<Role>,
    pred: Vec<Option<Site>>,
    root: Vec<Option<usize>>,
    tie: Vec<bool>,
    ties: usize,
}

fn roles(region: &LatticeWindow, boundary: &DownRightPath) -> Vec<Role> {
    let s = boundary.sites();
    let d0 = s[0].x1 - s[0].x2;
    region
        .sites()
        .map(|x| {
            let k = x.x1 - x.x2 - d0;
            if k < 0 || k >= s.len() as i64 {
                return Role::Uncovered;
            }
            let y = s[k as usize];
            match x.level().cmp(&y.level()) {
                std::cmp::Ordering::Equal => Role::Slice(k as usize),
                std::cmp::Ordering::Greater => Role::Above,
                std::cmp::Ordering::Less => Role::Below,
            }
        })
        .collect()
}

fn build(
    side: Side,
    field: &BusemannField,
    dual: &DualWeightField,
    boundary: &DownRightPath,
    region: LatticeWindow,
) -> Result<BoundaryLpp> {
    let allowed = LatticeWindow::new(field.window().lo + Site::DIAG, field.trusted().hi)?;
    if !allowed.contains_window(&region) {
        return geometry(format!("region {region} must lie in {allowed}"));
    }
    if let Some(&y) = boundary.sites().iter().find(|&&y| !region.contains(y)) {
        return geometry(format!("boundary site {y} outside region {region}"));
    }
    let y0 = boundary.sites()[0];
    let role = roles(&region, boundary);
    let n = region.area();
    let mut out = BoundaryLpp {
        side,
        region,
        boundary: boundary.clone(),
        h: vec![NEG_SENTINEL; n],
        role,
        pred: vec![None; n],
        root: vec![None; n],
        tie: vec![false; n],
        ties: 0,
    };
    let (bulk, steps): (Role, [Site; 2]) = match side {
        Side::Plus => (Role::Above, [-Site::E1, -Site::E2]),
        Side::Minus => (Role::Below, [Site::E1, Site::E2]),
    };
    let order: Vec<usize> = match side {
        Side::Plus => (0..n).collect(),
        Side::Minus => (0..n).rev().collect(),
    };
    for i in order {
        let x = region.site(i);
        match out.role[i] {
            Role::Slice(k) => {
                let yk = boundary.sites()[k];
                out.h[i] = match side {
                    Side::Plus => field.b(y0, yk).unwrap(),
                    Side::Minus => field.b(yk, y0).unwrap(),
                };
                out.root[i] = Some(k);
            }
            r if r == bulk => {
                let mut best: Option<(f64, usize)> = None;
                let mut tie = false;
                for s in steps {
                    let Some(j) = region.index(x + s) else { continue };
                    if out.h[j] == NEG_SENTINEL {
                        continue;
                    }
                    match best {
                        Some((b, _)) if out.h[j] == b => tie = true,
                        Some((b, _)) if out.h[j] < b => {}
                        _ => best = Some((out.h[j], j)),
                    }
                }
                if let Some((b, j)) = best {
                    let w = match side {
                        Side::Plus => dual.x(x).unwrap(),
                        Side::Minus => field.weight(x).unwrap(),
                    };
                    out.h[i] = w + b;
                    out.pred[i] = Some(region.site(j));
                    out.root[i] = out.root[j];
                    out.ties += tie as usize;
                    out.tie[i] = tie || out.tie[j];
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// `H⁺` over `region` with weights `X`.
pub fn boundary_lpp_plus(
    field: &BusemannField,
    dual: &DualWeightField,
    boundary: &DownRightPath,
    region: LatticeWindow,
) -> Result<BoundaryLpp> {
    build(Side::Plus, field, dual, boundary, region)
}

/// `H⁻` over `region` with the bulk weights of `field`.
pub fn boundary_lpp_minus(
    field: &BusemannField,
    dual: &DualWeightField,
    boundary: &DownRightPath,
    region: LatticeWindow,
) -> Result<BoundaryLpp> {
    build(Side::Minus, field, dual, boundary, region)
}

impl BoundaryLpp {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn region(&self) -> LatticeWindow {
        self.region
    }

    pub fn boundary(&self) -> &DownRightPath {
        &self.boundary
    }

    /// `None` outside the region, on the other side, or with no admissible path.
    pub fn h(&self, x: Site) -> Option<f64> {
        self.region.index(x).map(|i| self.h[i]).filter(|&v| v != NEG_SENTINEL)
    }

    pub fn role(&self, x: Site) -> Option<Role> {
        self.region.index(x).map(|i| self.role[i])
    }

    /// Slice index where the maximizing path starts.
    pub fn root(&self, x: Site) -> Option<usize> {
        self.region.index(x).and_then(|i| self.root[i])
    }

    /// Whether an exact tie occurred anywhere on the maximizing path.
    pub fn tied(&self, x: Site) -> bool {
        self.region.index(x).is_some_and(|i| self.tie[i])
    }

    pub fn ties(&self) -> usize {
        self.ties
    }

    /// Maximizing path from `x` back to the slice, `x` first.
    pub fn optimal_path(&self, x: Site) -> Option<Vec<Site>> {
        self.h(x)?;
        let mut out = vec![x];
        let mut c = x;
        while let Some(p) = self.pred[self.region.index(c)?] {
            out.push(p);
            c = p;
        }
        Some(out)
    }

    fn bulk_role(&self) -> Role {
        match self.side {
            Side::Plus => Role::Above,
            Side::Minus => Role::Below,
        }
    }

    /// Sites of the bulk side with a value.
    pub fn bulk_sites(&self) -> impl Iterator<Item = Site> + '_ {
        let bulk = self.bulk_role();
        self.region
            .sites()
            .enumerate()
            .filter(move |&(i, _)| self.role[i] == bulk && self.h[i] != NEG_SENTINEL)
            .map(|(_, x)| x)
    }

    /// Walks `arrows` from `x` until the slice; `None` if the walk leaves the
    /// region or the bulk side first.
    pub fn arrow_path(&self, arrows: &ArrowField, x: Site) -> Option<Vec<Site>> {
        let bulk = self.bulk_role();
        let mut out = vec![x];
        let mut c = x;
        loop {
            match self.role(c)? {
                Role::Slice(_) => return Some(out),
                r if r == bulk => {}
                _ => return None,
            }
            c = arrows.target(c)?;
            out.push(c);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub boundary_sites: usize,
    pub boundary_residual: f64,
    pub checked: usize,
    /// Geodesic does not reach the stored slice inside the region.
    pub excluded: usize,
    /// An exact tie on the maximizing path.
    pub tie_aborted: usize,
    pub max_residual: f64,
    pub path_mismatches: usize,
}

impl BoundaryReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.boundary_residual <= tol && self.path_mismatches == 0 && self.checked > 0
    }
}

/// `H⁺_x = B(y_0, x)` (or `H⁻_x = B(x, y_0)`) at every bulk site whose
/// southwest (or forward) geodesic reaches the slice in the region, and the
/// maximizing path equals that geodesic. `arrows` must be southwest arrows for
/// `Plus` and forward arrows for `Minus`.
pub fn check_boundary_identity(blpp: &BoundaryLpp, field: &BusemannField, arrows: &ArrowField) -> Result<BoundaryReport> {
    let want = match blpp.side {
        Side::Plus => ArrowKind::Southwest,
        Side::Minus => ArrowKind::Forward,
    };
    if arrows.kind() != want {
        return domain(format!("{:?} side needs {want:?} arrows", blpp.side));
    }
    let y0 = blpp.boundary.sites()[0];
    let target = |x: Site| match blpp.side {
        Side::Plus => field.b(y0, x).unwrap(),
        Side::Minus => field.b(x, y0).unwrap(),
    };
    let mut r = BoundaryReport::default();
    for &y in blpp.boundary.sites() {
        r.boundary_residual = r.boundary_residual.max((blpp.h(y).unwrap() - target(y)).abs());
        r.boundary_sites += 1;
    }
    for x in blpp.bulk_sites() {
        let Some(geo) = blpp.arrow_path(arrows, x) else {
            r.excluded += 1;
            continue;
        };
        if blpp.tied(x) {
            r.tie_aborted += 1;
            continue;
        }
        r.max_residual = r.max_residual.max((blpp.h(x).unwrap() - target(x)).abs());
        r.path_mismatches += (blpp.optimal_path(x).as_ref() != Some(&geo)) as usize;
        r.checked += 1;
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitionInterface {
    pub sites: Vec<Site>,
    /// Stopped because a neighbour had no value.
    pub truncated: bool,
    /// Stopped at an exact tie.
    pub tie: bool,
}

/// `φ⁺` between `y_m` and `y_{m+1}`: start at the smaller boundary value,
/// then step to the neighbour with the smaller `H⁺`.
pub fn competition_interface_plus(blpp: &BoundaryLpp, m: usize, max_steps: usize) -> Result<CompetitionInterface> {
    if blpp.side != Side::Plus {
        return domain("competition_interface_plus needs an H+ process");
    }
    let s = blpp.boundary.sites();
    if m + 1 >= s.len() {
        return domain(format!("m = {m} needs y_m and y_m+1 on a slice of {} sites", s.len()));
    }
    let (a, b) = (blpp.h(s[m]).unwrap(), blpp.h(s[m + 1]).unwrap());
    let start = if a < b { s[m] } else { s[m + 1] };
    walk(blpp, start, [Site::E1, Site::E2], max_steps, a == b)
}

/// Mirror interface of `H⁻` from the slice site `y_k`: step to the
/// south-west neighbour with the smaller `H⁻`.
pub fn competition_interface_minus(blpp: &BoundaryLpp, k: usize, max_steps: usize) -> Result<CompetitionInterface> {
    if blpp.side != Side::Minus {
        return domain("competition_interface_minus needs an H- process");
    }
    let Some(&start) = blpp.boundary.sites().get(k) else {
        return domain(format!("k = {k} is past the end of the slice"));
    };
    walk(blpp, start, [-Site::E1, -Site::E2], max_steps, false)
}

fn walk(blpp: &BoundaryLpp, start: Site, steps: [Site; 2], max_steps: usize, tie: bool) -> Result<CompetitionInterface> {
    let mut out = CompetitionInterface { sites: vec![start], truncated: false, tie };
    if tie {
        return Ok(out);
    }
    let mut c = start;
    while out.sites.len() <= max_steps {
        let (Some(a), Some(b)) = (blpp.h(c + steps[0]), blpp.h(c + steps[1])) else {
            out.truncated = true;
            break;
        };
        if a == b {
            out.tie = true;
            break;
        }
        c = c + if a < b { steps[0] } else { steps[1] };
        out.sites.push(c);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub checked: usize,
    pub violations: usize,
}

/// Sites of `H⁺` on the antidiagonals `φ⁺` visits: those left of `φ⁺_n` root in
/// `{y_k : k ≤ m}`, those right of it in `{y_k : k > m}`; `φ⁺_n` itself follows
/// its last step. Roots come from southwest arrow walks; sites whose walk
/// does not reach the slice are skipped.
pub fn check_separation(blpp: &BoundaryLpp, phi: &CompetitionInterface, m: usize, sw: &ArrowField) -> SeparationReport {
    let mut r = SeparationReport::default();
    let l0 = phi.sites[0].level();
    let root_of = |x: Site| -> Option<usize> {
        let p = blpp.arrow_path(sw, x)?;
        blpp.boundary.position(*p.last()?)
    };
    for x in blpp.region.sites() {
        let n = x.level() - l0;
        if n < 0 || n as usize >= phi.sites.len() {
            continue;
        }
        let Some(root) = root_of(x) else { continue };
        let p = phi.sites[n as usize];
        let left = if x.x1 != p.x1 {
            x.x1 < p.x1
        } else if n == 0 {
            continue;
        } else {
            p - phi.sites[n as usize - 1] == Site::E2
        };
        r.violations += (left != (root <= m)) as usize;
        r.checked += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::busemann::{dual_weights, Horizon};
    use crate::trees::{arrow_field, follow_geodesic, follow_southwest, southwest_arrows};

    struct Setup {
        field: BusemannField,
        dual: DualWeightField,
        region: LatticeWindow,
        stair: DownRightPath,
    }

    fn setup(seed: u64) -> Setup {
        let field = Horizon::new(0.5, 200).unwrap().build_seeded(seed).unwrap();
        let dual = dual_weights(&field).unwrap();
        let region = LatticeWindow::new(Site::new(-60, -60), Site::new(-1, -1)).unwrap();
        let stair = DownRightPath::staircase(Site::new(-60, -1), 59);
        Setup { field, dual, region, stair }
    }

    #[test]
    fn boundary_values_are_the_degenerate_case() {
        let s = setup(1);
        let h = boundary_lpp_plus(&s.field, &s.dual, &s.stair, s.region).unwrap();
        let y0 = s.stair.sites()[0];
        assert_eq!(h.h(y0), Some(0.0));
        for &y in s.stair.sites() {
            assert_eq!(h.h(y), s.field.b(y0, y));
            assert!(matches!(h.role(y), Some(Role::Slice(_))));
        }
        assert_eq!(h.h(Site::new(-60, -60)), None);
    }

    #[test]
    fn plus_identity_and_paths() {
        let s = setup(2);
        let h = boundary_lpp_plus(&s.field, &s.dual, &s.stair, s.region).unwrap();
        let sw = southwest_arrows(&s.field).unwrap();
        let r = check_boundary_identity(&h, &s.field, &sw).unwrap();
        assert!(r.passed(1e-9), "{r:?}");
        assert!(r.checked > 1500, "{r:?}");
        let x = Site::new(-5, -5);
        let mut geo = follow_southwest(&sw, x, 200).unwrap().sites;
        geo.truncate(geo.iter().position(|&y| s.stair.position(y).is_some()).unwrap() + 1);
        assert_eq!(h.optimal_path(x).unwrap(), geo);
    }

    #[test]
    fn interface_is_a_forward_geodesic_and_separates() {
        for seed in 0..6 {
            let s = setup(seed);
            let h = boundary_lpp_plus(&s.field, &s.dual, &s.stair, s.region).unwrap();
            let m = 59;
            let phi = competition_interface_plus(&h, m, 40).unwrap();
            let (a, b) = (h.h(s.stair.sites()[m]).unwrap(), h.h(s.stair.sites()[m + 1]).unwrap());
            assert_eq!(phi.sites[0], if a < b { s.stair.sites()[m] } else { s.stair.sites()[m + 1] });
            let fwd = arrow_field(&s.field);
            let geo = follow_geodesic(&fwd, phi.sites[0], phi.sites.len() - 1).unwrap();
            assert_eq!(geo.sites, phi.sites);
            let sw = southwest_arrows(&s.field).unwrap();
            let sep = check_separation(&h, &phi, m, &sw);
            assert_eq!(sep.violations, 0);
            assert!(sep.checked > 500, "{sep:?}");
        }
    }

    #[test]
    fn minus_identity() {
        let s = setup(3);
        let h = boundary_lpp_minus(&s.field, &s.dual, &s.stair, s.region).unwrap();
        let fwd = arrow_field(&s.field);
        let r = check_boundary_identity(&h, &s.field, &fwd).unwrap();
        assert!(r.passed(1e-9), "{r:?}");
        assert!(check_boundary_identity(&h, &s.field, &southwest_arrows(&s.field).unwrap()).is_err());
    }

    #[test]
    fn corner_interface_is_the_southwest_geodesic() {
        for seed in 0..6 {
            let s = setup(seed);
            let c = Site::new(-1, -1);
            let corner = DownRightPath::corner(c, 59, 59);
            let h = boundary_lpp_minus(&s.field, &s.dual, &corner, s.region).unwrap();
            let psi = competition_interface_minus(&h, 59, 200).unwrap();
            assert!(psi.truncated && !psi.tie);
            let sw = southwest_arrows(&s.field).unwrap();
            let geo = follow_southwest(&sw, c, psi.sites.len() - 1).unwrap();
            assert_eq!(geo.sites, psi.sites);
        }
    }

    #[test]
    fn geometry_errors() {
        let s = setup(0);
        let far = DownRightPath::staircase(Site::new(-70, -1), 3);
        assert!(boundary_lpp_plus(&s.field, &s.dual, &far, s.region).is_err());
        let big = LatticeWindow::new(Site::new(-100, -100), Site::new(0, 0)).unwrap();
        assert!(boundary_lpp_plus(&s.field, &s.dual, &s.stair, big).is_err());
        let h = boundary_lpp_plus(&s.field, &s.dual, &s.stair, s.region).unwrap();
        assert!(competition_interface_plus(&h, 200, 5).is_err());
    }
}
