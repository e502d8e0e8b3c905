//! The twelve acceptance criteria as gate lists, plus quick gates at a
//! user-chosen `(α, N)`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bernoulli_oracle, midpoint_brute_force, midpoint_probability, run_coalescence, run_first_step, run_markov_chain,
    run_midpoint, run_shape_convergence, sub_seed, ExperimentConfig, Gate, MarkovReport,
};
use crate::busemann::{check_cocycle, check_direction_monotonicity, dual_weights, marginal_statistics, Horizon};
use crate::competition::{
    boundary_lpp_minus, boundary_lpp_plus, check_boundary_identity, check_separation, competition_interface_minus,
    competition_interface_plus,
};
use crate::error::Result;
use crate::lattice::{LatticeWindow, Site};
use crate::lpp::{backtrack_geodesic, brute_force_lpp, check_planar_monotonicity, forward_lpp};
use crate::stationary::{build_stationary_quadrant, check_structure, increment_residual, stationary_lpp, DownRightPath};
use crate::stats::mean_se;
use crate::trees::{
    arrow_field, check_duality, check_reflection, check_tree_identities, dual_from_southwest, follow_geodesic,
    follow_southwest, southwest_arrows,
};
use crate::weights::make_weight_field;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub gates: Vec<Gate>,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        !self.gates.is_empty() && self.gates.iter().all(|g| g.passed)
    }

    /// One line: `PASS 3 busemann identities (12.3 s)` followed by failing gates.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} {:>2} {} ({:.1} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        );
        for g in self.gates.iter().filter(|g| !g.passed) {
            s.push_str(&format!("\n        {}: {}", g.name, g.detail));
        }
        s
    }
}

pub const TITLES: [&str; 12] = [
    "oracle equivalence",
    "stationary structure",
    "busemann identities",
    "busemann marginals",
    "edge duality",
    "first-step law",
    "markov chain",
    "coalescence",
    "competition interface",
    "shape theorem",
    "midpoint decay",
    "performance",
];

fn timed(id: u8, seed: u64, f: impl FnOnce(u64) -> Result<Vec<Gate>>) -> CriterionResult {
    let t = Instant::now();
    let gates = f(sub_seed(seed, id as u64)).unwrap_or_else(|e| vec![Gate::check("error", false, e.to_string())]);
    CriterionResult { id, title: TITLES[id as usize - 1].to_string(), gates, seconds: t.elapsed().as_secs_f64() }
}

/// Runs criterion `id` (1 to 11) with base seed `seed`.
pub fn run_criterion(id: u8, seed: u64) -> CriterionResult {
    let f: fn(u64) -> Result<Vec<Gate>> = match id {
        1 => oracle_equivalence,
        2 => stationary_structure,
        3 => busemann_identities,
        4 => busemann_marginals,
        5 => edge_duality,
        6 => first_step_law,
        7 => markov_chain,
        8 => coalescence,
        9 => competition_interface,
        10 => shape_theorem,
        11 => midpoint_decay,
        12 => return performance(0.0, seed),
        _ => {
            return CriterionResult {
                id,
                title: "unknown".into(),
                gates: vec![Gate::check("id", false, format!("no criterion {id}"))],
                seconds: 0.0,
            }
        }
    };
    timed(id, seed, f)
}

/// Criteria 1 to 11 in order, then the performance criterion with their total runtime.
pub fn verify_all(seed: u64) -> Vec<CriterionResult> {
    let mut out: Vec<CriterionResult> = (1..=11).map(|id| run_criterion(id, seed)).collect();
    let total = out.iter().map(|r| r.seconds).sum();
    out.push(performance(total, seed));
    out
}

/// Forward DP value and geodesic against enumeration on every window shape up to 5×5.
pub fn oracle_equivalence(seed: u64) -> Result<Vec<Gate>> {
    let t = Instant::now();
    let (mut worst, mut path_mismatch, mut cases): (f64, usize, usize) = (0.0, 0, 0);
    for s in 0..100u64 {
        let seed = sub_seed(seed, s);
        let lo = Site::new((s % 7) as i64 - 3, (s % 5) as i64 - 2);
        for w in 0..5 {
            for h in 0..5 {
                let win = LatticeWindow::new(lo, lo + Site::new(w, h))?;
                let weights = make_weight_field(seed, win, 1.0)?;
                let g = forward_lpp(&weights, lo, win)?;
                let dp = g.value(win.hi).unwrap();
                let (bf, path) = brute_force_lpp(&weights, lo, win.hi)?;
                worst = worst.max((dp - bf).abs() / bf.abs());
                path_mismatch += (backtrack_geodesic(&g, lo, win.hi)?.sites != path.sites) as usize;
                cases += 1;
            }
        }
    }
    Ok(vec![
        Gate::at_most("relative value error", worst, 1e-9),
        Gate::check("geodesics", path_mismatch == 0, format!("{path_mismatch} of {cases} geodesics differ")),
        Gate::at_most("seconds", t.elapsed().as_secs_f64(), 10.0),
    ])
}

/// Structural equations and `G^α` increments on 200×200 quadrants, and the mean of `G^α_{(50,50)}`.
pub fn stationary_structure(seed: u64) -> Result<Vec<Gate>> {
    let t = Instant::now();
    let mut gates = Vec::new();
    for (k, alpha) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let worst = (0..20u64)
            .into_par_iter()
            .map(|s| {
                let sys = build_stationary_quadrant(alpha, sub_seed(seed, 100 * k as u64 + s), 200, 200)?;
                let g = stationary_lpp(&sys);
                Ok(check_structure(&sys).max_residual().max(increment_residual(&sys, &g)))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        gates.push(Gate::at_most(format!("alpha {alpha} structure residual"), worst, 1e-12));
        let g50: Vec<f64> = (0..2000u64)
            .into_par_iter()
            .map(|r| {
                let sys = build_stationary_quadrant(alpha, sub_seed(seed, 10_000 * (k as u64 + 1) + r), 50, 50)?;
                Ok(stationary_lpp(&sys).value(Site::new(50, 50)).unwrap())
            })
            .collect::<Result<_>>()?;
        let (m, se) = mean_se(&g50);
        gates.push(Gate::within(format!("alpha {alpha} mean G(50,50)"), m, 50.0 / alpha + 50.0 / (1.0 - alpha), 3.0 * se));
    }
    gates.push(Gate::at_most("seconds", t.elapsed().as_secs_f64(), 60.0));
    Ok(gates)
}

/// Exact identities on 20 fields at `N = 400`, cycling `α` through 0.3, 0.5, 0.7.
pub fn busemann_identities(seed: u64) -> Result<Vec<Gate>> {
    let t = Instant::now();
    let rows: Vec<[f64; 6]> = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let alpha = [0.3, 0.5, 0.7][s as usize % 3];
            let seed = sub_seed(seed, s);
            let h = Horizon::new(alpha, 400)?;
            let f = h.build_seeded(seed)?;
            let cocycle = check_cocycle(&f, 200, seed).max_residual();
            let dual = dual_weights(&f)?;
            let fwd = arrow_field(&f);
            let sw = southwest_arrows(&f)?;
            let tree = check_tree_identities(&f, &dual, &fwd, &sw, 20, 100, seed)?.max_residual();
            let refl = check_reflection(&f, &dual, &sw);
            let v = h.terminal;
            let w = make_weight_field(seed, LatticeWindow::new(h.window.lo, v + Site::DIAG)?, 1.0)?;
            let mono = [(v, v + Site::E1), (v + Site::E2, v)]
                .iter()
                .map(|&(l, r)| check_direction_monotonicity(&w, l, r, h.window.lo).map(|m| m.passed()))
                .collect::<Result<Vec<bool>>>()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trusted = f.trusted();
            let mut planar_fail = 0;
            for _ in 0..20 {
                let top = Site::new(rng.random_range(trusted.lo.x1 + 40..=trusted.hi.x1), rng.random_range(trusted.lo.x2 + 40..=trusted.hi.x2));
                let lo = top - Site::new(40, 40);
                let x = lo + Site::new(rng.random_range(0..39), rng.random_range(0..40));
                let y = lo + Site::new(rng.random_range(0..40), rng.random_range(0..39));
                let r = check_planar_monotonicity(&w, x, y, top, LatticeWindow::new(lo, top + Site::DIAG)?)?;
                planar_fail += !r.passed as usize;
            }
            Ok([
                cocycle,
                tree,
                refl.arrow_mismatches as f64,
                refl.max_recovery_residual,
                mono.iter().filter(|&&p| !p).count() as f64,
                planar_fail as f64,
            ])
        })
        .collect::<Result<_>>()?;
    let max = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
    Ok(vec![
        Gate::at_most("cocycle residual", max(0), 1e-9),
        Gate::at_most("tree identity residual", max(1), 1e-9),
        Gate::at_most("reflected arrow mismatches", max(2), 0.0),
        Gate::at_most("reflected recovery residual", max(3), 1e-9),
        Gate::at_most("direction monotonicity failures", max(4), 0.0),
        Gate::at_most("planar monotonicity failures", max(5), 0.0),
        Gate::at_most("seconds", t.elapsed().as_secs_f64(), 60.0),
    ])
}

/// `B1` mean and KS pass rate over 100 seeds at `N = 400`.
pub fn busemann_marginals(seed: u64) -> Result<Vec<Gate>> {
    let mut gates = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        let r = marginal_statistics(alpha, 400, 100, seed)?;
        gates.push(Gate::at_most(format!("alpha {alpha} B1 relative error"), r.rel_err_b1(), 0.05));
        gates.push(Gate::at_least(format!("alpha {alpha} B1 KS pass fraction"), r.ks_pass_b1, 0.9));
    }
    Ok(gates)
}

/// Edge XOR, sitewise agreement and non-crossing on a 60×60 region of 20 fields.
pub fn edge_duality(seed: u64) -> Result<Vec<Gate>> {
    let region = LatticeWindow::new(Site::new(-60, -60), Site::new(-1, -1))?;
    let reports = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let f = Horizon::new(0.5, 200)?.build_seeded(sub_seed(seed, s))?;
            let dual = dual_from_southwest(&southwest_arrows(&f)?)?;
            check_duality(&arrow_field(&f), &dual, region, 100, sub_seed(seed, 1000 + s))
        })
        .collect::<Result<Vec<_>>>()?;
    let sum = |f: fn(&crate::trees::DualityReport) -> usize| reports.iter().map(f).sum::<usize>();
    Ok(vec![
        Gate::check(
            "edge XOR",
            sum(|r| r.xor_violations) == 0 && sum(|r| r.edges_checked) > 0,
            format!("{} violations over {} edges", sum(|r| r.xor_violations), sum(|r| r.edges_checked)),
        ),
        Gate::check(
            "sitewise dual arrows",
            sum(|r| r.sitewise_mismatches) == 0,
            format!("{} mismatches over {} sites", sum(|r| r.sitewise_mismatches), sum(|r| r.sitewise_checked)),
        ),
        Gate::check(
            "non-crossing",
            sum(|r| r.crossings) == 0 && sum(|r| r.path_pairs) == 2000,
            format!("{} crossings over {} pairs", sum(|r| r.crossings), sum(|r| r.path_pairs)),
        ),
    ])
}

/// Arrow frequency near the origin and step density along the geodesic.
pub fn first_step_law(seed: u64) -> Result<Vec<Gate>> {
    let mut gates = Vec::new();
    for (k, alpha) in [0.3, 1.0 / 3.0, 0.5, 0.7].into_iter().enumerate() {
        let r = run_first_step(alpha, 400, 200, sub_seed(seed, k as u64), 32)?;
        let mut g = Gate::within(format!("alpha {alpha:.4} e1 frequency"), r.frequency, alpha, 3.0 * r.se);
        g.detail.push_str(&format!(" (tile se {:.5})", r.tile_se));
        gates.push(g);
        if k == 1 {
            gates.push(Gate::within("alpha 1/3 e1 density along geodesic", r.along_mean, r.u1, 3.0 * r.along_se));
            let gap = (r.along_mean - alpha).abs();
            gates.push(Gate::check(
                "alpha 1/3 density distinct from alpha",
                gap > 3.0 * r.along_se,
                format!("|{:.4} - {alpha:.4}| = {gap:.4} > {:.4}", r.along_mean, 3.0 * r.along_se),
            ));
        }
    }
    Ok(gates)
}

fn markov_gates(label: &str, r: &MarkovReport, gates: &mut Vec<Gate>) {
    gates.push(Gate::at_most(format!("{label} max transition deviation"), r.max_abs_deviation, 0.02));
    let out = r.invariant_outliers(3.0);
    gates.push(Gate::check(
        format!("{label} invariant within 3 SE"),
        out.is_empty(),
        format!("freq {:.4?} target {:.4?} se {:.4?}", r.invariant, r.invariant_target, r.invariant_se),
    ));
}

/// Class transitions along antidiagonals for `α ∈ {1/3, 1/2}`, and the Bernoulli oracle.
pub fn markov_chain(seed: u64) -> Result<Vec<Gate>> {
    let mut gates = Vec::new();
    for (k, (alpha, label)) in [(1.0 / 3.0, "alpha 1/3"), (0.5, "alpha 1/2")].into_iter().enumerate() {
        let r = run_markov_chain(alpha, 1600, 100_000, sub_seed(seed, k as u64))?;
        gates.push(Gate::at_least(format!("{label} transitions"), r.transitions as f64, 1e5));
        markov_gates(label, &r, &mut gates);
        let o = bernoulli_oracle(alpha, 100_000, sub_seed(seed, 10 + k as u64))?;
        markov_gates(&format!("{label} oracle"), &o, &mut gates);
    }
    Ok(gates)
}

/// Adjacent-start coalescence in a 400×400 trusted window and cluster survival.
pub fn coalescence(seed: u64) -> Result<Vec<Gate>> {
    let r = run_coalescence(0.5, 400, 400, 200, &[10, 100, 1000], seed)?;
    let s: Vec<f64> = r.survival.iter().map(|x| x.survival).collect();
    Ok(vec![
        Gate::at_least("coalesced fraction", r.fraction, 0.95),
        Gate::check("survival strictly decreasing", s.windows(2).all(|w| w[1] < w[0]), format!("P(|C| > k) = {s:.5?}")),
    ])
}

/// Boundary identities, interface geodesics and separation on 60×60 regions.
pub fn competition_interface(seed: u64) -> Result<Vec<Gate>> {
    let region = LatticeWindow::new(Site::new(-60, -60), Site::new(-1, -1))?;
    let stair = DownRightPath::staircase(Site::new(-60, -1), 59);
    let corner_site = Site::new(-1, -1);
    let corner = DownRightPath::corner(corner_site, 59, 59);
    let m = 59;
    let rows: Vec<[bool; 5]> = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let f = Horizon::new(0.5, 200)?.build_seeded(sub_seed(seed, s))?;
            let dual = dual_weights(&f)?;
            let fwd = arrow_field(&f);
            let sw = southwest_arrows(&f)?;
            let plus = boundary_lpp_plus(&f, &dual, &stair, region)?;
            let minus = boundary_lpp_minus(&f, &dual, &stair, region)?;
            let plus_ok = check_boundary_identity(&plus, &f, &sw)?.passed(1e-9);
            let minus_ok = check_boundary_identity(&minus, &f, &fwd)?.passed(1e-9);
            let phi = competition_interface_plus(&plus, m, 40)?;
            let geo = follow_geodesic(&fwd, phi.sites[0], phi.sites.len() - 1)?;
            // The interface may leave the region before 40 steps.
            let interface_ok = geo.sites == phi.sites && !phi.tie && (phi.sites.len() == 41 || phi.truncated);
            let sep = check_separation(&plus, &phi, m, &sw);
            let sep_ok = sep.violations == 0 && sep.checked > 0;
            let cm = boundary_lpp_minus(&f, &dual, &corner, region)?;
            let psi = competition_interface_minus(&cm, 59, 200)?;
            let corner_ok = follow_southwest(&sw, corner_site, psi.sites.len() - 1)?.sites == psi.sites;
            Ok([plus_ok, minus_ok, interface_ok, sep_ok, corner_ok])
        })
        .collect::<Result<_>>()?;
    let names = ["plus boundary identity", "minus boundary identity", "interface is a geodesic", "separation", "corner interface"];
    Ok(names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let bad = rows.iter().filter(|r| !r[i]).count();
            Gate::check(*n, bad == 0, format!("{bad} of {} fields fail", rows.len()))
        })
        .collect())
}

/// Antidiagonal gap from the shape function at sizes 100 and 1000.
pub fn shape_theorem(seed: u64) -> Result<Vec<Gate>> {
    let seeds: Vec<u64> = (0..20).map(|s| sub_seed(seed, s)).collect();
    let r = run_shape_convergence(&[100, 1000], &seeds)?;
    Ok(vec![Gate::at_most("max gap at N = 1000", r.max_gap[1], 0.15), Gate::at_least("paired decrease", r.paired_decrease, 0.9)])
}

/// Midpoint hitting probability over `n ∈ {20, 80, 320}`, and the `n = 2` enumeration check.
pub fn midpoint_decay(seed: u64) -> Result<Vec<Gate>> {
    let r = run_midpoint(0.5, &[20, 80, 320], 200, 20, seed)?;
    let p: Vec<f64> = r.rows.iter().map(|x| x.probability).collect();
    let dp = midpoint_probability(0.5, 2, 2000, sub_seed(seed, 1), Site::ORIGIN)?;
    let bf = midpoint_brute_force(0.5, 2, 2000, sub_seed(seed, 1))?;
    let mut gates = vec![Gate::at_least("decreasing batches", r.decreasing_fraction, 0.9)];
    gates[0].detail.push_str(&format!(", pooled {p:.4?}"));
    gates.push(Gate::at_most("largest-n over smallest-n probability", r.final_ratio, 0.5));
    gates.push(Gate::within("n = 2 against enumeration", dp.0, bf.0, 3.0 * (dp.1 * dp.1 + bf.1 * bf.1).sqrt()));
    Ok(gates)
}

/// One 1000×1000 forward DP on a single thread; `total` is the runtime of criteria 1 to 11.
pub fn performance(total: f64, seed: u64) -> CriterionResult {
    timed(12, seed, |seed| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| crate::LabError::Domain(e.to_string()))?;
        let win = LatticeWindow::new(Site::ORIGIN, Site::new(999, 999))?;
        let w = make_weight_field(seed, win, 1.0)?;
        let secs = pool.install(|| -> Result<f64> {
            let t = Instant::now();
            forward_lpp(&w, Site::ORIGIN, win)?;
            Ok(t.elapsed().as_secs_f64())
        })?;
        let mut gates = vec![Gate::at_most("1000x1000 forward DP seconds", secs, 1.0)];
        if total > 0.0 {
            gates.push(Gate::at_most("criteria 1-11 seconds", total, 300.0));
        }
        Ok(gates)
    })
}

/// Quick gates at `(cfg.alpha, cfg.n)`: exact identities on one field, marginals
/// and the first-step frequency over `cfg.replicas` seeds.
pub fn module_gates(cfg: &ExperimentConfig) -> Result<Vec<Gate>> {
    cfg.validate()?;
    let h = Horizon::new(cfg.alpha, cfg.n)?;
    let f = h.build_seeded(cfg.seed)?;
    let dual = dual_weights(&f)?;
    let fwd = arrow_field(&f);
    let sw = southwest_arrows(&f)?;
    let mut gates = vec![
        Gate::at_most("cocycle residual", check_cocycle(&f, 100, cfg.seed).max_residual(), 1e-9),
        Gate::at_most(
            "tree identity residual",
            check_tree_identities(&f, &dual, &fwd, &sw, 10, 50, cfg.seed)?.max_residual(),
            1e-9,
        ),
    ];
    let sys = build_stationary_quadrant(cfg.alpha, cfg.seed, 50, 50)?;
    gates.push(Gate::at_most("stationary structure residual", check_structure(&sys).max_residual(), 1e-12));
    let m = marginal_statistics(cfg.alpha, cfg.n, cfg.replicas, cfg.seed)?;
    gates.push(Gate::at_most("B1 relative error", m.rel_err_b1(), 0.05));
    gates.push(Gate::at_least("B1 KS pass fraction", m.ks_pass_b1, 0.9));
    match run_first_step(cfg.alpha, cfg.n, cfg.replicas, cfg.seed, cfg.block_side) {
        Ok(r) => gates.push(Gate::within("e1 frequency", r.frequency, cfg.alpha, cfg.sigmas * r.se)),
        Err(e) => gates.push(Gate::check("e1 frequency", false, e.to_string())),
    }
    Ok(gates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_criteria_pass() {
        for id in [1, 5] {
            let r = run_criterion(id, 7);
            assert!(r.passed(), "{}", r.summary());
        }
        assert!(!run_criterion(13, 7).passed());
    }

    #[test]
    fn module_gates_at_small_size() {
        let cfg = ExperimentConfig { n: 200, replicas: 30, ..Default::default() };
        let g = module_gates(&cfg).unwrap();
        assert!(g.iter().take(3).all(|g| g.passed), "{g:?}");
    }
}
