use std::time::Instant;

use anyhow::{ensure, Result};
use cgm_core::busemann::{check_cocycle, dual_weights, marginal_statistics, Horizon};
use cgm_core::competition::{
    boundary_lpp_minus, boundary_lpp_plus, check_boundary_identity, check_separation, competition_interface_plus,
};
use cgm_core::experiments::criteria::{module_gates, performance, run_criterion, CriterionResult};
use cgm_core::experiments::{
    bernoulli_oracle, run_markov_chain, run_midpoint, run_shape_convergence, sub_seed, Gate, MarkovReport,
};
use cgm_core::lpp::{backtrack_geodesic, brute_force_lpp, forward_lpp, shape_function};
use cgm_core::stationary::{
    build_stationary_quadrant, check_downright_law, check_structure, direction_of_alpha, increment_residual,
    stationary_lpp, DownRightPath,
};
use cgm_core::trees::{
    a_sequence, antidiagonal_site, arrow_field, check_duality, check_tree_identities, classify_points, coalescence,
    dual_from_southwest, follow_geodesic, southwest_arrows, PointClass,
};
use cgm_core::{make_weight_field, LatticeWindow, Site};
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::report::{Recorder, Table};

/// Result of one subcommand before it is written out.
pub struct Outcome {
    pub data: Value,
    pub table: Option<Table>,
}

fn outcome(data: Value, table: Option<Table>) -> Result<Outcome> {
    Ok(Outcome { data, table })
}

pub fn lpp(cfg: &Resolved, size: Option<i64>, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    let s = size.unwrap_or(c.n);
    ensure!(s >= 4, "lpp size must be at least 4, got {s}");
    let win = LatticeWindow::new(Site::ORIGIN, Site::new(s, s))?;
    let w = make_weight_field(c.seed, win, 1.0)?;
    let t = Instant::now();
    let g = forward_lpp(&w, Site::ORIGIN, win)?;
    rec.duration("forward dp", t.elapsed().as_secs_f64());
    let corner = Site::new(4, 4);
    let (bf, _) = brute_force_lpp(&w, Site::ORIGIN, corner)?;
    let dp = g.value(corner).unwrap();
    rec.gates("lpp", [Gate::at_most("dp against enumeration on 5x5", (dp - bf).abs() / bf, 1e-9)]);
    let path = backtrack_geodesic(&g, Site::ORIGIN, win.hi)?;
    let value = g.value(win.hi).unwrap();
    let shape = shape_function(s as f64, s as f64)?;
    let mut table = Table::new(&["step", "x1", "x2"]);
    for (k, x) in path.sites.iter().enumerate() {
        table.push(vec![k.to_string(), x.x1.to_string(), x.x2.to_string()]);
    }
    outcome(
        json!({
            "size": s,
            "g_corner": value,
            "shape_prediction": shape,
            "relative_gap": (value - shape).abs() / s as f64,
            "ties": g.ties(),
            "geodesic_steps": path.len(),
        }),
        Some(table),
    )
}

pub fn stationary(cfg: &Resolved, size: usize, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    let sys = build_stationary_quadrant(c.alpha, c.seed, size, size)?;
    let st = check_structure(&sys);
    let inc = increment_residual(&sys, &stationary_lpp(&sys));
    let path = DownRightPath::staircase(Site::new(10, 50), 20);
    let law = check_downright_law(c.alpha, 60, 60, &path, c.replicas, c.seed)?;
    rec.gates(
        "stationary",
        [
            Gate::at_most("structure residual", st.max_residual(), 1e-12),
            Gate::at_most("increment residual", inc, 1e-12),
            Gate::check("down-right path law", law.passed(0.9), format!("{law:?}")),
        ],
    );
    outcome(json!({ "size": size, "structure": st, "increment_residual": inc, "downright_law": law }), None)
}

pub fn busemann(cfg: &Resolved, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    let f = Horizon::new(c.alpha, c.n)?.build_seeded(c.seed)?;
    let cocycle = check_cocycle(&f, 200, c.seed);
    let m = marginal_statistics(c.alpha, c.n, c.replicas, c.seed)?;
    rec.gates(
        "busemann",
        [
            Gate::at_most("cocycle residual", cocycle.max_residual(), 1e-9),
            Gate::at_most("B1 relative error", m.rel_err_b1(), 0.05),
            Gate::at_least("B1 KS pass fraction", m.ks_pass_b1, 0.9),
            Gate::at_most("B2 relative error", m.rel_err_b2(), 0.05),
        ],
    );
    let mut table = Table::new(&["statistic", "mean", "se", "target"]);
    for (name, mean, se, target) in
        [("B1", m.mean_b1, m.se_b1, m.target_b1), ("B2", m.mean_b2, m.se_b2, m.target_b2), ("X", m.mean_x, m.se_x, 1.0)]
    {
        table.push(vec![name.into(), mean.to_string(), se.to_string(), target.to_string()]);
    }
    outcome(json!({ "cocycle": cocycle, "marginals": m }), Some(table))
}

pub fn trees(cfg: &Resolved, region: i64, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    let f = Horizon::new(c.alpha, c.n)?.build_seeded(c.seed)?;
    let dual = dual_weights(&f)?;
    let fwd = arrow_field(&f);
    let sw = southwest_arrows(&f)?;
    let ids = check_tree_identities(&f, &dual, &fwd, &sw, 20, 100, c.seed)?;
    let win = LatticeWindow::new(Site::new(-region, -region), Site::new(-1, -1))?;
    let duality = check_duality(&fwd, &dual_from_southwest(&sw)?, win, 100, c.seed)?;
    let lo = fwd.window().lo;
    let meet = coalescence(&fwd, lo, lo + Site::E2)?;
    let walk = follow_geodesic(&fwd, Site::ORIGIN, c.n as usize)?;
    rec.gates(
        "trees",
        [
            Gate::at_most("tree identity residual", ids.max_residual(), 1e-9),
            Gate::check("duality", duality.passed(), format!("{duality:?}")),
        ],
    );
    outcome(
        json!({
            "e1_fraction": fwd.e1_fraction(),
            "ties": fwd.ties(),
            "identities": ids,
            "duality": duality,
            "corner_coalescence": { "meet": meet.meet, "steps_x": meet.steps_x, "steps_y": meet.steps_y },
            "origin_path_steps": walk.len(),
            "origin_path_end": walk.end(),
        }),
        None,
    )
}

pub fn classify(cfg: &Resolved, level: i64, width: i64, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    ensure!(width >= 1, "width must be positive, got {width}");
    let f = Horizon::new(c.alpha, c.n)?.build_seeded(c.seed)?;
    let arrows = arrow_field(&f);
    let range = -(width / 2)..width - width / 2;
    let classes = classify_points(&arrows, level, range.clone())?;
    let a = a_sequence(&arrows, level, range.start - 1..range.end)?;
    let consistent = classes.iter().enumerate().all(|(k, cl)| *cl == PointClass::from_arrows(a[k], a[k + 1]));
    rec.gates("classify", [Gate::check("classes match the a-sequence", consistent, "")]);
    let mut counts = [0usize; 4];
    let mut table = Table::new(&["j", "x1", "x2", "class"]);
    for (cl, j) in classes.iter().zip(range) {
        counts[cl.index()] += 1;
        let z = antidiagonal_site(level, j);
        table.push(vec![j.to_string(), z.x1.to_string(), z.x2.to_string(), cl.letter().to_string()]);
    }
    let letters: String = classes.iter().map(|c| c.letter()).collect();
    outcome(
        json!({ "level": level, "classes": letters, "counts": { "s": counts[0], "c": counts[1], "h": counts[2], "v": counts[3] } }),
        Some(table),
    )
}

fn markov_gates(label: &str, r: &MarkovReport, sigmas: f64) -> Vec<Gate> {
    let out = r.invariant_outliers(sigmas);
    vec![
        Gate::at_most(format!("{label} max transition deviation"), r.max_abs_deviation, 0.02),
        Gate::check(
            format!("{label} invariant frequencies"),
            out.is_empty(),
            format!("outside {sigmas} SE: {}", out.iter().map(|c| c.letter()).collect::<String>()),
        ),
    ]
}

/// Horizon used by `markov` unless `n` was set explicitly.
pub const MARKOV_DEFAULT_N: i64 = 1600;

pub fn markov(cfg: &Resolved, length: u64, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    let n = if cfg.explicit("n") { c.n } else { MARKOV_DEFAULT_N };
    let r = run_markov_chain(c.alpha, n, length, c.seed)?;
    let o = bernoulli_oracle(c.alpha, length, sub_seed(c.seed, 1))?;
    rec.gates("markov", markov_gates("field", &r, c.sigmas));
    rec.gates("markov", markov_gates("oracle", &o, c.sigmas));
    let mut table = Table::new(&["from", "to", "count", "frequency", "target"]);
    for from in PointClass::ALL {
        for to in PointClass::ALL {
            let (i, j) = (from.index(), to.index());
            table.push(vec![
                from.letter().to_string(),
                to.letter().to_string(),
                r.counts[i][j].to_string(),
                r.frequencies[i][j].to_string(),
                r.target[i][j].to_string(),
            ]);
        }
    }
    outcome(json!({ "chain": r, "oracle": o }), Some(table))
}

pub fn midpoint(cfg: &Resolved, ns: &[i64], batches: usize, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    let u1 = direction_of_alpha(c.alpha)?;
    let r = run_midpoint(u1, ns, c.replicas, batches, c.seed)?;
    rec.gates(
        "midpoint",
        [
            Gate::at_least("strictly decreasing batches", r.decreasing_fraction, 0.9),
            Gate::at_most("largest-n over smallest-n probability", r.final_ratio, 0.5),
        ],
    );
    let mut table = Table::new(&["batch", "n", "probability"]);
    for (b, row) in r.batch_probabilities.iter().enumerate() {
        for (n, p) in ns.iter().zip(row) {
            table.push(vec![b.to_string(), n.to_string(), p.to_string()]);
        }
    }
    outcome(serde_json::to_value(&r)?, Some(table))
}

pub fn shape(cfg: &Resolved, sizes: &[i64], seeds: u64, rec: &mut Recorder) -> Result<Outcome> {
    let seed_list: Vec<u64> = (0..seeds).map(|s| sub_seed(cfg.experiment.seed, s)).collect();
    let r = run_shape_convergence(sizes, &seed_list)?;
    let last = *r.max_gap.last().unwrap();
    rec.gates(
        "shape",
        [
            Gate::at_most(format!("max gap at N = {}", sizes[sizes.len() - 1]), last, 0.15),
            Gate::at_least("paired decrease", r.paired_decrease, 0.9),
        ],
    );
    let mut table = Table::new(&["size", "seed", "gap"]);
    for (i, size) in r.sizes.iter().enumerate() {
        for (s, seed) in r.seeds.iter().enumerate() {
            table.push(vec![size.to_string(), seed.to_string(), r.gaps[i][s].to_string()]);
        }
    }
    outcome(serde_json::to_value(&r)?, Some(table))
}

pub fn ci(cfg: &Resolved, region: i64, rec: &mut Recorder) -> Result<Outcome> {
    let c = &cfg.experiment;
    ensure!(region >= 2, "region must be at least 2, got {region}");
    let f = Horizon::new(c.alpha, c.n)?.build_seeded(c.seed)?;
    let dual = dual_weights(&f)?;
    let fwd = arrow_field(&f);
    let sw = southwest_arrows(&f)?;
    let win = LatticeWindow::new(Site::new(-region, -region), Site::new(-1, -1))?;
    let m = (region - 1) as usize;
    let stair = DownRightPath::staircase(Site::new(-region, -1), m);
    let plus = boundary_lpp_plus(&f, &dual, &stair, win)?;
    let minus = boundary_lpp_minus(&f, &dual, &stair, win)?;
    let rp = check_boundary_identity(&plus, &f, &sw)?;
    let rm = check_boundary_identity(&minus, &f, &fwd)?;
    let phi = competition_interface_plus(&plus, m, 2 * region as usize)?;
    let geo = follow_geodesic(&fwd, phi.sites[0], phi.sites.len() - 1)?;
    let sep = check_separation(&plus, &phi, m, &sw);
    rec.gates(
        "ci",
        [
            Gate::check("plus boundary identity", rp.passed(1e-9), format!("{rp:?}")),
            Gate::check("minus boundary identity", rm.passed(1e-9), format!("{rm:?}")),
            Gate::check("interface is a forward geodesic", geo.sites == phi.sites && !phi.tie, ""),
            Gate::check("separation", sep.violations == 0 && sep.checked > 0, format!("{sep:?}")),
        ],
    );
    let mut table = Table::new(&["k", "x1", "x2"]);
    for (k, x) in phi.sites.iter().enumerate() {
        table.push(vec![k.to_string(), x.x1.to_string(), x.x2.to_string()]);
    }
    outcome(json!({ "plus": rp, "minus": rm, "interface": phi.sites, "separation": sep }), Some(table))
}

pub fn verify_all(cfg: &Resolved, only: &[u8], skip_criteria: bool, rec: &mut Recorder) -> Result<Outcome> {
    rec.gates(&format!("modules at alpha {} n {}", cfg.experiment.alpha, cfg.experiment.n), module_gates(&cfg.experiment)?);
    let mut results: Vec<CriterionResult> = Vec::new();
    if !skip_criteria {
        let ids: Vec<u8> = if only.is_empty() { (1..=11).collect() } else { only.iter().copied().filter(|&i| i <= 11).collect() };
        for id in ids {
            let r = run_criterion(id, cfg.experiment.seed);
            eprintln!("{}", r.summary());
            results.push(r);
        }
        if only.is_empty() || only.contains(&12) {
            let total = if results.len() == 11 { results.iter().map(|r| r.seconds).sum() } else { 0.0 };
            let r = performance(total, cfg.experiment.seed);
            eprintln!("{}", r.summary());
            results.push(r);
        }
    }
    let mut summary = Vec::new();
    for r in results {
        rec.duration(format!("criterion {}", r.id), r.seconds);
        summary.push(json!({ "id": r.id, "title": r.title, "passed": r.passed() }));
        rec.gates(&format!("criterion {}: {}", r.id, r.title), r.gates);
    }
    outcome(json!({ "criteria": summary }), None)
}
