use cgm_core::busemann::{busemann_with_margin, check_direction_monotonicity, dual_weights};
use cgm_core::stationary::{build_stationary_quadrant, check_structure, increment_residual, stationary_lpp};
use cgm_core::trees::{arrow_field, check_duality, dual_from_southwest, follow_geodesic, southwest_arrows};
use cgm_core::{make_weight_field, LatticeWindow, Site, SiteWeights};
use proptest::prelude::*;

fn field(seed: u64, side: i64, margin: i64) -> cgm_core::busemann::BusemannField {
    let win = LatticeWindow::new(Site::new(-side, -side), Site::new(side, side)).unwrap();
    let w = make_weight_field(seed, win, 1.0).unwrap();
    busemann_with_margin(&w, win.hi, win, Site::new(margin, margin)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cocycle_and_recovery(seed in any::<u64>(), a in (-20i64..10, -20i64..10), b in (-20i64..10, -20i64..10), c in (-20i64..10, -20i64..10)) {
        let f = field(seed, 20, 10);
        let (x, y, z) = (Site::new(a.0, a.1), Site::new(b.0, b.1), Site::new(c.0, c.1));
        let lhs = f.b(x, y).unwrap() + f.b(y, z).unwrap();
        prop_assert!((lhs - f.b(x, z).unwrap()).abs() <= 1e-9);
        let y_x = f.weight(x).unwrap();
        prop_assert!((y_x - f.b1(x).unwrap().min(f.b2(x).unwrap())).abs() <= 1e-12);
    }

    #[test]
    fn arrows_follow_geodesics(seed in any::<u64>(), s in (-20i64..0, -20i64..0)) {
        let f = field(seed, 20, 5);
        let arrows = arrow_field(&f);
        let p = follow_geodesic(&arrows, Site::new(s.0, s.1), 30).unwrap();
        // Along an arrow path the Busemann increment is the weight of the earlier site.
        let sum: f64 = p.sites[..p.len()].iter().map(|&x| SiteWeights::weight(&f, x)).sum();
        prop_assert!((f.b(p.start(), p.end()).unwrap() - sum).abs() <= 1e-9);
    }

    #[test]
    fn dual_tree_never_crosses(seed in any::<u64>()) {
        let f = field(seed, 30, 10);
        let dual = dual_from_southwest(&southwest_arrows(&f).unwrap()).unwrap();
        let region = LatticeWindow::new(Site::new(-25, -25), Site::new(15, 15)).unwrap();
        let r = check_duality(&arrow_field(&f), &dual, region, 10, seed).unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn dual_weights_are_nonnegative(seed in any::<u64>()) {
        let f = field(seed, 15, 4);
        let d = dual_weights(&f).unwrap();
        prop_assert!(d.values().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn terminal_ordering(seed in any::<u64>(), p in 1i64..6, q in 0i64..6) {
        let lo = Site::new(0, 0);
        let w = make_weight_field(seed, LatticeWindow::new(lo, Site::new(40, 40)).unwrap(), 1.0).unwrap();
        let r = check_direction_monotonicity(&w, Site::new(30, 34), Site::new(30 + p, 34 - q), lo).unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn stationary_quadrant_is_exact(seed in any::<u64>(), alpha in 0.05f64..0.95, m in 1usize..40, n in 1usize..40) {
        let sys = build_stationary_quadrant(alpha, seed, m, n).unwrap();
        prop_assert!(check_structure(&sys).max_residual() <= 1e-12);
        prop_assert!(increment_residual(&sys, &stationary_lpp(&sys)) <= 1e-12);
    }
}
