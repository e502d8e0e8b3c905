use std::fmt::Write;

use anyhow::{ensure, Result};
use cgm_core::busemann::{dual_weights, Horizon};
use cgm_core::competition::{boundary_lpp_plus, competition_interface_plus};
use cgm_core::stationary::DownRightPath;
use cgm_core::trees::{arrow_field, dual_from_southwest, southwest_arrows};
use cgm_core::{LatticeWindow, Site};
use serde::Serialize;

/// Everything an SVG tree picture needs. Dual vertices are stored by base
/// site `d` and drawn at `d + (1/2, 1/2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeRender {
    pub alpha: f64,
    pub n: i64,
    pub seed: u64,
    pub region: LatticeWindow,
    pub primal: Vec<(Site, Site)>,
    pub dual: Vec<(Site, Site)>,
    pub interface: Vec<Site>,
}

/// Trees on `[-side, -1]²` and the competition interface of the staircase
/// through that square's upper-left and lower-right corners.
pub fn tree_render(alpha: f64, n: i64, seed: u64, side: i64) -> Result<TreeRender> {
    ensure!(side >= 2, "render side must be at least 2, got {side}");
    let f = Horizon::new(alpha, n)?.build_seeded(seed)?;
    let region = LatticeWindow::new(Site::new(-side, -side), Site::new(-1, -1))?;
    let fwd = arrow_field(&f);
    let dual = dual_from_southwest(&southwest_arrows(&f)?)?;
    let stair = DownRightPath::staircase(Site::new(-side, -1), (side - 1) as usize);
    let blpp = boundary_lpp_plus(&f, &dual_weights(&f)?, &stair, region)?;
    let phi = competition_interface_plus(&blpp, (side - 1) as usize, 2 * side as usize)?;
    let primal = region
        .sites()
        .filter_map(|x| fwd.target(x).filter(|t| region.contains(*t)).map(|t| (x, t)))
        .collect();
    let dual_box = LatticeWindow::new(region.lo, region.hi - Site::DIAG)?;
    let dual = dual_box
        .sites()
        .filter_map(|d| dual.target(d).filter(|t| dual_box.contains(*t)).map(|t| (d, t)))
        .collect();
    Ok(TreeRender { alpha, n, seed, region, primal, dual, interface: phi.sites })
}

const CELL: f64 = 12.0;
const PAD: f64 = 10.0;

/// Static SVG with stroke classes `primal`, `dual` and `interface`.
pub fn render_svg(r: &TreeRender) -> String {
    let (lo, hi) = (r.region.lo, r.region.hi);
    let px = |x: f64| PAD + (x - lo.x1 as f64) * CELL;
    let py = |y: f64| PAD + (hi.x2 as f64 - y) * CELL;
    let w = 2.0 * PAD + (hi.x1 - lo.x1) as f64 * CELL;
    let h = 2.0 * PAD + (hi.x2 - lo.x2) as f64 * CELL;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(
        s,
        "<style>.primal{{stroke:#1f4e9c;stroke-width:1.6}}.dual{{stroke:#c0392b;stroke-width:1;stroke-dasharray:2 2}}\
         .interface{{stroke:#111;stroke-width:3;fill:none}}</style>"
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    let mut lines = |class: &str, edges: &[(Site, Site)], off: f64| {
        writeln!(s, r#"<g class="{class}">"#).unwrap();
        for (a, b) in edges {
            writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#,
                px(a.x1 as f64 + off),
                py(a.x2 as f64 + off),
                px(b.x1 as f64 + off),
                py(b.x2 as f64 + off)
            )
            .unwrap();
        }
        writeln!(s, "</g>").unwrap();
    };
    lines("primal", &r.primal, 0.0);
    lines("dual", &r.dual, 0.5);
    let pts: Vec<String> = r
        .interface
        .iter()
        .filter(|x| r.region.contains(**x))
        .map(|x| format!("{:.1},{:.1}", px(x.x1 as f64), py(x.x2 as f64)))
        .collect();
    writeln!(s, r#"<polyline class="interface" points="{}"/>"#, pts.join(" ")).unwrap();
    s.push_str("</svg>\n");
    s
}
