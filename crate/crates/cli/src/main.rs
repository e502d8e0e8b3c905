mod commands;
mod config;
mod render;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{env_layer, load_config, resolve, Layer};
use crate::report::{write_json, Recorder, Table};

/// Exponential corner growth model laboratory.
///
/// Exit status: 0 when every gate passes, 1 when a gate fails (the report is
/// still written), 2 on usage, configuration or parameter errors.
#[derive(Parser, Debug)]
#[command(name = "cgm", version, about, long_about = None)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat `key = value` config file; flags override it, it overrides CGM_SEED / CGM_THREADS.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Horizon N.
    #[arg(long, global = true)]
    n: Option<i64>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    block_side: Option<usize>,
    #[arg(long, global = true)]
    sigmas: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Write the raw table (or the gate table) as CSV.
    #[arg(long, global = true, value_name = "FILE")]
    csv: Option<PathBuf>,
}

impl Common {
    fn flag_layer(&self) -> Layer {
        let mut l = Layer::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                l.insert(k.to_string(), v);
            }
        };
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("n", self.n.map(|v| v.to_string()));
        put("replicas", self.replicas.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("block_side", self.block_side.map(|v| v.to_string()));
        put("sigmas", self.sigmas.map(|v| v.to_string()));
        put("threads", self.threads.map(|v| v.to_string()));
        l
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RenderKind {
    /// Primal tree, dual tree and competition interface.
    Trees,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward LPP on [0, size]² with the corner geodesic.
    Lpp {
        /// Defaults to N.
        #[arg(long)]
        size: Option<i64>,
    },
    /// Increment-stationary quadrant: structure equations and down-right path law.
    Stationary {
        #[arg(long, default_value_t = 200)]
        size: usize,
    },
    /// Busemann field identities and marginals.
    Busemann,
    /// Geodesic tree identities, duality and corner coalescence.
    Trees {
        /// Side of the duality region [-region, -1]².
        #[arg(long, default_value_t = 60)]
        region: i64,
    },
    /// Point classes along one antidiagonal.
    Classify {
        #[arg(long, default_value_t = 0)]
        level: i64,
        #[arg(long, default_value_t = 64)]
        width: i64,
    },
    /// Class transition chain along antidiagonals (N defaults to 1600 here).
    Markov {
        #[arg(long, default_value_t = 100_000)]
        length: u64,
    },
    /// Probability that the geodesic through a symmetric pair of endpoints hits the origin.
    Midpoint {
        #[arg(long, value_delimiter = ',', default_values_t = [20, 80, 320])]
        ns: Vec<i64>,
        #[arg(long, default_value_t = 20)]
        batches: usize,
    },
    /// Antidiagonal gap from the shape function.
    Shape {
        #[arg(long, value_delimiter = ',', default_values_t = [100, 1000])]
        sizes: Vec<i64>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Boundary LPP and competition interface on [-region, -1]².
    Ci {
        #[arg(long, default_value_t = 60)]
        region: i64,
    },
    /// Static SVG rendering.
    Render {
        kind: RenderKind,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Side of the rendered square [-side, -1]².
        #[arg(long, default_value_t = 40)]
        side: i64,
    },
    /// Module gates at the configured (alpha, N), then every acceptance criterion.
    VerifyAll {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Module gates only.
        #[arg(long)]
        skip_criteria: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Lpp { .. } => "lpp",
            Command::Stationary { .. } => "stationary",
            Command::Busemann => "busemann",
            Command::Trees { .. } => "trees",
            Command::Classify { .. } => "classify",
            Command::Markov { .. } => "markov",
            Command::Midpoint { .. } => "midpoint",
            Command::Shape { .. } => "shape",
            Command::Ci { .. } => "ci",
            Command::Render { .. } => "render",
            Command::VerifyAll { .. } => "verify-all",
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.common.config {
        Some(p) => load_config(p)?,
        None => Layer::new(),
    };
    let cfg = resolve(&env_layer(|v| std::env::var(v).ok()), &file, &cli.common.flag_layer())?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global().context("thread pool")?;
    }
    let mut rec = Recorder::new();
    let out = match &cli.command {
        Command::Lpp { size } => commands::lpp(&cfg, *size, &mut rec)?,
        Command::Stationary { size } => commands::stationary(&cfg, *size, &mut rec)?,
        Command::Busemann => commands::busemann(&cfg, &mut rec)?,
        Command::Trees { region } => commands::trees(&cfg, *region, &mut rec)?,
        Command::Classify { level, width } => commands::classify(&cfg, *level, *width, &mut rec)?,
        Command::Markov { length } => commands::markov(&cfg, *length, &mut rec)?,
        Command::Midpoint { ns, batches } => commands::midpoint(&cfg, ns, *batches, &mut rec)?,
        Command::Shape { sizes, seeds } => commands::shape(&cfg, sizes, *seeds, &mut rec)?,
        Command::Ci { region } => commands::ci(&cfg, *region, &mut rec)?,
        Command::Render { kind: RenderKind::Trees, out, side } => {
            let c = &cfg.experiment;
            let r = render::tree_render(c.alpha, c.n, c.seed, *side)?;
            std::fs::write(out, render::render_svg(&r)).with_context(|| format!("cannot write {}", out.display()))?;
            commands::Outcome { data: serde_json::to_value(&r)?, table: None }
        }
        Command::VerifyAll { only, skip_criteria } => commands::verify_all(&cfg, only, *skip_criteria, &mut rec)?,
    };
    let report = rec.finish(cli.command.name(), &cfg, out.data);
    if let Some(p) = &cli.common.csv {
        out.table.unwrap_or_else(|| Table::from_gates(&report.gates)).write(p)?;
    }
    write_json(&report, cli.common.json.as_deref())?;
    for g in report.gates.iter().filter(|g| !g.passed) {
        eprintln!("FAIL [{}] {}: {}", g.group, g.name, g.detail.as_deref().unwrap_or("wall-clock bound exceeded"));
    }
    Ok(report.manifest.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
