use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasiwalk_cli::config::parse_offsets;
use quasiwalk_cli::{commands, CliError, Outcome, RunConfig, Status};

#[derive(Parser)]
#[command(name = "quasiwalk", version, about = "Random walks on Penrose tilings")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "QUASIWALK_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Five grid offsets `g0,g1,g2,g3,g4` summing to zero.
    #[arg(long, global = true, value_parser = parse_offsets, allow_hyphen_values = true)]
    offsets: Option<[f64; 5]>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a patch and write it with a summary.
    Generate {
        /// `.json` for JSON, anything else for the binary form.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a patch as SVG.
    RenderSvg {
        #[arg(long)]
        patch: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Draw tiles centered within this radius.
        #[arg(long, default_value_t = 30.0)]
        clip: f64,
    },
    /// Geometry, tile frequency, rough isometry, volume and Poincaré checks.
    Verify {
        #[arg(long)]
        patch: Option<PathBuf>,
    },
    /// Simulate a walk ensemble and run the CLT checks.
    Walk {
        #[arg(long)]
        patch: Option<PathBuf>,
        /// Largest step.
        #[arg(long)]
        n: Option<usize>,
        /// Number of walkers.
        #[arg(long = "N")]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Analyse this saved ensemble instead of simulating.
        #[arg(long, conflicts_with_all = ["n", "samples", "out"])]
        ensemble: Option<PathBuf>,
    },
    /// Exact heat kernels, the Gaussian fit and the cone statistic.
    Kernel {
        #[arg(long)]
        patch: Option<PathBuf>,
        /// Largest step.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Consolidate verify, kernel and walk outputs into one claims report.
    Report {
        /// Directory holding the outputs; defaults to the output directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config,
}

fn build_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = common.radius {
        cfg.radius = r;
    }
    if let Some(o) = common.offsets {
        cfg.offsets = o;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.common.threads.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut cfg = build_config(&cli.common)?;
    match cli.command {
        Command::Generate { out } => {
            cfg.validate()?;
            let out = out.unwrap_or_else(|| cfg.out_dir.join("patch.bin"));
            commands::generate(&cfg, &out)
        }
        Command::RenderSvg { patch, out, clip } => {
            let out = out.unwrap_or_else(|| cfg.out_dir.join("patch.svg"));
            commands::render_svg(&cfg, patch.as_deref(), &out, clip)
        }
        Command::Verify { patch } => {
            cfg.validate()?;
            commands::verify(&cfg, patch.as_deref())
        }
        Command::Walk { patch, n, samples, out, ensemble } => {
            if let Some(n) = n {
                cfg.n_max = n;
            }
            if let Some(s) = samples {
                cfg.samples = s;
            }
            cfg.validate()?;
            match ensemble {
                Some(e) => commands::analyze_ensemble(&cfg, patch.as_deref(), &e),
                None => {
                    let out = out.unwrap_or_else(|| cfg.out_dir.join("ensemble.bin"));
                    commands::walk(&cfg, patch.as_deref(), &out)
                }
            }
        }
        Command::Kernel { patch, n } => {
            if let Some(n) = n {
                cfg.n_max = n;
            }
            cfg.validate()?;
            commands::kernel(&cfg, patch.as_deref(), cfg.n_max)
        }
        Command::Report { dir } => {
            let dir = dir.unwrap_or_else(|| cfg.out_dir.clone());
            commands::report(&cfg, &dir)
        }
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            Ok(Outcome::default())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for c in &outcome.checks {
                let shown = if c.status == Status::Skip { &c.bound["skipped"] } else { &c.value };
                println!("{:<5} {:<22} {}", c.status, c.name, shown);
            }
            let failed = outcome.failures();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("FAIL: {}", failed.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
