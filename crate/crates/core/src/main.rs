use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use levy_sde::alpha_est::McmcConfig;
use levy_sde::cli_io::{cmd_estimate_alpha, cmd_fit, cmd_reproduce, cmd_simulate, ExperimentConfig, RunManifest};
use levy_sde::{Error, Result};

#[derive(Parser)]
#[command(
    name = "levy-sde",
    version,
    about = "Simulate and identify SDEs driven by alpha-stable Levy noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config (a previous run manifest also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate snapshot data for a configured system.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit drift and diffusion to snapshot data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Data CSV from `simulate`; data is simulated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Rerun benchmark rows and compare against published errors.
    Reproduce {
        /// Row ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<String>,
        /// Select every row.
        #[arg(long)]
        all: bool,
        /// Use the published repetition counts instead of desk scale.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate the stability index from noise samples by MCMC.
    EstimateAlpha {
        /// One-column CSV of samples, or a data CSV with --from-dataset.
        #[arg(long)]
        samples: PathBuf,
        /// Use residuals of a snapshot data set around group centres.
        #[arg(long)]
        from_dataset: bool,
        /// JSON sampler config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_experiment(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    flag.or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn report(manifest: &RunManifest, out: &Path) {
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(l2) = manifest.l2_f {
        println!("L2 drift error:     {l2:.6}");
    }
    if let Some(l2) = manifest.l2_g {
        println!("L2 diffusion error: {l2:.6}");
    }
    println!("wrote {} ({:.1}s)", out.display(), manifest.wall_clock_seconds);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load_experiment(&common)?;
            let out = out_dir(common.out, Some(&cfg));
            let m = cmd_simulate(&cfg, &out)?;
            report(&m, &out);
        }
        Command::Fit { common, data } => {
            let cfg = load_experiment(&common)?;
            let out = out_dir(common.out, Some(&cfg));
            let m = cmd_fit(&cfg, data.as_deref(), &out)?;
            report(&m, &out);
        }
        Command::Reproduce {
            mut rows,
            all,
            full,
            out,
            seed,
        } => {
            if all {
                rows = vec!["all".into()];
            }
            let out = out_dir(out, None);
            let (results, m) = cmd_reproduce(&rows, full, seed, &out)?;
            println!(
                "{:<30} {:>10} {:>10} {:>10} {:>10}",
                "row", "pub L2 f", "L2 f", "pub L2 g", "L2 g"
            );
            for r in &results {
                println!(
                    "{:<30} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    r.row, r.published_l2_f, r.l2_f, r.published_l2_g, r.l2_g
                );
            }
            report(&m, &out);
        }
        Command::EstimateAlpha {
            samples,
            from_dataset,
            config,
            out,
            seed,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                    serde_json::from_str::<McmcConfig>(&text)?
                }
                None => McmcConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out_dir(out, None);
            let m = cmd_estimate_alpha(&samples, from_dataset, &cfg, &out)?;
            report(&m, &out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
