use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use coacs_cli::pipeline::{evaluate_run, simulate_job, write_evaluation, InputKind};
use coacs_cli::preview::{render_preview, Scaling};
use coacs_cli::{output_dir, run_pipeline, HealJob, PhaseJob, PipelineConfig, RunManifest, Scale};
use coacs_core::io::read_real;

#[derive(Parser)]
#[command(name = "coacs", version, about = "Heal sparse diffraction patterns and score the reconstructions")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file with [simulate], [heal], [phase] and [evaluate] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset the file is layered on.
    #[arg(long, value_enum, default_value = "full")]
    scale: Scale,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        PipelineConfig::load(self.config.as_deref(), self.scale)
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (default: $COACS_OUTPUT_ROOT/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate noise-free truth and Poisson-sampled patterns.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        patterns: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Heal one pattern of photon counts.
    Heal {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        pattern: PathBuf,
        /// Mask of pixels without data.
        #[arg(long)]
        beamstop: Option<PathBuf>,
        /// Side of the square real-space support.
        #[arg(long)]
        support_side: Option<usize>,
        #[arg(long)]
        l_init: Option<f64>,
        #[arg(long)]
        l_min: Option<f64>,
        /// Support penalty numerator.
        #[arg(long)]
        penalty: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Phase amplitudes with the HIO/ER ensemble.
    Phase {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, conflicts_with = "intensities", required_unless_present = "intensities")]
        amplitudes: Option<PathBuf>,
        #[arg(long)]
        intensities: Option<PathBuf>,
        /// Pixels left unconstrained in Fourier space.
        #[arg(long)]
        free_mask: Option<PathBuf>,
        #[arg(long)]
        support_side: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        hio: Option<usize>,
        #[arg(long)]
        er: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        keep_best: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write R-factor tables for a pipeline run directory.
    Evaluate {
        run: PathBuf,
        /// Number of radial shells (default: all).
        #[arg(long)]
        shells: Option<usize>,
    },
    /// simulate, heal, phase and evaluate in one go.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Render a grid as an 8-bit PGM.
    Preview {
        grid: PathBuf,
        #[arg(long, value_enum, default_value = "log")]
        scaling: Scaling,
        #[arg(long)]
        out: PathBuf,
    },
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p).with_context(|| format!("{} not found", p.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Simulate { cfg, patterns, seed, out } => {
            let mut sim = cfg.load()?.simulate;
            sim.patterns = patterns.unwrap_or(sim.patterns);
            sim.seed = seed.unwrap_or(sim.seed);
            let dir = output_dir(out.out, "simulate");
            simulate_job(&sim, &dir, out.force)?;
            println!("{}", dir.display());
        }
        Command::Heal { cfg, pattern, beamstop, support_side, l_init, l_min, penalty, tol, out } => {
            let base = cfg.load()?;
            let mut heal = base.heal;
            heal.l_init = l_init.unwrap_or(heal.l_init);
            heal.l_min = l_min.unwrap_or(heal.l_min);
            heal.penalty_base = penalty.unwrap_or(heal.penalty_base);
            heal.tol = tol.unwrap_or(heal.tol);
            let job = HealJob {
                pattern: absolute(&pattern)?,
                beamstop: beamstop.as_deref().map(absolute).transpose()?,
                support_side: support_side.unwrap_or(base.phase.support_side),
                heal,
            };
            let dir = output_dir(out.out, "heal");
            let healed = job.run(&dir, out.force)?;
            for w in &healed.warnings {
                log::warn!("{w}");
            }
            println!("{}", dir.display());
        }
        Command::Phase {
            cfg,
            amplitudes,
            intensities,
            free_mask,
            support_side,
            beta,
            hio,
            er,
            replicates,
            keep_best,
            seed,
            out,
        } => {
            let mut phase = cfg.load()?.phase;
            phase.support_side = support_side.unwrap_or(phase.support_side);
            phase.beta = beta.unwrap_or(phase.beta);
            phase.hio_iters = hio.unwrap_or(phase.hio_iters);
            phase.er_iters = er.unwrap_or(phase.er_iters);
            phase.replicates = replicates.unwrap_or(phase.replicates);
            phase.keep_best = keep_best.unwrap_or(phase.keep_best.min(phase.replicates));
            phase.seed = seed.unwrap_or(phase.seed);
            let (input, kind) = match (amplitudes, intensities) {
                (Some(a), _) => (a, InputKind::Amplitudes),
                (None, Some(i)) => (i, InputKind::Intensities),
                (None, None) => unreachable!("clap requires one input"),
            };
            let job = PhaseJob {
                input: absolute(&input)?,
                kind,
                free_mask: free_mask.as_deref().map(absolute).transpose()?,
                phase,
            };
            let dir = output_dir(out.out, "phase");
            let ens = job.run(&dir, out.force)?;
            println!("{}\tbest error {:.4e}", dir.display(), ens.results[0].real_space_error);
        }
        Command::Evaluate { run, shells } => {
            let scores = evaluate_run(&run, shells)?;
            write_evaluation(&run, &scores)?;
            for s in &scores {
                println!("{:<14} R = {:.4} (sigma {:.4})", s.variant, s.mean, s.std);
            }
        }
        Command::Pipeline { cfg, out } => {
            let cfg = cfg.load()?;
            let dir = output_dir(out.out, "pipeline");
            let summary = run_pipeline(&cfg, &dir, out.force)?;
            for s in &summary.scores {
                println!("{:<14} R = {:.4} (sigma {:.4})", s.variant, s.mean, s.std);
            }
            println!("{}", summary.manifest.display());
        }
        Command::Replay { manifest, out } => {
            let m = RunManifest::read(&manifest)?;
            let dir = output_dir(out.out, "replay");
            coacs_cli::pipeline::replay(&m, &dir, out.force)?;
            println!("{}", dir.display());
        }
        Command::Preview { grid, scaling, out } => {
            render_preview(&read_real(&grid)?, scaling, &out)?;
        }
    }
    Ok(())
}
