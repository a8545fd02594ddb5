//! Command-line front end for running and inspecting scenario searches.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sa_scenarios::policy::Controller;
use sa_scenarios::runner::{
    compare_controllers, default_output_root, export_heatmap, replay_table, run_experiment, EliteFile, ExperimentConfig, Preset,
    TraceExport, OUTPUT_ROOT_ENV,
};
use sa_scenarios::search::Algorithm;

#[derive(Parser)]
#[command(name = "qdscen", version, about = "Quality-diversity scenario generation for shared autonomy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run search trials and write archives, heatmaps and a summary.
    Run(RunArgs),
    /// Re-simulate an exported elite and print its step table.
    Replay {
        #[arg(long)]
        elite: PathBuf,
    },
    /// Rebuild heatmap.csv and heatmap.svg from an archive.csv.
    Heatmap {
        #[arg(long)]
        archive: PathBuf,
        /// Behavior space; defaults to space.json beside the archive.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Output directory; defaults to the archive's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Upper end of the color scale in seconds.
        #[arg(long, default_value_t = 15.0)]
        f_max: f64,
    },
    /// Compare hindsight optimization with blending on the obstacle preset.
    Compare(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long = "algo")]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    controller: Option<Controller>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// 0 uses every core, 1 runs sequentially (deterministic).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    linear_term: Option<Switch>,
    #[arg(long, value_enum)]
    traces: Option<Traces>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Traces {
    FailuresAndTop,
    TopOnly,
    Off,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::for_preset(self.preset.unwrap_or(Preset::DistanceVariation)),
        };
        if let Some(p) = self.preset {
            cfg.preset = p;
        }
        if let Some(a) = self.algorithm {
            cfg.algorithm = a;
        }
        if let Some(c) = self.controller {
            cfg.controller = c;
        }
        if self.budget.is_some() {
            cfg.budget = self.budget;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.out = self.out.unwrap_or_else(|| {
            if self.config.is_some() {
                cfg.out.clone()
            } else {
                default_output_root()
            }
        });
        if let Some(s) = self.linear_term {
            cfg.cost.linear_term_enabled = matches!(s, Switch::On);
        }
        if let Some(t) = self.traces {
            cfg.traces = match t {
                Traces::FailuresAndTop => TraceExport::FailuresAndTop,
                Traces::TopOnly => TraceExport::TopOnly,
                Traces::Off => TraceExport::Off,
            };
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let summary = run_experiment(&cfg)?;
            println!(
                "{} {} ({}): coverage {:.3} ± {:.3}, QD-Score {:.1} ± {:.1} over {} trials -> {}",
                summary.preset,
                summary.algorithm,
                summary.controller,
                summary.coverage.mean,
                summary.coverage.std,
                summary.qd_score.mean,
                summary.qd_score.std,
                summary.trials.len(),
                cfg.out.display()
            );
        }
        Command::Replay { elite } => {
            let file = EliteFile::read(&elite).with_context(|| format!("reading {}", elite.display()))?;
            print!("{}", replay_table(&file));
        }
        Command::Heatmap { archive, space, out, f_max } => {
            let out = out.unwrap_or_else(|| archive.parent().map(PathBuf::from).unwrap_or_default());
            let a = export_heatmap(&archive, space.as_deref(), &out, f_max)?;
            println!("{} elites, coverage {:.3} -> {}", a.len(), a.coverage(), out.display());
        }
        Command::Compare(mut args) => {
            if args.config.is_none() && args.preset.is_none() {
                args.preset = Some(Preset::Obstacle);
            }
            let cfg = args.into_config()?;
            if cfg.preset != Preset::Obstacle {
                bail!("compare only supports --preset obstacle");
            }
            let r = compare_controllers(&cfg)?;
            for c in [&r.hindsight, &r.blend] {
                println!(
                    "{:<9} coverage {:.3}  collision cells {:>4}  low-variation collisions {:>3}  mean f (no collision) {}",
                    c.controller,
                    c.coverage,
                    c.stats.collision_cells,
                    c.stats.collision_low_variation,
                    c.stats.mean_f_non_collision.map_or("-".into(), |f| format!("{f:.2} s"))
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
