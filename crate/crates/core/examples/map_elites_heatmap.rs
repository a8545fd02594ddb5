//! One MAP-Elites trial on the goal distance x human variation space, written
//! out as archive.csv, heatmap.csv and heatmap.svg.
//!
//! cargo run --release --example map_elites_heatmap -- [out_dir] [budget]

use sa_scenarios::runner::{run_experiment, ExperimentConfig, Preset, TraceExport};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "runs/map_elites_heatmap".into());
    let budget: usize = args.next().map(|b| b.parse()).transpose()?.unwrap_or(10_000);

    let mut cfg = ExperimentConfig::for_preset(Preset::DistanceVariation);
    cfg.budget = Some(budget);
    cfg.trials = 1;
    cfg.workers = 1;
    cfg.out = out.into();
    cfg.traces = TraceExport::FailuresAndTop;

    let summary = run_experiment(&cfg)?;
    let t = &summary.trials[0];
    println!(
        "{} evaluations: {} elites, coverage {:.3}, QD-Score {:.1}",
        t.evaluations, t.elites, t.coverage, t.qd_score
    );
    println!("heatmap written to {}", cfg.out.join("trial_0/heatmap.svg").display());
    Ok(())
}
