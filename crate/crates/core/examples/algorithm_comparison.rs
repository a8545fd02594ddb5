//! MAP-Elites, CMA-ES and random search at equal budget. Non-QD runs are
//! scored through pseudo-archives of everything they evaluated.
//!
//! cargo run --release --example algorithm_comparison -- [budget] [preset]

use sa_scenarios::runner::{run_trial, ExperimentConfig, Preset, TraceExport};
use sa_scenarios::Algorithm;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let budget: usize = args.next().map(|b| b.parse()).transpose()?.unwrap_or(5_000);
    let preset: Preset = args.next().map(|p| p.parse()).transpose().map_err(anyhow::Error::msg)?.unwrap_or(Preset::DistanceVariation);

    println!("{preset}, {budget} evaluations");
    for algorithm in Algorithm::ALL {
        let mut cfg = ExperimentConfig::for_preset(preset);
        cfg.algorithm = algorithm;
        cfg.budget = Some(budget);
        cfg.workers = 1;
        cfg.traces = TraceExport::Off;
        let out = run_trial(&cfg, 0)?;
        println!(
            "  {algorithm:<10}  coverage {:6.2}%  QD-Score {:8.1}  restarts {}",
            100.0 * out.archive.coverage(),
            out.archive.qd_score(),
            out.log.cma_restarts
        );
    }
    Ok(())
}
