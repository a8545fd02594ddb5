//! How unevenly uniform scenario sampling covers the behavior space, next to
//! the cells MAP-Elites reaches with the same budget.
//!
//! cargo run --release --example distortion -- [budget]

use sa_scenarios::runner::{distortion_histogram, run_trial, ExperimentConfig, Preset, TraceExport};
use sa_scenarios::Algorithm;

fn main() -> anyhow::Result<()> {
    let budget: usize = std::env::args().nth(1).map(|b| b.parse()).transpose()?.unwrap_or(10_000);
    for algorithm in [Algorithm::Random, Algorithm::MapElites] {
        let mut cfg = ExperimentConfig::for_preset(Preset::DistanceVariation);
        cfg.algorithm = algorithm;
        cfg.budget = Some(budget);
        cfg.workers = 1;
        cfg.traces = TraceExport::Off;
        let out = run_trial(&cfg, 0)?;
        let hist = distortion_histogram(&out.log, &cfg.space())?;
        println!(
            "{algorithm:<10} distinct cells {:4}  top 10% of cells hold {:.1}% of evaluations",
            hist.distinct(),
            100.0 * hist.top_mass(0.1)
        );
        // Coarse text plot: rows are goal distance, columns human variation.
        for row in hist.grid().iter().rev().step_by(3) {
            let line: String = row
                .iter()
                .map(|&c| match c {
                    0 => ' ',
                    1..=4 => '.',
                    5..=49 => 'o',
                    _ => '#',
                })
                .collect();
            println!("  |{line}|");
        }
    }
    Ok(())
}
