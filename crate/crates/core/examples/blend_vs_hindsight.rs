//! MAP-Elites on the obstacle scene once per controller, comparing the
//! collision slice and the mean completion time of collision-free elites.
//!
//! cargo run --release --example blend_vs_hindsight -- [out_dir] [budget]

use sa_scenarios::runner::{compare_controllers, ExperimentConfig, Preset, TraceExport};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "runs/blend_vs_hindsight".into());
    let budget: usize = args.next().map(|b| b.parse()).transpose()?.unwrap_or(20_000);

    let mut cfg = ExperimentConfig::for_preset(Preset::Obstacle);
    cfg.budget = Some(budget);
    cfg.workers = 1;
    cfg.out = out.into();
    cfg.traces = TraceExport::TopOnly;
    let report = compare_controllers(&cfg)?;

    for c in [&report.hindsight, &report.blend] {
        let s = &c.stats;
        println!(
            "{:<9}  collision cells {:3}  of which human variation < 0.02: {}  mean f without collision {}",
            c.controller,
            s.collision_cells,
            s.collision_low_variation,
            s.mean_f_non_collision.map_or("-".to_string(), |f| format!("{f:.2} s"))
        );
    }
    println!("collision occupancy ratio blend / hindsight: {}", report.collision_ratio());
    Ok(())
}
