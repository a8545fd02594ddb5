//! Maximum a posteriori rationality of the simulated human for increasingly
//! disturbed waypoints.
//!
//! cargo run --example rationality

use sa_scenarios::behavior::{bc_human_variation, bc_rationality, RationalityGrid};
use sa_scenarios::scenario::{generate_environment, Domain};
use sa_scenarios::sim::{run_episode, SimConfig};
use sa_scenarios::ScenarioParams;

fn main() -> anyhow::Result<()> {
    let cfg = SimConfig::default();
    let grid = RationalityGrid::default();
    let phi = vec![0.06, 0.08, 0.19, 0.1];
    let env = generate_environment(&phi, Domain::GoalPlacement, &cfg.layout)?;

    for scale in [0.0, 0.01, 0.02, 0.035, 0.05] {
        let theta = vec![scale, -scale, scale, -scale, scale];
        let sp = ScenarioParams::new(Domain::GoalPlacement, phi.clone(), theta.clone());
        let trace = run_episode(&sp, &cfg);
        println!(
            "variation {:.4}  beta {:7.1}  {:?}",
            bc_human_variation(&theta),
            bc_rationality(&trace, &env, &grid),
            trace.outcome.termination
        );
    }
    Ok(())
}
