//! Simulate one goal-placement scenario under both controllers and print a
//! few rows of each trace.
//!
//! cargo run --example single_episode

use sa_scenarios::policy::Controller;
use sa_scenarios::scenario::Domain;
use sa_scenarios::sim::{assess, run_episode, SimConfig};
use sa_scenarios::ScenarioParams;

fn main() {
    // Human goal first, then the distractor.
    let phi = vec![0.05, 0.1, 0.2, 0.12];
    let theta = vec![0.02, -0.03, 0.01, 0.0, -0.01];
    let sp = ScenarioParams::new(Domain::GoalPlacement, phi, theta);

    for controller in [Controller::Hindsight, Controller::Blend] {
        let cfg = SimConfig {
            controller,
            ..SimConfig::default()
        };
        let trace = run_episode(&sp, &cfg);
        println!(
            "{controller}: {:?} after {:.2} s (f = {:.2}), {} waypoint advances",
            trace.outcome.termination,
            trace.outcome.elapsed,
            assess(&trace, &cfg).unwrap_or(f64::NAN),
            trace.waypoint_events.len()
        );
        for step in trace.steps.iter().step_by(25) {
            let b = step.belief.probs();
            println!(
                "  t {:5.2}  x ({:.3}, {:.3})  u_h ({:+.3}, {:+.3})  u_r ({:+.3}, {:+.3})  b(g_h) {:.3}",
                step.t, step.x.x, step.x.y, step.u_h.x, step.u_h.y, step.u_r.x, step.u_r.y, b[0]
            );
        }
    }
}
