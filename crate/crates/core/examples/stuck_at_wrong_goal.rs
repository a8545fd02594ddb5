//! Two goals in a column in front of the robot. With the linear cost term
//! the robot parks at the near goal and the proportional human never pulls
//! it away; without the term, or with a human pushing at full speed, it gets
//! through.
//!
//! cargo run --example stuck_at_wrong_goal

use sa_scenarios::scenario::Domain;
use sa_scenarios::sim::{run_episode, HumanKind, SimConfig};
use sa_scenarios::ScenarioParams;

fn report(label: &str, cfg: &SimConfig, sp: &ScenarioParams) {
    let trace = run_episode(sp, cfg);
    let end = trace.final_position;
    println!(
        "{label:<28} {:?} at {:.2} s, final position ({:.3}, {:.3})",
        trace.outcome.termination, trace.outcome.elapsed, end.x, end.y
    );
}

fn main() {
    // Human goal (0.125, 0.05) sits behind the other goal at (0.125, 0.15).
    let sp = ScenarioParams::new(Domain::GoalPlacement, vec![0.125, 0.05, 0.125, 0.15], vec![0.0; 5]);

    let base = SimConfig::default();
    report("linear term on", &base, &sp);

    let mut no_linear = base.clone();
    no_linear.cost.linear_term_enabled = false;
    report("linear term off", &no_linear, &sp);

    let pushy = SimConfig {
        human_kind: HumanKind::ConstantMax,
        ..base
    };
    report("full-speed human", &pushy, &sp);
}
