//! Closed-loop episode execution and the time-to-completion assessment.

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::Vec2;
use crate::policy::{belief_update, blend_action, hindsight_action, Belief, BlendParams, Controller, CostParams, RepulsionParams};
use crate::scenario::{build_waypoint_plan, generate_environment, Environment, HumanModel, HumanParams, ScenarioParams, SceneLayout};

/// Which simulated human drives the episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanKind {
    /// Proportional control through the disturbed waypoints.
    #[default]
    Waypoints,
    /// Maximum-magnitude input straight at the human's goal.
    ConstantMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub controller: Controller,
    pub cost: CostParams,
    pub blend: BlendParams,
    pub repulsion: RepulsionParams,
    pub human: HumanParams,
    pub human_kind: HumanKind,
    pub layout: SceneLayout,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            horizon: 10.0,
            controller: Controller::Hindsight,
            cost: CostParams::default(),
            blend: BlendParams::default(),
            repulsion: RepulsionParams::default(),
            human: HumanParams::default(),
            human_kind: HumanKind::Waypoints,
            layout: SceneLayout::default(),
        }
    }
}

impl SimConfig {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }

    /// Number of integration steps in the horizon.
    pub fn step_budget(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        let steps = self.horizon / self.dt;
        if !(self.horizon > 0.0) || (steps - steps.round()).abs() > 1e-6 {
            return Err(format!("horizon {} is not a positive multiple of dt {}", self.horizon, self.dt));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedGoal,
    Timeout,
    Collision,
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub termination: Termination,
    pub elapsed: f64,
    pub collided: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: f64,
    pub x: Vec2,
    pub u_h: Vec2,
    pub u_r: Vec2,
    pub belief: Belief,
}

/// The human moved on to waypoint `index` at step `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaypointEvent {
    pub step: usize,
    pub t: f64,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<Step>,
    pub waypoint_events: Vec<WaypointEvent>,
    pub outcome: EpisodeOutcome,
    pub final_position: Vec2,
}

impl EpisodeTrace {
    fn invalid() -> Self {
        Self {
            steps: Vec::new(),
            waypoint_events: Vec::new(),
            outcome: EpisodeOutcome {
                termination: Termination::Invalid,
                elapsed: 0.0,
                collided: false,
            },
            final_position: Vec2::ZERO,
        }
    }

    /// Column-oriented export used by the replay and plotting tools.
    pub fn to_columns(&self) -> TraceColumns {
        let mut c = TraceColumns {
            t: Vec::with_capacity(self.steps.len()),
            x: Vec::with_capacity(self.steps.len()),
            y: Vec::with_capacity(self.steps.len()),
            uhx: Vec::with_capacity(self.steps.len()),
            uhy: Vec::with_capacity(self.steps.len()),
            urx: Vec::with_capacity(self.steps.len()),
            ury: Vec::with_capacity(self.steps.len()),
            belief: Vec::with_capacity(self.steps.len()),
            waypoint_events: self.waypoint_events.clone(),
            outcome: self.outcome.clone(),
        };
        for s in &self.steps {
            c.t.push(s.t);
            c.x.push(s.x.x);
            c.y.push(s.x.y);
            c.uhx.push(s.u_h.x);
            c.uhy.push(s.u_h.y);
            c.urx.push(s.u_r.x);
            c.ury.push(s.u_r.y);
            c.belief.push(s.belief.probs().to_vec());
        }
        c
    }
}

/// Trace in the on-disk column layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceColumns {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub uhx: Vec<f64>,
    pub uhy: Vec<f64>,
    pub urx: Vec<f64>,
    pub ury: Vec<f64>,
    pub belief: Vec<Vec<f64>>,
    pub waypoint_events: Vec<WaypointEvent>,
    pub outcome: EpisodeOutcome,
}

/// A fully prepared episode: environment plus the human that will drive it.
pub struct Episode {
    pub env: Environment,
    pub human: HumanModel,
}

pub fn prepare_episode(sp: &ScenarioParams, cfg: &SimConfig) -> Result<Episode, ScenarioError> {
    let env = generate_environment(&sp.phi, sp.domain, &cfg.layout)?;
    let theta_bounds = vec![cfg.layout.disturbance; cfg.layout.waypoint_count];
    if sp.theta.len() != theta_bounds.len() {
        return Err(ScenarioError::Arity {
            what: "theta",
            expected: theta_bounds.len(),
            got: sp.theta.len(),
        });
    }
    for (index, (&value, &(low, high))) in sp.theta.iter().zip(&theta_bounds).enumerate() {
        if !(value >= low && value <= high) {
            return Err(ScenarioError::OutOfBounds {
                what: "theta",
                index,
                value,
                low,
                high,
            });
        }
    }
    let human = match cfg.human_kind {
        HumanKind::Waypoints => HumanModel::Waypoints(build_waypoint_plan(&env, &sp.theta, &cfg.human)?),
        HumanKind::ConstantMax => HumanModel::ConstantToward {
            target: env.human_goal(),
            speed: cfg.human.max_speed,
        },
    };
    Ok(Episode { env, human })
}

/// Simulates one scenario. Invalid scenarios produce an empty trace with an
/// `Invalid` outcome.
pub fn run_episode(sp: &ScenarioParams, cfg: &SimConfig) -> EpisodeTrace {
    match prepare_episode(sp, cfg) {
        Ok(episode) => simulate(episode, cfg).unwrap_or_else(|_| EpisodeTrace::invalid()),
        Err(_) => EpisodeTrace::invalid(),
    }
}

/// Runs a prepared episode with Euler integration `x <- x + u_R dt`.
pub fn simulate(episode: Episode, cfg: &SimConfig) -> Result<EpisodeTrace, ScenarioError> {
    let Episode { env, mut human } = episode;
    let dt = cfg.dt;
    let budget = cfg.step_budget();
    let goal = env.human_goal();
    let mut x = env.robot_start;
    let mut belief = Belief::uniform(env.goals.len());
    let mut steps = Vec::with_capacity(budget.min(1024));
    let mut events = Vec::new();
    let mut outcome = None;

    for k in 0..budget {
        let t = k as f64 * dt;
        let before = human.progress();
        let u_h = human.command(x);
        for index in before + 1..=human.progress() {
            events.push(WaypointEvent { step: k, t, index });
        }
        belief = belief_update(&belief, x, u_h, dt, &env, &cfg.cost)?;
        let u_r = match cfg.controller {
            Controller::Hindsight => hindsight_action(&belief, x, u_h, &env, &cfg.cost, &cfg.repulsion)?,
            Controller::Blend => blend_action(&belief, x, u_h, &env, &cfg.cost, &cfg.blend, &cfg.repulsion)?,
        };
        steps.push(Step {
            t,
            x,
            u_h,
            u_r,
            belief: belief.clone(),
        });
        x += u_r * dt;
        let elapsed = (k + 1) as f64 * dt;
        if env.obstacle.is_some_and(|s| s.contains(x)) {
            outcome = Some(EpisodeOutcome {
                termination: Termination::Collision,
                elapsed,
                collided: true,
            });
            break;
        }
        if x.distance(goal) < env.grasp_tolerance {
            outcome = Some(EpisodeOutcome {
                termination: Termination::ReachedGoal,
                elapsed,
                collided: false,
            });
            break;
        }
    }
    let outcome = outcome.unwrap_or(EpisodeOutcome {
        termination: Termination::Timeout,
        elapsed: cfg.horizon,
        collided: false,
    });
    Ok(EpisodeTrace {
        steps,
        waypoint_events: events,
        outcome,
        final_position: x,
    })
}

/// Time to completion; `None` for invalid scenarios.
pub fn assess(trace: &EpisodeTrace, cfg: &SimConfig) -> Option<f64> {
    match trace.outcome.termination {
        Termination::ReachedGoal | Termination::Collision => Some(trace.outcome.elapsed),
        Termination::Timeout => Some(cfg.horizon),
        Termination::Invalid => None,
    }
}
