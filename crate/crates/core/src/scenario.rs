//! Scenario parameters, the environment generator and the simulated human.
//!
//! A scenario is a pair of vectors: `phi` places objects in the workspace and
//! `theta` holds horizontal disturbances applied to the human's intermediate
//! waypoints. Both generators are deterministic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::{wrap_path_samples, Sphere, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `phi` holds `(x, y)` for each goal; the first goal is the human's.
    GoalPlacement,
    /// `phi = (goal_x, obstacle_x)`; one goal behind a spherical obstacle.
    Obstacle,
}

/// Fixed workspace geometry shared by every scenario of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub robot_start: Vec2,
    pub goal_x: (f64, f64),
    pub goal_y: (f64, f64),
    pub disturbance: (f64, f64),
    pub waypoint_count: usize,
    pub grasp_tolerance: f64,
    pub obstacle_goal_y: f64,
    pub obstacle_y: f64,
    pub obstacle_radius: f64,
    pub obstacle_x: (f64, f64),
}

impl Default for SceneLayout {
    fn default() -> Self {
        Self {
            robot_start: Vec2::new(0.125, 0.40),
            goal_x: (0.0, 0.25),
            goal_y: (0.0, 0.2),
            disturbance: (-0.05, 0.05),
            waypoint_count: 5,
            grasp_tolerance: 0.01,
            obstacle_goal_y: 0.10,
            obstacle_y: 0.25,
            obstacle_radius: 0.05,
            obstacle_x: (0.0, 0.25),
        }
    }
}

/// A point in scenario space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub domain: Domain,
}

impl ScenarioParams {
    pub fn new(domain: Domain, phi: Vec<f64>, theta: Vec<f64>) -> Self {
        Self { phi, theta, domain }
    }

    pub fn dim(&self) -> usize {
        self.phi.len() + self.theta.len()
    }

    /// Concatenation `phi ++ theta`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.phi.iter().chain(&self.theta).copied().collect()
    }

    pub fn from_vec(domain: Domain, phi_len: usize, values: &[f64]) -> Self {
        Self {
            phi: values[..phi_len].to_vec(),
            theta: values[phi_len..].to_vec(),
            domain,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }
}

/// Per-dimension search ranges for `phi` and `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub domain: Domain,
    pub phi: Vec<(f64, f64)>,
    pub theta: Vec<(f64, f64)>,
}

impl Bounds {
    pub fn goal_placement(n_goals: usize, layout: &SceneLayout) -> Self {
        let phi = (0..n_goals)
            .flat_map(|_| [layout.goal_x, layout.goal_y])
            .collect();
        Self {
            domain: Domain::GoalPlacement,
            phi,
            theta: vec![layout.disturbance; layout.waypoint_count],
        }
    }

    pub fn obstacle(layout: &SceneLayout) -> Self {
        Self {
            domain: Domain::Obstacle,
            phi: vec![layout.goal_x, layout.obstacle_x],
            theta: vec![layout.disturbance; layout.waypoint_count],
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.len() + self.theta.len()
    }

    /// All ranges, `phi` first.
    pub fn ranges(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.phi.iter().chain(&self.theta).copied()
    }

    pub fn contains_vec(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(self.ranges())
                .all(|(&v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn contains(&self, sp: &ScenarioParams) -> bool {
        self.check(sp).is_ok()
    }

    pub fn clamp_vec(&self, values: &mut [f64]) {
        for (v, (lo, hi)) in values.iter_mut().zip(self.ranges()) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn check(&self, sp: &ScenarioParams) -> Result<(), ScenarioError> {
        check_block("phi", &sp.phi, &self.phi)?;
        check_block("theta", &sp.theta, &self.theta)
    }
}

fn check_block(what: &'static str, values: &[f64], ranges: &[(f64, f64)]) -> Result<(), ScenarioError> {
    if values.len() != ranges.len() {
        return Err(ScenarioError::Arity {
            what,
            expected: ranges.len(),
            got: values.len(),
        });
    }
    for (index, (&value, &(low, high))) in values.iter().zip(ranges).enumerate() {
        if !(value >= low && value <= high) {
            return Err(ScenarioError::OutOfBounds {
                what,
                index,
                value,
                low,
                high,
            });
        }
    }
    Ok(())
}

/// Uniform draw over the bounds.
pub fn sample_random_scenario<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> ScenarioParams {
    let mut draw = |&(lo, hi): &(f64, f64)| rng.random_range(lo..=hi);
    ScenarioParams {
        phi: bounds.phi.iter().map(&mut draw).collect(),
        theta: bounds.theta.iter().map(&mut draw).collect(),
        domain: bounds.domain,
    }
}

/// Initial world state produced from `phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// `goals[0]` is the goal the human is trying to reach.
    pub goals: Vec<Vec2>,
    pub obstacle: Option<Sphere>,
    pub robot_start: Vec2,
    pub grasp_tolerance: f64,
}

impl Environment {
    pub fn human_goal(&self) -> Vec2 {
        self.goals[0]
    }
}

/// Builds the environment for `phi` in `domain`.
pub fn generate_environment(
    phi: &[f64],
    domain: Domain,
    layout: &SceneLayout,
) -> Result<Environment, ScenarioError> {
    match domain {
        Domain::GoalPlacement => {
            if phi.is_empty() || !phi.len().is_multiple_of(2) {
                return Err(ScenarioError::Arity {
                    what: "phi",
                    expected: 2 * (phi.len() / 2).max(1),
                    got: phi.len(),
                });
            }
            let n_goals = phi.len() / 2;
            check_block("phi", phi, &Bounds::goal_placement(n_goals, layout).phi)?;
            let goals: Vec<Vec2> = phi.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect();
            for (i, a) in goals.iter().enumerate() {
                for b in &goals[i + 1..] {
                    if a == b {
                        return Err(ScenarioError::Invalid(format!(
                            "goals coincide at ({}, {})",
                            a.x, a.y
                        )));
                    }
                }
            }
            Ok(Environment {
                goals,
                obstacle: None,
                robot_start: layout.robot_start,
                grasp_tolerance: layout.grasp_tolerance,
            })
        }
        Domain::Obstacle => {
            check_block("phi", phi, &Bounds::obstacle(layout).phi)?;
            let goal = Vec2::new(phi[0], layout.obstacle_goal_y);
            let sphere = Sphere::new(Vec2::new(phi[1], layout.obstacle_y), layout.obstacle_radius)?;
            if sphere.contains(goal) {
                return Err(ScenarioError::Invalid("goal inside obstacle".into()));
            }
            if sphere.contains(layout.robot_start) {
                return Err(ScenarioError::Invalid("robot starts inside obstacle".into()));
            }
            Ok(Environment {
                goals: vec![goal],
                obstacle: Some(sphere),
                robot_start: layout.robot_start,
                grasp_tolerance: layout.grasp_tolerance,
            })
        }
    }
}

/// Gains of the simulated waypoint-following human.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanParams {
    /// Proportional gain in 1/s.
    pub gain: f64,
    pub max_speed: f64,
    pub advance_tolerance: f64,
    /// Also advance once the robot crosses the line through an intermediate
    /// waypoint perpendicular to the undisturbed path.
    pub advance_on_pass: bool,
}

impl Default for HumanParams {
    fn default() -> Self {
        Self {
            gain: 2.0,
            max_speed: 0.2,
            advance_tolerance: 0.01,
            advance_on_pass: true,
        }
    }
}

/// Waypoints the simulated human steers towards, with its progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    /// Disturbed intermediates followed by the human's goal.
    pub waypoints: Vec<Vec2>,
    /// Direction of travel along the undisturbed path at each waypoint.
    pub directions: Vec<Vec2>,
    pub advance_tolerance: f64,
    pub gain: f64,
    pub max_speed: f64,
    pub advance_on_pass: bool,
    current_index: usize,
}

impl WaypointPlan {
    /// Plan through explicit waypoints; directions follow the polyline from
    /// `start`.
    pub fn new(start: Vec2, waypoints: Vec<Vec2>, params: &HumanParams) -> Self {
        let directions = waypoints
            .iter()
            .scan(start, |prev, &w| {
                let d = (w - *prev).unit();
                *prev = w;
                Some(d)
            })
            .collect();
        Self::with_directions(waypoints, directions, params)
    }

    fn with_directions(waypoints: Vec<Vec2>, directions: Vec<Vec2>, params: &HumanParams) -> Self {
        Self {
            waypoints,
            directions,
            advance_tolerance: params.advance_tolerance,
            gain: params.gain,
            max_speed: params.max_speed,
            advance_on_pass: params.advance_on_pass,
            current_index: 0,
        }
    }

    pub fn current_index(&self) -> usize {
        self.current_index
    }

    pub fn is_exhausted(&self) -> bool {
        self.current_index >= self.waypoints.len()
    }

    pub fn current_waypoint(&self) -> Option<Vec2> {
        self.waypoints.get(self.current_index).copied()
    }

    fn reached(&self, index: usize, x: Vec2) -> bool {
        let w = self.waypoints[index];
        if x.distance(w) < self.advance_tolerance {
            return true;
        }
        let is_final = index + 1 == self.waypoints.len();
        self.advance_on_pass && !is_final && (x - w).dot(self.directions[index]) >= 0.0
    }

    /// Velocity command toward the next waypoint, advancing first past any
    /// waypoint the robot has reached.
    pub fn human_command(&mut self, x: Vec2) -> Vec2 {
        while !self.is_exhausted() && self.reached(self.current_index, x) {
            self.current_index += 1;
        }
        match self.current_waypoint() {
            Some(w) => ((w - x) * self.gain).clamp_norm(self.max_speed),
            None => Vec2::ZERO,
        }
    }
}

/// Equidistant waypoints along the shortest collision-free path from the
/// robot start to the human's goal, each intermediate shifted by `theta_i`
/// along x.
pub fn build_waypoint_plan(
    env: &Environment,
    theta: &[f64],
    params: &HumanParams,
) -> Result<WaypointPlan, ScenarioError> {
    let goal = env.human_goal();
    let samples = wrap_path_samples(env.robot_start, goal, env.obstacle, theta.len())?;
    let mut waypoints: Vec<Vec2> = samples
        .iter()
        .zip(theta)
        .map(|(s, &d)| s.point + Vec2::new(d, 0.0))
        .collect();
    let mut directions: Vec<Vec2> = samples.iter().map(|s| s.direction).collect();
    waypoints.push(goal);
    directions.push(
        samples
            .last()
            .map(|s| (goal - s.point).unit())
            .unwrap_or_else(|| (goal - env.robot_start).unit()),
    );
    Ok(WaypointPlan::with_directions(waypoints, directions, params))
}

/// The simulated human driving an episode.
#[derive(Clone, Debug, PartialEq)]
pub enum HumanModel {
    Waypoints(WaypointPlan),
    /// Constant-magnitude input aimed straight at `target`.
    ConstantToward { target: Vec2, speed: f64 },
}

impl HumanModel {
    pub fn command(&mut self, x: Vec2) -> Vec2 {
        match self {
            HumanModel::Waypoints(plan) => plan.human_command(x),
            HumanModel::ConstantToward { target, speed } => (*target - x).unit() * *speed,
        }
    }

    /// Number of waypoints reached so far.
    pub fn progress(&self) -> usize {
        match self {
            HumanModel::Waypoints(plan) => plan.current_index(),
            HumanModel::ConstantToward { .. } => 0,
        }
    }
}
