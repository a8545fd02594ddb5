//! The shared-autonomy controllers under test.
//!
//! Both controllers infer the human's goal from their inputs with a
//! Boltzmann observation model over a per-goal cost-to-go. Hindsight
//! optimization adds an autonomous action toward the belief-weighted goal to
//! the user's command; linear blending mixes the two with a
//! confidence-dependent weight.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::geometry::{path_length, Sphere, Vec2};
use crate::scenario::Environment;

/// Finite-difference step for [`value_gradient`], in meters.
pub const GRADIENT_STEP: f64 = 1e-4;

/// Probability distribution over the candidate goals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "belief needs at least one goal");
        Belief(vec![1.0 / n as f64; n])
    }

    /// Normalizes non-negative weights; `None` if they do not sum to a
    /// positive finite value.
    pub fn from_weights(weights: Vec<f64>) -> Option<Self> {
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return None;
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        Some(Belief(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Goal cost model: a constant per-meter rate far from the goal that falls
/// off linearly inside `linear_threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Cost per meter far from the goal.
    pub far_rate: f64,
    /// Distance below which the cost rate decays linearly to zero.
    pub linear_threshold: f64,
    /// Sharpness of the observation model, per unit cost.
    pub obs_sharpness: f64,
    pub auto_speed: f64,
    pub robot_max_speed: f64,
    pub linear_term_enabled: bool,
    /// Speed at which one observation step is charged its per-step cost.
    pub reference_speed: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            far_rate: 1.0,
            linear_threshold: 0.05,
            obs_sharpness: 50.0,
            auto_speed: 0.1,
            robot_max_speed: 0.2,
            linear_term_enabled: true,
            reference_speed: 0.2,
        }
    }
}

impl CostParams {
    /// Cost-to-go as a function of path length `d`.
    pub fn value_of_length(&self, d: f64) -> f64 {
        let c = self.far_rate;
        let delta = self.linear_threshold;
        if !self.linear_term_enabled {
            c * d
        } else if d <= delta {
            c * d * d / (2.0 * delta)
        } else {
            c * (d - delta) + c * delta / 2.0
        }
    }

    /// Cost per meter travelled at path length `d` (derivative of the value).
    pub fn rate_at_length(&self, d: f64) -> f64 {
        if self.linear_term_enabled && d < self.linear_threshold {
            self.far_rate * d / self.linear_threshold
        } else {
            self.far_rate
        }
    }
}

/// Timid linear blending: `alpha` ramps from 0 to `alpha_max` between the
/// two confidence levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendParams {
    pub conf_low: f64,
    pub conf_high: f64,
    pub alpha_max: f64,
}

impl Default for BlendParams {
    fn default() -> Self {
        Self {
            conf_low: 0.4,
            conf_high: 0.8,
            alpha_max: 0.6,
        }
    }
}

/// Potential-field push away from the obstacle near its surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepulsionParams {
    /// Distance from the surface inside which the push applies.
    pub margin: f64,
    pub speed: f64,
    /// Hindsight optimization drops the part of the user's command that
    /// points into the obstacle inside the margin.
    pub hindsight_filters_input: bool,
}

impl Default for RepulsionParams {
    fn default() -> Self {
        Self {
            margin: 0.01,
            speed: 0.05,
            hindsight_filters_input: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    Hindsight,
    Blend,
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Controller::Hindsight => "hindsight",
            Controller::Blend => "blend",
        })
    }
}

impl FromStr for Controller {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hindsight" => Ok(Controller::Hindsight),
            "blend" => Ok(Controller::Blend),
            other => Err(format!("unknown controller `{other}` (expected hindsight|blend)")),
        }
    }
}

fn outside(x: Vec2, obs: Option<Sphere>) -> Vec2 {
    obs.map_or(x, |s| s.project_outside(x))
}

pub fn value_to_go(x: Vec2, g: Vec2, cp: &CostParams, obs: Option<Sphere>) -> Result<f64, GeometryError> {
    Ok(cp.value_of_length(path_length(x, g, obs)?))
}

/// Central finite-difference gradient of [`value_to_go`]. Sample points that
/// fall inside the obstacle are projected onto its surface.
pub fn value_gradient(x: Vec2, g: Vec2, cp: &CostParams, obs: Option<Sphere>) -> Result<Vec2, GeometryError> {
    value_gradient_with_step(x, g, cp, obs, GRADIENT_STEP)
}

pub fn value_gradient_with_step(
    x: Vec2,
    g: Vec2,
    cp: &CostParams,
    obs: Option<Sphere>,
    h: f64,
) -> Result<Vec2, GeometryError> {
    let v = |p: Vec2| value_to_go(outside(p, obs), g, cp, obs);
    let dx = (v(x + Vec2::new(h, 0.0))? - v(x - Vec2::new(h, 0.0))?) / (2.0 * h);
    let dy = (v(x + Vec2::new(0.0, h))? - v(x - Vec2::new(0.0, h))?) / (2.0 * h);
    Ok(Vec2::new(dx, dy))
}

/// Cost charged for one observation step of length `dt` near `x`.
pub fn step_cost(x: Vec2, g: Vec2, dt: f64, cp: &CostParams, obs: Option<Sphere>) -> Result<f64, GeometryError> {
    let d = path_length(outside(x, obs), g, obs)?;
    Ok(cp.rate_at_length(d) * cp.reference_speed * dt)
}

/// Bayesian goal update from one human input.
///
/// Each goal's likelihood is `exp(eta * (V(x) - V(x + u dt) - c(x)))`: the
/// progress the input makes toward the goal minus the step cost the goal
/// charges at the current position. A zero input carries no information.
pub fn belief_update(
    b: &Belief,
    x: Vec2,
    u_h: Vec2,
    dt: f64,
    env: &Environment,
    cp: &CostParams,
) -> Result<Belief, GeometryError> {
    if u_h.norm() == 0.0 {
        return Ok(b.clone());
    }
    let obs = env.obstacle;
    let here = outside(x, obs);
    let next = outside(x + u_h * dt, obs);
    let mut log_post = Vec::with_capacity(b.len());
    for (&p, &g) in b.probs().iter().zip(&env.goals) {
        let advantage = value_to_go(here, g, cp, obs)? - value_to_go(next, g, cp, obs)? - step_cost(here, g, dt, cp, obs)?;
        log_post.push(p.ln() + cp.obs_sharpness * advantage);
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Ok(b.clone());
    }
    let weights = log_post.iter().map(|l| (l - max).exp()).collect();
    Ok(Belief::from_weights(weights).unwrap_or_else(|| b.clone()))
}

/// Highest goal probability; 1.0 with a single goal.
pub fn confidence(b: &Belief) -> f64 {
    b.probs().iter().copied().fold(0.0, f64::max)
}

pub fn arbitration_alpha(conf: f64, bp: &BlendParams) -> f64 {
    if conf <= bp.conf_low {
        0.0
    } else if conf >= bp.conf_high {
        bp.alpha_max
    } else {
        bp.alpha_max * (conf - bp.conf_low) / (bp.conf_high - bp.conf_low)
    }
}

/// Autonomous velocity down the belief-weighted cost-to-go.
pub fn autonomous_action(b: &Belief, x: Vec2, env: &Environment, cp: &CostParams) -> Result<Vec2, GeometryError> {
    let mut grad = Vec2::ZERO;
    for (&p, &g) in b.probs().iter().zip(&env.goals) {
        if p > 0.0 {
            grad += value_gradient(x, g, cp, env.obstacle)? * p;
        }
    }
    if grad.norm() < 1e-9 {
        return Ok(Vec2::ZERO);
    }
    Ok(-grad.unit() * cp.auto_speed)
}

/// Outward push when `x` is within the margin of the obstacle surface.
pub fn repulsion(x: Vec2, obs: Option<Sphere>, rp: &RepulsionParams) -> Vec2 {
    match obs {
        Some(s) if s.clearance(x) < rp.margin => {
            let out = (x - s.center).unit();
            let out = if out == Vec2::ZERO { Vec2::new(0.0, 1.0) } else { out };
            out * rp.speed
        }
        _ => Vec2::ZERO,
    }
}

fn drop_inward(u: Vec2, x: Vec2, obs: Option<Sphere>, rp: &RepulsionParams) -> Vec2 {
    match obs {
        Some(s) if s.clearance(x) < rp.margin => {
            let out = (x - s.center).unit();
            let radial = u.dot(out);
            if radial < 0.0 {
                u - out * radial
            } else {
                u
            }
        }
        _ => u,
    }
}

/// Hindsight optimization: `u_R = u_R^A + u_R^u`, the autonomous action plus
/// the user's command, saturated at the robot's speed limit.
pub fn hindsight_action(
    b: &Belief,
    x: Vec2,
    u_h: Vec2,
    env: &Environment,
    cp: &CostParams,
    rp: &RepulsionParams,
) -> Result<Vec2, GeometryError> {
    let u_auto = autonomous_action(b, x, env, cp)?;
    let u_user = if rp.hindsight_filters_input {
        drop_inward(u_h, x, env.obstacle, rp)
    } else {
        u_h
    };
    Ok((u_auto + u_user + repulsion(x, env.obstacle, rp)).clamp_norm(cp.robot_max_speed))
}

/// Linear blending: `alpha * u_robot + (1 - alpha) * u_H`.
pub fn blend_action(
    b: &Belief,
    x: Vec2,
    u_h: Vec2,
    env: &Environment,
    cp: &CostParams,
    bp: &BlendParams,
    rp: &RepulsionParams,
) -> Result<Vec2, GeometryError> {
    let u_robot = autonomous_action(b, x, env, cp)?;
    let alpha = arbitration_alpha(confidence(b), bp);
    let mixed = u_robot * alpha + u_h * (1.0 - alpha);
    Ok((mixed + repulsion(x, env.obstacle, rp)).clamp_norm(cp.robot_max_speed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env(goals: Vec<Vec2>, obstacle: Option<Sphere>) -> Environment {
        Environment {
            goals,
            obstacle,
            robot_start: Vec2::new(0.125, 0.4),
            grasp_tolerance: 0.01,
        }
    }

    #[test]
    fn value_is_continuous_at_threshold() {
        let cp = CostParams::default();
        let d = cp.linear_threshold;
        let below = cp.far_rate * d * d / (2.0 * d);
        let above = cp.far_rate * (d - d) + cp.far_rate * d / 2.0;
        assert_abs_diff_eq!(cp.value_of_length(d), below, epsilon = 1e-15);
        assert_abs_diff_eq!(below, above, epsilon = 1e-15);
        assert_eq!(cp.value_of_length(0.0), 0.0);
    }

    #[test]
    fn value_beyond_threshold() {
        let cp = CostParams::default();
        let v = value_to_go(Vec2::ZERO, Vec2::new(0.25, 0.0), &cp, None).unwrap();
        assert_abs_diff_eq!(v, 0.225, epsilon = 1e-12);
    }

    #[test]
    fn value_without_linear_term_is_scaled_length() {
        let cp = CostParams {
            linear_term_enabled: false,
            far_rate: 1.7,
            ..CostParams::default()
        };
        let s = Sphere::new(Vec2::new(1.0, 0.0), 0.5).unwrap();
        let x = Vec2::ZERO;
        let g = Vec2::new(2.0, 0.0);
        let v = value_to_go(x, g, &cp, Some(s)).unwrap();
        assert_eq!(v, 1.7 * crate::geometry::wrap_path_length(x, g, s).unwrap());
    }

    #[test]
    fn gradient_far_from_goal_is_scaled_unit() {
        let cp = CostParams::default();
        let x = Vec2::new(0.3, 0.1);
        let g = Vec2::new(0.0, -0.1);
        let grad = value_gradient(x, g, &cp, None).unwrap();
        let expected = (x - g).unit() * cp.far_rate;
        assert_abs_diff_eq!(grad.x, expected.x, epsilon = 1e-3);
        assert_abs_diff_eq!(grad.y, expected.y, epsilon = 1e-3);
        let at_goal = value_gradient(g, g, &cp, None).unwrap();
        assert!(at_goal.norm() < 1e-12);
    }

    #[test]
    fn symmetric_goals_keep_belief_even() {
        let cp = CostParams::default();
        let e = env(vec![Vec2::new(0.05, 0.0), Vec2::new(0.20, 0.0)], None);
        let mut b = Belief::uniform(2);
        let mut x = Vec2::new(0.125, 0.4);
        for _ in 0..100 {
            let u = Vec2::new(0.0, -0.15);
            b = belief_update(&b, x, u, 0.02, &e, &cp).unwrap();
            x += u * 0.02;
        }
        assert_abs_diff_eq!(b.probs()[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn pointing_at_a_goal_raises_its_probability() {
        let cp = CostParams::default();
        let e = env(vec![Vec2::new(0.02, 0.05), Vec2::new(0.23, 0.05)], None);
        let mut b = Belief::uniform(2);
        let mut x = Vec2::new(0.125, 0.4);
        let mut last = b.probs()[0];
        for _ in 0..60 {
            let u = (e.goals[0] - x).unit() * 0.15;
            b = belief_update(&b, x, u, 0.02, &e, &cp).unwrap();
            x += u * 0.02;
            assert!(b.probs()[0] >= last);
            last = b.probs()[0];
        }
        assert!(last > 0.9, "{last}");
    }

    #[test]
    fn zero_input_leaves_belief_unchanged() {
        let cp = CostParams::default();
        let e = env(vec![Vec2::new(0.02, 0.05), Vec2::new(0.23, 0.05)], None);
        let b = Belief::from_weights(vec![0.3, 0.7]).unwrap();
        let out = belief_update(&b, Vec2::new(0.1, 0.3), Vec2::ZERO, 0.02, &e, &cp).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn confidence_and_alpha() {
        let bp = BlendParams::default();
        assert_eq!(confidence(&Belief::uniform(1)), 1.0);
        assert_eq!(confidence(&Belief::uniform(2)), 0.5);
        assert_eq!(confidence(&Belief::from_weights(vec![0.2, 0.3, 0.5]).unwrap()), 0.5);
        assert_eq!(arbitration_alpha(1.0, &bp), 0.6);
        assert_eq!(arbitration_alpha(0.4, &bp), 0.0);
        assert_abs_diff_eq!(arbitration_alpha(0.6, &bp), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn certain_belief_without_input_moves_toward_goal() {
        let cp = CostParams::default();
        let rp = RepulsionParams::default();
        let e = env(vec![Vec2::new(0.1, 0.05), Vec2::new(0.2, 0.1)], None);
        let b = Belief::from_weights(vec![1.0, 0.0]).unwrap();
        let x = Vec2::new(0.125, 0.4);
        let u = hindsight_action(&b, x, Vec2::ZERO, &e, &cp, &rp).unwrap();
        let expected = (e.goals[0] - x).unit() * cp.auto_speed;
        assert_abs_diff_eq!(u.x, expected.x, epsilon = 1e-6);
        assert_abs_diff_eq!(u.y, expected.y, epsilon = 1e-6);
    }

    #[test]
    fn opposing_input_of_equal_magnitude_cancels() {
        let cp = CostParams::default();
        let rp = RepulsionParams::default();
        let e = env(vec![Vec2::new(0.125, 0.15), Vec2::new(0.125, 0.05)], None);
        let b = Belief::from_weights(vec![1.0, 0.0]).unwrap();
        let x = Vec2::new(0.125, 0.30);
        let u_auto = autonomous_action(&b, x, &e, &cp).unwrap();
        let u = hindsight_action(&b, x, -u_auto, &e, &cp, &rp).unwrap();
        assert!(u.norm() < 1e-12);
    }

    #[test]
    fn max_input_overpowers_autonomy() {
        let cp = CostParams::default();
        let rp = RepulsionParams::default();
        let near = Vec2::new(0.125, 0.15);
        let far = Vec2::new(0.125, 0.05);
        let e = env(vec![far, near], None);
        let b = Belief::from_weights(vec![0.0, 1.0]).unwrap();
        let x = Vec2::new(0.125, 0.14);
        let u_h = (far - x).unit() * cp.robot_max_speed;
        let u = hindsight_action(&b, x, u_h, &e, &cp, &rp).unwrap();
        assert!(u.dot((far - x).unit()) > 0.0);
    }

    #[test]
    fn low_confidence_blend_is_teleoperation() {
        let cp = CostParams::default();
        let bp = BlendParams::default();
        let rp = RepulsionParams::default();
        let e = env(vec![Vec2::new(0.0, 0.0), Vec2::new(0.1, 0.0), Vec2::new(0.2, 0.0)], None);
        let b = Belief::uniform(3);
        let u_h = Vec2::new(0.3, -0.1);
        let u = blend_action(&b, Vec2::new(0.1, 0.3), u_h, &e, &cp, &bp, &rp).unwrap();
        assert_eq!(u, u_h.clamp_norm(cp.robot_max_speed));
    }

    #[test]
    fn blend_with_agreeing_inputs_returns_input() {
        let cp = CostParams::default();
        let bp = BlendParams::default();
        let rp = RepulsionParams::default();
        let e = env(vec![Vec2::new(0.1, 0.05)], None);
        let b = Belief::uniform(1);
        let x = Vec2::new(0.125, 0.4);
        let u_h = autonomous_action(&b, x, &e, &cp).unwrap();
        let u = blend_action(&b, x, u_h, &e, &cp, &bp, &rp).unwrap();
        assert_abs_diff_eq!(u.x, u_h.x, epsilon = 1e-15);
        assert_abs_diff_eq!(u.y, u_h.y, epsilon = 1e-15);
    }

    #[test]
    fn blending_opposite_sides_heads_into_obstacle() {
        // Robot wants to pass on the left, human on the right.
        let cp = CostParams::default();
        let bp = BlendParams::default();
        let rp = RepulsionParams::default();
        let s = Sphere::new(Vec2::new(0.125, 0.25), 0.05).unwrap();
        let e = env(vec![Vec2::new(0.12, 0.10)], Some(s));
        let b = Belief::uniform(1);
        let x = Vec2::new(0.12, 0.34);
        let u_robot = autonomous_action(&b, x, &e, &cp).unwrap();
        let u_h = Vec2::new(0.2, -0.1).unit() * 0.1;
        assert!(u_robot.x < 0.0 && u_h.x > 0.0);
        let u = blend_action(&b, x, u_h, &e, &cp, &bp, &rp).unwrap();
        // Blended direction passes between the two and points at the sphere.
        let to_center = (s.center - x).unit();
        assert!(u.unit().dot(to_center) > u_robot.unit().dot(to_center));
        assert!(u.unit().dot(to_center) > u_h.unit().dot(to_center));
        assert!(crate::geometry::segment_intersects_sphere(x, x + u.unit() * 0.2, s));
    }
}
