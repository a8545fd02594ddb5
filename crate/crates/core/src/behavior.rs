//! Behavior characteristics of an evaluated scenario.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scenario::Environment;
use crate::sim::{EpisodeTrace, Termination};

/// Values of the behavior characteristics, in the order of a behavior space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BcVector(pub Vec<f64>);

impl BcVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Distance from the human's goal to the nearest other goal. `None` with a
/// single goal.
pub fn bc_goal_distance(env: &Environment) -> Option<f64> {
    let g_h = env.human_goal();
    env.goals[1..].iter().map(|g| g.distance(g_h)).reduce(f64::min)
}

/// Horizontal offset between goal and obstacle.
pub fn bc_horizontal_distance(env: &Environment) -> Option<f64> {
    env.obstacle.map(|s| (env.human_goal().x - s.center.x).abs())
}

/// Root sum of squares of the waypoint disturbances.
pub fn bc_human_variation(theta: &[f64]) -> f64 {
    theta.iter().map(|d| d * d).sum::<f64>().sqrt()
}

pub fn bc_collision(trace: &EpisodeTrace) -> bool {
    trace.outcome.collided || trace.outcome.termination == Termination::Collision
}

/// Discrete rationality hypotheses and the action set used to normalize the
/// Boltzmann human model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalityGrid {
    pub betas: Vec<f64>,
    pub prior: Vec<f64>,
    pub n_directions: usize,
}

impl Default for RationalityGrid {
    fn default() -> Self {
        Self::uniform(0.0, 1000.0, 101, 24)
    }
}

impl RationalityGrid {
    pub fn uniform(low: f64, high: f64, count: usize, n_directions: usize) -> Self {
        assert!(count >= 2 && high > low);
        let step = (high - low) / (count - 1) as f64;
        Self {
            betas: (0..count).map(|i| low + step * i as f64).collect(),
            prior: vec![1.0 / count as f64; count],
            n_directions,
        }
    }

    /// Fan of directions at the magnitude of `u`, the zero action, and `u`
    /// itself unless it already lies on the fan.
    pub fn candidates(&self, u: Vec2) -> Vec<Vec2> {
        let speed = u.norm();
        let mut out: Vec<Vec2> = (0..self.n_directions)
            .map(|k| Vec2::from_angle(2.0 * PI * k as f64 / self.n_directions as f64) * speed)
            .collect();
        out.push(Vec2::ZERO);
        if !out.iter().any(|c| c.distance(u) <= 1e-12) {
            out.push(u);
        }
        out
    }
}

/// Reward of input `u` from `x` for a human heading to `g`.
pub fn action_quality(u: Vec2, x: Vec2, g: Vec2) -> f64 {
    -u.norm() - (x + u - g).norm()
}

fn log_likelihood(u: Vec2, x: Vec2, g: Vec2, beta: f64, candidates: &[Vec2]) -> f64 {
    let scores: Vec<f64> = candidates.iter().map(|&c| beta * action_quality(c, x, g)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    beta * action_quality(u, x, g) - log_z
}

/// Boltzmann probability of `u` among the grid's candidate actions.
pub fn action_likelihood(u: Vec2, x: Vec2, g: Vec2, beta: f64, grid: &RationalityGrid) -> f64 {
    log_likelihood(u, x, g, beta, &grid.candidates(u)).exp()
}

/// Log posterior over `grid.betas` after the given `(x, u)` observations.
pub fn rationality_log_posterior(observations: &[(Vec2, Vec2)], g: Vec2, grid: &RationalityGrid) -> Vec<f64> {
    let mut log_post: Vec<f64> = grid.prior.iter().map(|p| p.ln()).collect();
    for &(x, u) in observations {
        let candidates = grid.candidates(u);
        for (lp, &beta) in log_post.iter_mut().zip(&grid.betas) {
            *lp += log_likelihood(u, x, g, beta, &candidates);
        }
        let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + log_post.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        for lp in &mut log_post {
            *lp -= log_z;
        }
    }
    log_post
}

/// Observations used for rationality inference: the input at the first step
/// and at every waypoint advance.
pub fn rationality_observations(trace: &EpisodeTrace) -> Vec<(Vec2, Vec2)> {
    let Some(first) = trace.steps.first() else {
        return Vec::new();
    };
    std::iter::once((first.x, first.u_h))
        .chain(trace.waypoint_events.iter().filter_map(|e| {
            trace.steps.get(e.step).map(|s| (s.x, s.u_h))
        }))
        .collect()
}

/// Maximum a posteriori rationality; ties go to the smaller beta.
pub fn bc_rationality(trace: &EpisodeTrace, env: &Environment, grid: &RationalityGrid) -> f64 {
    let obs = rationality_observations(trace);
    let log_post = rationality_log_posterior(&obs, env.human_goal(), grid);
    let mut best = 0;
    for (i, &lp) in log_post.iter().enumerate() {
        if lp > log_post[best] {
            best = i;
        }
    }
    grid.betas[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env(goals: Vec<Vec2>) -> Environment {
        Environment {
            goals,
            obstacle: None,
            robot_start: Vec2::new(0.125, 0.4),
            grasp_tolerance: 0.01,
        }
    }

    #[test]
    fn goal_distance() {
        let e = env(vec![Vec2::new(0.0, 0.0), Vec2::new(0.25, 0.2)]);
        assert_abs_diff_eq!(bc_goal_distance(&e).unwrap(), 0.3202, epsilon = 1e-4);
        let e = env(vec![Vec2::new(0.1, 0.1), Vec2::new(0.1, 0.1)]);
        assert_eq!(bc_goal_distance(&e), Some(0.0));
        let e = env(vec![Vec2::new(0.0, 0.0), Vec2::new(0.2, 0.0), Vec2::new(0.0, 0.1)]);
        assert_abs_diff_eq!(bc_goal_distance(&e).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(bc_goal_distance(&env(vec![Vec2::ZERO])), None);
    }

    #[test]
    fn horizontal_distance() {
        use crate::geometry::Sphere;
        let mk = |gx: f64, ox: f64| Environment {
            goals: vec![Vec2::new(gx, 0.1)],
            obstacle: Some(Sphere::new(Vec2::new(ox, 0.25), 0.05).unwrap()),
            robot_start: Vec2::new(0.125, 0.4),
            grasp_tolerance: 0.01,
        };
        assert_eq!(bc_horizontal_distance(&mk(0.1, 0.1)), Some(0.0));
        assert_eq!(bc_horizontal_distance(&mk(0.0, 0.25)), Some(0.25));
        assert_abs_diff_eq!(bc_horizontal_distance(&mk(0.07, 0.12)).unwrap(), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn human_variation() {
        assert_eq!(bc_human_variation(&[0.0; 5]), 0.0);
        assert_abs_diff_eq!(bc_human_variation(&[0.05; 5]), 0.1118, epsilon = 1e-4);
        assert_abs_diff_eq!(bc_human_variation(&[-0.03, 0.04, 0.0, 0.0, 0.0]), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn zero_rationality_is_uniform() {
        let grid = RationalityGrid::default();
        let u = Vec2::new(0.03, -0.1);
        let k = grid.candidates(u).len();
        assert_eq!(k, 26);
        let p = action_likelihood(u, Vec2::new(0.1, 0.3), Vec2::new(0.1, 0.0), 0.0, &grid);
        assert_abs_diff_eq!(p, 1.0 / k as f64, epsilon = 1e-12);
    }

    #[test]
    fn rational_human_concentrates_on_best_actions() {
        // The zero action always ties with the best input under this quality
        // function, so the limit is 1/2 rather than 1.
        let grid = RationalityGrid::uniform(0.0, 1e6, 2, 24);
        let x = Vec2::new(0.3, 0.3);
        let g = Vec2::new(0.3, 0.0);
        let u = Vec2::new(0.0, -0.1);
        let mut last = 0.0;
        for beta in [0.0, 1.0, 10.0, 100.0, 1000.0, 1e6] {
            let p = action_likelihood(u, x, g, beta, &grid);
            assert!(p >= last);
            last = p;
        }
        assert_abs_diff_eq!(last, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_candidates_share_probability() {
        let grid = RationalityGrid::default();
        let x = Vec2::ZERO;
        let g = Vec2::new(1.0, 0.0);
        let up = Vec2::new(0.0, 0.1);
        let down = Vec2::new(0.0, -0.1);
        let a = action_likelihood(up, x, g, 10.0, &grid);
        let b = action_likelihood(down, x, g, 10.0, &grid);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn no_observations_fall_back_to_smallest_beta() {
        let grid = RationalityGrid::default();
        let post = rationality_log_posterior(&[], Vec2::ZERO, &grid);
        assert!(post.windows(2).all(|w| w[0] == w[1]));
        let trace = EpisodeTrace {
            steps: Vec::new(),
            waypoint_events: Vec::new(),
            outcome: crate::sim::EpisodeOutcome {
                termination: Termination::Timeout,
                elapsed: 10.0,
                collided: false,
            },
            final_position: Vec2::ZERO,
        };
        assert_eq!(bc_rationality(&trace, &env(vec![Vec2::ZERO]), &grid), 0.0);
    }

    #[test]
    fn posterior_is_normalized() {
        let grid = RationalityGrid::default();
        let obs = [
            (Vec2::new(0.1, 0.4), Vec2::new(0.05, -0.1)),
            (Vec2::new(0.12, 0.3), Vec2::new(-0.02, -0.2)),
        ];
        let post = rationality_log_posterior(&obs, Vec2::new(0.1, 0.05), &grid);
        let total: f64 = post.iter().map(|l| l.exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
