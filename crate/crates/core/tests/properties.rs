//! Randomized checks of the module invariants. Each block runs 1000 cases.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sa_scenarios::archive::{Archive, BehaviorSpaceSpec, Elite};
use sa_scenarios::behavior::{
    bc_goal_distance, bc_human_variation, rationality_log_posterior, BcVector, RationalityGrid,
};
use sa_scenarios::geometry::{segment_intersects_sphere, wrap_path_length, wrap_path_waypoints, Sphere, Vec2};
use sa_scenarios::policy::{belief_update, Belief, Controller, CostParams};
use sa_scenarios::runner::{ExperimentConfig, Preset};
use sa_scenarios::scenario::{generate_environment, Bounds, Domain, SceneLayout};
use sa_scenarios::search::{map_elites_propose, resample_into_bounds, MapElitesConfig};
use sa_scenarios::ScenarioParams;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

// Shortest path on a visibility graph over a polygon circumscribed about the
// disc. Every edge stays outside the open disc, so the result is an upper
// bound converging to the true length as the polygon refines.
fn polygon_oracle(x: Vec2, g: Vec2, s: Sphere, sides: usize) -> f64 {
    let rim = s.radius / (std::f64::consts::PI / sides as f64).cos();
    let mut nodes = vec![x, g];
    for k in 0..sides {
        let a = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
        nodes.push(Vec2::new(s.center.x + rim * a.cos(), s.center.y + rim * a.sin()));
    }
    let clear = |p: Vec2, q: Vec2| {
        let d = q - p;
        let len2 = d.dot(d);
        let t = if len2 == 0.0 { 0.0 } else { ((s.center - p).dot(d) / len2).clamp(0.0, 1.0) };
        (p + d * t).distance(s.center) >= s.radius * (1.0 - 1e-9)
    };
    let n = nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&i| !done[i]).min_by(|&a, &b| dist[a].total_cmp(&dist[b])) else {
            break;
        };
        if u == 1 {
            break;
        }
        done[u] = true;
        for v in 0..n {
            if !done[v] && clear(nodes[u], nodes[v]) {
                let alt = dist[u] + nodes[u].distance(nodes[v]);
                if alt < dist[v] {
                    dist[v] = alt;
                }
            }
        }
    }
    dist[1]
}

fn point() -> impl Strategy<Value = Vec2> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn sphere() -> impl Strategy<Value = Sphere> {
    ((-0.3..0.3f64, -0.3..0.3f64), 0.05..0.4f64).prop_map(|((x, y), r)| Sphere::new(Vec2::new(x, y), r).unwrap())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn wrap_length_matches_polygon_oracle(x in point(), g in point(), s in sphere()) {
        prop_assume!(s.clearance(x) > 1e-3 && s.clearance(g) > 1e-3);
        let got = wrap_path_length(x, g, s).unwrap();
        let oracle = polygon_oracle(x, g, s, 256);
        let scale = oracle.max(1e-9);
        prop_assert!((got - oracle).abs() / scale <= 1e-3, "got {got}, oracle {oracle}");
    }

    #[test]
    fn wrap_length_bounds_and_symmetry(x in point(), g in point(), s in sphere()) {
        prop_assume!(s.clearance(x) > 1e-6 && s.clearance(g) > 1e-6);
        let len = wrap_path_length(x, g, s).unwrap();
        let straight = x.distance(g);
        prop_assert!(len >= straight - 1e-12);
        if segment_intersects_sphere(x, g, s) {
            // A blocked segment forces a detour, however small.
            prop_assert!(len > straight);
        } else {
            prop_assert!((len - straight).abs() <= 1e-12);
        }
        let back = wrap_path_length(g, x, s).unwrap();
        prop_assert!((len - back).abs() <= 1e-9);
    }

    #[test]
    fn waypoints_stay_outside_sphere(x in point(), g in point(), s in sphere(), m in 1usize..12) {
        prop_assume!(s.clearance(x) > 1e-6 && s.clearance(g) > 1e-6);
        let pts = wrap_path_waypoints(x, g, Some(s), m).unwrap();
        prop_assert_eq!(pts.len(), m);
        for p in pts {
            prop_assert!(p.distance(s.center) >= s.radius - 1e-9);
        }
    }
}

fn spec() -> BehaviorSpaceSpec {
    BehaviorSpaceSpec::distance_variation()
}

fn elite(bc1: f64, bc2: f64, f: f64, i: usize) -> Elite {
    Elite {
        scenario: ScenarioParams::new(Domain::GoalPlacement, vec![0.0, 0.0, 0.1, 0.1], vec![0.0; 5]),
        f,
        bc: BcVector(vec![bc1, bc2]),
        eval_index: i,
    }
}

fn elites() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    // Slightly past both ends so clamping is exercised.
    prop::collection::vec((-0.01..0.33f64, -0.01..0.12f64, 0.0..10.0f64), 1..200)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn archive_insert_is_monotone(items in elites()) {
        let mut a = Archive::new(spec());
        let n = a.spec().cell_count() as f64;
        let (mut qd, mut cov) = (0.0, 0.0);
        let mut best = vec![f64::NEG_INFINITY; a.spec().cell_count()];
        for (i, &(b1, b2, f)) in items.iter().enumerate() {
            a.try_insert(elite(b1, b2, f, i)).unwrap();
            prop_assert!(a.qd_score() >= qd - 1e-9);
            prop_assert!(a.coverage() >= cov);
            for (cell, e) in a.cells() {
                prop_assert!(e.f >= best[cell]);
                best[cell] = e.f;
            }
            qd = a.qd_score();
            cov = a.coverage();
        }
        let fs: Vec<f64> = a.elites().map(|e| e.f).collect();
        let lo = fs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.qd_score() >= a.coverage() * n * lo - 1e-9);
        prop_assert!(a.qd_score() <= a.coverage() * n * hi + 1e-9);
        prop_assert!((a.qd_score() - a.qd_score_exact()).abs() < 1e-9);
    }

    #[test]
    fn archive_reinsertion_is_idempotent(items in elites()) {
        let mut a = Archive::new(spec());
        for (i, &(b1, b2, f)) in items.iter().enumerate() {
            a.try_insert(elite(b1, b2, f, i)).unwrap();
        }
        let mut fresh = Archive::new(spec());
        for e in a.elites() {
            fresh.try_insert(e.clone()).unwrap();
        }
        prop_assert!(fresh == a);
        let before = a.clone();
        for e in before.elites() {
            a.try_insert(e.clone()).unwrap();
        }
        prop_assert!(a == before);
    }
}

fn layout() -> SceneLayout {
    SceneLayout::default()
}

fn goal() -> impl Strategy<Value = (f64, f64)> {
    (0.0..=0.25f64, 0.0..=0.2f64)
}

fn disturbances() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.05..=0.05f64, 5)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn belief_stays_normalized(
        goals in prop::collection::vec(goal(), 2..5),
        weights in prop::collection::vec(0.01..1.0f64, 4),
        steps in prop::collection::vec(((-0.2..0.45f64, -0.2..0.45f64), (-0.3..0.3f64, -0.3..0.3f64)), 1..40),
        linear in any::<bool>(),
    ) {
        let phi: Vec<f64> = goals.iter().flat_map(|&(x, y)| [x, y]).collect();
        let env = match generate_environment(&phi, Domain::GoalPlacement, &layout()) {
            Ok(env) => env,
            Err(_) => return Ok(()),
        };
        let cp = CostParams { linear_term_enabled: linear, ..CostParams::default() };
        let mut b = Belief::from_weights(weights[..goals.len()].to_vec()).unwrap();
        for ((x, y), (ux, uy)) in steps {
            b = belief_update(&b, Vec2::new(x, y), Vec2::new(ux, uy), 0.02, &env, &cp).unwrap();
            let p = b.probs();
            prop_assert!(p.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn belief_invariant_to_cost_scale(
        g1 in goal(), g2 in goal(),
        k in 0.1..10.0f64,
        steps in prop::collection::vec(((-0.1..0.4f64, -0.1..0.45f64), (-0.2..0.2f64, -0.2..0.2f64)), 1..30),
    ) {
        let env = match generate_environment(&[g1.0, g1.1, g2.0, g2.1], Domain::GoalPlacement, &layout()) {
            Ok(env) => env,
            Err(_) => return Ok(()),
        };
        let cp = CostParams::default();
        let scaled = CostParams { far_rate: cp.far_rate * k, obs_sharpness: cp.obs_sharpness / k, ..cp.clone() };
        let (mut a, mut b) = (Belief::uniform(2), Belief::uniform(2));
        for ((x, y), (ux, uy)) in steps {
            let (x, u) = (Vec2::new(x, y), Vec2::new(ux, uy));
            a = belief_update(&a, x, u, 0.02, &env, &cp).unwrap();
            b = belief_update(&b, x, u, 0.02, &env, &scaled).unwrap();
            for (p, q) in a.probs().iter().zip(b.probs()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn human_variation_formula(theta in disturbances(), rot in 0usize..5, signs in prop::collection::vec(any::<bool>(), 5)) {
        let direct = (theta[0].powi(2) + theta[1].powi(2) + theta[2].powi(2) + theta[3].powi(2) + theta[4].powi(2)).sqrt();
        prop_assert!((bc_human_variation(&theta) - direct).abs() < 1e-15);
        let mut other = theta.clone();
        other.rotate_left(rot);
        for (v, flip) in other.iter_mut().zip(&signs) {
            if *flip {
                *v = -*v;
            }
        }
        prop_assert!((bc_human_variation(&other) - direct).abs() < 1e-15);
        prop_assert!(direct <= (5.0f64).sqrt() * 0.05 + 1e-15);
    }

    #[test]
    fn goal_distance_formula(goals in prop::collection::vec(goal(), 2..4)) {
        let phi: Vec<f64> = goals.iter().flat_map(|&(x, y)| [x, y]).collect();
        let Ok(env) = generate_environment(&phi, Domain::GoalPlacement, &layout()) else {
            return Ok(());
        };
        let (hx, hy) = goals[0];
        let nearest = goals[1..]
            .iter()
            .map(|&(x, y)| ((x - hx).powi(2) + (y - hy).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        let bc1 = bc_goal_distance(&env).unwrap();
        prop_assert!((bc1 - nearest).abs() < 1e-15);
        prop_assert!(bc1 <= (0.25f64.powi(2) + 0.2f64.powi(2)).sqrt() + 1e-12);
    }

    #[test]
    fn rationality_posterior_normalized(
        obs in prop::collection::vec(((0.0..0.25f64, 0.0..0.4f64), (-0.2..0.2f64, -0.2..0.2f64)), 1..8),
        g in goal(),
    ) {
        let grid = RationalityGrid::uniform(0.0, 1000.0, 21, 24);
        let obs: Vec<(Vec2, Vec2)> = obs.into_iter().map(|((x, y), (ux, uy))| (Vec2::new(x, y), Vec2::new(ux, uy))).collect();
        // Normalization must hold after every prefix, i.e. after each update.
        for k in 1..=obs.len() {
            let lp = rationality_log_posterior(&obs[..k], Vec2::new(g.0, g.1), &grid);
            let total: f64 = lp.iter().map(|l| l.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn variation_and_distance_ignore_the_controller(g1 in goal(), g2 in goal(), theta in disturbances()) {
        let sp = ScenarioParams::new(Domain::GoalPlacement, vec![g1.0, g1.1, g2.0, g2.1], theta);
        let mut cfg = ExperimentConfig::for_preset(Preset::DistanceVariation);
        let hindsight = cfg.evaluator();
        cfg.controller = Controller::Blend;
        let blend = cfg.evaluator();
        let a = hindsight.evaluate_with_trace(&sp).unwrap();
        let b = blend.evaluate_with_trace(&sp).unwrap();
        match (a, b) {
            (Some((a, _)), Some((b, _))) => prop_assert_eq!(a.bc, b.bc),
            (None, None) => {}
            _ => prop_assert!(false, "validity differs between controllers"),
        }
    }
}

fn bounds() -> Bounds {
    Bounds::goal_placement(2, &layout())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn resampling_respects_bounds(
        raw in prop::collection::vec((prop::bool::weighted(0.2), prop::collection::vec(0.0..=1.0f64, 9), 0usize..9, -1.0..1.0f64), 1..20),
        max_tries in 1usize..30,
    ) {
        let b = bounds();
        let ranges: Vec<(f64, f64)> = b.ranges().collect();
        // Inside draws map the unit cube onto the box; outside draws push
        // one coordinate past an edge.
        let draws: Vec<Vec<f64>> = raw
            .iter()
            .map(|(inside, u, bad, off)| {
                let mut v: Vec<f64> = ranges.iter().zip(u).map(|(&(lo, hi), t)| lo + t * (hi - lo)).collect();
                if !inside {
                    let (lo, hi) = ranges[*bad];
                    v[*bad] = if *off >= 0.0 { hi + 1e-6 + off } else { lo - 1e-6 + off };
                }
                v
            })
            .collect();
        let mut it = draws.iter().cycle();
        let mut calls = 0;
        let p = resample_into_bounds(|| { calls += 1; it.next().unwrap().clone() }, &b, max_tries);
        prop_assert!(b.contains(&p.scenario));
        let first_inside = draws.iter().cycle().take(max_tries).position(|d| b.contains_vec(d));
        match first_inside {
            Some(k) => {
                prop_assert!(!p.clamped);
                prop_assert_eq!(calls, k + 1);
                prop_assert_eq!(p.scenario.to_vec(), draws[k % draws.len()].clone());
            }
            None => {
                prop_assert!(p.clamped);
                prop_assert_eq!(calls, max_tries);
            }
        }
    }

    #[test]
    fn map_elites_proposals_in_bounds(
        phi in prop::collection::vec(0.0..=1.0f64, 4),
        theta in prop::collection::vec(-1.0..=1.0f64, 5),
        seed in any::<u64>(),
    ) {
        let b = bounds();
        let mut vals: Vec<f64> = b.phi.iter().zip(&phi).map(|(&(lo, hi), t)| lo + t * (hi - lo)).collect();
        vals.extend(theta.iter().map(|t| 0.05 * t));
        let sp = ScenarioParams::from_vec(Domain::GoalPlacement, 4, &vals);
        let mut a = Archive::new(spec());
        a.try_insert(Elite { scenario: sp, f: 1.0, bc: BcVector(vec![0.1, 0.05]), eval_index: 0 }).unwrap();
        let cfg = MapElitesConfig { sigma_phi: 0.2, sigma_theta: 0.1, ..MapElitesConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let p = map_elites_propose(&a, &cfg, &mut rng, &b);
            prop_assert!(b.contains(&p.scenario));
        }
    }
}

#[test]
fn map_elites_perturbation_statistics() {
    // Parent far from every bound: truncation is negligible, so each
    // coordinate should be N(parent, sigma^2).
    let b = bounds();
    let parent = vec![0.125, 0.1, 0.05, 0.15, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut a = Archive::new(spec());
    a.try_insert(Elite {
        scenario: ScenarioParams::from_vec(Domain::GoalPlacement, 4, &parent),
        f: 1.0,
        bc: BcVector(vec![0.1, 0.05]),
        eval_index: 0,
    })
    .unwrap();
    let cfg = MapElitesConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let mut sums = vec![0.0; parent.len()];
    let mut squares = vec![0.0; parent.len()];
    for _ in 0..n {
        let p = map_elites_propose(&a, &cfg, &mut rng, &b);
        assert!(!p.clamped);
        for (i, v) in p.scenario.to_vec().into_iter().enumerate() {
            sums[i] += v - parent[i];
            squares[i] += (v - parent[i]).powi(2);
        }
    }
    for i in 0..parent.len() {
        let sigma = if i < 4 { cfg.sigma_phi } else { cfg.sigma_theta };
        let mean = sums[i] / n as f64;
        let std = (squares[i] / n as f64 - mean * mean).sqrt();
        // Standard error of the mean is sigma/100; of the std about sigma/141.
        assert!(mean.abs() < 4.0 * sigma / 100.0, "dim {i}: mean offset {mean}");
        assert!((std / sigma - 1.0).abs() < 0.04, "dim {i}: std {std} vs {sigma}");
    }
}
