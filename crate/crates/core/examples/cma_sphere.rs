//! CMA-ES on a shifted 10-D sphere, then a forced stagnation to show the
//! population doubling on restart.
//!
//! cargo run --release --example cma_sphere

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sa_scenarios::search::cma::{CmaConfig, CmaState, RestartDecision};

const DIM: usize = 10;

fn main() {
    let optimum: Vec<f64> = (0..DIM).map(|i| 0.1 * i as f64 - 0.4).collect();
    // The strategy maximizes, so hand it the negated sphere.
    let f = |x: &[f64]| -x.iter().zip(&optimum).map(|(a, b)| (a - b).powi(2)).sum::<f64>();

    let config = CmaConfig {
        sigma: 0.3,
        ..CmaConfig::default()
    };
    let mut cma = CmaState::new(vec![0.0; DIM], vec![1.0; DIM], config);
    let bounds = vec![(-5.0, 5.0); DIM];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut evaluations = 0;
    let distance = |cma: &CmaState| {
        cma.mean.iter().zip(&optimum).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    while evaluations < 5000 && distance(&cma) >= 1e-6 {
        let evaluated: Vec<(Vec<f64>, f64)> = cma
            .sample(&mut rng, &bounds)
            .into_iter()
            .map(|(x, _)| {
                let v = f(&x);
                (x, v)
            })
            .collect();
        evaluations += evaluated.len();
        cma.update(&evaluated);
        if cma.generation.is_multiple_of(25) {
            println!("gen {:4}  evals {:5}  sigma {:.2e}  |mean - x*| {:.2e}", cma.generation, evaluations, cma.sigma, distance(&cma));
        }
    }
    println!("converged to {:.2e} after {evaluations} evaluations", distance(&cma));

    // A flat objective never improves, so the stagnation rule fires.
    let mut flat = CmaState::new(vec![0.0; DIM], vec![1.0; DIM], CmaConfig::default());
    let lambda0 = flat.lambda;
    while flat.restart_check() == RestartDecision::Continue {
        let evaluated: Vec<(Vec<f64>, f64)> = flat.sample(&mut rng, &bounds).into_iter().map(|(x, _)| (x, 0.0)).collect();
        flat.update(&evaluated);
    }
    flat.restart(vec![0.0; DIM]);
    println!("stagnated after {} generations; lambda {} -> {}", flat.generation, lambda0, flat.lambda);
}
