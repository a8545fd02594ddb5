//! CMA-ES with rank-mu/rank-one covariance updates, cumulative step-size
//! adaptation and population-doubling restarts.
//!
//! The strategy maximizes. Candidates are drawn inside a box by redrawing the
//! whole vector until it lands inside (clamping after `max_tries`).

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::resample_vec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaConfig {
    pub lambda: usize,
    /// Parents; defaults to `lambda / 2`.
    pub mu: Option<usize>,
    pub sigma: f64,
    /// Generations without improving the best value before restarting.
    pub stagnation_generations: usize,
    /// Restart once `sigma * sqrt(max eigenvalue)` drops below this.
    pub tol_x: f64,
    pub max_tries: usize,
}

impl Default for CmaConfig {
    fn default() -> Self {
        Self {
            lambda: 12,
            mu: None,
            sigma: 0.05,
            stagnation_generations: 50,
            tol_x: 1e-12,
            max_tries: 100,
        }
    }
}

/// Diagonal of the initial covariance for `n_goal_coords` object coordinates
/// followed by `n_disturbances` waypoint disturbances.
pub fn scenario_initial_diagonal(n_goal_coords: usize, n_disturbances: usize) -> Vec<f64> {
    std::iter::repeat_n(1.0, n_goal_coords)
        .chain(std::iter::repeat_n(0.5, n_disturbances))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RestartDecision {
    Continue,
    Restart,
}

#[derive(Clone, Debug)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_c: DVector<f64>,
    pub p_sigma: DVector<f64>,
    pub lambda: usize,
    pub generation: usize,
    pub restarts: usize,
    pub best_ever: f64,
    /// Best value since the last restart and the generation it was found.
    best_since_restart: f64,
    last_improvement: usize,
    generations_since_restart: usize,
    init_sigma: f64,
    init_diag: Vec<f64>,
    config: CmaConfig,
    // Derived from `cov`.
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    weights: Vec<f64>,
    mu_eff: f64,
    c_c: f64,
    c_s: f64,
    c_1: f64,
    c_mu: f64,
    damps: f64,
    chi_n: f64,
}

impl CmaState {
    pub fn new(mean: Vec<f64>, init_diag: Vec<f64>, config: CmaConfig) -> Self {
        assert_eq!(mean.len(), init_diag.len());
        assert!(config.lambda >= 4, "lambda must be at least 4");
        let n = mean.len();
        let mut state = Self {
            mean: DVector::from_vec(mean),
            sigma: config.sigma,
            cov: DMatrix::from_diagonal(&DVector::from_vec(init_diag.clone())),
            p_c: DVector::zeros(n),
            p_sigma: DVector::zeros(n),
            lambda: config.lambda,
            generation: 0,
            restarts: 0,
            best_ever: f64::NEG_INFINITY,
            best_since_restart: f64::NEG_INFINITY,
            last_improvement: 0,
            generations_since_restart: 0,
            init_sigma: config.sigma,
            init_diag,
            config,
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            weights: Vec::new(),
            mu_eff: 0.0,
            c_c: 0.0,
            c_s: 0.0,
            c_1: 0.0,
            c_mu: 0.0,
            damps: 0.0,
            chi_n: 0.0,
        };
        state.set_strategy_parameters();
        state.decompose();
        state
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mu(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn config(&self) -> &CmaConfig {
        &self.config
    }

    fn set_strategy_parameters(&mut self) {
        let n = self.dim() as f64;
        let mu = self.config.mu.filter(|_| self.restarts == 0).unwrap_or(self.lambda / 2).max(1);
        let raw: Vec<f64> = (1..=mu).map(|i| ((mu as f64) + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        self.weights = raw.iter().map(|w| w / total).collect();
        self.mu_eff = 1.0 / self.weights.iter().map(|w| w * w).sum::<f64>();
        let mu_eff = self.mu_eff;
        self.c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        self.c_s = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        self.c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        self.c_mu = (1.0 - self.c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        self.damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + self.c_s;
        self.chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
    }

    fn reset_covariance(&mut self) {
        let n = self.dim();
        self.cov = DMatrix::from_diagonal(&DVector::from_vec(self.init_diag.clone()));
        self.p_c = DVector::zeros(n);
        self.p_sigma = DVector::zeros(n);
    }

    /// Eigendecomposition of the covariance; resets it to the initial
    /// diagonal if it is no longer positive definite.
    fn decompose(&mut self) {
        let n = self.dim();
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let ok = eig.eigenvalues.iter().all(|&v| v.is_finite() && v > 0.0)
            && eig.eigenvectors.iter().all(|v| v.is_finite());
        if !ok {
            warn!("covariance lost positive definiteness; resetting to the initial diagonal");
            self.reset_covariance();
            self.basis = DMatrix::identity(n, n);
            self.scales = DVector::from_vec(self.init_diag.iter().map(|d| d.sqrt()).collect());
            return;
        }
        self.cov = sym;
        self.scales = eig.eigenvalues.map(f64::sqrt);
        self.basis = eig.eigenvectors;
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.scales.map(|s| s * s)
    }

    /// One unconstrained draw from the search distribution.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &self.basis * z.component_mul(&self.scales);
        (&self.mean + y * self.sigma).iter().copied().collect()
    }

    /// `lambda` candidates `mean + sigma * C^{1/2} z`, each redrawn until it
    /// lies inside `bounds`. The flag reports candidates that had to be
    /// clamped.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, bounds: &[(f64, f64)]) -> Vec<(Vec<f64>, bool)> {
        (0..self.lambda)
            .map(|_| resample_vec(|| self.sample_one(rng), bounds, self.config.max_tries))
            .collect()
    }

    /// One generation of the maximizing update. Non-finite values rank last.
    pub fn update(&mut self, evaluated: &[(Vec<f64>, f64)]) {
        assert!(!evaluated.is_empty(), "update needs evaluated candidates");
        let n = self.dim();
        let mut order: Vec<usize> = (0..evaluated.len()).collect();
        let key = |f: f64| if f.is_finite() { f } else { f64::NEG_INFINITY };
        order.sort_by(|&a, &b| key(evaluated[b].1).total_cmp(&key(evaluated[a].1)));

        let best = key(evaluated[order[0]].1);
        if best > self.best_ever {
            self.best_ever = best;
        }
        if best > self.best_since_restart {
            self.best_since_restart = best;
            self.last_improvement = self.generations_since_restart;
        }

        let mu = self.mu().min(evaluated.len());
        let w_total: f64 = self.weights[..mu].iter().sum();
        let steps: Vec<DVector<f64>> = order[..mu]
            .iter()
            .map(|&i| (DVector::from_column_slice(&evaluated[i].0) - &self.mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in self.weights[..mu].iter().zip(&steps) {
            y_w += y * (w / w_total);
        }
        self.mean += &y_w * self.sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &self.basis * (self.basis.transpose() * &y_w).component_div(&self.scales);
        let c_s = self.c_s;
        self.p_sigma = &self.p_sigma * (1.0 - c_s) + inv_sqrt_y * (c_s * (2.0 - c_s) * self.mu_eff).sqrt();
        let gen = (self.generations_since_restart + 1) as f64;
        let ps_norm = self.p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - c_s).powf(2.0 * gen)).sqrt() / self.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };
        let c_c = self.c_c;
        self.p_c = &self.p_c * (1.0 - c_c) + &y_w * (h * (c_c * (2.0 - c_c) * self.mu_eff).sqrt());

        let rank_one = &self.p_c * self.p_c.transpose();
        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, y) in self.weights[..mu].iter().zip(&steps) {
            rank_mu += (y * y.transpose()) * (w / w_total);
        }
        let correction = (1.0 - h) * c_c * (2.0 - c_c);
        self.cov = &self.cov * (1.0 - self.c_1 - self.c_mu)
            + (rank_one + &self.cov * correction) * self.c_1
            + rank_mu * self.c_mu;

        self.sigma *= ((c_s / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.generations_since_restart += 1;
        self.decompose();
    }

    pub fn restart_check(&self) -> RestartDecision {
        let stalled = self.generations_since_restart >= self.last_improvement + self.config.stagnation_generations;
        let max_eig = self.eigenvalues().max();
        let collapsed = self.sigma * max_eig.sqrt() < self.config.tol_x;
        if stalled || collapsed {
            RestartDecision::Restart
        } else {
            RestartDecision::Continue
        }
    }

    /// Doubles the population and starts over from `mean` with the initial
    /// step size and covariance.
    pub fn restart(&mut self, mean: Vec<f64>) {
        self.restarts += 1;
        self.lambda *= 2;
        self.mean = DVector::from_vec(mean);
        self.sigma = self.init_sigma;
        self.reset_covariance();
        self.best_since_restart = f64::NEG_INFINITY;
        self.last_improvement = 0;
        self.generations_since_restart = 0;
        self.set_strategy_parameters();
        self.decompose();
    }

    /// Generations since the last restart.
    pub fn generations_since_restart(&self) -> usize {
        self.generations_since_restart
    }
}
