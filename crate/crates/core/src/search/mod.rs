//! Scenario search: MAP-Elites, restart CMA-ES and uniform random search.
//!
//! One coordinator owns the archive and the log. With more than one worker,
//! evaluations run on a thread pool; MAP-Elites and random search keep the
//! pool busy and insert results in completion order, while CMA-ES waits for
//! a whole generation before updating. CMA-ES records each generation in
//! candidate order, so only the asynchronous algorithms lose determinism
//! when parallel.

pub mod cma;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::str::FromStr;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, BehaviorSpaceSpec, Elite};
use crate::behavior::BcVector;
use crate::error::{Error, Result};
use crate::scenario::{sample_random_scenario, Bounds, ScenarioParams};
use crate::sim::Termination;

pub use cma::{scenario_initial_diagonal, CmaConfig, CmaState, RestartDecision};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    MapElites,
    CmaEs,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::MapElites, Algorithm::CmaEs, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MapElites => "map-elites",
            Algorithm::CmaEs => "cma-es",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "map-elites" | "mapelites" | "me" => Ok(Algorithm::MapElites),
            "cma-es" | "cmaes" | "cma" => Ok(Algorithm::CmaEs),
            "random" | "rand" => Ok(Algorithm::Random),
            other => Err(format!("unknown algorithm `{other}` (map-elites, cma-es, random)")),
        }
    }
}

/// Assessment and behavior of one valid scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub f: f64,
    pub bc: BcVector,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalResult {
    Valid(Evaluated),
    /// The scenario cannot be simulated; search proposes another.
    Invalid,
}

/// Maps a scenario to its assessment and behavior characteristics.
pub trait Evaluator: Sync {
    fn evaluate(&self, sp: &ScenarioParams) -> Result<EvalResult>;
}

impl<F> Evaluator for F
where
    F: Fn(&ScenarioParams) -> Result<EvalResult> + Sync,
{
    fn evaluate(&self, sp: &ScenarioParams) -> Result<EvalResult> {
        self(sp)
    }
}

/// A scenario submitted for evaluation; `clamped` marks proposals that never
/// fell inside the bounds and were clamped instead.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub scenario: ScenarioParams,
    pub clamped: bool,
}

pub(crate) fn resample_vec(mut draw: impl FnMut() -> Vec<f64>, ranges: &[(f64, f64)], max_tries: usize) -> (Vec<f64>, bool) {
    let inside = |v: &[f64]| v.len() == ranges.len() && v.iter().zip(ranges).all(|(x, &(lo, hi))| *x >= lo && *x <= hi);
    let mut last = Vec::new();
    for _ in 0..max_tries.max(1) {
        last = draw();
        if inside(&last) {
            return (last, false);
        }
    }
    for (x, &(lo, hi)) in last.iter_mut().zip(ranges) {
        *x = if x.is_nan() { 0.5 * (lo + hi) } else { x.clamp(lo, hi) };
    }
    debug!("proposal clamped after {max_tries} tries");
    (last, true)
}

/// Redraws the whole vector until it lies inside `bounds`; clamps after
/// `max_tries` draws.
pub fn resample_into_bounds(draw: impl FnMut() -> Vec<f64>, bounds: &Bounds, max_tries: usize) -> Proposal {
    let ranges: Vec<_> = bounds.ranges().collect();
    let (values, clamped) = resample_vec(draw, &ranges, max_tries);
    Proposal {
        scenario: ScenarioParams::from_vec(bounds.domain, bounds.phi.len(), &values),
        clamped,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapElitesConfig {
    pub n_init: usize,
    pub sigma_phi: f64,
    pub sigma_theta: f64,
    pub max_tries: usize,
}

impl Default for MapElitesConfig {
    fn default() -> Self {
        Self {
            n_init: 100,
            sigma_phi: 0.01,
            sigma_theta: 0.005,
            max_tries: 100,
        }
    }
}

/// Gaussian perturbation of a uniformly chosen elite, or a uniform draw when
/// the archive is empty.
pub fn map_elites_propose<R: Rng + ?Sized>(archive: &Archive, cfg: &MapElitesConfig, rng: &mut R, bounds: &Bounds) -> Proposal {
    let Some(parent) = archive.random_elite(rng) else {
        return Proposal {
            scenario: sample_random_scenario(bounds, rng),
            clamped: false,
        };
    };
    let base = parent.scenario.to_vec();
    let n_phi = bounds.phi.len();
    let sigmas: Vec<f64> = (0..base.len()).map(|i| if i < n_phi { cfg.sigma_phi } else { cfg.sigma_theta }).collect();
    resample_into_bounds(
        || {
            base.iter()
                .zip(&sigmas)
                .map(|(&m, &s)| if s > 0.0 { m + s * rng.sample::<f64, _>(rand_distr::StandardNormal) } else { m })
                .collect()
        },
        bounds,
        cfg.max_tries,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub budget: usize,
    pub seed: u64,
    /// 1 evaluates on the calling thread.
    pub workers: usize,
    pub map_elites: MapElitesConfig,
    pub cma: CmaConfig,
    pub sample_every: usize,
    /// Consecutive invalid or failed proposals tolerated before giving up.
    pub max_rejections: usize,
}

impl SearchSettings {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            workers: 1,
            map_elites: MapElitesConfig::default(),
            cma: CmaConfig::default(),
            sample_every: 100,
            max_rejections: 10_000,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub eval_index: usize,
    pub scenario: ScenarioParams,
    pub f: f64,
    pub bc: BcVector,
    pub termination: Termination,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QdSample {
    pub eval_index: usize,
    pub qd_score: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    pub records: Vec<EvalRecord>,
    pub qd_samples: Vec<QdSample>,
    pub invalid_proposals: usize,
    pub clamped_proposals: usize,
    /// Scenarios whose evaluation failed twice and were skipped.
    pub failed: Vec<ScenarioParams>,
    pub cma_restarts: usize,
}

impl SearchLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_timeseries_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["eval_index", "qd_score", "coverage"])?;
        for s in &self.qd_samples {
            w.write_record([s.eval_index.to_string(), s.qd_score.to_string(), s.coverage.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// One row per valid evaluation: index, assessment, termination, then
    /// the behavior vector and the scenario parameters.
    pub fn write_evaluations_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        if let Some(first) = self.records.first() {
            let mut header = vec!["eval_index".to_string(), "f".into(), "termination".into()];
            header.extend((0..first.bc.len()).map(|i| format!("bc_{i}")));
            header.extend((0..first.scenario.phi.len()).map(|i| format!("phi_{i}")));
            header.extend((0..first.scenario.theta.len()).map(|i| format!("theta_{i}")));
            w.write_record(&header)?;
        }
        for r in &self.records {
            let mut row = vec![r.eval_index.to_string(), r.f.to_string(), format!("{:?}", r.termination)];
            row.extend(r.bc.values().iter().chain(&r.scenario.phi).chain(&r.scenario.theta).map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_timeseries_csv(path: &Path) -> Result<Vec<QdSample>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for row in r.records() {
            let row = row?;
            let parse = |i: usize| -> Result<f64> {
                row.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad timeseries row {row:?}")))
            };
            out.push(QdSample {
                eval_index: parse(0)? as usize,
                qd_score: parse(1)?,
                coverage: parse(2)?,
            });
        }
        Ok(out)
    }
}

enum Outcome {
    Valid(Evaluated),
    Invalid,
    Failed,
}

/// Evaluates with one retry; panics count as failures.
fn evaluate_guarded<E: Evaluator + ?Sized>(evaluator: &E, sp: &ScenarioParams) -> Outcome {
    for attempt in 0..2 {
        match catch_unwind(AssertUnwindSafe(|| evaluator.evaluate(sp))) {
            Ok(Ok(EvalResult::Valid(e))) => return Outcome::Valid(e),
            Ok(Ok(EvalResult::Invalid)) => return Outcome::Invalid,
            Ok(Err(e)) => warn!("evaluation attempt {} failed for {}: {e}", attempt + 1, sp.to_json()),
            Err(_) => warn!("evaluation attempt {} panicked for {}", attempt + 1, sp.to_json()),
        }
    }
    Outcome::Failed
}

struct Coordinator<'a> {
    archive: Archive,
    log: SearchLog,
    settings: &'a SearchSettings,
    rejections: usize,
}

impl<'a> Coordinator<'a> {
    fn new(spec: BehaviorSpaceSpec, settings: &'a SearchSettings) -> Self {
        Self {
            archive: Archive::new(spec),
            log: SearchLog::default(),
            settings,
            rejections: 0,
        }
    }

    fn remaining(&self) -> usize {
        self.settings.budget - self.log.records.len()
    }

    /// Applies one outcome. Returns whether it consumed budget.
    fn apply(&mut self, sp: ScenarioParams, outcome: Outcome) -> Result<bool> {
        match outcome {
            Outcome::Valid(ev) => {
                self.rejections = 0;
                let eval_index = self.log.records.len() + 1;
                self.archive.try_insert(Elite {
                    scenario: sp.clone(),
                    f: ev.f,
                    bc: ev.bc.clone(),
                    eval_index,
                })?;
                self.log.records.push(EvalRecord {
                    eval_index,
                    scenario: sp,
                    f: ev.f,
                    bc: ev.bc,
                    termination: ev.termination,
                });
                if eval_index.is_multiple_of(self.settings.sample_every.max(1)) || eval_index == self.settings.budget {
                    self.sample();
                }
                Ok(true)
            }
            Outcome::Invalid => {
                self.log.invalid_proposals += 1;
                self.reject()?;
                Ok(false)
            }
            Outcome::Failed => {
                warn!("skipping scenario after a failed retry: {}", sp.to_json());
                self.log.failed.push(sp);
                self.reject()?;
                Ok(false)
            }
        }
    }

    fn reject(&mut self) -> Result<()> {
        self.rejections += 1;
        if self.rejections > self.settings.max_rejections {
            return Err(Error::Evaluation(format!(
                "{} consecutive proposals were invalid or failed",
                self.rejections
            )));
        }
        Ok(())
    }

    fn sample(&mut self) {
        let eval_index = self.log.records.len();
        if self.log.qd_samples.last().is_some_and(|s| s.eval_index == eval_index) {
            return;
        }
        self.log.qd_samples.push(QdSample {
            eval_index,
            qd_score: self.archive.qd_score(),
            coverage: self.archive.coverage(),
        });
    }

    fn finish(mut self) -> (Archive, SearchLog) {
        self.sample();
        (self.archive, self.log)
    }
}

/// Runs `algorithm` until `settings.budget` valid evaluations are logged.
pub fn run_search<E: Evaluator + ?Sized>(
    algorithm: Algorithm,
    evaluator: &E,
    spec: &BehaviorSpaceSpec,
    bounds: &Bounds,
    settings: &SearchSettings,
) -> Result<(Archive, SearchLog)> {
    if settings.budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    if settings.map_elites.sigma_phi < 0.0 || settings.map_elites.sigma_theta < 0.0 {
        return Err(Error::Config("MAP-Elites step sizes must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut co = Coordinator::new(spec.clone(), settings);
    match algorithm {
        Algorithm::CmaEs => run_cma(evaluator, bounds, &mut co, &mut rng)?,
        _ => {
            let propose = |archive: &Archive, issued: usize, rng: &mut ChaCha8Rng| match algorithm {
                Algorithm::MapElites if issued >= settings.map_elites.n_init && !archive.is_empty() => {
                    map_elites_propose(archive, &settings.map_elites, rng, bounds)
                }
                _ => Proposal {
                    scenario: sample_random_scenario(bounds, rng),
                    clamped: false,
                },
            };
            if settings.workers <= 1 {
                run_async_sequential(evaluator, &mut co, &mut rng, propose)?;
            } else {
                run_async_parallel(evaluator, &mut co, &mut rng, propose)?;
            }
        }
    }
    Ok(co.finish())
}

fn run_async_sequential<E, P>(evaluator: &E, co: &mut Coordinator, rng: &mut ChaCha8Rng, mut propose: P) -> Result<()>
where
    E: Evaluator + ?Sized,
    P: FnMut(&Archive, usize, &mut ChaCha8Rng) -> Proposal,
{
    while co.remaining() > 0 {
        let p = propose(&co.archive, co.log.records.len(), rng);
        co.log.clamped_proposals += p.clamped as usize;
        let outcome = evaluate_guarded(evaluator, &p.scenario);
        co.apply(p.scenario, outcome)?;
    }
    Ok(())
}

fn run_async_parallel<E, P>(evaluator: &E, co: &mut Coordinator, rng: &mut ChaCha8Rng, mut propose: P) -> Result<()>
where
    E: Evaluator + ?Sized,
    P: FnMut(&Archive, usize, &mut ChaCha8Rng) -> Proposal,
{
    let workers = co.settings.workers;
    std::thread::scope(|scope| {
        let (job_tx, job_rx) = crossbeam_channel::unbounded::<ScenarioParams>();
        let (res_tx, res_rx) = crossbeam_channel::unbounded::<(ScenarioParams, Outcome)>();
        for _ in 0..workers {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            scope.spawn(move || {
                for sp in job_rx.iter() {
                    let outcome = evaluate_guarded(evaluator, &sp);
                    if res_tx.send((sp, outcome)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(res_tx);
        let mut in_flight = 0usize;
        let result = loop {
            while in_flight < workers && co.log.records.len() + in_flight < co.settings.budget {
                let p = propose(&co.archive, co.log.records.len() + in_flight, rng);
                co.log.clamped_proposals += p.clamped as usize;
                job_tx.send(p.scenario).expect("workers alive while jobs are pending");
                in_flight += 1;
            }
            if in_flight == 0 {
                break Ok(());
            }
            let Ok((sp, outcome)) = res_rx.recv() else {
                break Err(Error::Evaluation("worker pool shut down unexpectedly".into()));
            };
            in_flight -= 1;
            if let Err(e) = co.apply(sp, outcome) {
                break Err(e);
            }
        };
        drop(job_tx);
        result
    })
}

fn evaluate_batch<E: Evaluator + ?Sized>(evaluator: &E, batch: &[ScenarioParams], workers: usize) -> Vec<Outcome> {
    if workers <= 1 || batch.len() <= 1 {
        return batch.iter().map(|sp| evaluate_guarded(evaluator, sp)).collect();
    }
    let mut out: Vec<Option<Outcome>> = (0..batch.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let (job_tx, job_rx) = crossbeam_channel::unbounded::<usize>();
        let (res_tx, res_rx) = crossbeam_channel::unbounded::<(usize, Outcome)>();
        for i in 0..batch.len() {
            job_tx.send(i).expect("receiver held");
        }
        drop(job_tx);
        for _ in 0..workers.min(batch.len()) {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            scope.spawn(move || {
                for i in job_rx.iter() {
                    let _ = res_tx.send((i, evaluate_guarded(evaluator, &batch[i])));
                }
            });
        }
        drop(res_tx);
        for (i, outcome) in res_rx.iter() {
            out[i] = Some(outcome);
        }
    });
    out.into_iter().map(|o| o.unwrap_or(Outcome::Failed)).collect()
}

fn run_cma<E: Evaluator + ?Sized>(evaluator: &E, bounds: &Bounds, co: &mut Coordinator, rng: &mut ChaCha8Rng) -> Result<()> {
    let ranges: Vec<_> = bounds.ranges().collect();
    let domain = bounds.domain;
    let n_phi = bounds.phi.len();
    let to_sp = |v: &[f64]| ScenarioParams::from_vec(domain, n_phi, v);
    let uniform_mean = |rng: &mut ChaCha8Rng| sample_random_scenario(bounds, rng).to_vec();
    let cfg = co.settings.cma.clone();
    let max_tries = cfg.max_tries;
    let mut state = CmaState::new(
        uniform_mean(rng),
        scenario_initial_diagonal(n_phi, bounds.theta.len()),
        cfg,
    );
    while co.remaining() > 0 {
        let take = state.lambda.min(co.remaining());
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(take);
        for (x, clamped) in state.sample(rng, &ranges).into_iter().take(take) {
            co.log.clamped_proposals += clamped as usize;
            xs.push(x);
        }
        let mut outcomes: Vec<Option<Evaluated>> = vec![None; take];
        let mut pending: Vec<usize> = (0..take).collect();
        while !pending.is_empty() {
            let batch: Vec<ScenarioParams> = pending.iter().map(|&i| to_sp(&xs[i])).collect();
            let results = evaluate_batch(evaluator, &batch, co.settings.workers);
            let mut retry = Vec::new();
            for ((&i, outcome), sp) in pending.iter().zip(results).zip(batch) {
                match outcome {
                    Outcome::Valid(ev) => outcomes[i] = Some(ev),
                    other => {
                        co.apply(sp, other)?;
                        let (x, clamped) = resample_vec(|| state.sample_one(rng), &ranges, max_tries);
                        co.log.clamped_proposals += clamped as usize;
                        xs[i] = x;
                        retry.push(i);
                    }
                }
            }
            pending = retry;
        }
        let mut evaluated = Vec::with_capacity(take);
        for (x, ev) in xs.into_iter().zip(outcomes) {
            let ev = ev.expect("every candidate evaluated");
            evaluated.push((x.clone(), ev.f));
            co.apply(to_sp(&x), Outcome::Valid(ev))?;
        }
        if take < state.lambda {
            break;
        }
        state.update(&evaluated);
        if state.restart_check() == RestartDecision::Restart {
            debug!(
                "CMA-ES restart {} after {} generations, lambda {} -> {}",
                state.restarts + 1,
                state.generations_since_restart(),
                state.lambda,
                state.lambda * 2
            );
            state.restart(uniform_mean(rng));
            co.log.cma_restarts += 1;
        }
    }
    Ok(())
}
