//! Experiment orchestration: presets, trial batching, output files and the
//! analyses run over finished archives.
//!
//! A trial directory holds
//!
//! ```text
//! archive.csv              one row per occupied cell
//! heatmap.csv, heatmap.svg dense f grid (one slice per collision value)
//! qdscore_timeseries.csv   QD-Score and coverage every 100 evaluations
//! evaluations.csv          every valid evaluation, in log order
//! space.json               the behavior space, for reloading archive.csv
//! elites/*.json            traces of timeout/collision elites and the top 10
//! ```
//!
//! and `summary.json` at the run root describes every trial.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::archive::{write_heatmap_csv, write_heatmap_svg, Archive, BcKind, BehaviorSpaceSpec, Elite};
use crate::behavior::{bc_collision, bc_goal_distance, bc_horizontal_distance, bc_human_variation, bc_rationality, BcVector, RationalityGrid};
use crate::error::{Error, Result};
use crate::policy::{BlendParams, Controller, CostParams, RepulsionParams};
use crate::scenario::{Bounds, Domain, Environment, HumanParams, ScenarioParams, SceneLayout};
use crate::search::{run_search, Algorithm, CmaConfig, EvalResult, Evaluated, Evaluator, MapElitesConfig, SearchLog, SearchSettings};
use crate::sim::{assess, prepare_episode, simulate, EpisodeTrace, SimConfig, Termination, TraceColumns};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "QDSCEN_OUT";

/// Default output root: `$QDSCEN_OUT` or `./runs`.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// Two goals; goal distance x rationality.
    #[serde(rename = "bc1-bc3")]
    DistanceRationality,
    /// Two goals; goal distance x human variation.
    #[serde(rename = "bc1-bc2")]
    DistanceVariation,
    /// Three goals; goal distance x human variation.
    #[serde(rename = "bc1-bc2-3goals")]
    DistanceVariation3Goals,
    /// One goal behind a sphere; horizontal distance x variation x collision.
    #[serde(rename = "obstacle")]
    Obstacle,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::DistanceRationality,
        Preset::DistanceVariation,
        Preset::DistanceVariation3Goals,
        Preset::Obstacle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::DistanceRationality => "bc1-bc3",
            Preset::DistanceVariation => "bc1-bc2",
            Preset::DistanceVariation3Goals => "bc1-bc2-3goals",
            Preset::Obstacle => "obstacle",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            Preset::Obstacle => Domain::Obstacle,
            _ => Domain::GoalPlacement,
        }
    }

    pub fn n_goals(self) -> usize {
        match self {
            Preset::DistanceVariation3Goals => 3,
            Preset::Obstacle => 1,
            _ => 2,
        }
    }

    pub fn space(self) -> BehaviorSpaceSpec {
        match self {
            Preset::DistanceRationality => BehaviorSpaceSpec::distance_rationality(),
            Preset::DistanceVariation | Preset::DistanceVariation3Goals => BehaviorSpaceSpec::distance_variation(),
            Preset::Obstacle => BehaviorSpaceSpec::obstacle(),
        }
    }

    pub fn bounds(self, layout: &SceneLayout) -> Bounds {
        match self {
            Preset::Obstacle => Bounds::obstacle(layout),
            p => Bounds::goal_placement(p.n_goals(), layout),
        }
    }

    pub fn horizon(self) -> f64 {
        match self {
            Preset::Obstacle => 15.0,
            _ => 10.0,
        }
    }

    pub fn default_budget(self) -> usize {
        match self {
            Preset::Obstacle => 20_000,
            _ => 10_000,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset `{s}` (bc1-bc3, bc1-bc2, bc1-bc2-3goals, obstacle)"))
    }
}

/// Which elite traces a trial writes to `elites/`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceExport {
    /// Every timeout or collision elite plus the ten slowest elites.
    #[default]
    FailuresAndTop,
    TopOnly,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub algorithm: Algorithm,
    pub controller: Controller,
    pub cost: CostParams,
    pub blend: BlendParams,
    pub repulsion: RepulsionParams,
    pub human: HumanParams,
    pub layout: SceneLayout,
    pub dt: f64,
    /// Defaults to the preset's horizon.
    pub horizon: Option<f64>,
    /// Defaults to the preset's budget.
    pub budget: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    /// 0 uses the available parallelism; 1 runs sequentially.
    pub workers: usize,
    pub out: PathBuf,
    pub map_elites: MapElitesConfig,
    pub cma: CmaConfig,
    pub rationality: RationalityGrid,
    pub traces: TraceExport,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_preset(Preset::DistanceVariation)
    }
}

impl ExperimentConfig {
    pub fn for_preset(preset: Preset) -> Self {
        Self {
            preset,
            algorithm: Algorithm::MapElites,
            controller: Controller::Hindsight,
            cost: CostParams::default(),
            blend: BlendParams::default(),
            repulsion: RepulsionParams::default(),
            human: HumanParams::default(),
            layout: SceneLayout::default(),
            dt: 0.02,
            horizon: None,
            budget: None,
            trials: 5,
            seed: 0,
            workers: 0,
            out: default_output_root(),
            map_elites: MapElitesConfig::default(),
            cma: CmaConfig::default(),
            rationality: RationalityGrid::default(),
            traces: TraceExport::default(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn budget(&self) -> usize {
        self.budget.unwrap_or_else(|| self.preset.default_budget())
    }

    pub fn workers(&self) -> usize {
        match self.workers {
            0 => std::thread::available_parallelism().map_or(1, usize::from),
            n => n,
        }
    }

    pub fn space(&self) -> BehaviorSpaceSpec {
        self.preset.space()
    }

    pub fn bounds(&self) -> Bounds {
        self.preset.bounds(&self.layout)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            horizon: self.horizon.unwrap_or_else(|| self.preset.horizon()),
            controller: self.controller,
            cost: self.cost.clone(),
            blend: self.blend.clone(),
            repulsion: self.repulsion.clone(),
            human: self.human.clone(),
            human_kind: Default::default(),
            layout: self.layout.clone(),
        }
    }

    pub fn search_settings(&self, trial: usize) -> SearchSettings {
        let mut s = SearchSettings::new(self.budget(), self.seed + trial as u64).with_workers(self.workers());
        s.map_elites = self.map_elites.clone();
        s.cma = self.cma.clone();
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.budget() == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.algorithm == Algorithm::MapElites && self.map_elites.n_init > self.budget() {
            warn!("n_init {} exceeds the budget {}; MAP-Elites reduces to random search", self.map_elites.n_init, self.budget());
        }
        if !(self.map_elites.sigma_phi > 0.0 && self.map_elites.sigma_theta > 0.0) {
            return Err(Error::Config("MAP-Elites step sizes must be positive".into()));
        }
        if self.cma.lambda < 4 {
            return Err(Error::Config("CMA-ES population must be at least 4".into()));
        }
        self.sim_config().validate().map_err(Error::Config)
    }

    pub fn evaluator(&self) -> ScenarioEvaluator {
        ScenarioEvaluator {
            sim: self.sim_config(),
            space: self.space(),
            grid: self.rationality.clone(),
        }
    }
}

/// Simulates a scenario and computes the behavior of the configured space.
#[derive(Clone, Debug)]
pub struct ScenarioEvaluator {
    pub sim: SimConfig,
    pub space: BehaviorSpaceSpec,
    pub grid: RationalityGrid,
}

impl ScenarioEvaluator {
    pub fn new(sim: SimConfig, space: BehaviorSpaceSpec) -> Self {
        Self {
            sim,
            space,
            grid: RationalityGrid::default(),
        }
    }

    pub fn behavior(&self, sp: &ScenarioParams, env: &Environment, trace: &EpisodeTrace) -> Result<BcVector> {
        let missing = |what: &str| Error::Evaluation(format!("{what} is undefined for this scenario"));
        self.space
            .dims
            .iter()
            .map(|d| match d.kind {
                BcKind::GoalDistance => bc_goal_distance(env).ok_or_else(|| missing("goal distance")),
                BcKind::HumanVariation => Ok(bc_human_variation(&sp.theta)),
                BcKind::Rationality => Ok(bc_rationality(trace, env, &self.grid)),
                BcKind::HorizontalDistance => bc_horizontal_distance(env).ok_or_else(|| missing("horizontal distance")),
                BcKind::Collision => Ok(if bc_collision(trace) { 1.0 } else { 0.0 }),
            })
            .collect::<Result<Vec<_>>>()
            .map(BcVector)
    }

    /// Full evaluation keeping the trace; `None` for invalid scenarios.
    pub fn evaluate_with_trace(&self, sp: &ScenarioParams) -> Result<Option<(Evaluated, EpisodeTrace)>> {
        let Ok(episode) = prepare_episode(sp, &self.sim) else {
            return Ok(None);
        };
        let env = episode.env.clone();
        let trace = match simulate(episode, &self.sim) {
            Ok(t) => t,
            Err(_) => return Ok(None),
        };
        let Some(f) = assess(&trace, &self.sim) else {
            return Ok(None);
        };
        let bc = self.behavior(sp, &env, &trace)?;
        Ok(Some((
            Evaluated {
                f,
                bc,
                termination: trace.outcome.termination,
            },
            trace,
        )))
    }
}

impl Evaluator for ScenarioEvaluator {
    fn evaluate(&self, sp: &ScenarioParams) -> Result<EvalResult> {
        Ok(match self.evaluate_with_trace(sp)? {
            Some((ev, _)) => EvalResult::Valid(ev),
            None => EvalResult::Invalid,
        })
    }
}

/// Replayable elite: the scenario, the configuration it ran under and the
/// recorded trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliteFile {
    pub cell: usize,
    pub scenario: ScenarioParams,
    pub f: f64,
    pub bc: BcVector,
    pub eval_index: usize,
    pub sim: SimConfig,
    pub trace: TraceColumns,
}

impl EliteFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Re-simulates an elite and renders its trajectory as a whitespace table.
pub fn replay_table(elite: &EliteFile) -> String {
    use std::fmt::Write;
    let trace = crate::sim::run_episode(&elite.scenario, &elite.sim);
    let mut out = String::new();
    let n_goals = trace.steps.first().map_or(0, |s| s.belief.len());
    let _ = write!(out, "{:>7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}", "t", "x", "y", "uhx", "uhy", "urx", "ury");
    for g in 0..n_goals {
        let _ = write!(out, " {:>7}", format!("b{g}"));
    }
    out.push('\n');
    for s in &trace.steps {
        let _ = write!(
            out,
            "{:>7.2} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            s.t, s.x.x, s.x.y, s.u_h.x, s.u_h.y, s.u_r.x, s.u_r.y
        );
        for p in s.belief.probs() {
            let _ = write!(out, " {p:>7.4}");
        }
        out.push('\n');
    }
    let f = assess(&trace, &elite.sim).unwrap_or(f64::NAN);
    let _ = writeln!(
        out,
        "# outcome {:?} after {:.2} s, f = {:.2} (recorded {:.2})",
        trace.outcome.termination, trace.outcome.elapsed, f, elite.f
    );
    out
}

/// Per-slice statistics of the obstacle space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionStats {
    pub collision_cells: usize,
    pub non_collision_cells: usize,
    pub collision_coverage: f64,
    pub non_collision_coverage: f64,
    /// `None` when no non-collision cell is occupied.
    pub mean_f_non_collision: Option<f64>,
    /// Collision elites whose human variation is below 0.02.
    pub collision_low_variation: usize,
}

pub const LOW_VARIATION: f64 = 0.02;

/// `None` unless the space has a collision dimension.
pub fn collision_stats(archive: &Archive) -> Option<CollisionStats> {
    let spec = archive.spec();
    let c = spec.dim_of(BcKind::Collision)?;
    let v = spec.dim_of(BcKind::HumanVariation);
    let slice_cells = spec.cell_count() / spec.dims[c].bins;
    let (mut coll, mut free, mut low) = (0, 0, 0);
    let mut free_f = 0.0;
    for (flat, e) in archive.cells() {
        if spec.multi_index(flat)[c] == 1 {
            coll += 1;
            if v.is_some_and(|v| e.bc.values()[v] < LOW_VARIATION) {
                low += 1;
            }
        } else {
            free += 1;
            free_f += e.f;
        }
    }
    Some(CollisionStats {
        collision_cells: coll,
        non_collision_cells: free,
        collision_coverage: coll as f64 / slice_cells as f64,
        non_collision_coverage: free as f64 / slice_cells as f64,
        mean_f_non_collision: (free > 0).then(|| free_f / free as f64),
        collision_low_variation: low,
    })
}

/// Mean elite assessment; `None` for an empty archive.
pub fn mean_f(archive: &Archive) -> Option<f64> {
    (!archive.is_empty()).then(|| archive.qd_score() / archive.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub coverage: f64,
    pub qd_score: f64,
    pub mean_f: Option<f64>,
    pub elites: usize,
    pub invalid_proposals: usize,
    pub failed_evaluations: usize,
    pub clamped_proposals: usize,
    pub bc_clamp_events: usize,
    pub cma_restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionStats>,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}


impl MeanStd {
    /// Sample standard deviation; 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub preset: Preset,
    pub algorithm: Algorithm,
    pub controller: Controller,
    pub linear_term_enabled: bool,
    pub budget: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub cells: usize,
    pub trials: Vec<TrialSummary>,
    pub coverage: MeanStd,
    pub qd_score: MeanStd,
    pub seconds: f64,
}

impl RunSummary {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn failed_trials(&self) -> usize {
        self.trials.iter().filter(|t| t.error.is_some()).count()
    }
}

/// Everything a finished trial produced in memory.
pub struct TrialOutput {
    pub archive: Archive,
    pub log: SearchLog,
    pub summary: TrialSummary,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Runs one trial in memory; files are written by [`write_trial`].
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutput> {
    let start = Instant::now();
    let settings = cfg.search_settings(trial);
    let evaluator = cfg.evaluator();
    let (archive, log) = run_search(cfg.algorithm, &evaluator, &cfg.space(), &cfg.bounds(), &settings)?;
    let summary = TrialSummary {
        trial,
        seed: settings.seed,
        evaluations: log.len(),
        coverage: archive.coverage(),
        qd_score: archive.qd_score(),
        mean_f: mean_f(&archive),
        elites: archive.len(),
        invalid_proposals: log.invalid_proposals,
        failed_evaluations: log.failed.len(),
        clamped_proposals: log.clamped_proposals,
        bc_clamp_events: archive.clamp_events(),
        cma_restarts: log.cma_restarts,
        collision: collision_stats(&archive),
        seconds: start.elapsed().as_secs_f64(),
        error: None,
    };
    Ok(TrialOutput { archive, log, summary })
}

/// Elites whose traces are exported, as `(flat cell, elite)` pairs.
fn exported_elites<'a>(archive: &'a Archive, evaluator: &ScenarioEvaluator, mode: TraceExport) -> Result<Vec<(usize, &'a Elite, EpisodeTrace)>> {
    if mode == TraceExport::Off {
        return Ok(Vec::new());
    }
    let mut by_f: Vec<(usize, &Elite)> = archive.cells().collect();
    by_f.sort_by(|a, b| b.1.f.total_cmp(&a.1.f).then(a.0.cmp(&b.0)));
    let top: Vec<usize> = by_f.iter().take(10).map(|(i, _)| *i).collect();
    let mut out = Vec::new();
    for (flat, e) in archive.cells() {
        let keep_top = top.contains(&flat);
        if !keep_top && mode == TraceExport::TopOnly {
            continue;
        }
        let Some((ev, trace)) = evaluator.evaluate_with_trace(&e.scenario)? else {
            continue;
        };
        if keep_top || matches!(ev.termination, Termination::Timeout | Termination::Collision) {
            out.push((flat, e, trace));
        }
    }
    Ok(out)
}

/// Writes the trial's files into `dir`.
pub fn write_trial(cfg: &ExperimentConfig, out: &TrialOutput, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    out.archive.write_csv(&dir.join("archive.csv"))?;
    let slices = out.archive.heatmap();
    write_heatmap_csv(&slices, &dir.join("heatmap.csv"))?;
    let sim = cfg.sim_config();
    write_heatmap_svg(&slices, sim.horizon, &dir.join("heatmap.svg"))?;
    out.log.write_timeseries_csv(&dir.join("qdscore_timeseries.csv"))?;
    out.log.write_evaluations_csv(&dir.join("evaluations.csv"))?;
    write_json(&dir.join("space.json"), out.archive.spec())?;
    let elites_dir = dir.join("elites");
    create_dir(&elites_dir)?;
    let evaluator = cfg.evaluator();
    for (flat, e, trace) in exported_elites(&out.archive, &evaluator, cfg.traces)? {
        let file = EliteFile {
            cell: flat,
            scenario: e.scenario.clone(),
            f: e.f,
            bc: e.bc.clone(),
            eval_index: e.eval_index,
            sim: sim.clone(),
            trace: trace.to_columns(),
        };
        write_json(&elites_dir.join(format!("cell_{flat:05}.json")), &file)?;
    }
    Ok(())
}

fn summarize(cfg: &ExperimentConfig, trials: Vec<TrialSummary>, seconds: f64) -> RunSummary {
    let ok: Vec<&TrialSummary> = trials.iter().filter(|t| t.error.is_none()).collect();
    let cov: Vec<f64> = ok.iter().map(|t| t.coverage).collect();
    let qd: Vec<f64> = ok.iter().map(|t| t.qd_score).collect();
    RunSummary {
        preset: cfg.preset,
        algorithm: cfg.algorithm,
        controller: cfg.controller,
        linear_term_enabled: cfg.cost.linear_term_enabled,
        budget: cfg.budget(),
        base_seed: cfg.seed,
        workers: cfg.workers(),
        cells: cfg.space().cell_count(),
        trials,
        coverage: MeanStd::of(&cov),
        qd_score: MeanStd::of(&qd),
        seconds,
    }
}

/// Runs every trial, writing `trial_<t>/` directories and `summary.json`
/// under `cfg.out`. Fails if any trial failed, after writing the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("config.json"), cfg)?;
    let start = Instant::now();
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let dir = cfg.out.join(format!("trial_{t}"));
        let result = run_trial(cfg, t).and_then(|out| write_trial(cfg, &out, &dir).map(|_| out.summary));
        match result {
            Ok(s) => {
                info!(
                    "{} {} trial {t}: coverage {:.3}, QD-Score {:.1} ({:.1} s)",
                    cfg.preset, cfg.algorithm, s.coverage, s.qd_score, s.seconds
                );
                trials.push(s);
            }
            Err(e) => {
                warn!("trial {t} failed: {e}");
                trials.push(TrialSummary {
                    trial: t,
                    seed: cfg.seed + t as u64,
                    evaluations: 0,
                    coverage: 0.0,
                    qd_score: 0.0,
                    mean_f: None,
                    elites: 0,
                    invalid_proposals: 0,
                    failed_evaluations: 0,
                    clamped_proposals: 0,
                    bc_clamp_events: 0,
                    cma_restarts: 0,
                    collision: None,
                    seconds: 0.0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let summary = summarize(cfg, trials, start.elapsed().as_secs_f64());
    write_json(&cfg.out.join("summary.json"), &summary)?;
    match summary.failed_trials() {
        0 => Ok(summary),
        failed => Err(Error::TrialsFailed {
            failed,
            total: cfg.trials,
        }),
    }
}

/// Visit counts of every logged evaluation over the cells of `spec`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitHistogram {
    pub spec: BehaviorSpaceSpec,
    pub counts: Vec<usize>,
}

impl VisitHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Share of all visits held by the `fraction` most-visited cells of the
    /// whole grid.
    pub fn top_mass(&self, fraction: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let k = ((self.counts.len() as f64 * fraction).round() as usize).min(self.counts.len());
        let mut sorted = self.counts.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted[..k].iter().sum::<usize>() as f64 / total as f64
    }

    /// Counts as `grid[row][col]` over the first two dimensions, summed over
    /// any others.
    pub fn grid(&self) -> Vec<Vec<usize>> {
        let rows = self.spec.dims[0].bins;
        let cols = self.spec.dims.get(1).map_or(1, |d| d.bins);
        let mut g = vec![vec![0; cols]; rows];
        for (flat, &c) in self.counts.iter().enumerate() {
            let m = self.spec.multi_index(flat);
            g[m[0]][m.get(1).copied().unwrap_or(0)] += c;
        }
        g
    }
}

/// Cell visit counts of every evaluation in the log, elites or not.
pub fn distortion_histogram(log: &SearchLog, spec: &BehaviorSpaceSpec) -> Result<VisitHistogram> {
    let mut counts = vec![0; spec.cell_count()];
    for r in &log.records {
        counts[crate::archive::cell_index(spec, &r.bc)?.flat] += 1;
    }
    Ok(VisitHistogram {
        spec: spec.clone(),
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerReport {
    pub controller: Controller,
    pub coverage: f64,
    pub qd_score: f64,
    pub stats: CollisionStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub budget: usize,
    pub seed: u64,
    pub hindsight: ControllerReport,
    pub blend: ControllerReport,
}

impl ComparisonReport {
    /// Blending collision-slice occupancy over hindsight's; infinite when
    /// hindsight has none and blending has some.
    pub fn collision_ratio(&self) -> f64 {
        let b = self.blend.stats.collision_cells as f64;
        let h = self.hindsight.stats.collision_cells as f64;
        if h == 0.0 {
            if b == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            b / h
        }
    }
}

/// One MAP-Elites run per controller on the obstacle preset. Trial files are
/// written under `cfg.out/<controller>/` and the report to
/// `cfg.out/comparison.json`.
pub fn compare_controllers(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    if cfg.preset != Preset::Obstacle {
        return Err(Error::Config(format!("controller comparison needs the obstacle preset, got {}", cfg.preset)));
    }
    cfg.validate()?;
    create_dir(&cfg.out)?;
    let run = |controller: Controller| -> Result<ControllerReport> {
        let c = ExperimentConfig {
            controller,
            algorithm: Algorithm::MapElites,
            ..cfg.clone()
        };
        let out = run_trial(&c, 0)?;
        write_trial(&c, &out, &cfg.out.join(controller.to_string()))?;
        Ok(ControllerReport {
            controller,
            coverage: out.archive.coverage(),
            qd_score: out.archive.qd_score(),
            stats: collision_stats(&out.archive).expect("obstacle space has a collision dimension"),
        })
    };
    let report = ComparisonReport {
        budget: cfg.budget(),
        seed: cfg.seed,
        hindsight: run(Controller::Hindsight)?,
        blend: run(Controller::Blend)?,
    };
    write_json(&cfg.out.join("comparison.json"), &report)?;
    Ok(report)
}

/// Loads `archive.csv` with the space stored beside it, then writes
/// `heatmap.csv` and `heatmap.svg` into `out_dir`.
pub fn export_heatmap(archive_csv: &Path, space_json: Option<&Path>, out_dir: &Path, f_max: f64) -> Result<Archive> {
    let default_space;
    let space_path = match space_json {
        Some(p) => p,
        None => {
            default_space = archive_csv.with_file_name("space.json");
            &default_space
        }
    };
    let text = fs::read_to_string(space_path).map_err(|e| Error::io(space_path, e))?;
    let spec: BehaviorSpaceSpec = serde_json::from_str(&text)?;
    let archive = Archive::read_csv(archive_csv, spec)?;
    create_dir(out_dir)?;
    let slices = archive.heatmap();
    write_heatmap_csv(&slices, &out_dir.join("heatmap.csv"))?;
    write_heatmap_svg(&slices, f_max, &out_dir.join("heatmap.svg"))?;
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::EvalRecord;

    #[test]
    fn presets_are_consistent() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            let cfg = ExperimentConfig::for_preset(p);
            let b = cfg.bounds();
            assert_eq!(b.domain, p.domain());
            assert_eq!(cfg.sim_config().horizon, p.horizon());
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert_eq!(Preset::Obstacle.default_budget(), 20_000);
        assert_eq!(Preset::DistanceVariation3Goals.bounds(&SceneLayout::default()).phi.len(), 6);
        assert_eq!(Preset::DistanceRationality.space().cell_count(), 2525);
        assert_eq!(Preset::Obstacle.space().cell_count(), 5000);
    }

    #[test]
    fn partial_config_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"preset": "obstacle", "budget": 50, "controller": "blend"}"#).unwrap();
        assert_eq!(cfg.preset, Preset::Obstacle);
        assert_eq!(cfg.budget(), 50);
        assert_eq!(cfg.controller, Controller::Blend);
        assert_eq!(cfg.trials, 5);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn evaluator_behaviour_matches_space() {
        let cfg = ExperimentConfig::for_preset(Preset::Obstacle);
        let ev = cfg.evaluator();
        let sp = ScenarioParams::new(Domain::Obstacle, vec![0.1, 0.2], vec![0.0; 5]);
        let EvalResult::Valid(e) = ev.evaluate(&sp).unwrap() else {
            panic!("valid scenario");
        };
        assert_eq!(e.bc.len(), 3);
        assert!((e.bc.values()[0] - 0.1).abs() < 1e-12);
        assert_eq!(e.bc.values()[1], 0.0);
        assert!(e.bc.values()[2] == 0.0 || e.bc.values()[2] == 1.0);

        let cfg = ExperimentConfig::for_preset(Preset::DistanceVariation);
        let sp = ScenarioParams::new(Domain::GoalPlacement, vec![0.1, 0.1, 0.1, 0.1], vec![0.0; 5]);
        assert_eq!(cfg.evaluator().evaluate(&sp).unwrap(), EvalResult::Invalid);
    }

    #[test]
    fn histogram_counts_every_evaluation() {
        let spec = BehaviorSpaceSpec::distance_variation();
        let rec = |bc: Vec<f64>, i| EvalRecord {
            eval_index: i,
            scenario: ScenarioParams::new(Domain::GoalPlacement, vec![0.0; 4], vec![0.0; 5]),
            f: 1.0,
            bc: BcVector(bc),
            termination: Termination::ReachedGoal,
        };
        let log = SearchLog {
            records: vec![rec(vec![0.1, 0.05], 1)],
            ..SearchLog::default()
        };
        let h = distortion_histogram(&log, &spec).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.distinct(), 1);
        assert_eq!(h.top_mass(0.1), 1.0);
        let log = SearchLog {
            records: vec![rec(vec![0.1, 0.05], 1), rec(vec![0.1, 0.05], 2), rec(vec![0.3, 0.0], 3)],
            ..SearchLog::default()
        };
        let h = distortion_histogram(&log, &spec).unwrap();
        assert_eq!((h.total(), h.distinct()), (3, 2));
        assert_eq!(h.grid().iter().flatten().sum::<usize>(), 3);
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 1.0).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }
}
