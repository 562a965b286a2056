//! Benchmark configuration and execution of all five methods.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{
    distvis_optimize, legible_optimize, nominal_trajectory, speed_adjusted_execute, ExecutionTrace,
    NominalParams, SpeedAdjustParams,
};
use crate::costs::{CostContext, CostParams, CostWeights};
use crate::error::{Error, Result};
use crate::human_motion::{extrapolate_skeleton, predict, HumanTrajectory, PredictorParams, SkeletonOffsets};
use crate::kinematics::{ChainSpec, JointTrajectory};
use crate::metrics::{
    metric_legibility, metric_nominal_dev, metric_separation, metric_visibility, GoalSet, MetricThresholds,
    TimedMotion,
};
use crate::optimizer::{optimize, OptResult, OptimizerOptions};
use crate::scenario::{generate_scenario, Family, GeometryConfig, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CoMOTO")]
    Comoto,
    #[serde(rename = "Nominal")]
    Nominal,
    #[serde(rename = "Speed-Adj")]
    SpeedAdjusted,
    #[serde(rename = "Legible")]
    Legible,
    #[serde(rename = "Dist+Vis")]
    DistVis,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Comoto,
        Method::Nominal,
        Method::SpeedAdjusted,
        Method::Legible,
        Method::DistVis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Comoto => "CoMOTO",
            Method::Nominal => "Nominal",
            Method::SpeedAdjusted => "Speed-Adj",
            Method::Legible => "Legible",
            Method::DistVis => "Dist+Vis",
        }
    }

    /// Methods whose output comes from the trajectory optimizer.
    pub fn is_optimized(self) -> bool {
        matches!(self, Method::Comoto | Method::Legible | Method::DistVis)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown method '{s}'")))
    }
}

/// Weights for the three optimized methods plus cost-shape parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightsConfig {
    pub comoto: CostWeights,
    pub legible: CostWeights,
    pub distvis: CostWeights,
    pub cost: CostParams,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            comoto: CostWeights {
                alpha_dist: 1e-3,
                alpha_vis: 1e-5,
                alpha_legibility: 1.0,
                alpha_nominal: 0.01,
                alpha_smooth: 1e-3,
            },
            legible: CostWeights {
                alpha_dist: 0.0,
                alpha_vis: 0.0,
                alpha_legibility: 100.0,
                alpha_nominal: 0.0,
                alpha_smooth: 0.1,
            },
            distvis: CostWeights {
                alpha_dist: 3e-5,
                alpha_vis: 3e-5,
                alpha_legibility: 0.0,
                alpha_nominal: 1e-2,
                alpha_smooth: 0.0,
            },
            cost: CostParams::default(),
        }
    }
}

impl WeightsConfig {
    pub fn validate(&self) -> Result<()> {
        self.comoto.validate()?;
        self.legible.validate()?;
        self.distvis.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::Usage(format!("unknown format '{s}' (expected csv, json or markdown)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    /// Also write every trajectory, trace and scenario file.
    pub save_artifacts: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown],
            save_artifacts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub families: Vec<Family>,
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses one per core.
    pub threads: usize,
    /// Give the predictor the human's true reach target.
    pub predict_with_goal: bool,
    /// DH chain file; the built-in 7-DOF arm when absent.
    pub chain: Option<PathBuf>,
    /// Skeleton offsets file; built-in offsets when absent.
    pub skeleton: Option<PathBuf>,
    /// Weights file; replaces `weights` when present.
    pub weights_file: Option<PathBuf>,
    pub weights: WeightsConfig,
    pub optimizer: OptimizerOptions,
    pub predictor: PredictorParams,
    pub nominal: NominalParams,
    pub speed: SpeedAdjustParams,
    pub thresholds: MetricThresholds,
    pub geometry: GeometryConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            seeds: (0..5).collect(),
            threads: 0,
            predict_with_goal: true,
            chain: None,
            skeleton: None,
            weights_file: None,
            weights: WeightsConfig::default(),
            optimizer: OptimizerOptions::default(),
            predictor: PredictorParams::default(),
            nominal: NominalParams::default(),
            speed: SpeedAdjustParams::default(),
            thresholds: MetricThresholds::default(),
            geometry: GeometryConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse a run config. Relative file references are resolved against
    /// the config's directory and a referenced weights file is merged in.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.chain, &mut cfg.skeleton, &mut cfg.weights_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(w) = &cfg.weights_file {
            cfg.weights = WeightsConfig::load(w)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Usage("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Usage("seeds must be distinct".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Usage("at least one family is required".into()));
        }
        self.weights.validate()?;
        self.optimizer.validate()?;
        self.speed.validate()?;
        self.geometry.validate()
    }

    pub fn load_chain(&self) -> Result<ChainSpec> {
        match &self.chain {
            Some(p) => ChainSpec::load(p),
            None => Ok(ChainSpec::default_arm()),
        }
    }

    pub fn load_skeleton(&self) -> Result<SkeletonOffsets> {
        match &self.skeleton {
            Some(p) => SkeletonOffsets::load(p),
            None => Ok(SkeletonOffsets::default()),
        }
    }
}

/// One (family, seed, method) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: Family,
    pub seed: u64,
    pub method: Method,
    pub dst_pct: f64,
    pub vis_pct: f64,
    pub legibility: f64,
    pub nom_dev: f64,
    pub completed: bool,
    /// Optimizer convergence; empty for the speed-adjusted playback.
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub failed: bool,
    pub error: String,
    /// SHA-256 of the scenario's nominal trajectory file.
    pub nominal_hash: String,
}

impl ResultRow {
    pub fn key(&self) -> (Family, u64, Method) {
        (self.family, self.seed, self.method)
    }

    fn failure(family: Family, seed: u64, method: Method, hash: &str, err: &Error) -> Self {
        Self {
            family,
            seed,
            method,
            dst_pct: f64::NAN,
            vis_pct: f64::NAN,
            legibility: f64::NAN,
            nom_dev: f64::NAN,
            completed: false,
            converged: None,
            iterations: None,
            failed: true,
            error: err.to_string(),
            nominal_hash: hash.to_string(),
        }
    }
}

/// Robot motion produced by one method.
#[derive(Debug, Clone)]
pub enum MethodOutput {
    Trajectory(JointTrajectory),
    Trace(ExecutionTrace),
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub row: ResultRow,
    pub output: Option<MethodOutput>,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub scenarios: Vec<Scenario>,
    pub records: Vec<RunRecord>,
}

impl BenchmarkOutput {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.records.iter().map(|r| r.row.clone()).collect()
    }
}

/// Everything the methods share for one scenario.
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub truth: HumanTrajectory,
    pub nominal: OptResult,
    pub nominal_hash: String,
    pub context: CostContext,
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Ground truth, nominal, prediction and cost context for `scenario`.
pub fn prepare_scenario(
    cfg: &RunConfig,
    chain: &ChainSpec,
    offsets: &SkeletonOffsets,
    scenario: Scenario,
) -> Result<PreparedScenario> {
    let g = &cfg.geometry;
    let grid = g.robot_grid();
    let truth = scenario.human_truth(g, offsets)?;
    let nominal = nominal_trajectory(
        chain,
        &scenario.robot_start,
        &scenario.robot_goal,
        &scenario.obstacles,
        grid,
        cfg.nominal,
        &cfg.optimizer,
    )?;
    let nominal_hash = content_hash(&nominal.trajectory.to_text());

    let observed = truth.prefix((cfg.predictor.observation_window * truth.rate()).round() as usize)?;
    let step = 1.0 / truth.rate();
    let t_last = (observed.len() - 1) as f64 * step;
    let t_end = grid.t0 + grid.dt * (grid.waypoints - 1) as f64;
    let horizon = ((t_end - t_last) / step).ceil() as usize + 1;
    let goal = cfg.predict_with_goal.then_some(&scenario.human_script.arm_goal);
    let arm = predict(&observed, horizon, step, goal, &cfg.predictor)?;
    let prediction = extrapolate_skeleton(&arm, offsets)?.resample(grid.t0, grid.dt, grid.waypoints)?;
    let context = CostContext::new(
        chain.clone(),
        prediction,
        nominal.trajectory.clone(),
        scenario.human_object,
        scenario.robot_goal.clone(),
        cfg.weights.cost,
    )?;
    Ok(PreparedScenario { scenario, truth, nominal, nominal_hash, context })
}

/// Metrics of one robot motion against the scenario's ground truth.
pub fn evaluate_motion(
    cfg: &RunConfig,
    chain: &ChainSpec,
    prep: &PreparedScenario,
    output: &MethodOutput,
) -> Result<(f64, f64, f64, f64)> {
    let motion: &dyn TimedMotion = match output {
        MethodOutput::Trajectory(t) => t,
        MethodOutput::Trace(t) => t,
    };
    let th = &cfg.thresholds;
    let s = &prep.scenario;
    let dst = metric_separation(motion, chain, &prep.truth, th.separation)?;
    let vis = metric_visibility(motion, chain, &prep.truth, s.human_object, th.fov_deg)?.pct;
    let goals = GoalSet { true_goal: prep.context.goal_eef(), distractors: vec![s.human_object] };
    let leg = metric_legibility(motion, &goals, chain)?;
    let nominal = &prep.nominal.trajectory;
    let nom = match output {
        MethodOutput::Trajectory(t) => metric_nominal_dev(t.waypoints(), nominal, chain)?,
        MethodOutput::Trace(t) => {
            let times: Vec<f64> = nominal.timed_configs().iter().map(|(t, _)| *t).collect();
            metric_nominal_dev(&t.sample_at(&times)?, nominal, chain)?
        }
    };
    Ok((dst, vis, leg, nom))
}

fn run_method(cfg: &RunConfig, chain: &ChainSpec, prep: &PreparedScenario, method: Method) -> Result<(MethodOutput, Option<bool>, Option<usize>)> {
    let w = &cfg.weights;
    let opt = |res: OptResult| (MethodOutput::Trajectory(res.trajectory), Some(res.converged), Some(res.iterations));
    Ok(match method {
        Method::Comoto => opt(optimize(&prep.context, &w.comoto, &prep.nominal.trajectory, &cfg.optimizer)?),
        Method::Nominal => (
            MethodOutput::Trajectory(prep.nominal.trajectory.clone()),
            Some(prep.nominal.converged),
            Some(prep.nominal.iterations),
        ),
        Method::SpeedAdjusted => {
            let trace = speed_adjusted_execute(&prep.nominal.trajectory, &prep.truth, chain, &cfg.speed)?;
            (MethodOutput::Trace(trace), None, None)
        }
        Method::Legible => opt(legible_optimize(&prep.context, &w.legible, &cfg.optimizer)?),
        Method::DistVis => opt(distvis_optimize(&prep.context, &w.distvis, &cfg.optimizer)?),
    })
}

/// All five methods on one scenario. Never fails: errors become rows.
pub fn run_scenario(
    cfg: &RunConfig,
    chain: &ChainSpec,
    offsets: &SkeletonOffsets,
    scenario: Scenario,
) -> Vec<RunRecord> {
    let (family, seed) = (scenario.family, scenario.seed);
    let prep = match prepare_scenario(cfg, chain, offsets, scenario) {
        Ok(p) => p,
        Err(e) => {
            return Method::ALL
                .iter()
                .map(|&m| RunRecord { row: ResultRow::failure(family, seed, m, "", &e), output: None, wall_time: 0.0 })
                .collect()
        }
    };
    Method::ALL
        .iter()
        .map(|&method| {
            let started = Instant::now();
            let result = run_method(cfg, chain, &prep, method)
                .and_then(|(out, conv, iters)| evaluate_motion(cfg, chain, &prep, &out).map(|m| (out, m, conv, iters)));
            let wall_time = started.elapsed().as_secs_f64();
            match result {
                Ok((out, (dst, vis, leg, nom), converged, iterations)) => {
                    let completed = match &out {
                        MethodOutput::Trace(t) => t.completed,
                        MethodOutput::Trajectory(_) => true,
                    };
                    RunRecord {
                        row: ResultRow {
                            family,
                            seed,
                            method,
                            dst_pct: dst,
                            vis_pct: vis,
                            legibility: leg,
                            nom_dev: nom,
                            completed,
                            converged,
                            iterations,
                            failed: false,
                            error: String::new(),
                            nominal_hash: prep.nominal_hash.clone(),
                        },
                        output: Some(out),
                        wall_time,
                    }
                }
                Err(e) => RunRecord {
                    row: ResultRow::failure(family, seed, method, &prep.nominal_hash, &e),
                    output: None,
                    wall_time,
                },
            }
        })
        .collect()
}

/// Every (family, seed, method) of `cfg`, sorted by that key.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let chain = cfg.load_chain()?;
    let offsets = cfg.load_skeleton()?;
    let mut scenarios = Vec::new();
    for &family in &cfg.families {
        for &seed in &cfg.seeds {
            scenarios.push(generate_scenario(family, seed, &chain, &cfg.geometry)?);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::contract(format!("worker pool: {e}")))?;
    let mut records: Vec<RunRecord> = pool.install(|| {
        scenarios
            .par_iter()
            .flat_map_iter(|s| run_scenario(cfg, &chain, &offsets, s.clone()))
            .collect()
    });
    records.sort_by(|a, b| a.row.key().cmp(&b.row.key()));
    scenarios.sort_by_key(|s| (s.family, s.seed));
    Ok(BenchmarkOutput { scenarios, records })
}

/// Per-family, per-method rows, failed runs excluded.
pub fn group_rows(rows: &[ResultRow]) -> BTreeMap<(Family, Method), Vec<&ResultRow>> {
    let mut out: BTreeMap<(Family, Method), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.failed) {
        out.entry((r.family, r.method)).or_default().push(r);
    }
    out
}
