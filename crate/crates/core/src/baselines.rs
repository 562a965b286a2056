//! Comparison planners: the collision-avoiding nominal, speed-adjusted
//! execution of that nominal, and two single-criterion optimizers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::costs::{
    cost_smoothness, smoothness_gradient, CostContext, CostDiagnostics, CostReport, CostWeights,
    TrajectoryObjective,
};
use crate::error::{Error, Result};
use crate::human_motion::HumanTrajectory;
use crate::kinematics::{fk_points, ChainSpec, JointConfig, JointTrajectory, Vec3};
use crate::metrics::{min_separation, TimedMotion};
use crate::optimizer::{minimize, optimize, straightline_joint_init, OptResult, OptimizerOptions};

/// Static spherical obstacle in the workspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NominalParams {
    pub smooth_weight: f64,
    pub obstacle_weight: f64,
    /// Clearance added to every obstacle radius, meters.
    pub margin: f64,
}

impl Default for NominalParams {
    fn default() -> Self {
        Self { smooth_weight: 1.0, obstacle_weight: 1e5, margin: 0.05 }
    }
}

/// Smoothness plus a squared hinge on penetration of the padded obstacles.
pub struct NominalObjective<'a> {
    pub chain: &'a ChainSpec,
    pub obstacles: &'a [Sphere],
    pub params: NominalParams,
}

impl NominalObjective<'_> {
    /// Smallest clearance between any body point and any obstacle surface.
    pub fn min_clearance(&self, traj: &JointTrajectory) -> Result<f64> {
        let mut best = f64::INFINITY;
        for q in traj.waypoints() {
            for p in fk_points(self.chain, q)? {
                for s in self.obstacles {
                    best = best.min((p - s.center).norm() - s.radius);
                }
            }
        }
        Ok(best)
    }
}

impl TrajectoryObjective for NominalObjective<'_> {
    fn evaluate(&self, traj: &JointTrajectory, with_gradient: bool) -> Result<CostReport> {
        let smooth = cost_smoothness(traj);
        let n = traj.len();
        let dof = traj.dof();
        let mut gradient = Vec::new();
        if with_gradient {
            gradient = smoothness_gradient(traj);
            for g in &mut gradient {
                *g *= self.params.smooth_weight;
            }
        }
        let mut obstacle = 0.0;
        for (t, q) in traj.waypoints().iter().enumerate() {
            let frames = self.chain.frames(q)?;
            let mut out = vec![0.0; dof];
            let mut touched = false;
            for (i, p) in frames.origins.iter().enumerate() {
                for s in self.obstacles {
                    let r = p - s.center;
                    let dist = r.norm();
                    let h = s.radius + self.params.margin - dist;
                    if h <= 0.0 {
                        continue;
                    }
                    obstacle += h * h;
                    if with_gradient && t > 0 && t < n - 1 && dist > 1e-12 {
                        let f = r * (-2.0 * h * self.params.obstacle_weight / dist);
                        frames.add_jacobian_transpose(i, &f, &mut out);
                        touched = true;
                    }
                }
            }
            if touched {
                for (j, v) in out.iter().enumerate() {
                    gradient[(t - 1) * dof + j] += v;
                }
            }
        }
        let mut per_cost = BTreeMap::new();
        per_cost.insert("obstacle".to_string(), obstacle);
        per_cost.insert("smoothness".to_string(), smooth);
        Ok(CostReport {
            total: self.params.smooth_weight * smooth + self.params.obstacle_weight * obstacle,
            per_cost,
            gradient,
            diagnostics: CostDiagnostics::default(),
        })
    }
}

/// Time-parametrized grid for a nominal plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub waypoints: usize,
    pub dt: f64,
    pub t0: f64,
}

/// Smooth, obstacle-avoiding plan from `start` to `goal` that ignores the
/// human entirely.
pub fn nominal_trajectory(
    chain: &ChainSpec,
    start: &JointConfig,
    goal: &JointConfig,
    obstacles: &[Sphere],
    grid: TimeGrid,
    params: NominalParams,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    if !chain.within_limits(start) || !chain.within_limits(goal) {
        return Err(Error::contract("start or goal violates the joint limits"));
    }
    let init = straightline_joint_init(start, goal, grid.waypoints, grid.dt, grid.t0)?;
    let obj = NominalObjective { chain, obstacles, params };
    minimize(&obj, chain, &init, opts)
}

/// Legibility-only optimization, started from the nominal. `w` normally
/// carries legibility plus a small smoothness regularizer.
pub fn legible_optimize(ctx: &CostContext, w: &CostWeights, opts: &OptimizerOptions) -> Result<OptResult> {
    optimize(ctx, w, ctx.nominal(), opts)
}

/// Distance and visibility optimization with every predicted covariance
/// replaced by the identity, started from the nominal. `w` normally carries
/// distance, visibility and a small nominal regularizer.
pub fn distvis_optimize(ctx: &CostContext, w: &CostWeights, opts: &OptimizerOptions) -> Result<OptResult> {
    let plain = ctx.with_prediction(ctx.prediction().with_identity_covariance())?;
    optimize(&plain, w, ctx.nominal(), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedAdjustParams {
    /// Halt at or below this separation, meters.
    pub d_stop: f64,
    /// Full speed at or above this separation, meters.
    pub d_slow: f64,
    /// Control ticks per second.
    pub control_rate: f64,
    /// Give up after this multiple of the nominal duration.
    pub timeout_factor: f64,
}

impl Default for SpeedAdjustParams {
    fn default() -> Self {
        Self { d_stop: 0.06, d_slow: 0.20, control_rate: 100.0, timeout_factor: 3.0 }
    }
}

impl SpeedAdjustParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_stop >= 0.0 && self.d_slow > self.d_stop) {
            return Err(Error::contract("speed thresholds need 0 <= d_stop < d_slow"));
        }
        if !(self.control_rate > 0.0 && self.timeout_factor >= 1.0) {
            return Err(Error::contract("control rate must be positive and the timeout at least the nominal duration"));
        }
        Ok(())
    }

    /// Speed scale in [0, 1]: 0 at or below `d_stop`, linear up to 1 at `d_slow`.
    pub fn scale(&self, d: f64) -> f64 {
        ((d - self.d_stop) / (self.d_slow - self.d_stop)).clamp(0.0, 1.0)
    }
}

/// Record of a speed-adjusted execution at the control rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub timestamps: Vec<f64>,
    pub configs: Vec<JointConfig>,
    pub min_separation: Vec<f64>,
    pub speed_scale: Vec<f64>,
    pub completed: bool,
    /// `(start time, length)` of every interval spent halted.
    pub stop_events: Vec<(f64, f64)>,
}

impl ExecutionTrace {
    pub fn duration(&self) -> f64 {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// `n` configurations at equally spaced times over the realized span.
    pub fn resample_uniform(&self, n: usize) -> Result<Vec<JointConfig>> {
        if n < 2 || self.configs.is_empty() {
            return Err(Error::contract("resampling needs a non-empty trace and n >= 2"));
        }
        let span = self.duration();
        let last = self.configs.len() - 1;
        let ticks_per_sec = if last > 0 { last as f64 / span } else { 0.0 };
        Ok((0..n)
            .map(|k| {
                let s = span * k as f64 / (n - 1) as f64 * ticks_per_sec;
                let i = (s.floor() as usize).min(last);
                let j = (i + 1).min(last);
                self.configs[i].lerp(&self.configs[j], s - i as f64)
            })
            .collect())
    }

    /// `time,q0..,min_separation,speed_scale` rows.
    /// Configurations at absolute `times`, linearly interpolated between
    /// ticks and held at the first or last tick outside the trace.
    pub fn sample_at(&self, times: &[f64]) -> Result<Vec<JointConfig>> {
        if self.configs.is_empty() {
            return Err(Error::contract("sampling needs a non-empty trace"));
        }
        let last = self.configs.len() - 1;
        Ok(times
            .iter()
            .map(|&t| {
                let k = self.timestamps.partition_point(|&x| x <= t);
                if k == 0 {
                    self.configs[0].clone()
                } else if k > last {
                    self.configs[last].clone()
                } else {
                    let (ta, tb) = (self.timestamps[k - 1], self.timestamps[k]);
                    let u = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
                    self.configs[k - 1].lerp(&self.configs[k], u)
                }
            })
            .collect())
    }

    pub fn to_csv(&self) -> String {
        let dof = self.configs.first().map_or(0, JointConfig::len);
        let mut s = String::from("time");
        for j in 0..dof {
            let _ = write!(s, ",q{j}");
        }
        s.push_str(",min_separation,speed_scale\n");
        for (k, t) in self.timestamps.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in self.configs[k].iter() {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{},{}", self.min_separation[k], self.speed_scale[k]);
        }
        s
    }
}

impl TimedMotion for ExecutionTrace {
    fn timed_configs(&self) -> Vec<(f64, &JointConfig)> {
        self.timestamps.iter().copied().zip(self.configs.iter()).collect()
    }
}

/// Play back `nominal` along its own path, slowing by the distance to the
/// actual human. Beyond its last sample the human holds still.
pub fn speed_adjusted_execute(
    nominal: &JointTrajectory,
    human_truth: &HumanTrajectory,
    chain: &ChainSpec,
    params: &SpeedAdjustParams,
) -> Result<ExecutionTrace> {
    execute_with_separation(nominal, params, |t, q| {
        let pts = fk_points(chain, q)?;
        Ok(min_separation(&pts, &human_truth.positions(t)))
    })
}

/// Speed-adjusted playback with an arbitrary separation oracle.
pub fn execute_with_separation(
    nominal: &JointTrajectory,
    params: &SpeedAdjustParams,
    mut separation: impl FnMut(f64, &JointConfig) -> Result<f64>,
) -> Result<ExecutionTrace> {
    params.validate()?;
    let t0 = nominal.t0();
    let total = nominal.duration();
    let tick = 1.0 / params.control_rate;
    let max_ticks = (params.timeout_factor * total * params.control_rate).round() as usize;

    let mut trace = ExecutionTrace {
        timestamps: Vec::new(),
        configs: Vec::new(),
        min_separation: Vec::new(),
        speed_scale: Vec::new(),
        completed: false,
        stop_events: Vec::new(),
    };
    let mut progress = 0.0;
    let mut halted_since: Option<f64> = None;
    for k in 0..=max_ticks {
        let t = t0 + k as f64 * tick;
        let q = nominal.sample(t0 + progress);
        let d = separation(t, &q)?;
        if !d.is_finite() {
            return Err(Error::NonFinite(format!("separation at t={t}")));
        }
        let s = params.scale(d);
        trace.timestamps.push(t);
        trace.configs.push(q);
        trace.min_separation.push(d);
        trace.speed_scale.push(s);

        if s == 0.0 {
            halted_since.get_or_insert(t);
        } else if let Some(h) = halted_since.take() {
            trace.stop_events.push((h, t - h));
        }
        if progress >= total - 1e-9 {
            trace.completed = true;
            break;
        }
        progress = (progress + s * tick).min(total);
    }
    if let Some(h) = halted_since {
        let end = *trace.timestamps.last().expect("at least one tick");
        trace.stop_events.push((h, end - h));
    }
    Ok(trace)
}
