//! The five trajectory costs and their weighted sum.
//!
//! Every term is a function of the end-effector or body-point positions of
//! the waypoints, except smoothness which acts on joint angles directly.
//! Gradients are accumulated as Cartesian "forces" on body points and then
//! pulled back through the position Jacobians in one pass.
//!
//! Decision variables are the interior waypoints (first and last are fixed),
//! flattened row-major: variable `(k - 1) * dof + j` is joint `j` of
//! waypoint `k`.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::human_motion::{HumanJoint, PredictedHumanTrajectory};
use crate::kinematics::{fk_eef, ChainSpec, Frames, JointConfig, JointTrajectory, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Distance,
    Visibility,
    Legibility,
    Nominal,
    Smoothness,
}

impl CostKind {
    pub const ALL: [CostKind; 5] = [
        CostKind::Distance,
        CostKind::Visibility,
        CostKind::Legibility,
        CostKind::Nominal,
        CostKind::Smoothness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostKind::Distance => "distance",
            CostKind::Visibility => "visibility",
            CostKind::Legibility => "legibility",
            CostKind::Nominal => "nominal",
            CostKind::Smoothness => "smoothness",
        }
    }
}

/// Non-negative weight per cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub alpha_dist: f64,
    pub alpha_vis: f64,
    pub alpha_legibility: f64,
    pub alpha_nominal: f64,
    pub alpha_smooth: f64,
}

impl CostWeights {
    pub fn new(dist: f64, vis: f64, legibility: f64, nominal: f64, smooth: f64) -> Result<Self> {
        let w = Self {
            alpha_dist: dist,
            alpha_vis: vis,
            alpha_legibility: legibility,
            alpha_nominal: nominal,
            alpha_smooth: smooth,
        };
        w.validate()?;
        Ok(w)
    }

    /// Weight 1 on `kind`, 0 elsewhere.
    pub fn only(kind: CostKind) -> Self {
        let mut w = Self {
            alpha_dist: 0.0,
            alpha_vis: 0.0,
            alpha_legibility: 0.0,
            alpha_nominal: 0.0,
            alpha_smooth: 0.0,
        };
        *w.get_mut(kind) = 1.0;
        w
    }

    pub fn validate(&self) -> Result<()> {
        let all = CostKind::ALL.map(|k| self.get(k));
        if all.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::contract("cost weights must be finite and non-negative"));
        }
        if all.iter().all(|&a| a == 0.0) {
            return Err(Error::contract("at least one cost weight must be positive"));
        }
        Ok(())
    }

    pub fn get(&self, kind: CostKind) -> f64 {
        match kind {
            CostKind::Distance => self.alpha_dist,
            CostKind::Visibility => self.alpha_vis,
            CostKind::Legibility => self.alpha_legibility,
            CostKind::Nominal => self.alpha_nominal,
            CostKind::Smoothness => self.alpha_smooth,
        }
    }

    pub fn get_mut(&mut self, kind: CostKind) -> &mut f64 {
        match kind {
            CostKind::Distance => &mut self.alpha_dist,
            CostKind::Visibility => &mut self.alpha_vis,
            CostKind::Legibility => &mut self.alpha_legibility,
            CostKind::Nominal => &mut self.alpha_nominal,
            CostKind::Smoothness => &mut self.alpha_smooth,
        }
    }
}

/// Numerical guards shared by the costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// Lower clamp on the squared Mahalanobis distance in the distance cost.
    pub eps_m: f64,
    /// Lower bound on the head standard deviation in the visibility cost.
    pub sigma_floor: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            eps_m: 1e-4,
            sigma_floor: 0.01,
        }
    }
}

/// Counters for steps where a cost fell back to a guard value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostDiagnostics {
    /// Distance terms that hit the `eps_m` clamp.
    pub clamped_distance_terms: usize,
    /// Steps where the eef or the object coincided with the head.
    pub degenerate_visibility_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    pub per_cost: BTreeMap<String, f64>,
    /// Gradient of `total` over the free variables; empty when not requested.
    pub gradient: Vec<f64>,
    pub diagnostics: CostDiagnostics,
}

impl CostReport {
    pub fn cost(&self, name: &str) -> f64 {
        self.per_cost.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn kind(&self, kind: CostKind) -> f64 {
        self.cost(kind.name())
    }
}

/// Anything the trajectory optimizer can minimize.
pub trait TrajectoryObjective {
    /// Value, per-term breakdown and (when asked) interior gradient.
    fn evaluate(&self, traj: &JointTrajectory, with_gradient: bool) -> Result<CostReport>;
}

#[derive(Debug, Clone, Copy)]
struct HumanSample {
    mean: Vec3,
    precision: Matrix3<f64>,
}

/// Everything the costs need besides the trajectory itself.
#[derive(Debug, Clone)]
pub struct CostContext {
    chain: ChainSpec,
    prediction: PredictedHumanTrajectory,
    nominal: JointTrajectory,
    nominal_eef: Vec<Vec3>,
    object: Vec3,
    goal_config: JointConfig,
    goal_eef: Vec3,
    legibility_weights: Vec<f64>,
    params: CostParams,
    /// `[t][i]` for every predicted joint.
    human: Vec<Vec<HumanSample>>,
    /// Head mean and scalar sigma per step.
    head: Vec<(Vec3, f64)>,
}

/// `f(t) = T - t` with `T` the waypoint count, so the first step has the
/// largest weight and the last still counts.
pub fn default_legibility_weights(n: usize) -> Vec<f64> {
    (0..n).map(|t| (n - t) as f64).collect()
}

impl CostContext {
    /// `prediction` must already be sampled on the waypoint times of
    /// `nominal` and contain a head track.
    pub fn new(
        chain: ChainSpec,
        prediction: PredictedHumanTrajectory,
        nominal: JointTrajectory,
        object: Vec3,
        goal_config: JointConfig,
        params: CostParams,
    ) -> Result<Self> {
        let n = nominal.len();
        if prediction.horizon() != n {
            return Err(Error::contract(format!(
                "prediction horizon {} differs from waypoint count {n}",
                prediction.horizon()
            )));
        }
        if nominal.dof() != chain.dof() || goal_config.len() != chain.dof() {
            return Err(Error::contract("nominal/goal dimension differs from the chain"));
        }
        let head_track = prediction
            .track(HumanJoint::Head)
            .ok_or_else(|| Error::contract("prediction has no head track"))?;
        let head = head_track
            .iter()
            .map(|g| (g.mean, g.scalar_sigma().max(params.sigma_floor)))
            .collect();
        let mut human = vec![Vec::new(); n];
        for (joint, track) in prediction.tracks() {
            for (t, g) in track.iter().enumerate() {
                let precision = g.cov.cholesky().map(|c| c.inverse()).ok_or_else(|| {
                    Error::contract(format!(
                        "covariance of {} at step {t} is not invertible",
                        joint.name()
                    ))
                })?;
                human[t].push(HumanSample {
                    mean: g.mean,
                    precision,
                });
            }
        }
        let nominal_eef = nominal.eef_path(&chain)?;
        let goal_eef = fk_eef(&chain, &goal_config)?;
        Ok(Self {
            legibility_weights: default_legibility_weights(n),
            chain,
            prediction,
            nominal,
            nominal_eef,
            object,
            goal_config,
            goal_eef,
            params,
            human,
            head,
        })
    }

    pub fn with_legibility_weights(mut self, f: Vec<f64>) -> Result<Self> {
        if f.len() != self.nominal.len() {
            return Err(Error::contract("legibility weights must have one entry per waypoint"));
        }
        if f.iter().any(|v| !(*v >= 0.0)) || !(f.iter().sum::<f64>() > 0.0) {
            return Err(Error::contract("legibility weights must be >= 0 with a positive sum"));
        }
        self.legibility_weights = f;
        Ok(self)
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn prediction(&self) -> &PredictedHumanTrajectory {
        &self.prediction
    }

    pub fn nominal(&self) -> &JointTrajectory {
        &self.nominal
    }

    pub fn object(&self) -> Vec3 {
        self.object
    }

    pub fn goal_config(&self) -> &JointConfig {
        &self.goal_config
    }

    pub fn goal_eef(&self) -> Vec3 {
        self.goal_eef
    }

    pub fn params(&self) -> &CostParams {
        &self.params
    }

    pub fn legibility_weights(&self) -> &[f64] {
        &self.legibility_weights
    }

    /// Same context with the prediction swapped (e.g. identity covariances).
    pub fn with_prediction(&self, prediction: PredictedHumanTrajectory) -> Result<Self> {
        let ctx = Self::new(
            self.chain.clone(),
            prediction,
            self.nominal.clone(),
            self.object,
            self.goal_config.clone(),
            self.params,
        )?;
        ctx.with_legibility_weights(self.legibility_weights.clone())
    }

    fn check(&self, traj: &JointTrajectory) -> Result<()> {
        if traj.len() != self.nominal.len() {
            return Err(Error::contract(format!(
                "trajectory has {} waypoints, context expects {}",
                traj.len(),
                self.nominal.len()
            )));
        }
        if traj.dof() != self.chain.dof() {
            return Err(Error::contract("trajectory dimension differs from the chain"));
        }
        Ok(())
    }

    fn frames(&self, traj: &JointTrajectory) -> Result<Vec<Frames>> {
        self.check(traj)?;
        traj.waypoints().iter().map(|q| self.chain.frames(q)).collect()
    }

    /// Evaluate all five costs and the weighted total.
    pub fn evaluate(
        &self,
        traj: &JointTrajectory,
        w: &CostWeights,
        with_gradient: bool,
    ) -> Result<CostReport> {
        w.validate()?;
        let frames = self.frames(traj)?;
        let mut acc = with_gradient.then(|| Accumulator::new(traj.len(), self.chain.num_points(), traj.dof()));
        let mut diag = CostDiagnostics::default();

        let values = [
            (CostKind::Distance, self.distance_term(&frames, w.alpha_dist, acc.as_mut(), &mut diag)),
            (CostKind::Visibility, self.visibility_term(&frames, w.alpha_vis, acc.as_mut(), &mut diag)),
            (CostKind::Legibility, self.legibility_term(&frames, w.alpha_legibility, acc.as_mut())),
            (CostKind::Nominal, self.nominal_term(&frames, w.alpha_nominal, acc.as_mut())),
            (CostKind::Smoothness, smoothness_term(traj, w.alpha_smooth, acc.as_mut())),
        ];
        let total = values.iter().map(|&(k, v)| w.get(k) * v).sum();
        let per_cost = values.iter().map(|&(k, v)| (k.name().to_string(), v)).collect();
        let gradient = acc.map_or_else(Vec::new, |a| a.finish(&frames));
        Ok(CostReport {
            total,
            per_cost,
            gradient,
            diagnostics: diag,
        })
    }

    fn distance_term(
        &self,
        frames: &[Frames],
        weight: f64,
        mut acc: Option<&mut Accumulator>,
        diag: &mut CostDiagnostics,
    ) -> f64 {
        let eps = self.params.eps_m;
        let mut total = 0.0;
        for (t, fr) in frames.iter().enumerate() {
            for h in &self.human[t] {
                for (j, p) in fr.origins.iter().enumerate() {
                    let d = h.mean - p;
                    let pd = h.precision * d;
                    let m = d.dot(&pd);
                    if m < eps {
                        total += 1.0 / eps;
                        diag.clamped_distance_terms += 1;
                        continue;
                    }
                    total += 1.0 / m;
                    if weight > 0.0 {
                        if let Some(acc) = acc.as_deref_mut() {
                            acc.force(t, j, pd * (2.0 * weight / (m * m)));
                        }
                    }
                }
            }
        }
        total
    }

    fn visibility_term(
        &self,
        frames: &[Frames],
        weight: f64,
        mut acc: Option<&mut Accumulator>,
        diag: &mut CostDiagnostics,
    ) -> f64 {
        let mut total = 0.0;
        let eef_index = self.chain.num_points() - 1;
        for (t, fr) in frames.iter().enumerate() {
            let (head, sigma) = self.head[t];
            let gaze = self.object - head;
            let to_eef = fr.eef() - head;
            let (gn, bn) = (gaze.norm(), to_eef.norm());
            if gn < 1e-9 || bn < 1e-9 {
                diag.degenerate_visibility_steps += 1;
                continue;
            }
            total += angle_between(&gaze, &to_eef) / sigma;
            if weight > 0.0 {
                if let Some(acc) = acc.as_deref_mut() {
                    let u = to_eef / bn;
                    let g = gaze / gn;
                    let perp = g - u * g.dot(&u);
                    let s = perp.norm();
                    if s > 1e-12 {
                        acc.force(t, eef_index, perp * (-weight / (s * bn * sigma)));
                    }
                }
            }
        }
        total
    }

    fn legibility_term(&self, frames: &[Frames], weight: f64, acc: Option<&mut Accumulator>) -> f64 {
        let eef: Vec<Vec3> = frames.iter().map(Frames::eef).collect();
        let f = &self.legibility_weights;
        let f_sum: f64 = f.iter().sum();
        let goal = self.goal_eef;
        let full = (goal - eef[0]).norm();

        let mut prefix = 0.0;
        let mut probs = Vec::with_capacity(eef.len());
        for (t, p) in eef.iter().enumerate() {
            if t > 0 {
                prefix += (p - eef[t - 1]).norm();
            }
            probs.push(goal_probability(prefix, (goal - p).norm(), full));
        }
        let score: f64 = probs.iter().zip(f).map(|(p, w)| p * w).sum::<f64>() / f_sum;

        if let (Some(acc), true) = (acc, weight > 0.0) {
            let eef_index = self.chain.num_points() - 1;
            // d(cost)/dp = sum_t W_t (dL_t/dp + dR_t/dp - dF/dp), W_t = f_t P_t / sum f
            let wts: Vec<f64> = probs.iter().zip(f).map(|(p, w)| weight * p * w / f_sum).collect();
            let mut suffix = 0.0;
            for s in (0..eef.len() - 1).rev() {
                suffix += wts[s + 1];
                let seg = eef[s + 1] - eef[s];
                let len = seg.norm();
                if len > 1e-12 {
                    let u = seg * (suffix / len);
                    acc.force(s + 1, eef_index, u);
                    acc.force(s, eef_index, -u);
                }
            }
            for (t, p) in eef.iter().enumerate() {
                let r = p - goal;
                let rn = r.norm();
                if rn > 1e-12 {
                    acc.force(t, eef_index, r * (wts[t] / rn));
                }
            }
            if full > 1e-12 {
                let w_all: f64 = wts.iter().sum();
                acc.force(0, eef_index, (eef[0] - goal) * (-w_all / full));
            }
        }
        -score
    }

    fn nominal_term(&self, frames: &[Frames], weight: f64, mut acc: Option<&mut Accumulator>) -> f64 {
        let eef_index = self.chain.num_points() - 1;
        let mut total = 0.0;
        for (t, fr) in frames.iter().enumerate() {
            let diff = fr.eef() - self.nominal_eef[t];
            let dn = diff.norm();
            total += dn;
            if weight > 0.0 && dn > 1e-12 {
                if let Some(acc) = acc.as_deref_mut() {
                    acc.force(t, eef_index, diff * (weight / dn));
                }
            }
        }
        total
    }
}

/// Unsigned angle between two vectors, radians in [0, pi].
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn smoothness_term(traj: &JointTrajectory, weight: f64, acc: Option<&mut Accumulator>) -> f64 {
    let inv_dt2 = 1.0 / (traj.dt() * traj.dt());
    let w = traj.waypoints();
    let mut total = 0.0;
    let mut acc = acc.filter(|_| weight > 0.0);
    for k in 0..w.len() - 2 {
        for j in 0..traj.dof() {
            let a = (w[k + 2].0[j] - 2.0 * w[k + 1].0[j] + w[k].0[j]) * inv_dt2;
            total += a * a;
            if let Some(acc) = acc.as_deref_mut() {
                let g = 2.0 * weight * a * inv_dt2;
                acc.joint(k, j, g);
                acc.joint(k + 1, j, -2.0 * g);
                acc.joint(k + 2, j, g);
            }
        }
    }
    total
}

/// Per-waypoint Cartesian forces on body points plus direct joint-space
/// gradient contributions.
struct Accumulator {
    forces: Vec<Vec<Vec3>>,
    joints: Vec<f64>,
    dof: usize,
}

impl Accumulator {
    fn new(waypoints: usize, points: usize, dof: usize) -> Self {
        Self {
            forces: vec![vec![Vec3::zeros(); points]; waypoints],
            joints: vec![0.0; waypoints * dof],
            dof,
        }
    }

    fn force(&mut self, t: usize, point: usize, f: Vec3) {
        self.forces[t][point] += f;
    }

    fn joint(&mut self, t: usize, j: usize, g: f64) {
        self.joints[t * self.dof + j] += g;
    }

    /// Interior-waypoint gradient.
    fn finish(mut self, frames: &[Frames]) -> Vec<f64> {
        let n = self.forces.len();
        for (t, fr) in frames.iter().enumerate().take(n - 1).skip(1) {
            let out = &mut self.joints[t * self.dof..(t + 1) * self.dof];
            for (j, f) in self.forces[t].iter().enumerate() {
                if f.x != 0.0 || f.y != 0.0 || f.z != 0.0 {
                    fr.add_jacobian_transpose(j, f, out);
                }
            }
        }
        self.joints[self.dof..(n - 1) * self.dof].to_vec()
    }
}

/// Probability-like goal score of a partial path: the exponentiated length
/// of the path so far plus the straight remainder, relative to the straight
/// path from the start. Equals 1 for any prefix of the straight path.
pub fn goal_probability(prefix_length: f64, remaining_straightline: f64, full_straightline: f64) -> f64 {
    (-prefix_length - remaining_straightline + full_straightline).exp()
}

/// Cartesian length of the end-effector path.
pub fn path_length(traj: &JointTrajectory, chain: &ChainSpec) -> Result<f64> {
    let eef = traj.eef_path(chain)?;
    Ok(eef.windows(2).map(|w| (w[1] - w[0]).norm()).sum())
}

pub fn cost_distance(traj: &JointTrajectory, ctx: &CostContext) -> Result<f64> {
    let frames = ctx.frames(traj)?;
    Ok(ctx.distance_term(&frames, 0.0, None, &mut CostDiagnostics::default()))
}

pub fn cost_visibility(traj: &JointTrajectory, ctx: &CostContext) -> Result<f64> {
    let frames = ctx.frames(traj)?;
    Ok(ctx.visibility_term(&frames, 0.0, None, &mut CostDiagnostics::default()))
}

/// Negative legibility score, in [-1, 0) for paths no shorter than straight.
pub fn cost_legibility(traj: &JointTrajectory, ctx: &CostContext) -> Result<f64> {
    let frames = ctx.frames(traj)?;
    Ok(ctx.legibility_term(&frames, 0.0, None))
}

pub fn cost_nominal(traj: &JointTrajectory, ctx: &CostContext) -> Result<f64> {
    let frames = ctx.frames(traj)?;
    Ok(ctx.nominal_term(&frames, 0.0, None))
}

pub fn cost_smoothness(traj: &JointTrajectory) -> f64 {
    smoothness_term(traj, 0.0, None)
}

/// Interior gradient of [`cost_smoothness`].
pub fn smoothness_gradient(traj: &JointTrajectory) -> Vec<f64> {
    let mut acc = Accumulator::new(traj.len(), 0, traj.dof());
    smoothness_term(traj, 1.0, Some(&mut acc));
    let dof = traj.dof();
    acc.joints[dof..(traj.len() - 1) * dof].to_vec()
}

/// Weighted total, per-cost breakdown and analytic interior gradient.
pub fn objective(traj: &JointTrajectory, ctx: &CostContext, w: &CostWeights) -> Result<CostReport> {
    ctx.evaluate(traj, w, true)
}

/// The weighted objective as a [`TrajectoryObjective`].
#[derive(Debug, Clone, Copy)]
pub struct WeightedObjective<'a> {
    pub ctx: &'a CostContext,
    pub weights: CostWeights,
}

impl TrajectoryObjective for WeightedObjective<'_> {
    fn evaluate(&self, traj: &JointTrajectory, with_gradient: bool) -> Result<CostReport> {
        self.ctx.evaluate(traj, &self.weights, with_gradient)
    }
}

/// Copy of `traj` with interior variables replaced by `x`.
pub fn with_interior(traj: &JointTrajectory, x: &[f64]) -> JointTrajectory {
    let mut out = traj.clone();
    let dof = traj.dof();
    let n = out.len();
    for (k, w) in out.waypoints_mut()[1..n - 1].iter_mut().enumerate() {
        w.0.copy_from_slice(&x[k * dof..(k + 1) * dof]);
    }
    out
}

pub fn interior(traj: &JointTrajectory) -> Vec<f64> {
    let n = traj.len();
    traj.waypoints()[1..n - 1]
        .iter()
        .flat_map(|w| w.0.iter().copied())
        .collect()
}

/// Central finite-difference gradient over the interior variables.
pub fn finite_difference_gradient(
    obj: &dyn TrajectoryObjective,
    traj: &JointTrajectory,
    h: f64,
) -> Result<Vec<f64>> {
    let x = interior(traj);
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = obj.evaluate(&with_interior(traj, &probe), false)?.total;
        probe[i] = x[i] - h;
        let fm = obj.evaluate(&with_interior(traj, &probe), false)?.total;
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// `max |a - b| / max(max |b|, floor)`.
pub fn relative_gradient_error(analytic: &[f64], reference: &[f64], floor: f64) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(floor);
    analytic
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale
}
