//! Synthetic human reaches and the Gaussian-tube motion predictor.
//!
//! Ground truth is generated from a minimum-jerk reach of the four right-arm
//! keypoints plus smoothed noise. The rest of the skeleton rides on fixed
//! offsets from the right shoulder. The predictor observes a prefix and
//! emits, per joint and horizon step, an isotropic Gaussian whose variance
//! grows with look-ahead time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanJoint {
    RightShoulder,
    RightElbow,
    RightWrist,
    RightPalm,
    Neck,
    Head,
    Torso,
    LeftShoulder,
    LeftElbow,
    LeftWrist,
    LeftPalm,
}

impl HumanJoint {
    pub const ALL: [HumanJoint; 11] = [
        HumanJoint::RightShoulder,
        HumanJoint::RightElbow,
        HumanJoint::RightWrist,
        HumanJoint::RightPalm,
        HumanJoint::Neck,
        HumanJoint::Head,
        HumanJoint::Torso,
        HumanJoint::LeftShoulder,
        HumanJoint::LeftElbow,
        HumanJoint::LeftWrist,
        HumanJoint::LeftPalm,
    ];

    pub const RIGHT_ARM: [HumanJoint; 4] = [
        HumanJoint::RightShoulder,
        HumanJoint::RightElbow,
        HumanJoint::RightWrist,
        HumanJoint::RightPalm,
    ];

    /// Joints placed by fixed offsets from the right shoulder.
    pub const OFFSET_JOINTS: [HumanJoint; 7] = [
        HumanJoint::Neck,
        HumanJoint::Head,
        HumanJoint::Torso,
        HumanJoint::LeftShoulder,
        HumanJoint::LeftElbow,
        HumanJoint::LeftWrist,
        HumanJoint::LeftPalm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HumanJoint::RightShoulder => "right_shoulder",
            HumanJoint::RightElbow => "right_elbow",
            HumanJoint::RightWrist => "right_wrist",
            HumanJoint::RightPalm => "right_palm",
            HumanJoint::Neck => "neck",
            HumanJoint::Head => "head",
            HumanJoint::Torso => "torso",
            HumanJoint::LeftShoulder => "left_shoulder",
            HumanJoint::LeftElbow => "left_elbow",
            HumanJoint::LeftWrist => "left_wrist",
            HumanJoint::LeftPalm => "left_palm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|j| j.name() == name)
    }
}

/// Positions of the four tracked right-arm keypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPose {
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    pub palm: Vec3,
}

impl ArmPose {
    pub fn points(&self) -> [Vec3; 4] {
        [self.shoulder, self.elbow, self.wrist, self.palm]
    }

    pub fn get(&self, joint: HumanJoint) -> Option<Vec3> {
        match joint {
            HumanJoint::RightShoulder => Some(self.shoulder),
            HumanJoint::RightElbow => Some(self.elbow),
            HumanJoint::RightWrist => Some(self.wrist),
            HumanJoint::RightPalm => Some(self.palm),
            _ => None,
        }
    }
}

/// Fixed offsets (meters, world frame) of the untracked joints from the
/// right shoulder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkeletonOffsets(pub BTreeMap<HumanJoint, Vec3>);

impl Default for SkeletonOffsets {
    /// Seated person facing -x, so the right side points toward +y.
    fn default() -> Self {
        let offsets = [
            (HumanJoint::Neck, Vec3::new(0.0, -0.18, 0.08)),
            (HumanJoint::Head, Vec3::new(0.0, -0.18, 0.28)),
            (HumanJoint::Torso, Vec3::new(0.02, -0.18, -0.25)),
            (HumanJoint::LeftShoulder, Vec3::new(0.0, -0.36, 0.0)),
            (HumanJoint::LeftElbow, Vec3::new(-0.06, -0.40, -0.26)),
            (HumanJoint::LeftWrist, Vec3::new(-0.30, -0.38, -0.34)),
            (HumanJoint::LeftPalm, Vec3::new(-0.37, -0.37, -0.35)),
        ];
        Self(offsets.into_iter().collect())
    }
}

impl SkeletonOffsets {
    pub fn zeros() -> Self {
        Self(HumanJoint::OFFSET_JOINTS.iter().map(|&j| (j, Vec3::zeros())).collect())
    }

    pub fn get(&self, joint: HumanJoint) -> Vec3 {
        self.0.get(&joint).copied().unwrap_or_else(Vec3::zeros)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, [f64; 3]> =
            toml::from_str(text).map_err(|e| Error::parse("<offsets>", e))?;
        let mut map = BTreeMap::new();
        for (name, v) in raw {
            let joint = HumanJoint::from_name(&name)
                .filter(|j| HumanJoint::OFFSET_JOINTS.contains(j))
                .ok_or_else(|| Error::parse("<offsets>", format!("unknown offset joint `{name}`")))?;
            map.insert(joint, Vec3::from(v));
        }
        Ok(Self(map))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        let mut s = String::from("# joint name -> offset from the right shoulder, meters (world frame)\n");
        for (j, v) in &self.0 {
            let _ = writeln!(s, "{} = [{}, {}, {}]", j.name(), v.x, v.y, v.z);
        }
        s
    }
}

/// Sampled 3D keypoint tracks. Sample `k` is at time `k / rate` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanTrajectory {
    rate: f64,
    tracks: BTreeMap<HumanJoint, Vec<Vec3>>,
}

impl HumanTrajectory {
    pub fn new(rate: f64, tracks: BTreeMap<HumanJoint, Vec<Vec3>>) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::contract(format!("rate must be positive, got {rate}")));
        }
        let mut lens = tracks.values().map(Vec::len);
        let n = lens.next().ok_or_else(|| Error::contract("trajectory has no joints"))?;
        if n == 0 || lens.any(|l| l != n) {
            return Err(Error::contract("joint tracks must be non-empty and equally long"));
        }
        Ok(Self { rate, tracks })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.tracks.values().next().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 / self.rate
    }

    pub fn joints(&self) -> impl Iterator<Item = HumanJoint> + '_ {
        self.tracks.keys().copied()
    }

    pub fn track(&self, joint: HumanJoint) -> Option<&[Vec3]> {
        self.tracks.get(&joint).map(Vec::as_slice)
    }

    /// Position at time `t`, linearly interpolated; held constant before the
    /// first and after the last sample (the person stays put once done).
    pub fn position(&self, joint: HumanJoint, t: f64) -> Option<Vec3> {
        let track = self.tracks.get(&joint)?;
        let s = (t * self.rate).clamp(0.0, (track.len() - 1) as f64);
        let k = s.floor() as usize;
        if k + 1 >= track.len() {
            return Some(track[track.len() - 1]);
        }
        let f = s - k as f64;
        Some(track[k] + (track[k + 1] - track[k]) * f)
    }

    /// All joint positions at time `t`.
    pub fn positions(&self, t: f64) -> Vec<Vec3> {
        self.tracks
            .keys()
            .map(|&j| self.position(j, t).expect("joint present"))
            .collect()
    }

    /// The first `samples` samples.
    pub fn prefix(&self, samples: usize) -> Result<Self> {
        if samples == 0 || samples > self.len() {
            return Err(Error::contract(format!(
                "prefix of {samples} samples from a trajectory of {}",
                self.len()
            )));
        }
        let tracks = self
            .tracks
            .iter()
            .map(|(&j, t)| (j, t[..samples].to_vec()))
            .collect();
        Self::new(self.rate, tracks)
    }

    /// Largest distance any joint gets from its first sample.
    pub fn max_displacement(&self) -> f64 {
        self.tracks
            .values()
            .flat_map(|t| t.iter().map(move |p| (p - t[0]).norm()))
            .fold(0.0, f64::max)
    }

    /// Largest distance between consecutive samples of any joint.
    pub fn max_step(&self) -> f64 {
        self.tracks
            .values()
            .flat_map(|t| t.windows(2).map(|w| (w[1] - w[0]).norm()))
            .fold(0.0, f64::max)
    }

    /// Header lines `# rate=` and `# joints=`, then `sample,joint,x,y,z` rows
    /// ordered by sample, then by the joint order of the header.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# human trajectory; positions in meters, world frame\n");
        let _ = writeln!(s, "# rate={}", self.rate);
        let names: Vec<&str> = self.joints().map(HumanJoint::name).collect();
        let _ = writeln!(s, "# joints={}", names.join(","));
        s.push_str("sample,joint,x,y,z\n");
        for k in 0..self.len() {
            for (j, track) in &self.tracks {
                let p = track[k];
                let _ = writeln!(s, "{k},{},{},{},{}", j.name(), p.x, p.y, p.z);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::parse("<human trajectory>", m);
        let mut rate = None;
        let mut tracks: BTreeMap<HumanJoint, Vec<Vec3>> = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("rate=") {
                    rate = Some(v.parse::<f64>().map_err(|e| bad(format!("rate: {e}")))?);
                } else if let Some(v) = rest.strip_prefix("joints=") {
                    for name in v.split(',') {
                        let j = HumanJoint::from_name(name.trim())
                            .ok_or_else(|| bad(format!("unknown joint `{name}`")))?;
                        tracks.insert(j, Vec::new());
                    }
                }
                continue;
            }
            if line.starts_with("sample,") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(bad(format!("expected 5 columns in `{line}`")));
            }
            let joint = HumanJoint::from_name(cols[1])
                .ok_or_else(|| bad(format!("unknown joint `{}`", cols[1])))?;
            let mut xyz = [0.0; 3];
            for (v, c) in xyz.iter_mut().zip(&cols[2..]) {
                *v = c.parse().map_err(|e| bad(format!("`{line}`: {e}")))?;
            }
            tracks
                .get_mut(&joint)
                .ok_or_else(|| bad(format!("joint `{}` missing from header", cols[1])))?
                .push(Vec3::from(xyz));
        }
        Self::new(rate.ok_or_else(|| bad("missing rate header".into()))?, tracks)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }
}

/// A scripted right-arm reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachScript {
    pub arm_start: ArmPose,
    pub arm_goal: ArmPose,
    pub move_duration: f64,
    pub total_duration: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

/// Minimum-jerk position fraction at normalized time `tau`, clamped to [0, 1].
pub fn min_jerk_fraction(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Moving-average window for reach noise, seconds.
const NOISE_WINDOW: f64 = 0.2;

/// Sample a reach at `rate` Hz. Right-arm joints follow a minimum-jerk
/// profile plus smoothed noise and freeze after `move_duration`; the other
/// joints follow the right shoulder at fixed offsets.
pub fn generate_reach(
    script: &ReachScript,
    rate: f64,
    offsets: &SkeletonOffsets,
) -> Result<HumanTrajectory> {
    if !(rate > 0.0) {
        return Err(Error::contract(format!("rate must be positive, got {rate}")));
    }
    if !(script.move_duration > 0.0) || script.move_duration > script.total_duration {
        return Err(Error::contract("need 0 < move_duration <= total_duration"));
    }
    if !(script.noise_scale >= 0.0) {
        return Err(Error::contract("noise_scale must be non-negative"));
    }
    let n = (script.total_duration * rate).round() as usize + 1;
    let k_move = (script.move_duration * rate).round() as usize;
    let window = ((NOISE_WINDOW * rate).round() as usize).max(1);
    let gain = script.noise_scale * (window as f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let starts = script.arm_start.points();
    let goals = script.arm_goal.points();
    let mut tracks = BTreeMap::new();
    for (a, joint) in HumanJoint::RIGHT_ARM.iter().enumerate() {
        // Always draw the white noise so the stream layout is independent
        // of noise_scale.
        let white: Vec<[f64; 3]> = (0..n + window - 1)
            .map(|_| {
                [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ]
            })
            .collect();
        let track = (0..n)
            .map(|k| {
                let kh = k.min(k_move);
                let frac = min_jerk_fraction(kh as f64 / rate / script.move_duration);
                let mut p = starts[a] + (goals[a] - starts[a]) * frac;
                if gain > 0.0 {
                    let mut avg = [0.0; 3];
                    for w in &white[kh..kh + window] {
                        for (s, v) in avg.iter_mut().zip(w) {
                            *s += v;
                        }
                    }
                    p += Vec3::from(avg) * (gain / window as f64);
                }
                p
            })
            .collect::<Vec<_>>();
        tracks.insert(*joint, track);
    }
    let shoulder = tracks[&HumanJoint::RightShoulder].clone();
    for joint in HumanJoint::OFFSET_JOINTS {
        let off = offsets.get(joint);
        tracks.insert(joint, shoulder.iter().map(|p| p + off).collect());
    }
    HumanTrajectory::new(rate, tracks)
}

/// Mean and covariance of one predicted keypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian3 {
    pub mean: Vec3,
    pub cov: Matrix3<f64>,
}

impl Gaussian3 {
    /// `sqrt(trace / 3)`: the standard deviation for an isotropic covariance.
    pub fn scalar_sigma(&self) -> f64 {
        (self.cov.trace() / 3.0).max(0.0).sqrt()
    }
}

/// Per joint, per horizon step Gaussian predictions. Step `k` is at absolute
/// time `t_start + k * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedHumanTrajectory {
    t_start: f64,
    step: f64,
    tracks: BTreeMap<HumanJoint, Vec<Gaussian3>>,
}

impl PredictedHumanTrajectory {
    pub fn new(
        t_start: f64,
        step: f64,
        tracks: BTreeMap<HumanJoint, Vec<Gaussian3>>,
    ) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::contract("prediction step must be positive"));
        }
        let horizon = tracks.values().next().map_or(0, Vec::len);
        if horizon == 0 || tracks.values().any(|t| t.len() != horizon) {
            return Err(Error::contract("prediction tracks must be non-empty and equally long"));
        }
        for (j, track) in &tracks {
            for (k, g) in track.iter().enumerate() {
                if (g.cov - g.cov.transpose()).amax() > 1e-12 {
                    return Err(Error::contract(format!(
                        "covariance of {} at step {k} is not symmetric",
                        j.name()
                    )));
                }
                if Cholesky::new(g.cov).is_none() || !g.mean.iter().all(|v| v.is_finite()) {
                    return Err(Error::contract(format!(
                        "covariance of {} at step {k} is not positive definite",
                        j.name()
                    )));
                }
            }
        }
        Ok(Self {
            t_start,
            step,
            tracks,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> usize {
        self.tracks.values().next().map_or(0, Vec::len)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.step
    }

    pub fn joints(&self) -> impl Iterator<Item = HumanJoint> + '_ {
        self.tracks.keys().copied()
    }

    pub fn tracks(&self) -> &BTreeMap<HumanJoint, Vec<Gaussian3>> {
        &self.tracks
    }

    pub fn track(&self, joint: HumanJoint) -> Option<&[Gaussian3]> {
        self.tracks.get(&joint).map(Vec::as_slice)
    }

    /// Linearly interpolate means and covariances onto `n` times
    /// `t0 + k * dt`, holding the first/last step outside the span.
    pub fn resample(&self, t0: f64, dt: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("resample to zero steps"));
        }
        let last = (self.horizon() - 1) as f64;
        let tracks = self
            .tracks
            .iter()
            .map(|(&j, track)| {
                let out = (0..n)
                    .map(|k| {
                        let s = ((t0 + k as f64 * dt - self.t_start) / self.step).clamp(0.0, last);
                        let i = s.floor() as usize;
                        if i as f64 >= last {
                            return track[track.len() - 1];
                        }
                        let f = s - i as f64;
                        let (a, b) = (&track[i], &track[i + 1]);
                        Gaussian3 {
                            mean: a.mean + (b.mean - a.mean) * f,
                            cov: a.cov + (b.cov - a.cov) * f,
                        }
                    })
                    .collect();
                (j, out)
            })
            .collect();
        Self::new(t0, dt, tracks)
    }

    /// Every covariance multiplied by `factor`.
    pub fn scale_covariance(&self, factor: f64) -> Result<Self> {
        self.map_cov(|c| c * factor)
    }

    /// Every covariance replaced by the identity (meters^2).
    pub fn with_identity_covariance(&self) -> Self {
        self.map_cov(|_| Matrix3::identity()).expect("identity is positive definite")
    }

    fn map_cov(&self, f: impl Fn(&Matrix3<f64>) -> Matrix3<f64>) -> Result<Self> {
        let tracks = self
            .tracks
            .iter()
            .map(|(&j, t)| {
                (
                    j,
                    t.iter()
                        .map(|g| Gaussian3 {
                            mean: g.mean,
                            cov: f(&g.cov),
                        })
                        .collect(),
                )
            })
            .collect();
        Self::new(self.t_start, self.step, tracks)
    }
}

/// Predictor tuning. Lengths in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorParams {
    /// Standard deviation at zero look-ahead.
    pub sigma0: f64,
    /// Growth of the standard deviation per second of look-ahead.
    pub kappa: f64,
    pub sigma_floor: f64,
    /// Length of the observed prefix required before predicting.
    pub observation_window: f64,
    /// Backward-difference span for the velocity estimate.
    pub velocity_window: f64,
    /// Lower bound on the estimated time to reach a supplied goal.
    pub min_arrival: f64,
}

impl Default for PredictorParams {
    fn default() -> Self {
        Self {
            sigma0: 0.02,
            kappa: 0.08,
            sigma_floor: 0.01,
            observation_window: 1.0,
            velocity_window: 0.1,
            min_arrival: 0.2,
        }
    }
}

impl PredictorParams {
    /// Isotropic variance at `t_ahead` seconds of look-ahead.
    pub fn variance(&self, t_ahead: f64) -> f64 {
        let v = self.sigma0 * self.sigma0 + (self.kappa * t_ahead).powi(2);
        v.max(self.sigma_floor * self.sigma_floor)
    }
}

/// Quintic from `(p0, v0, a0 = 0)` to `(goal, 0, 0)` over `duration`,
/// evaluated at `t` and held at the goal afterwards.
fn quintic_to_goal(p0: Vec3, v0: Vec3, goal: Vec3, duration: f64, t: f64) -> Vec3 {
    if t >= duration {
        return goal;
    }
    let d = goal - p0;
    let tt = duration;
    let c3 = (d * 10.0 - v0 * (6.0 * tt)) / tt.powi(3);
    let c4 = (d * -15.0 + v0 * (8.0 * tt)) / tt.powi(4);
    let c5 = (d * 6.0 - v0 * (3.0 * tt)) / tt.powi(5);
    p0 + v0 * t + c3 * t.powi(3) + c4 * t.powi(4) + c5 * t.powi(5)
}

/// Predict the right arm `horizon` steps ahead of the last observed sample.
///
/// Without a goal the mean is a constant-velocity extrapolation. With a
/// goal the mean blends from that extrapolation into a quintic that brings
/// each joint to rest at the goal, the blend weight ramping linearly from 0
/// at the first step to 1 at the last. Arrival time is estimated from the
/// palm as `1.875 * remaining / speed`, which is exact at the midpoint of a
/// minimum-jerk reach, and bounded to the prediction horizon.
pub fn predict(
    observed: &HumanTrajectory,
    horizon: usize,
    step: f64,
    goal: Option<&ArmPose>,
    params: &PredictorParams,
) -> Result<PredictedHumanTrajectory> {
    if horizon == 0 {
        return Err(Error::contract("prediction horizon must be at least 1"));
    }
    if !(step > 0.0) {
        return Err(Error::contract("prediction step must be positive"));
    }
    let rate = observed.rate();
    let required = (params.observation_window * rate).round() as usize;
    if observed.len() < required.max(2) {
        return Err(Error::contract(format!(
            "observation has {} samples, needs {} ({} s at {} Hz)",
            observed.len(),
            required.max(2),
            params.observation_window,
            rate
        )));
    }
    let last = observed.len() - 1;
    let span = ((params.velocity_window * rate).round() as usize).clamp(1, last);
    let t_last = last as f64 / rate;

    let mut current = BTreeMap::new();
    for joint in HumanJoint::RIGHT_ARM {
        let track = observed
            .track(joint)
            .ok_or_else(|| Error::contract(format!("observation lacks {}", joint.name())))?;
        let v = (track[last] - track[last - span]) * (rate / span as f64);
        current.insert(joint, (track[last], v));
    }

    let horizon_span = (horizon - 1) as f64 * step;
    let arrival = goal.map(|g| {
        let (p, v) = current[&HumanJoint::RightPalm];
        let remaining = (g.palm - p).norm();
        let speed = v.norm();
        let est = if speed > 1e-9 {
            1.875 * remaining / speed
        } else {
            f64::INFINITY
        };
        est.min(horizon_span).max(params.min_arrival)
    });

    let mut tracks = BTreeMap::new();
    for joint in HumanJoint::RIGHT_ARM {
        let (p0, v0) = current[&joint];
        let track = (0..horizon)
            .map(|k| {
                let t = k as f64 * step;
                let mean = match (goal, arrival) {
                    (Some(g), Some(t_arr)) => {
                        let w = if horizon > 1 { k as f64 / (horizon - 1) as f64 } else { 0.0 };
                        let cv = p0 + v0 * t.min(t_arr);
                        let target = g.get(joint).expect("right-arm joint");
                        cv * (1.0 - w) + quintic_to_goal(p0, v0, target, t_arr, t) * w
                    }
                    _ => p0 + v0 * t,
                };
                Gaussian3 {
                    mean,
                    cov: Matrix3::identity() * params.variance(t),
                }
            })
            .collect();
        tracks.insert(joint, track);
    }
    PredictedHumanTrajectory::new(t_last, step, tracks)
}

/// Add the offset joints to a right-arm prediction. Their means are the
/// right-shoulder mean plus the offset; their covariances are copies of the
/// right-shoulder covariance.
pub fn extrapolate_skeleton(
    arm_pred: &PredictedHumanTrajectory,
    offsets: &SkeletonOffsets,
) -> Result<PredictedHumanTrajectory> {
    let shoulder = arm_pred
        .track(HumanJoint::RightShoulder)
        .ok_or_else(|| Error::contract("prediction lacks the right shoulder track"))?
        .to_vec();
    let mut tracks = arm_pred.tracks().clone();
    for joint in HumanJoint::OFFSET_JOINTS {
        let off = offsets.get(joint);
        tracks.insert(
            joint,
            shoulder
                .iter()
                .map(|g| Gaussian3 {
                    mean: g.mean + off,
                    cov: g.cov,
                })
                .collect(),
        );
    }
    PredictedHumanTrajectory::new(arm_pred.t_start(), arm_pred.step(), tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pose(base: Vec3) -> ArmPose {
        ArmPose {
            shoulder: base,
            elbow: base + Vec3::new(-0.05, 0.0, -0.27),
            wrist: base + Vec3::new(-0.3, 0.0, -0.35),
            palm: base + Vec3::new(-0.38, 0.0, -0.36),
        }
    }

    fn script(noise: f64) -> ReachScript {
        let start = pose(Vec3::new(1.0, 0.1, 0.45));
        let mut goal = pose(Vec3::new(0.95, 0.2, 0.45));
        goal.palm = Vec3::new(0.5, 0.4, 0.05);
        goal.wrist = Vec3::new(0.58, 0.38, 0.07);
        ReachScript {
            arm_start: start,
            arm_goal: goal,
            move_duration: 2.0,
            total_duration: 3.0,
            noise_scale: noise,
            seed: 7,
        }
    }

    #[test]
    fn min_jerk_midpoint_is_half() {
        assert_eq!(10.0 * 0.125 - 15.0 * 0.0625 + 6.0 * 0.03125, 0.5);
        assert_abs_diff_eq!(min_jerk_fraction(0.5), 0.5, epsilon = 1e-15);
        assert_eq!(min_jerk_fraction(0.0), 0.0);
        assert_eq!(min_jerk_fraction(1.0), 1.0);
    }

    #[test]
    fn noiseless_reach_hits_endpoints() {
        let s = script(0.0);
        let h = generate_reach(&s, 100.0, &SkeletonOffsets::default()).unwrap();
        assert_eq!(h.len(), 301);
        let palm = h.track(HumanJoint::RightPalm).unwrap();
        assert!((palm[0] - s.arm_start.palm).norm() <= 1e-9);
        assert!((palm[200] - s.arm_goal.palm).norm() <= 1e-9);
        assert!((palm[300] - s.arm_goal.palm).norm() <= 1e-9);
        let mid = s.arm_start.palm + (s.arm_goal.palm - s.arm_start.palm) * 0.5;
        assert!((palm[100] - mid).norm() <= 1e-12);
        let head = h.track(HumanJoint::Head).unwrap();
        let sh = h.track(HumanJoint::RightShoulder).unwrap();
        assert_abs_diff_eq!(head[150] - sh[150], SkeletonOffsets::default().get(HumanJoint::Head), epsilon = 1e-12);
    }

    #[test]
    fn stationary_reach_is_constant() {
        let mut s = script(0.0);
        s.arm_goal = s.arm_start;
        let h = generate_reach(&s, 100.0, &SkeletonOffsets::default()).unwrap();
        assert_eq!(h.max_displacement(), 0.0);
        assert!(h.track(HumanJoint::RightElbow).unwrap().iter().all(|p| *p == s.arm_start.elbow));
    }

    #[test]
    fn noisy_reach_is_deterministic_and_plausible() {
        let s = script(0.01);
        let a = generate_reach(&s, 100.0, &SkeletonOffsets::default()).unwrap();
        let b = generate_reach(&s, 100.0, &SkeletonOffsets::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.max_step() <= 0.05);
        let mut other = s.clone();
        other.seed = 8;
        assert_ne!(generate_reach(&other, 100.0, &SkeletonOffsets::default()).unwrap(), a);
    }

    #[test]
    fn rejects_bad_scripts() {
        let mut s = script(0.0);
        s.move_duration = 4.0;
        assert!(generate_reach(&s, 100.0, &SkeletonOffsets::default()).is_err());
        assert!(generate_reach(&script(0.0), 0.0, &SkeletonOffsets::default()).is_err());
    }

    fn linear_observation(v: Vec3) -> HumanTrajectory {
        let base = pose(Vec3::new(1.0, 0.0, 0.4)).points();
        let tracks = HumanJoint::RIGHT_ARM
            .iter()
            .zip(base)
            .map(|(&j, p)| (j, (0..100).map(|k| p + v * (k as f64 / 100.0)).collect()))
            .collect();
        HumanTrajectory::new(100.0, tracks).unwrap()
    }

    #[test]
    fn stationary_prediction_holds_position() {
        let obs = linear_observation(Vec3::zeros());
        let pred = predict(&obs, 50, 0.02, None, &PredictorParams::default()).unwrap();
        let last = obs.track(HumanJoint::RightWrist).unwrap()[99];
        assert!(pred.track(HumanJoint::RightWrist).unwrap().iter().all(|g| g.mean == last));
    }

    #[test]
    fn constant_velocity_matches_hand_extrapolation() {
        let v = Vec3::new(-0.3, 0.2, 0.05);
        let obs = linear_observation(v);
        let step = 0.05;
        let pred = predict(&obs, 30, step, None, &PredictorParams::default()).unwrap();
        for joint in HumanJoint::RIGHT_ARM {
            let track = obs.track(joint).unwrap();
            let last = track[99];
            for (k, g) in pred.track(joint).unwrap().iter().enumerate() {
                let oracle = Vec3::new(
                    last.x + v.x * k as f64 * step,
                    last.y + v.y * k as f64 * step,
                    last.z + v.z * k as f64 * step,
                );
                assert!((g.mean - oracle).amax() <= 1e-12);
            }
        }
        assert_abs_diff_eq!(pred.t_start(), 0.99, epsilon = 1e-15);
    }

    #[test]
    fn covariance_grows_from_sigma0() {
        let p = PredictorParams::default();
        let pred = predict(&linear_observation(Vec3::zeros()), 40, 0.05, None, &p).unwrap();
        let track = pred.track(HumanJoint::RightPalm).unwrap();
        assert_abs_diff_eq!(track[0].cov.trace(), 3.0 * p.sigma0 * p.sigma0, epsilon = 1e-15);
        for w in track.windows(2) {
            assert!(w[1].cov.trace() >= w[0].cov.trace());
        }
        let floored = PredictorParams { sigma0: 0.001, ..p };
        assert_eq!(floored.variance(0.0), 0.01 * 0.01);
    }

    #[test]
    fn short_observation_is_rejected() {
        let obs = linear_observation(Vec3::zeros()).prefix(50).unwrap();
        assert!(matches!(
            predict(&obs, 10, 0.1, None, &PredictorParams::default()),
            Err(Error::Contract(_))
        ));
        assert!(predict(&linear_observation(Vec3::zeros()), 0, 0.1, None, &PredictorParams::default()).is_err());
    }

    #[test]
    fn goal_blend_reaches_true_goal() {
        let s = script(0.0);
        let truth = generate_reach(&s, 100.0, &SkeletonOffsets::default()).unwrap();
        let obs = truth.prefix(100).unwrap();
        let pred = predict(&obs, 202, 0.01, Some(&s.arm_goal), &PredictorParams::default()).unwrap();
        for joint in HumanJoint::RIGHT_ARM {
            let end = pred.track(joint).unwrap().last().unwrap().mean;
            assert!((end - s.arm_goal.get(joint).unwrap()).norm() <= 0.05);
        }
    }

    #[test]
    fn skeleton_offsets_follow_shoulder() {
        let obs = linear_observation(Vec3::new(-0.2, 0.1, 0.0));
        let arm = predict(&obs, 20, 0.1, None, &PredictorParams::default()).unwrap();
        let zero = extrapolate_skeleton(&arm, &SkeletonOffsets::zeros()).unwrap();
        assert_eq!(zero.track(HumanJoint::Head).unwrap()[5].mean, arm.track(HumanJoint::RightShoulder).unwrap()[5].mean);

        let mut offsets = SkeletonOffsets::zeros();
        offsets.0.insert(HumanJoint::Head, Vec3::new(0.0, 0.0, 0.25));
        let full = extrapolate_skeleton(&arm, &offsets).unwrap();
        assert_eq!(full.joints().count(), 11);
        let sh = full.track(HumanJoint::RightShoulder).unwrap();
        let head = full.track(HumanJoint::Head).unwrap();
        for (a, b) in sh.iter().zip(head) {
            assert_abs_diff_eq!(b.mean, a.mean + Vec3::new(0.0, 0.0, 0.25), epsilon = 1e-15);
            assert_eq!(a.cov, b.cov);
        }

        let mut no_shoulder = arm.tracks().clone();
        no_shoulder.remove(&HumanJoint::RightShoulder);
        let broken = PredictedHumanTrajectory::new(0.0, 0.1, no_shoulder).unwrap();
        assert!(extrapolate_skeleton(&broken, &offsets).is_err());
    }

    #[test]
    fn resample_interpolates_linearly() {
        let obs = linear_observation(Vec3::new(0.1, 0.0, 0.0));
        let pred = predict(&obs, 11, 0.1, None, &PredictorParams::default()).unwrap();
        let rs = pred.resample(pred.t_start() + 0.05, 0.1, 3).unwrap();
        let a = &pred.track(HumanJoint::RightPalm).unwrap()[0];
        let b = &pred.track(HumanJoint::RightPalm).unwrap()[1];
        let m = &rs.track(HumanJoint::RightPalm).unwrap()[0];
        assert_abs_diff_eq!(m.mean, (a.mean + b.mean) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cov, (a.cov + b.cov) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn text_roundtrip_and_offsets_file() {
        let h = generate_reach(&script(0.004), 100.0, &SkeletonOffsets::default()).unwrap();
        assert_eq!(HumanTrajectory::from_text(&h.to_text()).unwrap(), h);
        let o = SkeletonOffsets::default();
        assert_eq!(SkeletonOffsets::from_toml(&o.to_toml()).unwrap(), o);
        assert!(SkeletonOffsets::from_toml("right_palm = [0, 0, 0]").is_err());
    }
}
