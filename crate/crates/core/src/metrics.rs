//! Evaluation metrics computed against ground-truth human motion.

use serde::{Deserialize, Serialize};

use crate::costs::angle_between;
use crate::error::{Error, Result};
use crate::human_motion::{HumanJoint, HumanTrajectory};
use crate::kinematics::{fk_eef, fk_points, ChainSpec, JointConfig, JointTrajectory, Vec3};

/// Table thresholds. Overridable per run through the run config.
pub mod thresholds {
    /// Separation counted as "safe", meters.
    pub const SEPARATION: f64 = 0.20;
    /// Human field of view, degrees.
    pub const FIELD_OF_VIEW_DEG: f64 = 160.0;
    /// Speed-adjusted execution halts below this separation, meters.
    pub const STOP_DISTANCE: f64 = 0.06;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricThresholds {
    pub separation: f64,
    pub fov_deg: f64,
    pub stop_distance: f64,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        Self {
            separation: thresholds::SEPARATION,
            fov_deg: thresholds::FIELD_OF_VIEW_DEG,
            stop_distance: thresholds::STOP_DISTANCE,
        }
    }
}

/// A sequence of robot configurations with absolute timestamps.
pub trait TimedMotion {
    fn timed_configs(&self) -> Vec<(f64, &JointConfig)>;
}

impl TimedMotion for JointTrajectory {
    fn timed_configs(&self) -> Vec<(f64, &JointConfig)> {
        self.waypoints()
            .iter()
            .enumerate()
            .map(|(k, q)| (self.time(k), q))
            .collect()
    }
}

/// Smallest distance between any robot point and any human keypoint.
pub fn min_separation(robot: &[Vec3], human: &[Vec3]) -> f64 {
    robot
        .iter()
        .flat_map(|p| human.iter().map(move |h| (p - h).norm()))
        .fold(f64::INFINITY, f64::min)
}

fn non_empty<'a>(motion: &'a dyn TimedMotion) -> Result<Vec<(f64, &'a JointConfig)>> {
    let samples = motion.timed_configs();
    if samples.is_empty() {
        return Err(Error::contract("empty robot motion"));
    }
    Ok(samples)
}

/// Percentage of steps whose robot-human separation exceeds `threshold`.
pub fn metric_separation(
    motion: &dyn TimedMotion,
    chain: &ChainSpec,
    human: &HumanTrajectory,
    threshold: f64,
) -> Result<f64> {
    let samples = non_empty(motion)?;
    let mut above = 0usize;
    for (t, q) in &samples {
        let pts = fk_points(chain, q)?;
        if min_separation(&pts, &human.positions(*t)) > threshold {
            above += 1;
        }
    }
    Ok(100.0 * above as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub pct: f64,
    /// Steps with the head on top of the target or the end effector; they
    /// count as not visible.
    pub degenerate_steps: usize,
}

/// Percentage of steps with the end effector inside the field of view
/// centred on the head-to-target direction.
pub fn metric_visibility(
    motion: &dyn TimedMotion,
    chain: &ChainSpec,
    human: &HumanTrajectory,
    target: Vec3,
    fov_deg: f64,
) -> Result<VisibilityReport> {
    let samples = non_empty(motion)?;
    let half = (fov_deg / 2.0).to_radians();
    let mut visible = 0usize;
    let mut degenerate = 0usize;
    for (t, q) in &samples {
        let head = human
            .position(HumanJoint::Head, *t)
            .ok_or_else(|| Error::contract("human trajectory has no head track"))?;
        let gaze = target - head;
        let to_eef = fk_eef(chain, q)? - head;
        if gaze.norm() < 1e-9 || to_eef.norm() < 1e-9 {
            degenerate += 1;
            continue;
        }
        if angle_between(&gaze, &to_eef) <= half {
            visible += 1;
        }
    }
    Ok(VisibilityReport {
        pct: 100.0 * visible as f64 / samples.len() as f64,
        degenerate_steps: degenerate,
    })
}

/// Candidate end-effector goals an observer chooses between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    pub true_goal: Vec3,
    pub distractors: Vec<Vec3>,
}

impl GoalSet {
    pub fn validate(&self) -> Result<()> {
        if self.distractors.is_empty() {
            return Err(Error::contract("legibility needs at least one distractor goal"));
        }
        let all: Vec<Vec3> = std::iter::once(self.true_goal).chain(self.distractors.iter().copied()).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if (all[i] - all[j]).norm() < 1e-9 {
                    return Err(Error::contract("goals must be distinct"));
                }
            }
        }
        Ok(())
    }

    fn all(&self) -> impl Iterator<Item = Vec3> + '_ {
        std::iter::once(self.true_goal).chain(self.distractors.iter().copied())
    }
}

/// Observer's weighted confidence in the true goal, centred so that chance
/// level maps to 0 and certainty from the first step to 100.
///
/// Each goal scores `exp(-prefix - |g - q| + |g - s|)`; scores are
/// normalized over the goal set and averaged with weights `T - t`.
pub fn metric_legibility(motion: &dyn TimedMotion, goals: &GoalSet, chain: &ChainSpec) -> Result<f64> {
    goals.validate()?;
    let samples = non_empty(motion)?;
    let eef = samples
        .iter()
        .map(|(_, q)| fk_eef(chain, q))
        .collect::<Result<Vec<_>>>()?;
    Ok(legibility_score(&eef, goals))
}

/// [`metric_legibility`] on an end-effector path.
pub fn legibility_score(eef: &[Vec3], goals: &GoalSet) -> f64 {
    let k = (goals.distractors.len() + 1) as f64;
    let n = eef.len();
    let start = eef[0];
    let full: Vec<f64> = goals.all().map(|g| (g - start).norm()).collect();
    let mut prefix = 0.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, p) in eef.iter().enumerate() {
        if t > 0 {
            prefix += (p - eef[t - 1]).norm();
        }
        // Shift exponents by the largest one so long detours do not underflow.
        let expo: Vec<f64> = goals
            .all()
            .zip(&full)
            .map(|(g, f)| -prefix - (g - p).norm() + f)
            .collect();
        let top = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = expo.iter().map(|e| (e - top).exp()).sum();
        let p_true = (expo[0] - top).exp() / z;
        let w = (n - t) as f64;
        num += w * p_true;
        den += w;
    }
    100.0 * (num / den - 1.0 / k) * k / (k - 1.0)
}

/// Sum of squared end-effector distances to the nominal, waypoint by waypoint.
pub fn metric_nominal_dev(configs: &[JointConfig], nominal: &JointTrajectory, chain: &ChainSpec) -> Result<f64> {
    if configs.len() != nominal.len() {
        return Err(Error::contract(format!(
            "{} configurations against a {}-waypoint nominal",
            configs.len(),
            nominal.len()
        )));
    }
    let mut total = 0.0;
    for (q, qn) in configs.iter().zip(nominal.waypoints()) {
        total += (fk_eef(chain, q)? - fk_eef(chain, qn)?).norm_squared();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dst_pct: f64,
    pub vis_pct: f64,
    pub legibility: f64,
    pub nom_dev: f64,
    pub completed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for `n = 1`).
pub fn mean_sd(values: &[f64]) -> MeanSd {
    let n = values.len();
    if n == 0 {
        return MeanSd { mean: f64::NAN, sd: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MeanSd { mean, sd }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub dst_pct: MeanSd,
    pub vis_pct: MeanSd,
    pub legibility: MeanSd,
    pub nom_dev: MeanSd,
    pub count: usize,
}

pub fn aggregate(reports: &[MetricReport]) -> Result<MetricSummary> {
    if reports.is_empty() {
        return Err(Error::contract("aggregate needs at least one report"));
    }
    let col = |f: fn(&MetricReport) -> f64| mean_sd(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(MetricSummary {
        dst_pct: col(|r| r.dst_pct),
        vis_pct: col(|r| r.vis_pct),
        legibility: col(|r| r.legibility),
        nom_dev: col(|r| r.nom_dev),
        count: reports.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::f64::consts::FRAC_PI_2;

    fn chain() -> ChainSpec {
        ChainSpec::planar(&[1.0, 1.0]).unwrap()
    }

    /// Stationary planar arm with its eef at (2,0,0), every waypoint the same.
    fn still(n: usize) -> JointTrajectory {
        JointTrajectory::new(vec![JointConfig::zeros(2); n], 0.1, 0.0).unwrap()
    }

    /// Every human joint at `f(t)`.
    fn human(f: impl Fn(f64) -> Vec3, secs: f64) -> HumanTrajectory {
        let n = (secs * 100.0) as usize + 1;
        let tracks: BTreeMap<_, _> = HumanJoint::ALL
            .iter()
            .map(|&j| (j, (0..n).map(|k| f(k as f64 / 100.0)).collect()))
            .collect();
        HumanTrajectory::new(100.0, tracks).unwrap()
    }

    #[test]
    fn separation_examples() {
        let c = chain();
        let far = human(|_| Vec3::new(12.0, 0.0, 0.0), 2.0);
        assert_eq!(metric_separation(&still(10), &c, &far, 0.2).unwrap(), 100.0);
        let on_eef = human(|_| Vec3::new(2.0, 0.0, 0.0), 2.0);
        assert_eq!(metric_separation(&still(10), &c, &on_eef, 0.2).unwrap(), 0.0);
        // Nearest robot point is the eef at (2,0,0); five steps at 0.25 m,
        // five at 0.15 m.
        let split = human(|t| Vec3::new(2.0, if t < 0.45 { 0.25 } else { 0.15 }, 0.0), 2.0);
        assert_eq!(metric_separation(&still(10), &c, &split, 0.2).unwrap(), 50.0);
    }

    #[test]
    fn visibility_examples() {
        let c = chain();
        // Head at the origin-ish; eef at (2,0,0).
        let head_at = |p: Vec3| human(move |_| p, 2.0);
        let h = head_at(Vec3::new(-1.0, 0.0, 0.0));
        let v = metric_visibility(&still(8), &c, &h, Vec3::new(5.0, 0.0, 0.0), 160.0).unwrap();
        assert_eq!(v.pct, 100.0);
        let v = metric_visibility(&still(8), &c, &h, Vec3::new(-3.0, 0.0, 0.0), 160.0).unwrap();
        assert_eq!(v.pct, 0.0);

        // eef at 70 and 90 degrees from the gaze direction.
        let h = head_at(Vec3::new(2.0, -1.0, 0.0));
        let at_angle = |deg: f64| {
            let a = deg.to_radians();
            // gaze rotated by -deg from the head->eef direction (+y).
            Vec3::new(2.0 + a.sin(), -1.0 + a.cos(), 0.0)
        };
        let v70 = metric_visibility(&still(8), &c, &h, at_angle(70.0), 160.0).unwrap();
        assert_eq!(v70.pct, 100.0);
        let v90 = metric_visibility(&still(8), &c, &h, at_angle(90.0), 160.0).unwrap();
        assert_eq!(v90.pct, 0.0);

        let degenerate = metric_visibility(&still(8), &c, &h, Vec3::new(2.0, -1.0, 0.0), 160.0).unwrap();
        assert_eq!(degenerate.pct, 0.0);
        assert_eq!(degenerate.degenerate_steps, 8);
    }

    fn line(from: Vec3, to: Vec3, n: usize) -> Vec<Vec3> {
        (0..n).map(|k| from + (to - from) * (k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn legibility_chance_on_bisector() {
        let goals = GoalSet {
            true_goal: Vec3::new(1.0, 1.0, 0.0),
            distractors: vec![Vec3::new(1.0, -1.0, 0.0)],
        };
        let path = line(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), 20);
        assert_abs_diff_eq!(legibility_score(&path, &goals), 0.0, epsilon = 1e-12);
    }

    fn opposite_distractor_oracle(len: f64, n: usize) -> f64 {
        // Along the straight line P(true) = 1 and P(distractor) = exp(-2 u L),
        // so the normalized confidence at fraction u is 1 / (1 + exp(-2 u L)).
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..n {
            let u = t as f64 / (n - 1) as f64;
            let w = (n - t) as f64;
            num += w / (1.0 + (-2.0 * u * len).exp());
            den += w;
        }
        100.0 * (num / den - 0.5) * 2.0
    }

    #[test]
    fn legibility_opposite_distractor_oracle() {
        let n = 20;
        let mut last = 0.0;
        for len in [0.5, 1.0, 3.0, 8.0] {
            let goals = GoalSet {
                true_goal: Vec3::new(len, 0.0, 0.0),
                distractors: vec![Vec3::new(-len, 0.0, 0.0)],
            };
            let path = line(Vec3::zeros(), goals.true_goal, n);
            let score = legibility_score(&path, &goals);
            assert_abs_diff_eq!(score, opposite_distractor_oracle(len, n), epsilon = 1e-9);
            assert!(score > last);
            last = score;
        }
        // Scores are in meters of detour, so a clear majority needs a long reach.
        assert!(last > 80.0, "{last}");
    }

    #[test]
    fn legibility_needs_distinct_goals() {
        let c = chain();
        let g = GoalSet { true_goal: Vec3::zeros(), distractors: vec![] };
        assert!(metric_legibility(&still(5), &g, &c).is_err());
        let g = GoalSet { true_goal: Vec3::zeros(), distractors: vec![Vec3::zeros()] };
        assert!(matches!(metric_legibility(&still(5), &g, &c), Err(Error::Contract(_))));
    }

    #[test]
    fn nominal_dev_examples() {
        let c = chain();
        let nominal = still(20);
        assert_eq!(metric_nominal_dev(nominal.waypoints(), &nominal, &c).unwrap(), 0.0);
        // Shrinking the elbow angle is awkward to express as a fixed offset,
        // so use a base rotation that moves the eef 0.1 m along the arc and
        // compare against the chord.
        let a = 2.0 * (0.1f64 / 4.0).asin();
        let moved = vec![JointConfig::new(vec![a, 0.0]); 20];
        let chord = 2.0 * 2.0 * (a / 2.0).sin();
        assert_abs_diff_eq!(chord, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(metric_nominal_dev(&moved, &nominal, &c).unwrap(), 0.2, epsilon = 1e-12);
        assert!(metric_nominal_dev(&moved[..10], &nominal, &c).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let r = |v: f64| MetricReport { dst_pct: v, vis_pct: v, legibility: v, nom_dev: v, completed: true };
        let one = aggregate(&[r(42.0)]).unwrap();
        assert_eq!(one.dst_pct, MeanSd { mean: 42.0, sd: 0.0 });
        let two = aggregate(&[r(80.0), r(90.0)]).unwrap();
        assert_eq!(two.vis_pct.mean, 85.0);
        assert!((two.vis_pct.sd - 7.071).abs() < 1e-3);
        let same = aggregate(&[r(3.0), r(3.0), r(3.0)]).unwrap();
        assert_eq!(same.nom_dev.sd, 0.0);
        assert!(aggregate(&[]).is_err());
    }

    proptest! {
        #[test]
        fn legibility_swap_negates(
            gx in 0.2f64..2.0, gy in 0.2f64..2.0,
            bend in -0.5f64..0.5,
            axis in proptest::array::uniform3(-1.0f64..1.0),
            angle in 0.0f64..6.0,
        ) {
            let g = Vec3::new(gx, gy, 0.0);
            let d = Vec3::new(gx, -gy, 0.0);
            let mid = Vec3::new(gx * 0.5, bend, 0.0);
            let mut path = line(Vec3::zeros(), mid, 8);
            path.extend(line(mid, g, 8).into_iter().skip(1));
            let a = GoalSet { true_goal: g, distractors: vec![d] };
            let b = GoalSet { true_goal: d, distractors: vec![g] };
            let sa = legibility_score(&path, &a);
            let sb = legibility_score(&path, &b);
            prop_assert!((sa + sb).abs() <= 1e-9);
            prop_assert!((-100.0..=100.0).contains(&sa));

            let ax = Vec3::from(axis);
            prop_assume!(ax.norm() > 0.1);
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(ax), angle);
            let rpath: Vec<Vec3> = path.iter().map(|p| rot * p).collect();
            let ra = GoalSet { true_goal: rot * g, distractors: vec![rot * d] };
            prop_assert!((legibility_score(&rpath, &ra) - sa).abs() <= 1e-9);
        }

        #[test]
        fn separation_percent_bounded_and_monotone(dx in 0.0f64..3.0, shift in 0.0f64..2.0, thr in 0.05f64..1.0) {
            let c = chain();
            let traj = JointTrajectory::new(
                (0..10).map(|k| JointConfig::new(vec![0.1 * k as f64, -0.2 * k as f64])).collect(),
                0.1,
                0.0,
            ).unwrap();
            let near = human(|t| Vec3::new(dx + t, 0.5, 0.0), 1.0);
            let far = human(|t| Vec3::new(dx + t, 0.5, 0.0) + Vec3::new(0.0, 0.0, shift + 0.0), 1.0);
            let a = metric_separation(&traj, &c, &near, thr).unwrap();
            let b = metric_separation(&traj, &c, &far, thr).unwrap();
            prop_assert!((0.0..=100.0).contains(&a));
            // The planar arm lives in z = 0, so lifting the human out of
            // plane moves it away from every robot point.
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn quarter_turn_eef_for_reference() {
        let e = fk_eef(&chain(), &JointConfig::new(vec![FRAC_PI_2, 0.0])).unwrap();
        assert_abs_diff_eq!(e, Vec3::new(0.0, 2.0, 0.0), epsilon = 1e-15);
    }
}
