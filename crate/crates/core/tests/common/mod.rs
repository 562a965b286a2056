#![allow(dead_code)]

use std::collections::BTreeMap;

use collabopt::costs::{CostContext, CostParams};
use collabopt::human_motion::{Gaussian3, HumanJoint, PredictedHumanTrajectory};
use collabopt::kinematics::{ChainSpec, JointConfig, JointTrajectory, Vec3};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POSTURE: [f64; 7] = [-0.5, -0.4, 0.0, -1.5, 0.0, 1.2, 0.0];

pub struct Problem {
    pub ctx: CostContext,
    pub traj: JointTrajectory,
}

fn random_path(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<JointConfig> {
    let a: Vec<f64> = POSTURE.iter().map(|q| q + rng.random_range(-spread..spread)).collect();
    let b: Vec<f64> = POSTURE.iter().map(|q| q + rng.random_range(-spread..spread)).collect();
    (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            let wobble = if k == 0 || k == n - 1 { 0.0 } else { 1.0 };
            JointConfig::new(
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| x + (y - x) * s + wobble * rng.random_range(-0.15..0.15))
                    .collect(),
            )
        })
        .collect()
}

/// Random 7-DOF problem with `3..=20` waypoints, a full skeleton prediction
/// with random SPD covariances and a distinct random nominal.
pub fn random_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=20usize);
    let dt = 0.1;
    let chain = ChainSpec::default_arm();
    let path = random_path(&mut rng, n, 0.5);
    let mut nominal_path = random_path(&mut rng, n, 0.5);
    nominal_path[0] = path[0].clone();
    nominal_path[n - 1] = path[n - 1].clone();
    let traj = JointTrajectory::new(path, dt, 1.0).unwrap();
    let nominal = JointTrajectory::new(nominal_path, dt, 1.0).unwrap();
    let centre = Vec3::new(rng.random_range(0.8..1.0), rng.random_range(-0.2..0.2), rng.random_range(0.2..0.5));
    let tracks: BTreeMap<HumanJoint, Vec<Gaussian3>> = HumanJoint::ALL
        .iter()
        .map(|&j| {
            let offset = Vec3::new(rng.random_range(-0.15..0.15), rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.3));
            let track = (0..n)
                .map(|k| {
                    let drift = Vec3::new(-0.01, 0.0, 0.0) * k as f64;
                    let l = Matrix3::from_fn(|_, _| rng.random_range(-0.05..0.05));
                    let cov = l * l.transpose() + Matrix3::identity() * 0.02f64.powi(2);
                    Gaussian3 { mean: centre + offset + drift, cov: (cov + cov.transpose()) * 0.5 }
                })
                .collect();
            (j, track)
        })
        .collect();
    let prediction = PredictedHumanTrajectory::new(1.0, dt, tracks).unwrap();
    let object = Vec3::new(rng.random_range(0.4..0.7), rng.random_range(-0.3..0.3), 0.05);
    let goal = traj.end().clone();
    let ctx = CostContext::new(chain, prediction, nominal, object, goal, CostParams::default()).unwrap();
    Problem { ctx, traj }
}
