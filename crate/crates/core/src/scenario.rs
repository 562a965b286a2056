//! Seeded workspace generation for the three benchmark families.
//!
//! Frame: robot base at the origin on the table top (z = 0), +x across the
//! table toward the seated human, who faces -x so their right is +y.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{Sphere, TimeGrid};
use crate::error::{Error, Result};
use crate::human_motion::{generate_reach, ArmPose, HumanTrajectory, ReachScript, SkeletonOffsets};
use crate::kinematics::{fk_eef, fk_points, ChainSpec, JointConfig, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Stationary,
    ReachingFar,
    ReachingNear,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Stationary, Family::ReachingFar, Family::ReachingNear];

    pub fn name(self) -> &'static str {
        match self {
            Family::Stationary => "stationary",
            Family::ReachingFar => "reaching_far",
            Family::ReachingNear => "reaching_near",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Family::Stationary => "Stationary",
            Family::ReachingFar => "Reaching-far",
            Family::ReachingNear => "Reaching-near",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Family::Stationary => 0x5354_4154,
            Family::ReachingFar => 0x4641_5200,
            Family::ReachingNear => 0x4e45_4152,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "stationary" => Ok(Family::Stationary),
            "reaching_far" => Ok(Family::ReachingFar),
            "reaching_near" => Ok(Family::ReachingNear),
            _ => Err(Error::Usage(format!(
                "unknown family '{s}' (expected stationary, reaching_far or reaching_near)"
            ))),
        }
    }
}

/// Axis-aligned sampling box, `[lo, hi]` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Region {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::from_fn(|i, _| uniform(rng, self.lo[i], self.hi[i]))
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Workspace constants. All lengths in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub table_depth: f64,
    /// Distance of the human's shoulders behind the far table edge.
    pub seat_offset: f64,
    pub shoulder_height: f64,
    pub shoulder_y: [f64; 2],
    pub upper_arm: f64,
    pub forearm: f64,
    pub hand: f64,
    /// Resting palm relative to the right shoulder.
    pub rest_palm: [f64; 3],
    pub object_height: f64,
    pub robot_start: Region,
    /// Posture the start-configuration IK is seeded from.
    pub ik_seed: Vec<f64>,
    pub stationary_robot_object: Region,
    pub far_robot_object: Region,
    /// Human object for far reaches, `y` relative to the shoulder.
    pub far_human_object: Region,
    pub far_min_separation: f64,
    pub near_robot_object: Region,
    pub near_offset: [f64; 2],
    pub move_duration: [f64; 2],
    pub total_duration: f64,
    pub noise_scale: f64,
    pub human_rate: f64,
    pub observation: f64,
    pub robot_waypoints: usize,
    pub robot_duration: f64,
    /// Fixed obstacles shared by every scenario.
    pub obstacles: Vec<Sphere>,
    /// Per-scenario obstacle next to the straight start-goal segment.
    pub path_obstacle: Option<PathObstacle>,
}

/// Sphere centred on the midpoint of the joint-space straight path,
/// shifted horizontally across the start-to-goal chord to the side away
/// from the human's object and lowered by `drop`, so the collision-free
/// nominal has to swing toward the human's side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathObstacle {
    pub radius: f64,
    pub shift: f64,
    pub drop: f64,
}

impl PathObstacle {
    pub fn place(&self, path_midpoint: Vec3, start: Vec3, goal: Vec3, human_object: Vec3) -> Sphere {
        let flat = |v: Vec3| Vec3::new(v.x, v.y, 0.0);
        let chord = flat(goal - start);
        let to_human = flat(human_object - path_midpoint);
        let across = if chord.norm() > 1e-9 {
            let c = chord.normalize();
            to_human - c * to_human.dot(&c)
        } else {
            to_human
        };
        let dir = if across.norm() > 1e-9 { -across.normalize() } else { Vec3::zeros() };
        Sphere {
            center: path_midpoint + dir * self.shift - Vec3::new(0.0, 0.0, self.drop),
            radius: self.radius,
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            table_depth: 0.8,
            seat_offset: 0.2,
            shoulder_height: 0.35,
            shoulder_y: [-0.05, 0.15],
            upper_arm: 0.28,
            forearm: 0.27,
            hand: 0.08,
            rest_palm: [-0.34, 0.02, -0.28],
            object_height: 0.05,
            robot_start: Region { lo: [0.15, -0.35, 0.45], hi: [0.25, -0.2, 0.55] },
            ik_seed: vec![-0.5, -0.4, 0.0, -2.2, 0.0, 1.5, 0.0],
            stationary_robot_object: Region { lo: [0.45, -0.2, 0.05], hi: [0.55, 0.0, 0.05] },
            far_robot_object: Region { lo: [0.45, -0.4, 0.05], hi: [0.55, -0.3, 0.05] },
            far_human_object: Region { lo: [0.6, 0.3, 0.05], hi: [0.7, 0.4, 0.05] },
            far_min_separation: 0.6,
            near_robot_object: Region { lo: [0.5, -0.1, 0.05], hi: [0.6, 0.05, 0.05] },
            near_offset: [0.03, 0.15],
            move_duration: [1.6, 2.2],
            total_duration: 3.0,
            noise_scale: 0.004,
            human_rate: 100.0,
            observation: 1.0,
            robot_waypoints: 20,
            robot_duration: 2.0,
            obstacles: Vec::new(),
            path_obstacle: Some(PathObstacle { radius: 0.15, shift: 0.05, drop: 0.0 }),
        }
    }
}

impl GeometryConfig {
    pub fn human_x(&self) -> f64 {
        self.table_depth + self.seat_offset
    }

    /// Robot waypoint grid: starts when the observation window closes.
    pub fn robot_grid(&self) -> TimeGrid {
        TimeGrid {
            waypoints: self.robot_waypoints,
            dt: self.robot_duration / (self.robot_waypoints - 1) as f64,
            t0: self.observation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.robot_waypoints < 3 {
            return Err(Error::contract("robot_waypoints must be at least 3"));
        }
        if !(self.human_rate > 0.0 && self.observation > 0.0 && self.robot_duration > 0.0) {
            return Err(Error::contract("rates and durations must be positive"));
        }
        if self.observation + self.robot_duration > self.total_duration + 1e-9 {
            return Err(Error::contract("human motion must cover the observation plus the robot motion"));
        }
        if self.move_duration[1] > self.total_duration || !(self.move_duration[0] > 0.0) {
            return Err(Error::contract("move_duration range must lie in (0, total_duration]"));
        }
        if !(self.near_offset[0] > 0.0 && self.near_offset[1] >= self.near_offset[0]) {
            return Err(Error::contract("near_offset must be a positive range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub family: Family,
    pub seed: u64,
    pub chain: String,
    pub robot_start: JointConfig,
    pub robot_goal: JointConfig,
    pub robot_object: Vec3,
    pub human_script: ReachScript,
    pub human_object: Vec3,
    pub obstacles: Vec<Sphere>,
}

impl Scenario {
    pub fn human_truth(&self, geometry: &GeometryConfig, offsets: &SkeletonOffsets) -> Result<HumanTrajectory> {
        generate_reach(&self.human_script, geometry.human_rate, offsets)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("<scenario>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Right-arm pose with the palm on `target`, the hand pointing away from
/// the shoulder horizontally and the elbow dropped down and outward.
pub fn arm_pose_reaching(shoulder: Vec3, target: Vec3, g: &GeometryConfig) -> Result<ArmPose> {
    let mut along = target - shoulder;
    along.z = 0.0;
    let along = if along.norm() > 1e-9 { along.normalize() } else { Vec3::new(-1.0, 0.0, 0.0) };
    let wrist = target - along * g.hand;
    let sw = wrist - shoulder;
    let r = sw.norm();
    let (l1, l2) = (g.upper_arm, g.forearm);
    if r > l1 + l2 - 1e-6 || r < (l1 - l2).abs() + 1e-6 {
        return Err(Error::contract(format!(
            "target {:?} is out of arm reach from {:?}",
            target.as_slice(),
            shoulder.as_slice()
        )));
    }
    let e = sw / r;
    let a = (l1 * l1 - l2 * l2 + r * r) / (2.0 * r);
    let h = (l1 * l1 - a * a).max(0.0).sqrt();
    let hint = Vec3::new(0.0, 0.5, -1.0);
    let mut n = hint - e * hint.dot(&e);
    if n.norm() < 1e-9 {
        n = Vec3::new(1.0, 0.0, 0.0) - e * e.x;
    }
    let elbow = shoulder + e * a + n.normalize() * h;
    Ok(ArmPose { shoulder, elbow, wrist, palm: target })
}

/// Damped least-squares position IK for the end effector, seeded at `seed`
/// and kept inside the joint limits.
pub fn solve_position_ik(chain: &ChainSpec, target: Vec3, seed: &JointConfig) -> Result<JointConfig> {
    let mut q = seed.clone();
    chain.clamp(&mut q.0);
    let lambda2 = 1e-4;
    for _ in 0..500 {
        let frames = chain.frames(&q)?;
        let err = target - frames.eef();
        if err.norm() < 1e-10 {
            return Ok(q);
        }
        let j = frames.jacobian(chain.num_points() - 1);
        let jjt = &j * j.transpose() + Matrix3::identity() * lambda2;
        let y: Vector3<f64> = jjt
            .lu()
            .solve(&err)
            .ok_or_else(|| Error::contract("singular IK system"))?;
        let dq = j.transpose() * y;
        let scale = (0.3 / dq.amax()).min(1.0);
        for (qi, d) in q.0.iter_mut().zip(dq.iter()) {
            *qi += d * scale;
        }
        chain.clamp(&mut q.0);
    }
    let miss = (fk_eef(chain, &q)? - target).norm();
    if miss < 1e-6 {
        Ok(q)
    } else {
        Err(Error::contract(format!("IK missed the target by {miss:.3e} m")))
    }
}

fn ik_seed(g: &GeometryConfig, dof: usize) -> JointConfig {
    let mut q = vec![0.0; dof];
    for (a, b) in q.iter_mut().zip(&g.ik_seed) {
        *a = *b;
    }
    JointConfig::new(q)
}

fn above_table(chain: &ChainSpec, q: &JointConfig) -> Result<bool> {
    Ok(fk_points(chain, q)?.iter().all(|p| p.z >= -1e-9))
}

const MAX_ATTEMPTS: usize = 200;

/// One scenario; `seed` fully determines it.
pub fn generate_scenario(
    family: Family,
    seed: u64,
    chain: &ChainSpec,
    g: &GeometryConfig,
) -> Result<Scenario> {
    g.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ family.salt());
    for _ in 0..MAX_ATTEMPTS {
        if let Some(s) = try_generate(family, seed, chain, g, &mut rng)? {
            return Ok(s);
        }
    }
    Err(Error::contract(format!(
        "no feasible {family} scenario for seed {seed} after {MAX_ATTEMPTS} attempts"
    )))
}

fn try_generate(
    family: Family,
    seed: u64,
    chain: &ChainSpec,
    g: &GeometryConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Scenario>> {
    let shoulder = Vec3::new(g.human_x(), uniform(rng, g.shoulder_y[0], g.shoulder_y[1]), g.shoulder_height);
    let rest = arm_pose_reaching(shoulder, shoulder + Vec3::from(g.rest_palm), g)?;
    let start_eef = g.robot_start.sample(rng);

    let (robot_object, human_object) = match family {
        Family::Stationary => {
            let obj = g.stationary_robot_object.sample(rng);
            let mut h = rest.palm + Vec3::new(-0.1, 0.0, 0.0);
            h.z = g.object_height;
            (obj, h)
        }
        Family::ReachingFar => {
            let obj = g.far_robot_object.sample(rng);
            let mut h = g.far_human_object.sample(rng);
            h.y += shoulder.y;
            (obj, h)
        }
        Family::ReachingNear => {
            let obj = g.near_robot_object.sample(rng);
            let r = uniform(rng, g.near_offset[0], g.near_offset[1]);
            let phi = uniform(rng, 0.0, std::f64::consts::TAU);
            (obj, obj + Vec3::new(r * phi.cos(), r * phi.sin(), 0.0))
        }
    };
    let arm_goal = match family {
        Family::Stationary => rest.clone(),
        _ => match arm_pose_reaching(shoulder, human_object, g) {
            Ok(p) => p,
            Err(_) => return Ok(None),
        },
    };
    let gap = (human_object - robot_object).norm();
    let geometry_ok = match family {
        Family::Stationary => true,
        Family::ReachingFar => gap >= g.far_min_separation,
        Family::ReachingNear => gap <= g.near_offset[1] + 1e-12,
    };
    if !geometry_ok {
        return Ok(None);
    }

    let seed_q = ik_seed(g, chain.dof());
    let Ok(robot_start) = solve_position_ik(chain, start_eef, &seed_q) else {
        return Ok(None);
    };
    let Ok(robot_goal) = solve_position_ik(chain, robot_object, &robot_start) else {
        return Ok(None);
    };
    if !above_table(chain, &robot_start)? || !above_table(chain, &robot_goal)? {
        return Ok(None);
    }
    let mut obstacles = g.obstacles.clone();
    if let Some(po) = &g.path_obstacle {
        let mid = fk_eef(chain, &robot_start.lerp(&robot_goal, 0.5))?;
        obstacles.push(po.place(mid, start_eef, robot_object, human_object));
    }
    let move_duration = match family {
        Family::Stationary => g.move_duration[1],
        _ => uniform(rng, g.move_duration[0], g.move_duration[1]),
    };
    let human_script = ReachScript {
        arm_start: rest,
        arm_goal,
        move_duration,
        total_duration: g.total_duration,
        noise_scale: if family == Family::Stationary { 0.0 } else { g.noise_scale },
        seed: rng.random(),
    };
    Ok(Some(Scenario {
        family,
        seed,
        chain: chain.name().to_string(),
        robot_start,
        robot_goal,
        robot_object,
        human_script,
        human_object,
        obstacles,
    }))
}

pub fn generate_scenarios(
    family: Family,
    seeds: &[u64],
    chain: &ChainSpec,
    g: &GeometryConfig,
) -> Result<Vec<Scenario>> {
    seeds.iter().map(|&s| generate_scenario(family, s, chain, g)).collect()
}
