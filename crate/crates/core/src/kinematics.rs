//! Serial-chain forward kinematics with standard Denavit-Hartenberg rows.
//!
//! Frame `0` is the base frame placed in the world by `base_pose`. Joint `i`
//! rotates about the z axis of frame `i`, and row `i` maps frame `i` to frame
//! `i + 1` as `Rz(q_i + theta_offset) * Tz(d) * Tx(a) * Rx(alpha)`. The last
//! frame origin is the end effector.
//!
//! The robot "body points" used by the proximity costs and metrics are all
//! frame origins including the base and the end effector, so an `n`-link
//! chain yields `n + 1` points.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// One standard DH row. Lengths in meters, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhRow {
    pub fn new(a: f64, alpha: f64, d: f64, theta_offset: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
        }
    }

    /// Rotation and translation of frame `i + 1` expressed in frame `i`.
    fn transform(&self, q: f64) -> (Matrix3<f64>, Vec3) {
        let (st, ct) = (q + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let rot = Matrix3::new(
            ct,
            -st * ca,
            st * sa,
            st,
            ct * ca,
            -ct * sa,
            0.0,
            sa,
            ca,
        );
        (rot, Vec3::new(self.a * ct, self.a * st, self.d))
    }
}

/// Rigid placement of the chain base in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub translation: [f64; 3],
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
}

impl Default for BasePose {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }
}

impl BasePose {
    fn rotation_matrix(&self) -> Matrix3<f64> {
        let r = &self.rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    fn translation_vector(&self) -> Vec3 {
        Vec3::from(self.translation)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainFile {
    name: String,
    #[serde(default)]
    base_pose: BasePose,
    links: Vec<DhRow>,
    joint_limits: Vec<[f64; 2]>,
}

/// A validated revolute serial chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainFile", into = "ChainFile")]
pub struct ChainSpec {
    name: String,
    links: Vec<DhRow>,
    base_pose: BasePose,
    joint_limits: Vec<(f64, f64)>,
    base_rot: Matrix3<f64>,
    base_trans: Vec3,
}

impl TryFrom<ChainFile> for ChainSpec {
    type Error = Error;

    fn try_from(f: ChainFile) -> Result<Self> {
        let limits = f.joint_limits.iter().map(|l| (l[0], l[1])).collect();
        ChainSpec::new(f.name, f.links, f.base_pose, limits)
    }
}

impl From<ChainSpec> for ChainFile {
    fn from(c: ChainSpec) -> Self {
        ChainFile {
            name: c.name,
            base_pose: c.base_pose,
            links: c.links,
            joint_limits: c.joint_limits.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        }
    }
}

const CHAIN_FILE_HEADER: &str = "\
# Serial chain, standard Denavit-Hartenberg convention.
# Row i maps frame i to frame i+1 as Rz(q_i + theta_offset) Tz(d) Tx(a) Rx(alpha).
# Units: a, d and base_pose.translation in meters; alpha, theta_offset and
# joint_limits in radians. base_pose.rotation is row-major.
";

impl ChainSpec {
    pub fn new(
        name: impl Into<String>,
        links: Vec<DhRow>,
        base_pose: BasePose,
        joint_limits: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if links.len() < 2 {
            return Err(Error::contract(format!(
                "chain needs at least 2 links, got {}",
                links.len()
            )));
        }
        if joint_limits.len() != links.len() {
            return Err(Error::contract(format!(
                "{} joint limits for {} links",
                joint_limits.len(),
                links.len()
            )));
        }
        for (i, &(lo, hi)) in joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::contract(format!(
                    "joint {i} limit lo={lo} is not below hi={hi}"
                )));
            }
        }
        let base_rot = base_pose.rotation_matrix();
        let ortho = (base_rot.transpose() * base_rot - Matrix3::identity()).abs().max();
        if ortho > 1e-9 || (base_rot.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::contract("base_pose rotation is not a proper rotation"));
        }
        let base_trans = base_pose.translation_vector();
        Ok(Self {
            name: name.into(),
            links,
            base_pose,
            joint_limits,
            base_rot,
            base_trans,
        })
    }

    /// Planar chain in the base xy plane with the given link lengths and
    /// limits of +/- pi.
    pub fn planar(lengths: &[f64]) -> Result<Self> {
        let links = lengths.iter().map(|&a| DhRow::new(a, 0.0, 0.0, 0.0)).collect();
        let limits = vec![(-std::f64::consts::PI, std::f64::consts::PI); lengths.len()];
        Self::new("planar", links, BasePose::default(), limits)
    }

    /// Seven-joint arm with the link offsets of a common 7-DOF collaborative
    /// arm (0.36 / 0.42 / 0.40 / 0.126 m).
    pub fn default_arm() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let links = vec![
            DhRow::new(0.0, -FRAC_PI_2, 0.36, 0.0),
            DhRow::new(0.0, FRAC_PI_2, 0.0, 0.0),
            DhRow::new(0.0, FRAC_PI_2, 0.42, 0.0),
            DhRow::new(0.0, -FRAC_PI_2, 0.0, 0.0),
            DhRow::new(0.0, -FRAC_PI_2, 0.40, 0.0),
            DhRow::new(0.0, FRAC_PI_2, 0.0, 0.0),
            DhRow::new(0.0, 0.0, 0.126, 0.0),
        ];
        let deg = |d: f64| d.to_radians();
        let limits = [170.0, 120.0, 170.0, 120.0, 170.0, 120.0, 175.0]
            .iter()
            .map(|&l| (-deg(l), deg(l)))
            .collect();
        Self::new("seven-dof-arm", links, BasePose::default(), limits)
            .expect("built-in chain is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[DhRow] {
        &self.links
    }

    pub fn base_pose(&self) -> &BasePose {
        &self.base_pose
    }

    pub fn joint_limits(&self) -> &[(f64, f64)] {
        &self.joint_limits
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    /// Number of body points reported by [`fk_points`].
    pub fn num_points(&self) -> usize {
        self.links.len() + 1
    }

    /// Clamp each angle into its joint limits.
    pub fn clamp(&self, q: &mut [f64]) {
        for (v, &(lo, hi)) in q.iter_mut().zip(&self.joint_limits) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.0.iter()
            .zip(&self.joint_limits)
            .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ChainFile = toml::from_str(text).map_err(|e| Error::parse("<chain>", e))?;
        Self::try_from(file)
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(&ChainFile::from(self.clone())).expect("chain serializes");
        format!("{CHAIN_FILE_HEADER}{body}")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    fn check_dim(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::contract(format!(
                "configuration has {} angles, chain has {} joints",
                q.len(),
                self.dof()
            )));
        }
        Ok(())
    }

    /// World-frame origins and joint axes of every frame.
    pub fn frames(&self, q: &JointConfig) -> Result<Frames> {
        self.check_dim(q)?;
        let mut origins = Vec::with_capacity(self.num_points());
        let mut axes = Vec::with_capacity(self.num_points());
        let mut rot = self.base_rot;
        let mut pos = self.base_trans;
        origins.push(pos);
        axes.push(rot.column(2).into_owned());
        for (row, &angle) in self.links.iter().zip(q.iter()) {
            let (r, p) = row.transform(angle);
            pos += rot * p;
            rot *= r;
            origins.push(pos);
            axes.push(rot.column(2).into_owned());
        }
        Ok(Frames { origins, axes })
    }
}

/// Frame origins and z axes of a chain at one configuration, in world
/// coordinates. Index `i` is frame `i`; joint `i` spins about `axes[i]`.
#[derive(Debug, Clone)]
pub struct Frames {
    pub origins: Vec<Vec3>,
    pub axes: Vec<Vec3>,
}

impl Frames {
    pub fn eef(&self) -> Vec3 {
        *self.origins.last().expect("frames are never empty")
    }

    /// `J^T f` for the position Jacobian of `point`, accumulated into `out`.
    ///
    /// Avoids materializing the 3 x n Jacobian in the cost gradient loops.
    pub fn add_jacobian_transpose(&self, point: usize, force: &Vec3, out: &mut [f64]) {
        let p = self.origins[point];
        for i in 0..point.min(out.len()) {
            let lever = p - self.origins[i];
            out[i] += self.axes[i].dot(&lever.cross(force));
        }
    }

    pub fn jacobian(&self, point: usize) -> Matrix3xX<f64> {
        let n = self.origins.len() - 1;
        let p = self.origins[point];
        let mut jac = Matrix3xX::zeros(n);
        for i in 0..point {
            jac.set_column(i, &self.axes[i].cross(&(p - self.origins[i])));
        }
        jac
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn new(q: Vec<f64>) -> Self {
        Self(q)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Linear interpolation `(1 - s) * self + s * other`.
    pub fn lerp(&self, other: &JointConfig, s: f64) -> JointConfig {
        JointConfig(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        )
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(q: Vec<f64>) -> Self {
        Self(q)
    }
}

/// Joint-space waypoints sampled every `dt` seconds starting at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    waypoints: Vec<JointConfig>,
    dt: f64,
    t0: f64,
}

impl JointTrajectory {
    pub fn new(waypoints: Vec<JointConfig>, dt: f64, t0: f64) -> Result<Self> {
        if waypoints.len() < 3 {
            return Err(Error::contract(format!(
                "trajectory needs at least 3 waypoints, got {}",
                waypoints.len()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::contract(format!("dt must be positive, got {dt}")));
        }
        let n = waypoints[0].len();
        if waypoints.iter().any(|w| w.len() != n) {
            return Err(Error::contract("waypoints differ in dimension"));
        }
        Ok(Self { waypoints, dt, t0 })
    }

    pub fn waypoints(&self) -> &[JointConfig] {
        &self.waypoints
    }

    pub fn waypoints_mut(&mut self) -> &mut [JointConfig] {
        &mut self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn start(&self) -> &JointConfig {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &JointConfig {
        self.waypoints.last().expect("at least 3 waypoints")
    }

    /// Configuration at absolute time `t`, linearly interpolated and held
    /// at the endpoints outside the trajectory span.
    pub fn sample(&self, t: f64) -> JointConfig {
        let s = ((t - self.t0) / self.dt).clamp(0.0, (self.len() - 1) as f64);
        let k = (s.floor() as usize).min(self.len() - 2);
        self.waypoints[k].lerp(&self.waypoints[k + 1], s - k as f64)
    }

    /// Row-major flattening of all waypoints.
    pub fn flatten(&self) -> Vec<f64> {
        self.waypoints.iter().flat_map(|w| w.0.iter().copied()).collect()
    }

    /// End-effector positions of every waypoint.
    pub fn eef_path(&self, chain: &ChainSpec) -> Result<Vec<Vec3>> {
        self.waypoints.iter().map(|q| fk_eef(chain, q)).collect()
    }

    /// Text form: `#` header lines carrying `t0` and `dt`, a column header,
    /// then one row `k,t,q0,...,q{n-1}` per waypoint. Floats use the
    /// shortest representation that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# joint trajectory; angles in radians, time in seconds\n");
        let _ = writeln!(s, "# t0={}", self.t0);
        let _ = writeln!(s, "# dt={}", self.dt);
        s.push_str("k,t");
        for j in 0..self.dof() {
            let _ = write!(s, ",q{j}");
        }
        s.push('\n');
        for (k, w) in self.waypoints.iter().enumerate() {
            let _ = write!(s, "{},{}", k, self.time(k));
            for v in w.iter() {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::parse("<trajectory>", m);
        let mut t0 = None;
        let mut dt = None;
        let mut waypoints = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("t0=") {
                    t0 = Some(v.parse::<f64>().map_err(|e| bad(format!("t0: {e}")))?);
                } else if let Some(v) = rest.strip_prefix("dt=") {
                    dt = Some(v.parse::<f64>().map_err(|e| bad(format!("dt: {e}")))?);
                }
                continue;
            }
            if line.starts_with("k,") {
                continue;
            }
            let vals = line
                .split(',')
                .skip(2)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row `{line}`: {e}")))?;
            waypoints.push(JointConfig(vals));
        }
        let t0 = t0.ok_or_else(|| bad("missing t0 header".into()))?;
        let dt = dt.ok_or_else(|| bad("missing dt header".into()))?;
        Self::new(waypoints, dt, t0)
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

/// World positions of every frame origin; the last entry is the end effector.
pub fn fk_points(chain: &ChainSpec, q: &JointConfig) -> Result<Vec<Vec3>> {
    Ok(chain.frames(q)?.origins)
}

pub fn fk_eef(chain: &ChainSpec, q: &JointConfig) -> Result<Vec3> {
    Ok(chain.frames(q)?.eef())
}

/// Position Jacobian (3 x n) of body point `point_index`.
pub fn position_jacobian(
    chain: &ChainSpec,
    q: &JointConfig,
    point_index: usize,
) -> Result<Matrix3xX<f64>> {
    if point_index >= chain.num_points() {
        return Err(Error::contract(format!(
            "point index {point_index} out of range for {} points",
            chain.num_points()
        )));
    }
    Ok(chain.frames(q)?.jacobian(point_index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix4;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn planar2() -> ChainSpec {
        ChainSpec::planar(&[1.0, 1.0]).unwrap()
    }

    /// Independent oracle: multiply 4x4 homogeneous matrices built from the
    /// elementary DH factors.
    fn homogeneous_oracle(chain: &ChainSpec, q: &[f64]) -> Vec<Vec3> {
        let rz = |t: f64| {
            let (s, c) = t.sin_cos();
            Matrix4::new(c, -s, 0., 0., s, c, 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.)
        };
        let rx = |t: f64| {
            let (s, c) = t.sin_cos();
            Matrix4::new(1., 0., 0., 0., 0., c, -s, 0., 0., s, c, 0., 0., 0., 0., 1.)
        };
        let tz = |d: f64| Matrix4::new(1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., d, 0., 0., 0., 1.);
        let tx = |a: f64| Matrix4::new(1., 0., 0., a, 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.);
        let bp = chain.base_pose();
        let r = bp.rotation;
        let t = bp.translation;
        let mut m = Matrix4::new(
            r[0][0], r[0][1], r[0][2], t[0], r[1][0], r[1][1], r[1][2], t[1], r[2][0], r[2][1],
            r[2][2], t[2], 0., 0., 0., 1.,
        );
        let mut out = vec![Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)])];
        for (row, &qi) in chain.links().iter().zip(q) {
            m = m * rz(qi + row.theta_offset) * tz(row.d) * tx(row.a) * rx(row.alpha);
            out.push(Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]));
        }
        out
    }

    #[test]
    fn planar_zero_angles() {
        let pts = fk_points(&planar2(), &JointConfig::zeros(2)).unwrap();
        assert_eq!(pts.len(), 3);
        assert_abs_diff_eq!(pts[0], Vec3::zeros(), epsilon = 1e-15);
        assert_abs_diff_eq!(pts[1], Vec3::new(1., 0., 0.), epsilon = 1e-15);
        assert_abs_diff_eq!(pts[2], Vec3::new(2., 0., 0.), epsilon = 1e-15);
    }

    #[test]
    fn planar_quarter_turn() {
        let pts = fk_points(&planar2(), &JointConfig::new(vec![FRAC_PI_2, 0.0])).unwrap();
        assert_abs_diff_eq!(pts[1], Vec3::new(0., 1., 0.), epsilon = 1e-15);
        assert_abs_diff_eq!(pts[2], Vec3::new(0., 2., 0.), epsilon = 1e-15);
    }

    #[test]
    fn planar_elbow_eef() {
        let e = fk_eef(&planar2(), &JointConfig::new(vec![FRAC_PI_2, -FRAC_PI_2])).unwrap();
        assert_abs_diff_eq!(e, Vec3::new(1., 1., 0.), epsilon = 1e-15);
    }

    #[test]
    fn default_arm_matches_homogeneous_oracle() {
        let chain = ChainSpec::default_arm();
        let mid: Vec<f64> = chain
            .joint_limits()
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| 0.5 * (lo + hi) + 0.3 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let pts = fk_points(&chain, &JointConfig::new(mid.clone())).unwrap();
        let oracle = homogeneous_oracle(&chain, &mid);
        assert_eq!(pts.len(), 8);
        for (a, b) in pts.iter().zip(&oracle) {
            assert!((a - b).amax() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn jacobian_planar_hand_values() {
        let j = position_jacobian(&planar2(), &JointConfig::zeros(2), 2).unwrap();
        assert_abs_diff_eq!(j.column(0).into_owned(), Vec3::new(0., 2., 0.), epsilon = 1e-15);
        assert_abs_diff_eq!(j.column(1).into_owned(), Vec3::new(0., 1., 0.), epsilon = 1e-15);
        let base = position_jacobian(&planar2(), &JointConfig::new(vec![0.3, 1.1]), 0).unwrap();
        assert_eq!(base.amax(), 0.0);
    }

    #[test]
    fn errors_on_bad_inputs() {
        let c = planar2();
        assert!(matches!(fk_points(&c, &JointConfig::zeros(3)), Err(Error::Contract(_))));
        assert!(matches!(
            position_jacobian(&c, &JointConfig::zeros(2), 3),
            Err(Error::Contract(_))
        ));
        assert!(ChainSpec::planar(&[1.0]).is_err());
        let rows = vec![DhRow::new(1., 0., 0., 0.); 2];
        assert!(ChainSpec::new("x", rows.clone(), BasePose::default(), vec![(0.0, 0.0); 2]).is_err());
        let skew = BasePose {
            translation: [0.0; 3],
            rotation: [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
        assert!(ChainSpec::new("x", rows, skew, vec![(-1.0, 1.0); 2]).is_err());
        assert!(JointTrajectory::new(vec![JointConfig::zeros(2); 2], 0.1, 0.0).is_err());
        assert!(JointTrajectory::new(vec![JointConfig::zeros(2); 3], 0.0, 0.0).is_err());
    }

    #[test]
    fn chain_file_roundtrip() {
        let chain = ChainSpec::default_arm();
        let text = chain.to_toml();
        assert!(text.starts_with("# Serial chain"));
        assert_eq!(ChainSpec::from_toml(&text).unwrap(), chain);
    }

    #[test]
    fn trajectory_text_roundtrip() {
        let w = (0..4)
            .map(|k| JointConfig::new(vec![0.1 * k as f64, -1.0 / 3.0, PI]))
            .collect();
        let t = JointTrajectory::new(w, 2.0 / 19.0, 1.0).unwrap();
        assert_eq!(JointTrajectory::from_text(&t.to_text()).unwrap(), t);
    }

    fn arb_config() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.5f64..2.5, 7)
    }

    proptest! {
        #[test]
        fn link_lengths_preserved(q in arb_config()) {
            let chain = ChainSpec::default_arm();
            let zero = fk_points(&chain, &JointConfig::zeros(7)).unwrap();
            let pts = fk_points(&chain, &JointConfig::new(q)).unwrap();
            prop_assert_eq!(pts.len(), zero.len());
            for k in 1..pts.len() {
                let a = (pts[k] - pts[k - 1]).norm();
                let b = (zero[k] - zero[k - 1]).norm();
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn jacobian_matches_central_differences(q in arb_config(), point in 1usize..8) {
            let chain = ChainSpec::default_arm();
            let jac = position_jacobian(&chain, &JointConfig::new(q.clone()), point).unwrap();
            let h = 1e-6;
            let mut fd = Matrix3xX::zeros(7);
            for i in 0..7 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let pp = fk_points(&chain, &JointConfig::new(qp)).unwrap()[point];
                let pm = fk_points(&chain, &JointConfig::new(qm)).unwrap()[point];
                fd.set_column(i, &((pp - pm) / (2.0 * h)));
            }
            let scale = fd.amax().max(1e-3);
            prop_assert!((jac - fd).amax() / scale <= 1e-5);
        }

        #[test]
        fn eef_is_last_point(q in arb_config()) {
            let chain = ChainSpec::default_arm();
            let q = JointConfig::new(q);
            let pts = fk_points(&chain, &q).unwrap();
            prop_assert_eq!(fk_eef(&chain, &q).unwrap(), *pts.last().unwrap());
        }
    }
}
