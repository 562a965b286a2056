//! First-order trajectory optimizer with fixed endpoints.
//!
//! Only interior waypoints are decision variables, so the start and goal
//! configurations are reproduced bit-for-bit. Each iteration takes a
//! projected step along the gradient preconditioned by the joint-space
//! second-difference metric (the same metric as the smoothness cost, as in
//! covariant trajectory optimizers), with an Armijo backtracking line search
//! that interpolates a quadratic model of the cost along the step.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{
    finite_difference_gradient, interior, relative_gradient_error, with_interior, CostContext,
    CostReport, CostWeights, TrajectoryObjective, WeightedObjective,
};
use crate::error::{Error, Result};
use crate::kinematics::{ChainSpec, JointConfig, JointTrajectory};

const ARMIJO_C: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient's largest entry falls below this.
    pub grad_tol: f64,
    /// First trial step length (in units of the preconditioned direction).
    pub step_init: f64,
    pub step_shrink: f64,
    pub step_grow: f64,
    /// Compare the analytic gradient with finite differences at the start.
    pub fd_check: bool,
    /// Picks the coordinates probed by `fd_check`.
    pub seed: u64,
    /// Relative decrease of the total over `stall_window` accepted steps
    /// below which the run counts as converged.
    pub f_tol: f64,
    pub stall_window: usize,
    /// Largest change of any joint angle in one step, radians.
    pub max_step_rad: f64,
    /// Smallest trial step (largest joint change, radians) before the line
    /// search gives up.
    pub min_step_rad: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-4,
            step_init: 1.0,
            step_shrink: 0.5,
            step_grow: 2.0,
            fd_check: false,
            seed: 0,
            f_tol: 1e-9,
            stall_window: 10,
            max_step_rad: 0.2,
            min_step_rad: 1e-13,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::contract("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::contract("grad_tol must be positive"));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0 && self.step_grow > 1.0) {
            return Err(Error::contract("need 0 < step_shrink < 1 < step_grow"));
        }
        if !(self.step_init > 0.0 && self.max_step_rad > 0.0 && self.min_step_rad > 0.0) {
            return Err(Error::contract("step sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    Stalled,
    MaxIterations,
    LineSearchFailure,
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    pub per_cost: Vec<(String, f64)>,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult {
    pub trajectory: JointTrajectory,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub initial_report: CostReport,
    pub final_report: CostReport,
    pub wall_time: f64,
    /// Worst relative gradient error found by the start-up check.
    pub fd_check_error: Option<f64>,
    pub trace: Vec<TraceRow>,
}

impl OptResult {
    /// `iteration,total,<cost columns>,step` rows of the accepted iterates.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,total");
        if let Some(first) = self.trace.first() {
            for (name, _) in &first.per_cost {
                let _ = write!(s, ",{name}");
            }
        }
        s.push_str(",step\n");
        for row in &self.trace {
            let _ = write!(s, "{},{}", row.iteration, row.total);
            for (_, v) in &row.per_cost {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{}", row.step);
        }
        s
    }
}

/// Linear joint-space interpolation from `start` to `goal`.
pub fn straightline_joint_init(
    start: &JointConfig,
    goal: &JointConfig,
    n: usize,
    dt: f64,
    t0: f64,
) -> Result<JointTrajectory> {
    if n < 3 {
        return Err(Error::contract(format!("need at least 3 waypoints, got {n}")));
    }
    if start.len() != goal.len() {
        return Err(Error::contract("start and goal differ in dimension"));
    }
    let mut w = Vec::with_capacity(n);
    w.push(start.clone());
    for k in 1..n - 1 {
        w.push(start.lerp(goal, k as f64 / (n - 1) as f64));
    }
    w.push(goal.clone());
    JointTrajectory::new(w, dt, t0)
}

/// Minimize the weighted costs with `init`'s endpoints held fixed. `init`
/// must start at the context's start configuration and end at its goal.
pub fn optimize(
    ctx: &CostContext,
    w: &CostWeights,
    init: &JointTrajectory,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    w.validate()?;
    if init.start() != ctx.nominal().start() {
        return Err(Error::contract("initial trajectory does not begin at the start configuration"));
    }
    if init.end() != ctx.goal_config() {
        return Err(Error::contract("initial trajectory does not end at the goal configuration"));
    }
    let obj = WeightedObjective { ctx, weights: *w };
    minimize(&obj, ctx.chain(), init, opts)
}

/// Cholesky factor of the interior second-difference metric `D^T D`.
struct Preconditioner {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    m: usize,
    dof: usize,
}

impl Preconditioner {
    fn new(waypoints: usize, dof: usize) -> Self {
        let m = waypoints - 2;
        // Rows of D are (1, -2, 1) over waypoints k..k+2; keep interior columns.
        let mut d = DMatrix::<f64>::zeros(waypoints - 2, m);
        for r in 0..waypoints - 2 {
            for (off, c) in [(0usize, 1.0), (1, -2.0), (2, 1.0)] {
                let k = r + off;
                if k >= 1 && k <= m {
                    d[(r, k - 1)] = c;
                }
            }
        }
        let a = d.transpose() * d;
        let chol = a.cholesky().expect("interior second-difference metric is positive definite");
        Self { chol, m, dof }
    }

    /// `M^{-1} g`, one joint at a time.
    fn solve(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.len()];
        for j in 0..self.dof {
            let col = DVector::from_iterator(self.m, (0..self.m).map(|k| g[k * self.dof + j]));
            let sol = self.chol.solve(&col);
            for k in 0..self.m {
                out[k * self.dof + j] = sol[k];
            }
        }
        out
    }
}

fn project(x: &mut [f64], chain: &ChainSpec) {
    for w in x.chunks_mut(chain.dof()) {
        chain.clamp(w);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn trace_row(iteration: usize, rep: &CostReport, step: f64) -> TraceRow {
    TraceRow {
        iteration,
        total: rep.total,
        per_cost: rep.per_cost.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        step,
    }
}

/// Minimize any [`TrajectoryObjective`] over the interior waypoints of
/// `init`, projecting onto the joint limits of `chain` after every step.
pub fn minimize(
    obj: &dyn TrajectoryObjective,
    chain: &ChainSpec,
    init: &JointTrajectory,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    opts.validate()?;
    let started = Instant::now();
    if init.dof() != chain.dof() {
        return Err(Error::contract("initial trajectory dimension differs from the chain"));
    }
    let mut x = interior(init);
    project(&mut x, chain);
    let mut traj = with_interior(init, &x);

    let initial_report = obj.evaluate(&traj, true)?;
    if !initial_report.total.is_finite() || initial_report.gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "initial cost {} is not finite: {:?}",
            initial_report.total, initial_report.per_cost
        )));
    }
    let fd_check_error = if opts.fd_check {
        Some(fd_check(obj, &traj, &initial_report, opts.seed)?)
    } else {
        None
    };

    let precond = Preconditioner::new(init.len(), init.dof());
    let mut report = initial_report.clone();
    let mut trace = vec![trace_row(0, &report, 0.0)];
    let mut history = vec![report.total];
    let mut step = opts.step_init;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for it in 1..=opts.max_iters {
        let g = &report.gradient;
        let mut probe: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        project(&mut probe, chain);
        let pg: Vec<f64> = x.iter().zip(&probe).map(|(a, b)| a - b).collect();
        if inf_norm(&pg) < opts.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }

        let mut dir: Vec<f64> = precond.solve(g).into_iter().map(|v| -v).collect();
        let accepted = match line_search(obj, chain, &traj, &x, report.total, g, &dir, step, opts)? {
            Some(acc) => Some(acc),
            None => {
                // Projection can cancel the preconditioned direction at a
                // bound; retry along the plain negative gradient.
                dir = g.iter().map(|v| -v).collect();
                line_search(obj, chain, &traj, &x, report.total, g, &dir, step, opts)?
            }
        };
        let Some((alpha, x_new)) = accepted else {
            termination = Termination::LineSearchFailure;
            break;
        };

        x = x_new;
        traj = with_interior(&traj, &x);
        report = obj.evaluate(&traj, true)?;
        iterations = it;
        trace.push(trace_row(it, &report, alpha));
        history.push(report.total);
        step = alpha * opts.step_grow;

        let window = opts.stall_window;
        if window > 0 && history.len() > window {
            let old = history[history.len() - 1 - window];
            if old - report.total <= opts.f_tol * old.abs().max(1.0) {
                termination = Termination::Stalled;
                break;
            }
        }
    }

    Ok(OptResult {
        trajectory: traj,
        iterations,
        converged: matches!(termination, Termination::GradientTolerance | Termination::Stalled),
        termination,
        initial_report,
        final_report: report,
        wall_time: started.elapsed().as_secs_f64(),
        fd_check_error,
        trace,
    })
}

/// Backtracking search along `dir`. Returns the accepted step multiplier
/// and the new variables, or `None` when no acceptable step exists above
/// `min_step_rad`.
#[allow(clippy::too_many_arguments)]
fn line_search(
    obj: &dyn TrajectoryObjective,
    chain: &ChainSpec,
    traj: &JointTrajectory,
    x: &[f64],
    f0: f64,
    g: &[f64],
    dir: &[f64],
    step: f64,
    opts: &OptimizerOptions,
) -> Result<Option<(f64, Vec<f64>)>> {
    let dir_norm = inf_norm(dir);
    if dir_norm == 0.0 {
        return Ok(None);
    }
    let mut alpha = step.min(opts.max_step_rad / dir_norm);
    let eval = |alpha: f64| -> Result<(Vec<f64>, f64, f64)> {
        let mut xn: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
        project(&mut xn, chain);
        let dx: Vec<f64> = xn.iter().zip(x).map(|(a, b)| a - b).collect();
        let slope = dot(g, &dx);
        let f = if slope < 0.0 {
            obj.evaluate(&with_interior(traj, &xn), false)?.total
        } else {
            f64::NAN
        };
        Ok((xn, f, slope))
    };

    while alpha * dir_norm >= opts.min_step_rad {
        let (xn, f, slope) = eval(alpha)?;
        if !(slope < 0.0) {
            return Ok(None);
        }
        if f.is_finite() && f <= f0 + ARMIJO_C * slope {
            // Refine with the minimizer of the quadratic through f0, slope
            // and f when the step overshot it.
            let curv = f - f0 - slope;
            if curv > 0.0 {
                let s = -slope / (2.0 * curv);
                if (0.05..0.95).contains(&s) {
                    let (xr, fr, sr) = eval(alpha * s)?;
                    if sr < 0.0 && fr.is_finite() && fr < f {
                        return Ok(Some((alpha * s, xr)));
                    }
                }
            }
            return Ok(Some((alpha, xn)));
        }
        let curv = f - f0 - slope;
        let s = if f.is_finite() && curv > 0.0 {
            (-slope / (2.0 * curv)).clamp(0.1, opts.step_shrink)
        } else {
            opts.step_shrink
        };
        alpha *= s;
    }
    Ok(None)
}

fn fd_check(
    obj: &dyn TrajectoryObjective,
    traj: &JointTrajectory,
    report: &CostReport,
    seed: u64,
) -> Result<f64> {
    let fd = finite_difference_gradient(obj, traj, 1e-6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = fd.len().min(24);
    let idx = sample(&mut rng, fd.len(), k);
    let a: Vec<f64> = idx.iter().map(|i| report.gradient[i]).collect();
    let b: Vec<f64> = idx.iter().map(|i| fd[i]).collect();
    let scale = inf_norm(&fd).max(1e-8);
    Ok(relative_gradient_error(&a, &b, scale))
}
