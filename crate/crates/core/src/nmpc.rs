//! Penalty-method NMPC for a unicycle.
//!
//! The decision variable is the input sequence over the horizon. States are
//! obtained by forward-Euler rollout, other agents enter as discs of radius
//! `r_obs` moving along their shared predictions, and the circle exclusion is
//! enforced with a quadratic penalty whose weight grows over a few outer
//! iterations. Each outer iteration runs projected gradient descent with
//! Barzilai-Borwein step guesses and Armijo-style backtracking; the projection
//! is a componentwise clamp onto the input box.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::{AgentId, Point, Pose};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NmpcError {
    SolverDiverged,
    InvalidConfig(&'static str),
    HorizonMismatch { expected: usize, got: usize },
}

impl fmt::Display for NmpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NmpcError::SolverDiverged => write!(f, "objective became non-finite"),
            NmpcError::InvalidConfig(why) => write!(f, "invalid NMPC configuration: {why}"),
            NmpcError::HorizonMismatch { expected, got } => {
                write!(f, "expected {expected} horizon entries, got {got}")
            }
        }
    }
}

impl core::error::Error for NmpcError {}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlInput {
    /// Forward velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Controller parameters. All weights are tunable; the defaults track a path
/// at desk scale with TurtleBot3 Burger input limits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NmpcConfig {
    pub ts: f64,
    pub horizon: usize,
    pub q_pos: f64,
    pub q_heading: f64,
    pub r_v: f64,
    pub r_omega: f64,
    pub r_dv: f64,
    pub r_domega: f64,
    pub q_terminal: f64,
    pub u_min: ControlInput,
    pub u_max: ControlInput,
    pub r_obs: f64,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub outer_iterations: usize,
    pub inner_max_iterations: usize,
    pub inner_tolerance: f64,
    /// Speed (m/s) at which the reference advances along the path.
    pub reference_speed: f64,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            ts: 0.1,
            horizon: 50,
            q_pos: 10.0,
            q_heading: 0.5,
            r_v: 1.0,
            r_omega: 0.5,
            r_dv: 5.0,
            r_domega: 2.0,
            q_terminal: 20.0,
            u_min: ControlInput::new(-0.22, -2.84),
            u_max: ControlInput::new(0.22, 2.84),
            r_obs: 0.3,
            penalty_initial: 10.0,
            penalty_growth: 5.0,
            outer_iterations: 6,
            inner_max_iterations: 200,
            inner_tolerance: 1e-4,
            reference_speed: 0.15,
        }
    }
}

impl NmpcConfig {
    pub fn validate(&self) -> Result<(), NmpcError> {
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(NmpcError::InvalidConfig("ts must be positive"));
        }
        if self.horizon == 0 {
            return Err(NmpcError::InvalidConfig("horizon must be >= 1"));
        }
        if !(self.u_min.v < self.u_max.v && self.u_min.omega < self.u_max.omega) {
            return Err(NmpcError::InvalidConfig("u_min must be below u_max"));
        }
        let weights = [
            self.q_pos,
            self.q_heading,
            self.r_v,
            self.r_omega,
            self.r_dv,
            self.r_domega,
            self.q_terminal,
            self.penalty_initial,
        ];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(NmpcError::InvalidConfig("weights must be finite and >= 0"));
        }
        if !(self.r_obs.is_finite() && self.r_obs > 0.0) {
            return Err(NmpcError::InvalidConfig("r_obs must be positive"));
        }
        if !(self.penalty_growth.is_finite() && self.penalty_growth >= 1.0) {
            return Err(NmpcError::InvalidConfig("penalty growth must be >= 1"));
        }
        if self.outer_iterations == 0 || self.inner_max_iterations == 0 {
            return Err(NmpcError::InvalidConfig("iteration counts must be >= 1"));
        }
        if !(self.inner_tolerance.is_finite() && self.inner_tolerance > 0.0) {
            return Err(NmpcError::InvalidConfig("inner tolerance must be positive"));
        }
        if !(self.reference_speed.is_finite() && self.reference_speed > 0.0) {
            return Err(NmpcError::InvalidConfig("reference speed must be positive"));
        }
        Ok(())
    }

    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            v: u.v.clamp(self.u_min.v, self.u_max.v),
            omega: u.omega.clamp(self.u_min.omega, self.u_max.omega),
        }
    }
}

/// One forward-Euler step of the unicycle model.
pub fn euler_step(x: Pose, u: ControlInput, ts: f64) -> Pose {
    Pose {
        x: x.x + ts * math::cos(x.heading) * u.v,
        y: x.y + ts * math::sin(x.heading) * u.v,
        heading: math::wrap_angle(x.heading + ts * u.omega),
    }
}

/// Predicted states `x_1..x_N` for inputs `u_0..u_{N-1}`.
pub fn rollout(x0: Pose, inputs: &[ControlInput], ts: f64) -> Vec<Pose> {
    let mut out = Vec::with_capacity(inputs.len());
    let mut x = x0;
    for &u in inputs {
        x = euler_step(x, u, ts);
        out.push(x);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictedTrajectory {
    pub agent: AgentId,
    /// Simulation time at which the prediction was made.
    pub stamp: f64,
    pub poses: Vec<Pose>,
}

impl PredictedTrajectory {
    pub fn positions(&self) -> Vec<Point> {
        self.poses.iter().map(Pose::position).collect()
    }
}

/// A moving disc to stay out of: `centers[j]` is aligned with predicted state `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleDisc {
    pub centers: Vec<Point>,
    pub radius: f64,
}

impl ObstacleDisc {
    pub fn stationary(at: Point, horizon: usize, radius: f64) -> Self {
        Self {
            centers: vec![at; horizon],
            radius,
        }
    }

    /// Drops the first `skip` centers, then truncates or pads (holding the
    /// last center) to `horizon` entries.
    pub fn aligned(&self, skip: usize, horizon: usize) -> Self {
        let mut centers: Vec<Point> = self.centers.iter().skip(skip).take(horizon).copied().collect();
        let last = centers
            .last()
            .copied()
            .or_else(|| self.centers.last().copied())
            .unwrap_or_default();
        centers.resize(horizon, last);
        Self {
            centers,
            radius: self.radius,
        }
    }
}

/// Packages an agent's last prediction (or its current pose, if it has none)
/// as an obstacle for everyone else.
pub fn share_trajectory(
    pose: Pose,
    last: Option<&PredictedTrajectory>,
    horizon: usize,
    r_obs: f64,
) -> ObstacleDisc {
    match last {
        Some(traj) if !traj.poses.is_empty() => ObstacleDisc {
            centers: traj.positions(),
            radius: r_obs,
        }
        .aligned(0, horizon),
        _ => ObstacleDisc::stationary(pose.position(), horizon, r_obs),
    }
}

/// Circle exclusion residual `max(r^2 - |p - c|^2, 0)`.
pub fn violation(p: Point, center: Point, r_obs: f64) -> f64 {
    (r_obs * r_obs - p.distance_sq(&center)).max(0.0)
}

/// Everything the controller needs for one solve.
#[derive(Debug, Clone, Copy)]
pub struct TrackingProblem<'a> {
    pub x0: Pose,
    /// Reference for predicted states `x_1..x_N`.
    pub reference: &'a [Pose],
    pub u_prev: ControlInput,
    pub obstacles: &'a [ObstacleDisc],
}

/// Tracking objective `J` (without the collision penalty).
pub fn objective(inputs: &[ControlInput], problem: &TrackingProblem<'_>, config: &NmpcConfig) -> f64 {
    evaluate(inputs, problem, config, 0.0, None)
}

/// Penalized objective `J + mu * sum(violation^2)` and its gradient, laid out as
/// `[dv_0, domega_0, dv_1, domega_1, ...]`.
pub fn penalized_objective_and_gradient(
    inputs: &[ControlInput],
    problem: &TrackingProblem<'_>,
    config: &NmpcConfig,
    mu: f64,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; inputs.len() * 2];
    let f = evaluate(inputs, problem, config, mu, Some(&mut grad));
    (f, grad)
}

pub fn penalized_objective(
    inputs: &[ControlInput],
    problem: &TrackingProblem<'_>,
    config: &NmpcConfig,
    mu: f64,
) -> f64 {
    evaluate(inputs, problem, config, mu, None)
}

/// Total collision residual `sum_j sum_obs violation^2` of a predicted trajectory.
pub fn total_violation(states: &[Pose], obstacles: &[ObstacleDisc]) -> f64 {
    let mut acc = 0.0;
    for (j, x) in states.iter().enumerate() {
        for obs in obstacles {
            if let Some(c) = obs.centers.get(j) {
                let v = violation(x.position(), *c, obs.radius);
                acc += v * v;
            }
        }
    }
    acc
}

fn evaluate(
    inputs: &[ControlInput],
    problem: &TrackingProblem<'_>,
    config: &NmpcConfig,
    mu: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let n = inputs.len();
    let ts = config.ts;
    let states = rollout(problem.x0, inputs, ts);
    let mut cost = 0.0;

    let mut state_grad = if grad.is_some() { vec![[0.0f64; 3]; n] } else { Vec::new() };

    for j in 0..n {
        let x = states[j];
        let r = problem.reference[j.min(problem.reference.len().saturating_sub(1))];
        let dx = x.x - r.x;
        let dy = x.y - r.y;
        let dpsi = math::wrap_angle(x.heading - r.heading);
        let mut wpos = config.q_pos;
        if j + 1 == n {
            wpos += config.q_terminal;
        }
        cost += wpos * (dx * dx + dy * dy) + config.q_heading * dpsi * dpsi;
        let mut gx = [2.0 * wpos * dx, 2.0 * wpos * dy, 2.0 * config.q_heading * dpsi];

        if mu > 0.0 {
            for obs in problem.obstacles {
                let Some(c) = obs.centers.get(j) else { continue };
                let ex = x.x - c.x;
                let ey = x.y - c.y;
                let viol = obs.radius * obs.radius - ex * ex - ey * ey;
                if viol > 0.0 {
                    cost += mu * viol * viol;
                    // d(viol^2)/dp = 2 viol * (-2 e)
                    gx[0] += mu * 2.0 * viol * (-2.0 * ex);
                    gx[1] += mu * 2.0 * viol * (-2.0 * ey);
                }
            }
        }
        if grad.is_some() {
            state_grad[j] = gx;
        }

        let u = inputs[j];
        let prev = if j == 0 { problem.u_prev } else { inputs[j - 1] };
        let dv = u.v - prev.v;
        let dw = u.omega - prev.omega;
        cost += config.r_v * u.v * u.v
            + config.r_omega * u.omega * u.omega
            + config.r_dv * dv * dv
            + config.r_domega * dw * dw;
        if let Some(g) = grad.as_deref_mut() {
            g[2 * j] += 2.0 * config.r_v * u.v + 2.0 * config.r_dv * dv;
            g[2 * j + 1] += 2.0 * config.r_omega * u.omega + 2.0 * config.r_domega * dw;
            if j > 0 {
                g[2 * (j - 1)] -= 2.0 * config.r_dv * dv;
                g[2 * (j - 1) + 1] -= 2.0 * config.r_domega * dw;
            }
        }
    }

    if let Some(g) = grad {
        // Adjoint sweep: `lam` is the total sensitivity of the cost to state j+1.
        let mut lam = [0.0f64; 3];
        for j in (0..n).rev() {
            let mut l = state_grad[j];
            if j + 1 < n {
                let psi = states[j].heading;
                let v = inputs[j + 1].v;
                l[0] += lam[0];
                l[1] += lam[1];
                l[2] += lam[2] - lam[0] * ts * math::sin(psi) * v + lam[1] * ts * math::cos(psi) * v;
            }
            let psi_prev = if j == 0 { problem.x0.heading } else { states[j - 1].heading };
            g[2 * j] += l[0] * ts * math::cos(psi_prev) + l[1] * ts * math::sin(psi_prev);
            g[2 * j + 1] += l[2] * ts;
            lam = l;
        }
    }
    cost
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmpcSolution {
    pub inputs: Vec<ControlInput>,
    /// Rollout of `inputs` from the initial state.
    pub states: Vec<Pose>,
    pub objective: f64,
    pub total_violation: f64,
    pub iterations: usize,
}

fn project(flat: &mut [f64], config: &NmpcConfig) {
    for pair in flat.chunks_exact_mut(2) {
        pair[0] = pair[0].clamp(config.u_min.v, config.u_max.v);
        pair[1] = pair[1].clamp(config.u_min.omega, config.u_max.omega);
    }
}

fn to_inputs(flat: &[f64]) -> Vec<ControlInput> {
    flat.chunks_exact(2).map(|p| ControlInput::new(p[0], p[1])).collect()
}

/// Largest per-step residual accepted before the standstill restart kicks in.
const RESTART_THRESHOLD: f64 = 1e-3;

/// Projected gradient descent at a fixed penalty weight. Returns the number
/// of iterations taken.
fn descend(u: &mut [f64], problem: &TrackingProblem<'_>, config: &NmpcConfig, mu: f64) -> Result<usize, NmpcError> {
    let eval = |flat: &[f64]| -> (f64, Vec<f64>) { penalized_objective_and_gradient(&to_inputs(flat), problem, config, mu) };
    let (mut f, mut g) = eval(u);
    if !f.is_finite() {
        return Err(NmpcError::SolverDiverged);
    }
    let mut alpha = 1e-2;
    let mut trial = vec![0.0; u.len()];
    let mut iterations = 0;
    for _ in 0..config.inner_max_iterations {
        iterations += 1;
        let mut accepted = None;
        let mut step = alpha;
        for _ in 0..40 {
            for (t, (ui, gi)) in trial.iter_mut().zip(u.iter().zip(&g)) {
                *t = ui - step * gi;
            }
            project(&mut trial, config);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for ((t, ui), gi) in trial.iter().zip(u.iter()).zip(&g) {
                let d = t - ui;
                lin += gi * d;
                sq += d * d;
            }
            let f_trial = penalized_objective(&to_inputs(&trial), problem, config, mu);
            if !f_trial.is_finite() {
                return Err(NmpcError::SolverDiverged);
            }
            if f_trial <= f + lin + sq / (2.0 * step) {
                accepted = Some(sq);
                break;
            }
            step *= 0.5;
        }
        let Some(sq) = accepted else { break };
        let (f_new, g_new) = eval(&trial);
        if !f_new.is_finite() {
            return Err(NmpcError::SolverDiverged);
        }
        let mut sy = 0.0;
        for (((t, ui), gn), go) in trial.iter().zip(u.iter()).zip(&g_new).zip(&g) {
            sy += (t - ui) * (gn - go);
        }
        u.copy_from_slice(&trial);
        f = f_new;
        g = g_new;
        // Projected-gradient residual.
        if math::sqrt(sq) / step < config.inner_tolerance {
            break;
        }
        alpha = if sy > 0.0 { (sq / sy).clamp(1e-6, 1e3) } else { (step * 2.0).min(1e3) };
    }
    Ok(iterations)
}

fn worst_violation(states: &[Pose], obstacles: &[ObstacleDisc]) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, x) in states.iter().enumerate() {
        for obs in obstacles {
            if let Some(c) = obs.centers.get(j) {
                worst = worst.max(violation(x.position(), *c, obs.radius));
            }
        }
    }
    worst
}

/// Minimises the penalized objective over the input box.
///
/// `warm_start` may be empty (zeros are used) or hold `horizon` inputs. The
/// penalty weight starts at `penalty_initial` and grows by `penalty_growth`
/// until the rollout is collision free or `outer_iterations` are spent. A
/// disc lying right on the reference can trap the descent with the rollout
/// passing through it; if the result still violates a disc, the final weight
/// is also tried from a standstill with a slight left turn, at the final and
/// one further grown weight, and the better of the two is kept.
pub fn solve(
    problem: &TrackingProblem<'_>,
    config: &NmpcConfig,
    warm_start: &[ControlInput],
) -> Result<NmpcSolution, NmpcError> {
    let n = config.horizon;
    if problem.reference.len() != n {
        return Err(NmpcError::HorizonMismatch {
            expected: n,
            got: problem.reference.len(),
        });
    }
    if !warm_start.is_empty() && warm_start.len() != n {
        return Err(NmpcError::HorizonMismatch {
            expected: n,
            got: warm_start.len(),
        });
    }
    let mut u: Vec<f64> = if warm_start.is_empty() {
        vec![0.0; 2 * n]
    } else {
        warm_start.iter().flat_map(|c| [c.v, c.omega]).collect()
    };
    project(&mut u, config);

    let mut iterations = 0;
    let mut mu = config.penalty_initial;
    let has_obstacles = !problem.obstacles.is_empty();
    for outer in 0..config.outer_iterations {
        iterations += descend(&mut u, problem, config, mu)?;
        if !has_obstacles {
            break;
        }
        let states = rollout(problem.x0, &to_inputs(&u), config.ts);
        if total_violation(&states, problem.obstacles) == 0.0 {
            break;
        }
        if outer + 1 < config.outer_iterations {
            mu *= config.penalty_growth;
        }
    }

    if has_obstacles {
        let states = rollout(problem.x0, &to_inputs(&u), config.ts);
        if worst_violation(&states, problem.obstacles) > RESTART_THRESHOLD {
            let nudge = 0.05 * config.u_max.omega.min(-config.u_min.omega).max(0.0);
            let mut alt: Vec<f64> = (0..n).flat_map(|_| [0.0, nudge]).collect();
            project(&mut alt, config);
            iterations += descend(&mut alt, problem, config, mu)?;
            let mu_alt = mu * config.penalty_growth;
            iterations += descend(&mut alt, problem, config, mu_alt)?;
            let keep_alt = penalized_objective(&to_inputs(&alt), problem, config, mu_alt)
                < penalized_objective(&to_inputs(&u), problem, config, mu_alt);
            if keep_alt {
                u = alt;
            }
        }
    }

    let inputs = to_inputs(&u);
    let states = rollout(problem.x0, &inputs, config.ts);
    let objective = objective(&inputs, problem, config);
    if !objective.is_finite() {
        return Err(NmpcError::SolverDiverged);
    }
    Ok(NmpcSolution {
        total_violation: total_violation(&states, problem.obstacles),
        inputs,
        states,
        objective,
        iterations,
    })
}

/// Previous solution advanced by one step, repeating the final input.
pub fn shift_warm_start(previous: &[ControlInput]) -> Vec<ControlInput> {
    let mut out: Vec<ControlInput> = previous.iter().skip(1).copied().collect();
    if let Some(&last) = previous.last() {
        out.push(last);
    }
    out
}

/// Reference poses for `x_1..x_N`: points on `path` at arc length
/// `s0 + (j+1) * ts * speed`, where `s0` is the closest-point projection of
/// `from`. Headings follow the local path direction.
pub fn reference_along_path(path: &[Point], from: Pose, config: &NmpcConfig) -> Vec<Pose> {
    let n = config.horizon;
    match path.len() {
        0 => return vec![from; n],
        1 => {
            let p = path[0];
            return vec![Pose { x: p.x, y: p.y, heading: from.heading }; n];
        }
        _ => {}
    }
    let mut cumulative = Vec::with_capacity(path.len());
    cumulative.push(0.0);
    for w in path.windows(2) {
        let last = *cumulative.last().unwrap_or(&0.0);
        cumulative.push(last + w[0].distance(&w[1]));
    }
    let total = *cumulative.last().unwrap_or(&0.0);

    let here = from.position();
    let mut best = (f64::INFINITY, 0.0);
    for (i, w) in path.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let seg = cumulative[i + 1] - cumulative[i];
        let t = if seg > 0.0 {
            (((here.x - a.x) * (b.x - a.x) + (here.y - a.y) * (b.y - a.y)) / (seg * seg)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let proj = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        let d = proj.distance_sq(&here);
        if d < best.0 {
            best = (d, cumulative[i] + t * seg);
        }
    }
    let s0 = best.1;

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for j in 0..n {
        let s = (s0 + (j + 1) as f64 * config.ts * config.reference_speed).min(total);
        while seg + 2 < path.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let (a, b) = (path[seg], path[seg + 1]);
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 { ((s - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 1.0 };
        out.push(Pose {
            x: a.x + t * (b.x - a.x),
            y: a.y + t * (b.y - a.y),
            heading: math::atan2(b.y - a.y, b.x - a.x),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    fn pose(x: f64, y: f64, h: f64) -> Pose {
        Pose { x, y, heading: h }
    }

    #[test]
    fn euler_examples() {
        let a = euler_step(pose(0.0, 0.0, 0.0), ControlInput::new(1.0, 0.0), 0.1);
        assert_eq!(a, pose(0.1, 0.0, 0.0));
        let b = euler_step(pose(0.0, 0.0, FRAC_PI_2), ControlInput::new(1.0, 0.0), 0.1);
        assert!(b.x.abs() < 1e-15 && (b.y - 0.1).abs() < 1e-15 && b.heading == FRAC_PI_2);
        let c = euler_step(pose(1.0, 2.0, 0.3), ControlInput::new(0.0, 1.0), 0.1);
        assert_eq!((c.x, c.y), (1.0, 2.0));
        assert!((c.heading - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rollout_examples() {
        let x0 = pose(0.5, -0.2, 1.0);
        let still = rollout(x0, &[ControlInput::ZERO; 10], 0.1);
        assert!(still.iter().all(|p| *p == x0));
        let straight = rollout(pose(0.0, 0.0, 0.0), &[ControlInput::new(0.2, 0.0); 50], 0.1);
        assert_eq!(straight.len(), 50);
        assert!((straight[49].x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn violation_examples() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(violation(Point::new(0.5, 0.0), o, 0.3), 0.0);
        assert!((violation(o, o, 0.3) - 0.09).abs() < 1e-15);
        assert!((violation(Point::new(0.2, 0.0), o, 0.3) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn objective_zero_on_reference() {
        let config = NmpcConfig::default();
        let x0 = pose(1.0, 1.0, 0.5);
        let reference = vec![x0; config.horizon];
        let inputs = vec![ControlInput::ZERO; config.horizon];
        let problem = TrackingProblem {
            x0,
            reference: &reference,
            u_prev: ControlInput::ZERO,
            obstacles: &[],
        };
        assert_eq!(objective(&inputs, &problem, &config), 0.0);
    }

    #[test]
    fn objective_linear_in_position_weight() {
        let config = NmpcConfig {
            q_heading: 0.0,
            r_v: 0.0,
            r_omega: 0.0,
            r_dv: 0.0,
            r_domega: 0.0,
            q_terminal: 0.0,
            ..NmpcConfig::default()
        };
        let x0 = pose(0.0, 0.0, 0.0);
        let reference = vec![pose(1.0, 0.5, 0.0); config.horizon];
        let inputs = vec![ControlInput::new(0.1, 0.2); config.horizon];
        let problem = TrackingProblem {
            x0,
            reference: &reference,
            u_prev: ControlInput::ZERO,
            obstacles: &[],
        };
        let j1 = objective(&inputs, &problem, &config);
        let doubled = NmpcConfig { q_pos: 20.0, ..config };
        let j2 = objective(&inputs, &problem, &doubled);
        assert!((j2 - 2.0 * j1).abs() < 1e-9 * j1);
    }

    #[test]
    fn warm_start_shift() {
        let u = [ControlInput::new(0.1, 0.0), ControlInput::new(0.2, 0.1), ControlInput::new(0.3, 0.2)];
        let s = shift_warm_start(&u);
        assert_eq!(s, vec![u[1], u[2], u[2]]);
        assert!(shift_warm_start(&[]).is_empty());
    }

    #[test]
    fn obstacle_alignment() {
        let disc = ObstacleDisc {
            centers: vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)],
            radius: 0.3,
        };
        let a = disc.aligned(1, 4);
        assert_eq!(a.centers, vec![Point::new(1.0, 0.0), Point::new(2.0, 0.0), Point::new(2.0, 0.0), Point::new(2.0, 0.0)]);
        let b = disc.aligned(0, 2);
        assert_eq!(b.centers.len(), 2);
    }

    #[test]
    fn shared_trajectory_cases() {
        let p = pose(1.0, 2.0, 0.0);
        let fresh = share_trajectory(p, None, 5, 0.3);
        assert_eq!(fresh.centers, vec![Point::new(1.0, 2.0); 5]);
        let traj = PredictedTrajectory {
            agent: AgentId(0),
            stamp: 0.0,
            poses: rollout(p, &[ControlInput::new(0.2, 0.0); 5], 0.1),
        };
        let moving = share_trajectory(p, Some(&traj), 5, 0.3);
        assert_eq!(moving.centers, traj.positions());
    }

    #[test]
    fn reference_advances_along_path() {
        let config = NmpcConfig::default();
        let path = [Point::new(0.0, 0.0), Point::new(10.0, 0.0)];
        let r = reference_along_path(&path, pose(0.0, 0.1, 0.0), &config);
        assert_eq!(r.len(), 50);
        assert!((r[0].x - 0.015).abs() < 1e-12);
        assert!((r[49].x - 0.75).abs() < 1e-12);
        assert!(r.iter().all(|p| p.y == 0.0 && p.heading == 0.0));
        let short = [Point::new(0.0, 0.0), Point::new(0.1, 0.0)];
        let r = reference_along_path(&short, pose(0.0, 0.0, 0.0), &config);
        assert!((r[49].x - 0.1).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(NmpcConfig::default().validate().is_ok());
        assert!(NmpcConfig { horizon: 0, ..Default::default() }.validate().is_err());
        assert!(NmpcConfig { ts: 0.0, ..Default::default() }.validate().is_err());
        assert!(NmpcConfig { q_pos: -1.0, ..Default::default() }.validate().is_err());
        let bad_bounds = NmpcConfig {
            u_min: ControlInput::new(0.3, -1.0),
            ..Default::default()
        };
        assert!(bad_bounds.validate().is_err());
    }
}
