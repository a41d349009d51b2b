//! The initialization-dependent Lyapunov function and trajectory audits.
//!
//! For a target `(p, q)` and ascent paths frozen at the initialization,
//!
//! ```text
//! H(F, G) = Σ_i ∫_{p_i}^{f_i} (z − p_i)/‖∇f_i(X(z))‖² dz + Σ_j ∫_{q_j}^{g_j} (z − q_j)/‖∇g_j(X(z))‖² dz
//! ```
//!
//! Sigmoid coordinates use an exact antiderivative, identity coordinates give
//! `½(f − p)²`, and every other operator is integrated numerically along its
//! sampled path. The integral is taken as written: for identity operators `H`
//! is half the squared distance to the target.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{FlowError, HccGame, Trajectory};
use crate::operators::{build_bank_paths, AscentPath, OperatorError, OperatorKind, PathSettings};
use crate::payoffs::{Payoff, Regularized, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("{side}_{index} = {value} is outside the range of its path")]
    OutOfRange { side: Side, index: usize, value: f64 },
    #[error("target {side}_{index} = {value} is not strictly inside the range of its path")]
    UnsafeTarget { side: Side, index: usize, value: f64 },
    #[error("{side}_{index} starts at a stationary point of its operator")]
    DegeneratePath { side: Side, index: usize },
    #[error("quadrature did not reach tolerance {tol} within {max_evals} evaluations")]
    QuadratureFailure { tol: f64, max_evals: usize },
    #[error("solution set is empty")]
    EmptySolutionSet,
    #[error("invalid window {window} for a trajectory of duration {duration}")]
    InvalidWindow { window: f64, duration: f64 },
    #[error("r(t) = {value} is not positive at t = {t}; the run converged exactly")]
    NonPositiveR { t: f64, value: f64 },
    #[error("fit interval [{lo}, {hi}] holds fewer than two samples")]
    EmptyFitInterval { lo: f64, hi: f64 },
    #[error("Newton iteration did not converge: residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("Jacobian of the stationarity system is singular")]
    SingularJacobian,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Evaluation budget for one adaptive Simpson call.
pub const MAX_QUADRATURE_EVALS: usize = 1_000_000;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, LyapunovError> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut evals = 3usize;
    let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    let mut ok = true;
    let v = simpson_rec(&f, lo, hi, fa, fm, fb, whole, tol, 60, &mut evals, &mut ok);
    if !ok || !v.is_finite() {
        return Err(LyapunovError::QuadratureFailure { tol, max_evals: MAX_QUADRATURE_EVALS });
    }
    Ok(sign * v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    *evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 || m <= a || m >= b {
        if depth == 0 && delta.abs() > 15.0 * tol {
            *ok = false;
        }
        return left + right + delta / 15.0;
    }
    if *evals > MAX_QUADRATURE_EVALS {
        *ok = false;
        return left + right;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals, ok)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals, ok)
}

/// `∫ (z − p)/(z²(1 − z)²) dz = (1 − 2p)·ln(z/(1 − z)) + (1 − p)/(1 − z) + p/z`.
pub fn sigmoid_antiderivative(z: f64, p: f64) -> f64 {
    (1.0 - 2.0 * p) * (z / (1.0 - z)).ln() + (1.0 - p) / (1.0 - z) + p / z
}

/// Per-coordinate `∫_p^z (s − p)/‖∇‖² ds`.
#[derive(Debug, Clone)]
enum CoordH {
    Sigmoid { p: f64, a_p: f64 },
    Identity { p: f64 },
    Tabulated(Table),
}

/// Cumulative integral along a sampled path, measured outward from the target.
#[derive(Debug, Clone)]
struct Table {
    path: AscentPath,
    p: f64,
    /// First sample index with output `≥ p`.
    kp: usize,
    /// `cum[k] = ∫_p^{z_k} (s − p)/‖∇‖² ds` (always ≥ 0).
    cum: Vec<f64>,
    tol: f64,
}

impl Table {
    fn integrand(&self, k: usize, s: f64) -> f64 {
        let x = self.path.point_on_segment(k, s);
        (s - self.p) / self.path.operator().grad_norm_sq(&x)
    }

    /// Integral over `[from, to]` lying inside segment `k`.
    fn piece(&self, k: usize, from: f64, to: f64) -> Result<f64, LyapunovError> {
        adaptive_simpson(|s| self.integrand(k, s), from, to, self.tol)
    }

    fn build(path: AscentPath, p: f64, tol: f64) -> Result<Self, LyapunovError> {
        let outs = path.outputs().to_vec();
        let n = outs.len();
        let kp = outs.partition_point(|&z| z < p);
        let mut t = Table { path, p, kp, cum: vec![0.0; n], tol };
        if kp < n {
            t.cum[kp] = if kp == 0 { 0.0 } else { t.piece(kp - 1, p, outs[kp])? };
            for k in kp..n - 1 {
                t.cum[k + 1] = t.cum[k] + t.piece(k, outs[k], outs[k + 1])?;
            }
        }
        if kp > 0 {
            t.cum[kp - 1] = if kp == n { 0.0 } else { t.piece(kp - 1, p, outs[kp - 1])? };
            for k in (0..kp - 1).rev() {
                t.cum[k] = t.cum[k + 1] + t.piece(k, outs[k + 1], outs[k])?;
            }
        }
        Ok(t)
    }

    /// `None` if `z` lies outside the sampled outputs.
    fn eval(&self, z: f64) -> Result<Option<f64>, LyapunovError> {
        let outs = self.path.outputs();
        let n = outs.len();
        if !(z >= outs[0] && z <= outs[n - 1]) {
            return Ok(None);
        }
        let p = self.p;
        let k = outs.partition_point(|&o| o <= z);
        // outs[k-1] ≤ z < outs[k]
        let res = if z >= p {
            if k <= self.kp {
                // p and z share the segment below kp.
                self.piece(self.kp.saturating_sub(1), p, z)
            } else {
                let base = k - 1;
                if base + 1 == n {
                    Ok(self.cum[base])
                } else {
                    self.piece(base, outs[base], z).map(|v| self.cum[base] + v)
                }
            }
        } else if k >= self.kp {
            // Same segment as p, below it.
            self.piece(self.kp - 1, p, z)
        } else {
            self.piece(k - 1, outs[k], z).map(|v| self.cum[k] + v)
        };
        res.map(Some)
    }
}

/// Frozen ascent paths plus a target solution `(p, q)`.
#[derive(Debug, Clone)]
pub struct LyapunovContext {
    coords_f: Vec<CoordH>,
    coords_g: Vec<CoordH>,
    paths_f: Vec<AscentPath>,
    paths_g: Vec<AscentPath>,
    p: Vec<f64>,
    q: Vec<f64>,
    quadrature_tol: f64,
}

pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-12;

impl LyapunovContext {
    pub fn new(
        paths_f: Vec<AscentPath>,
        paths_g: Vec<AscentPath>,
        p: Vec<f64>,
        q: Vec<f64>,
        quadrature_tol: f64,
    ) -> Result<Self, LyapunovError> {
        if paths_f.len() != p.len() {
            return Err(LyapunovError::DimensionMismatch { what: "p", expected: paths_f.len(), got: p.len() });
        }
        if paths_g.len() != q.len() {
            return Err(LyapunovError::DimensionMismatch { what: "q", expected: paths_g.len(), got: q.len() });
        }
        if !(quadrature_tol > 0.0) {
            return Err(LyapunovError::InvalidArgument("quadrature_tol must be positive".into()));
        }
        let coords = |paths: &[AscentPath], target: &[f64], side: Side| -> Result<Vec<CoordH>, LyapunovError> {
            paths
                .iter()
                .zip(target)
                .enumerate()
                .map(|(index, (path, &value))| {
                    if path.is_degenerate() {
                        return Err(LyapunovError::DegeneratePath { side, index });
                    }
                    let inside = path.range().contains_strictly(value)
                        && (path.operator().kind() != OperatorKind::Custom
                            || (value >= path.outputs()[0] && value <= *path.outputs().last().unwrap()));
                    if !inside {
                        return Err(LyapunovError::UnsafeTarget { side, index, value });
                    }
                    Ok(match path.operator().kind() {
                        OperatorKind::Sigmoid1D => CoordH::Sigmoid { p: value, a_p: sigmoid_antiderivative(value, value) },
                        OperatorKind::Identity1D => CoordH::Identity { p: value },
                        OperatorKind::Custom => CoordH::Tabulated(Table::build(path.clone(), value, quadrature_tol)?),
                    })
                })
                .collect()
        };
        let coords_f = coords(&paths_f, &p, Side::F)?;
        let coords_g = coords(&paths_g, &q, Side::G)?;
        Ok(Self { coords_f, coords_g, paths_f, paths_g, p, q, quadrature_tol })
    }

    /// Builds one path per operator through the given initialization.
    pub fn for_initialization(
        game: &HccGame,
        theta0: &[f64],
        phi0: &[f64],
        p: Vec<f64>,
        q: Vec<f64>,
        settings: &PathSettings,
    ) -> Result<Self, LyapunovError> {
        let paths_f = build_bank_paths(game.bank_f(), theta0, settings)?;
        let paths_g = build_bank_paths(game.bank_g(), phi0, settings)?;
        Self::new(paths_f, paths_g, p, q, DEFAULT_QUADRATURE_TOL)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn paths_f(&self) -> &[AscentPath] {
        &self.paths_f
    }

    pub fn paths_g(&self) -> &[AscentPath] {
        &self.paths_g
    }

    pub fn quadrature_tol(&self) -> f64 {
        self.quadrature_tol
    }

    fn coord(c: &CoordH, z: f64, side: Side, index: usize) -> Result<f64, LyapunovError> {
        let oor = LyapunovError::OutOfRange { side, index, value: z };
        match c {
            CoordH::Sigmoid { p, a_p } => {
                if !(z > 0.0 && z < 1.0) {
                    return Err(oor);
                }
                if z == *p {
                    return Ok(0.0);
                }
                Ok((sigmoid_antiderivative(z, *p) - a_p).max(0.0))
            }
            CoordH::Identity { p } => {
                if !z.is_finite() {
                    return Err(oor);
                }
                Ok(0.5 * (z - p) * (z - p))
            }
            CoordH::Tabulated(t) => t.eval(z)?.ok_or(oor),
        }
    }

    /// `H(F, G)`.
    pub fn eval_h(&self, f: &[f64], g: &[f64]) -> Result<f64, LyapunovError> {
        if f.len() != self.p.len() {
            return Err(LyapunovError::DimensionMismatch { what: "F", expected: self.p.len(), got: f.len() });
        }
        if g.len() != self.q.len() {
            return Err(LyapunovError::DimensionMismatch { what: "G", expected: self.q.len(), got: g.len() });
        }
        let mut h = 0.0;
        for (i, (c, &z)) in self.coords_f.iter().zip(f).enumerate() {
            h += Self::coord(c, z, Side::F, i)?;
        }
        for (j, (c, &z)) in self.coords_g.iter().zip(g).enumerate() {
            h += Self::coord(c, z, Side::G, j)?;
        }
        Ok(h)
    }

    /// `H` at every stored state.
    pub fn h_series(&self, traj: &Trajectory) -> Result<Vec<f64>, LyapunovError> {
        traj.outputs_f.iter().zip(&traj.outputs_g).map(|(f, g)| self.eval_h(f, g)).collect()
    }

    /// Stores `H(t)` in the trajectory's diagnostics.
    pub fn attach(&self, traj: &mut Trajectory) -> Result<(), LyapunovError> {
        traj.diagnostics.h = Some(self.h_series(traj)?);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    /// Largest tolerated single-step increase of `H`.
    pub increment_tol: f64,
    /// `H` counts as constant if it never moves further than this from `H(0)`.
    pub constant_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { increment_tol: 1e-7, constant_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub h: Vec<f64>,
    pub max_increment: f64,
    pub first_violation: Option<usize>,
    pub monotone: bool,
    pub max_deviation_from_start: f64,
    pub constant: bool,
}

/// Flat `key=value` lines; the `H` series itself is omitted.
impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "monotone={}", self.monotone)?;
        writeln!(f, "max_increment={}", self.max_increment)?;
        match self.first_violation {
            Some(k) => writeln!(f, "first_violation={k}")?,
            None => writeln!(f, "first_violation=")?,
        }
        writeln!(f, "constant={}", self.constant)?;
        write!(f, "max_deviation_from_start={}", self.max_deviation_from_start)
    }
}

/// Checks that `H` never increases by more than the tolerance along `traj`.
pub fn audit_monotone_h(ctx: &LyapunovContext, traj: &Trajectory, opts: &AuditOptions) -> Result<AuditReport, LyapunovError> {
    let h = ctx.h_series(traj)?;
    Ok(audit_series(h, opts))
}

/// Audit of an already computed `H(t)` series.
pub fn audit_series(h: Vec<f64>, opts: &AuditOptions) -> AuditReport {
    let mut max_increment = f64::NEG_INFINITY;
    let mut first_violation = None;
    for (k, w) in h.windows(2).enumerate() {
        let inc = w[1] - w[0];
        if inc > max_increment {
            max_increment = inc;
        }
        if inc > opts.increment_tol && first_violation.is_none() {
            first_violation = Some(k + 1);
        }
    }
    if h.len() < 2 {
        max_increment = 0.0;
    }
    let h0 = h.first().copied().unwrap_or(0.0);
    let max_deviation_from_start = h.iter().map(|v| (v - h0).abs()).fold(0.0, f64::max);
    AuditReport {
        monotone: first_violation.is_none(),
        constant: max_deviation_from_start < opts.constant_tol,
        h,
        max_increment,
        first_violation,
        max_deviation_from_start,
    }
}

/// `r(t) = ‖F(t) − p‖² + ‖G(t) − q‖²` for every stored state.
pub fn distance_r(traj: &Trajectory, p: &[f64], q: &[f64]) -> Result<Vec<f64>, FlowError> {
    let sq = |x: &[f64], c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    traj.outputs_f
        .iter()
        .zip(&traj.outputs_g)
        .map(|(f, g)| {
            if f.len() != p.len() {
                return Err(FlowError::DimensionMismatch { what: "p", expected: f.len(), got: p.len() });
            }
            if g.len() != q.len() {
                return Err(FlowError::DimensionMismatch { what: "q", expected: g.len(), got: q.len() });
            }
            Ok(sq(f, p) + sq(g, q))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConvergenceVerdict {
    /// Index into the solution list.
    Converged(usize),
    Cycling,
    Undecided,
}

impl ConvergenceVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Converged(_) => "converged",
            Self::Cycling => "cycling",
            Self::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub tol: f64,
    pub window: f64,
    /// Re-excursion factor that marks recurrence.
    pub excursion_factor: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self { tol: 1e-3, window: 10.0, excursion_factor: 2.0 }
    }
}

/// Classifies the tail of a run against a list of candidate solutions.
///
/// Converged: `r` to some solution stays below `tol` throughout the final
/// window. Cycling: for every solution, `r` climbs above `factor ×` its window
/// minimum after first reaching that minimum.
pub fn detect_convergence(
    traj: &Trajectory,
    solutions: &[(Vec<f64>, Vec<f64>)],
    opts: &ConvergenceOptions,
) -> Result<ConvergenceVerdict, LyapunovError> {
    if solutions.is_empty() {
        return Err(LyapunovError::EmptySolutionSet);
    }
    if traj.len() < 2 {
        return Ok(ConvergenceVerdict::Undecided);
    }
    let duration = traj.duration();
    if !(opts.window > 0.0) || opts.window >= duration {
        return Err(LyapunovError::InvalidWindow { window: opts.window, duration });
    }
    let t_start = traj.times.last().unwrap() - opts.window;
    let k0 = traj.times.partition_point(|&t| t < t_start);
    let mut all_cycle = true;
    for (idx, (p, q)) in solutions.iter().enumerate() {
        let r = distance_r(traj, p, q)?;
        let tail = &r[k0..];
        if tail.iter().all(|&v| v < opts.tol) {
            return Ok(ConvergenceVerdict::Converged(idx));
        }
        let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let first_min = tail.iter().position(|&v| v <= min * (1.0 + 1e-6)).unwrap_or(0);
        let rebound = tail[first_min..].iter().any(|&v| v > opts.excursion_factor * min);
        if !rebound {
            all_cycle = false;
        }
    }
    Ok(if all_cycle { ConvergenceVerdict::Cycling } else { ConvergenceVerdict::Undecided })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c0: f64,
    pub rate: f64,
    /// `None` when `ln r` is constant on the interval.
    pub r_squared: Option<f64>,
    pub samples: usize,
}

impl RateFit {
    pub fn is_degenerate(&self) -> bool {
        self.r_squared.is_none()
    }
}

/// Flat `key=value` lines.
impl fmt::Display for RateFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rate={}", self.rate)?;
        writeln!(f, "c0={}", self.c0)?;
        match self.r_squared {
            Some(r2) => writeln!(f, "r_squared={r2}")?,
            None => writeln!(f, "r_squared=")?,
        }
        write!(f, "samples={}", self.samples)
    }
}

/// Least-squares fit of `ln r(t) ≈ ln c0 − rate·t` over `[t_lo, t_hi]`.
pub fn fit_rate(traj: &Trajectory, p: &[f64], q: &[f64], interval: (f64, f64)) -> Result<RateFit, LyapunovError> {
    let r = distance_r(traj, p, q)?;
    fit_rate_series(&traj.times, &r, interval)
}

/// Default fit interval `[0.1·T, T]`.
pub fn default_fit_interval(traj: &Trajectory) -> (f64, f64) {
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    (0.1 * t_end, t_end)
}

pub fn fit_rate_series(times: &[f64], r: &[f64], (lo, hi): (f64, f64)) -> Result<RateFit, LyapunovError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(r) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(LyapunovError::NonPositiveR { t, value: v });
        }
        xs.push(t);
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 2 {
        return Err(LyapunovError::EmptyFitInterval { lo, hi });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // A constant series has no variance to explain; the mean can be off by round-off.
    if ys.iter().all(|&y| y == ys[0]) {
        return Ok(RateFit { c0: ys[0].exp(), rate: 0.0, r_squared: None, samples: n });
    }
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit { c0: intercept.exp(), rate: -slope, r_squared: Some(1.0 - ss_res / ss_tot), samples: n })
}

pub const NEWTON_MAX_ITERS: usize = 200;
pub const JACOBIAN_STEP: f64 = 1e-6;

fn stationarity(payoff: &dyn Payoff, n: usize, z: &[f64]) -> DVector<f64> {
    let (f, g) = z.split_at(n);
    let mut out = payoff.grad_f(f, g);
    out.extend(payoff.grad_g(f, g));
    DVector::from_vec(out)
}

/// Damped Newton on `[∂L′/∂F; ∂L′/∂G] = 0` with a central-difference Jacobian.
pub fn solve_regularized_equilibrium(
    payoff: &Regularized,
    x0: &[f64],
    y0: &[f64],
    newton_tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), LyapunovError> {
    if !(payoff.lambda() > 0.0) {
        return Err(LyapunovError::InvalidArgument("lambda must be positive".into()));
    }
    let (n, m) = (payoff.dim_f(), payoff.dim_g());
    if x0.len() != n {
        return Err(LyapunovError::DimensionMismatch { what: "x0", expected: n, got: x0.len() });
    }
    if y0.len() != m {
        return Err(LyapunovError::DimensionMismatch { what: "y0", expected: m, got: y0.len() });
    }
    let dim = n + m;
    let mut z: Vec<f64> = x0.iter().chain(y0).copied().collect();
    let mut res = stationarity(payoff, n, &z);
    for _ in 0..NEWTON_MAX_ITERS {
        let norm = res.norm();
        if norm < newton_tol {
            let (f, g) = z.split_at(n);
            return Ok((f.to_vec(), g.to_vec()));
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let (mut a, mut b) = (z.clone(), z.clone());
            a[c] += JACOBIAN_STEP;
            b[c] -= JACOBIAN_STEP;
            let col = (stationarity(payoff, n, &a) - stationarity(payoff, n, &b)) / (2.0 * JACOBIAN_STEP);
            jac.set_column(c, &col);
        }
        let step = jac.lu().solve(&(-&res)).ok_or(LyapunovError::SingularJacobian)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(LyapunovError::SingularJacobian);
        }
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            let r_trial = stationarity(payoff, n, &trial);
            if r_trial.iter().all(|v| v.is_finite()) && (r_trial.norm() < norm || alpha < 1e-10) {
                z = trial;
                res = r_trial;
                break;
            }
            alpha *= 0.5;
        }
    }
    let residual = res.norm();
    if residual < newton_tol {
        let (f, g) = z.split_at(n);
        return Ok((f.to_vec(), g.to_vec()));
    }
    Err(LyapunovError::NoConvergence { residual, iterations: NEWTON_MAX_ITERS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{gda_flow, FlowOptions};
    use crate::operators::{build_ascent_path, sigmoid, OperatorBank, ScalarOperator};
    use crate::payoffs::{bilinear_payoff, regularize, PayoffRef};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn paths(op: ScalarOperator, inits: &[f64]) -> Vec<AscentPath> {
        inits.iter().map(|&x| build_ascent_path(&op, &[x], &PathSettings::default()).unwrap()).collect()
    }

    #[test]
    fn tabulated_h_matches_quadratic_closed_form() {
        // F = 1 − α², so ‖∇F‖² = 4(1 − z) and ∫_0^z s/(4(1 − s)) ds = (−z − ln(1 − z))/4.
        let pf = paths(ScalarOperator::wgan_quadratic(1.0), &[1.5]);
        let pg = paths(ScalarOperator::identity(), &[0.0]);
        let ctx = LyapunovContext::new(pf, pg, vec![0.0], vec![0.0], DEFAULT_QUADRATURE_TOL).unwrap();
        for z in [-1.25_f64, -0.5, 0.3, 0.9, 0.97, 0.995] {
            let exact = 0.25 * (-z - (1.0 - z).ln());
            let h = ctx.eval_h(&[z], &[0.0]).unwrap();
            assert!((h - exact).abs() < 1e-10, "z = {z}: {h} vs {exact}");
        }
    }

    #[test]
    fn identity_is_half_squared_distance() {
        let ctx = LyapunovContext::new(paths(ScalarOperator::identity(), &[0.0]), paths(ScalarOperator::identity(), &[0.0]), vec![0.0], vec![0.0], 1e-12).unwrap();
        assert_eq!(ctx.eval_h(&[3.0], &[4.0]).unwrap(), 12.5);
        assert_eq!(ctx.eval_h(&[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn sigmoid_closed_form_matches_simpson() {
        let p = 0.5;
        let closed = sigmoid_antiderivative(0.7, p) - sigmoid_antiderivative(p, p);
        let quad = adaptive_simpson(|z| (z - p) / (z * z * (1.0 - z) * (1.0 - z)), p, 0.7, 1e-13).unwrap();
        assert!((closed - quad).abs() < 1e-8, "{closed} {quad}");
        for (p, z) in [(0.2, 0.05), (0.9, 0.3), (0.1, 0.99)] {
            let closed = sigmoid_antiderivative(z, p) - sigmoid_antiderivative(p, p);
            let quad = adaptive_simpson(|s| (s - p) / (s * s * (1.0 - s) * (1.0 - s)), p, z, 1e-12).unwrap();
            assert!((closed - quad).abs() < 1e-8 * closed.abs().max(1.0));
        }
    }

    #[test]
    fn tabulated_path_matches_closed_form() {
        // A sigmoid disguised as a custom operator goes through the sampled-path integrator.
        let op = ScalarOperator::custom(
            "sigmoid_custom",
            1,
            |x| sigmoid(x[0]),
            |x, out| {
                let s = sigmoid(x[0]);
                out[0] = s * (1.0 - s);
            },
        )
        .unwrap();
        let custom = vec![build_ascent_path(&op, &[0.3], &PathSettings::default()).unwrap()];
        let closed = paths(ScalarOperator::sigmoid(), &[0.3]);
        let idp = paths(ScalarOperator::identity(), &[0.0]);
        let a = LyapunovContext::new(custom, idp.clone(), vec![0.4], vec![0.0], 1e-12).unwrap();
        let b = LyapunovContext::new(closed, idp, vec![0.4], vec![0.0], 1e-12).unwrap();
        for z in [0.05, 0.2, 0.39, 0.4, 0.41, 0.6, 0.95] {
            let (ha, hb) = (a.eval_h(&[z], &[0.0]).unwrap(), b.eval_h(&[z], &[0.0]).unwrap());
            assert!((ha - hb).abs() <= 1e-6 * hb.max(1e-3), "z={z}: {ha} vs {hb}");
        }
    }

    #[test]
    fn unsafe_target_rejected() {
        let e = LyapunovContext::new(paths(ScalarOperator::sigmoid(), &[0.0]), vec![], vec![1.2], vec![], 1e-12).unwrap_err();
        assert!(matches!(e, LyapunovError::UnsafeTarget { side: Side::F, index: 0, .. }));
    }

    #[test]
    fn strictly_convex_quadratic_decreases() {
        let base: PayoffRef = Arc::new(bilinear_payoff(0.0, 0.0));
        let game = HccGame::new(
            Arc::new(regularize(base, 0.5, vec![0.0], vec![0.0]).unwrap()),
            OperatorBank::uniform(ScalarOperator::identity(), 1),
            OperatorBank::uniform(ScalarOperator::identity(), 1),
        )
        .unwrap();
        let traj = gda_flow(&game, &[1.0], &[1.0], &FlowOptions::new(1e-2, 60.0)).unwrap();
        let ctx = LyapunovContext::for_initialization(&game, &[1.0], &[1.0], vec![0.0], vec![0.0], &PathSettings::default()).unwrap();
        let rep = audit_monotone_h(&ctx, &traj, &AuditOptions::default()).unwrap();
        assert!(rep.monotone);
        for (k, w) in rep.h.windows(2).enumerate() {
            if w[0] > 1e-10 {
                assert!(w[1] < w[0], "step {k}");
            }
            // Oracle: H(t) = e^{−2λt}·H(0) = e^{−t}.
            let t = traj.times[k + 1];
            assert!((w[1] - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn r_examples() {
        let mut traj = Trajectory::default();
        traj.times = vec![0.0, 1.0];
        traj.outputs_f = vec![vec![0.5, 0.5], vec![1.5, 0.5]];
        traj.outputs_g = vec![vec![0.2], vec![0.2]];
        let r = distance_r(&traj, &[0.5, 0.5], &[0.2]).unwrap();
        assert_eq!(r, vec![0.0, 1.0]);
        assert!(distance_r(&traj, &[0.5], &[0.2]).is_err());
    }

    #[test]
    fn convergence_verdicts() {
        let mut traj = Trajectory::default();
        assert_eq!(detect_convergence(&traj, &[(vec![0.0], vec![0.0])], &ConvergenceOptions::default()).unwrap(), ConvergenceVerdict::Undecided);
        assert_eq!(detect_convergence(&traj, &[], &ConvergenceOptions::default()), Err(LyapunovError::EmptySolutionSet));
        // Rotation on the unit circle: periodic r about (0.5, 0).
        for k in 0..=2000 {
            let t = k as f64 * 0.01;
            traj.times.push(t);
            traj.outputs_f.push(vec![t.cos()]);
            traj.outputs_g.push(vec![t.sin()]);
        }
        let sol = [(vec![0.5], vec![0.0])];
        let v = detect_convergence(&traj, &sol, &ConvergenceOptions { tol: 1e-3, window: 10.0, excursion_factor: 2.0 }).unwrap();
        assert_eq!(v, ConvergenceVerdict::Cycling);
        // Decaying spiral.
        for k in 0..traj.len() {
            let t = traj.times[k];
            traj.outputs_f[k] = vec![(-t).exp() * t.cos()];
            traj.outputs_g[k] = vec![(-t).exp() * t.sin()];
        }
        let v = detect_convergence(&traj, &[(vec![3.0], vec![0.0]), (vec![0.0], vec![0.0])], &ConvergenceOptions::default()).unwrap();
        assert_eq!(v, ConvergenceVerdict::Converged(1));
    }

    #[test]
    fn rate_fit_examples() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let r: Vec<f64> = times.iter().map(|t| 2.0 * (-1.5 * t).exp()).collect();
        let fit = fit_rate_series(&times, &r, (1.0, 10.0)).unwrap();
        assert!((fit.rate - 1.5).abs() < 1e-10 && (fit.c0 - 2.0).abs() < 1e-9);
        assert!(fit.r_squared.unwrap() > 0.999_999);
        let flat = vec![0.3; times.len()];
        let fit = fit_rate_series(&times, &flat, (1.0, 10.0)).unwrap();
        assert!(fit.rate.abs() < 1e-12 && fit.is_degenerate());
        let mut zero = r.clone();
        zero[50] = 0.0;
        assert!(matches!(fit_rate_series(&times, &zero, (1.0, 10.0)), Err(LyapunovError::NonPositiveR { .. })));
    }

    #[test]
    fn newton_examples() {
        let base: PayoffRef = Arc::new(bilinear_payoff(0.0, 0.0));
        let reg = regularize(base, 0.5, vec![0.0], vec![0.0]).unwrap();
        let (p, q) = solve_regularized_equilibrium(&reg, &[0.7], &[-0.3], 1e-12).unwrap();
        assert!(p[0].abs() < 1e-12 && q[0].abs() < 1e-12);

        let lam: f64 = 0.1;
        let base: PayoffRef = Arc::new(bilinear_payoff(0.5, 0.5));
        let reg = regularize(base.clone(), lam, vec![0.0], vec![0.0]).unwrap();
        let (p, q) = solve_regularized_equilibrium(&reg, &[0.5], &[0.5], 1e-13).unwrap();
        // λp + (q − ½) = 0 and (p − ½) − λq = 0.
        let q_ref = (0.5 - 0.5 * lam) / (1.0 + lam * lam);
        let p_ref = 0.5 + lam * q_ref;
        assert!((p[0] - p_ref).abs() < 1e-10 && (q[0] - q_ref).abs() < 1e-10);

        let mut last = f64::INFINITY;
        for lam in [0.1, 0.01, 0.001] {
            let reg = regularize(base.clone(), lam, vec![0.0], vec![0.0]).unwrap();
            let (p, q) = solve_regularized_equilibrium(&reg, &[0.0], &[0.0], 1e-13).unwrap();
            let d = ((p[0] - 0.5).powi(2) + (q[0] - 0.5).powi(2)).sqrt();
            assert!(d < last);
            last = d;
        }
    }

    proptest! {
        #[test]
        fn h_nonnegative_and_zero_only_at_target(f in 0.01f64..0.99, g in -3.0f64..3.0, p in 0.05f64..0.95) {
            let ctx = LyapunovContext::new(
                paths(ScalarOperator::sigmoid(), &[0.2]),
                paths(ScalarOperator::identity(), &[0.0]),
                vec![p],
                vec![0.4],
                1e-12,
            ).unwrap();
            let h = ctx.eval_h(&[f], &[g]).unwrap();
            prop_assert!(h >= 0.0);
            let d2 = (f - p).powi(2) + (g - 0.4).powi(2);
            if d2 > 1e-8 {
                prop_assert!(h > 0.0);
            }
            prop_assert_eq!(ctx.eval_h(&[p], &[0.4]).unwrap(), 0.0);
        }
    }
}
