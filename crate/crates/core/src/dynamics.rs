//! Continuous and discrete learning dynamics for hidden games.
//!
//! All continuous flows use fixed-step RK4 with `t_k = k·dt`. The vector
//! fields are pure; diagnostics (`L`, `r`, `H`) are computed afterwards from
//! the stored states.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{grad_norm_sq_at_output, AscentPath, OperatorBank, OperatorError, ScalarOperator};
use crate::payoffs::{bilinear_payoff, DomainGuard, Payoff, PayoffRef, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid flow options: {0}")]
    InvalidOptions(String),
    #[error("{side}_{index} = {value} left the payoff domain at t = {t}")]
    DomainGuardViolation { t: f64, side: Side, index: usize, value: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("{side}_{index} = {value} reached the boundary of its range at t = {t}")]
    OutOfRange { t: f64, side: Side, index: usize, value: f64 },
    #[error("{side}_{index} starts at a stationary point of its operator")]
    DegeneratePath { side: Side, index: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// A failed integration together with everything recorded before the failure.
#[derive(Debug, Clone, Error)]
#[error("{error}")]
pub struct FlowFailure {
    pub error: FlowError,
    pub partial: Box<Trajectory>,
}

impl FlowFailure {
    fn early(error: FlowError) -> Self {
        Self { error, partial: Box::default() }
    }
}

/// Payoff together with the min player's and max player's operator banks.
#[derive(Debug, Clone)]
pub struct HccGame {
    payoff: PayoffRef,
    bank_f: OperatorBank,
    bank_g: OperatorBank,
}

impl HccGame {
    pub fn new(payoff: PayoffRef, bank_f: OperatorBank, bank_g: OperatorBank) -> Result<Self, FlowError> {
        if payoff.dim_f() != bank_f.len() {
            return Err(FlowError::DimensionMismatch { what: "bank_f", expected: payoff.dim_f(), got: bank_f.len() });
        }
        if payoff.dim_g() != bank_g.len() {
            return Err(FlowError::DimensionMismatch { what: "bank_g", expected: payoff.dim_g(), got: bank_g.len() });
        }
        Ok(Self { payoff, bank_f, bank_g })
    }

    pub fn payoff(&self) -> &PayoffRef {
        &self.payoff
    }

    pub fn bank_f(&self) -> &OperatorBank {
        &self.bank_f
    }

    pub fn bank_g(&self) -> &OperatorBank {
        &self.bank_g
    }

    fn check_params(&self, theta: &[f64], phi: &[f64]) -> Result<(), FlowError> {
        if theta.len() != self.bank_f.total_param_dim() {
            return Err(FlowError::DimensionMismatch { what: "theta", expected: self.bank_f.total_param_dim(), got: theta.len() });
        }
        if phi.len() != self.bank_g.total_param_dim() {
            return Err(FlowError::DimensionMismatch { what: "phi", expected: self.bank_g.total_param_dim(), got: phi.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Store every `record_every`-th step (the initial state is always stored).
    pub record_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 10.0, record_every: 1 }
    }
}

impl FlowOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, record_every: 1 }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(FlowError::InvalidOptions(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(FlowError::InvalidOptions(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(FlowError::InvalidOptions("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// `⌊t_end/dt⌋`, robust to representation error in the ratio.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    pub fn recorded_rows(&self) -> usize {
        self.steps() / self.record_every + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub l: Vec<f64>,
    pub r: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
}

/// Time-indexed record of a run. Output-space flows leave `theta`/`phi` empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub outputs_f: Vec<Vec<f64>>,
    pub outputs_g: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn has_parameters(&self) -> bool {
        self.theta.first().is_some_and(|t| !t.is_empty()) || self.phi.first().is_some_and(|p| !p.is_empty())
    }

    pub fn final_outputs(&self) -> Option<(&[f64], &[f64])> {
        Some((self.outputs_f.last()?, self.outputs_g.last()?))
    }

    /// Fills `diagnostics.l` from the stored outputs.
    pub fn compute_l(&mut self, payoff: &dyn Payoff) {
        self.diagnostics.l = self.outputs_f.iter().zip(&self.outputs_g).map(|(f, g)| payoff.value(f, g)).collect();
    }

    /// Fills `diagnostics.r` with `‖F−p‖² + ‖G−q‖²`.
    pub fn compute_r(&mut self, p: &[f64], q: &[f64]) -> Result<(), FlowError> {
        self.diagnostics.r = Some(crate::lyapunov::distance_r(self, p, q)?);
        Ok(())
    }

    fn push(&mut self, t: f64, theta: &[f64], phi: &[f64], f: &[f64], g: &[f64]) {
        self.times.push(t);
        self.theta.push(theta.to_vec());
        self.phi.push(phi.to_vec());
        self.outputs_f.push(f.to_vec());
        self.outputs_g.push(g.to_vec());
    }
}

/// Classic fourth-order Runge-Kutta with reusable scratch space.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    pub(crate) fn step<E>(
        &mut self,
        t: f64,
        x: &mut [f64],
        h: f64,
        mut rhs: impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    ) -> Result<(), E> {
        let n = x.len();
        rhs(t, x, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        rhs(t + h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            x[i] += h * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]) / 6.0;
        }
        Ok(())
    }
}

fn guard_error(guard: &DomainGuard, f: &[f64], g: &[f64], t: f64) -> Result<(), FlowError> {
    match guard.first_violation(f, g) {
        Some(v) => Err(FlowError::DomainGuardViolation { t, side: v.side, index: v.index, value: v.value }),
        None => Ok(()),
    }
}

/// Shared driver: integrates `rhs` on the flat state and records via `split`.
fn drive(
    x0: Vec<f64>,
    opts: &FlowOptions,
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), FlowError>,
    mut record: impl FnMut(&mut Trajectory, f64, &[f64], bool) -> Result<(), FlowError>,
) -> Result<Trajectory, FlowFailure> {
    let mut traj = Trajectory::default();
    let mut x = x0;
    let mut rk = Rk4::new(x.len());
    if let Err(error) = record(&mut traj, 0.0, &x, true) {
        return Err(FlowFailure { error, partial: Box::new(traj) });
    }
    let steps = opts.steps();
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * opts.dt;
        let t = k as f64 * opts.dt;
        let res = rk.step(t_prev, &mut x, opts.dt, &mut rhs).and_then(|_| {
            if x.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(FlowError::NonFiniteState { t })
            }
        });
        // Unrecorded steps are still validated so failures are reported where they occur.
        let res = res.and_then(|_| record(&mut traj, t, &x, k % opts.record_every == 0));
        if let Err(error) = res {
            return Err(FlowFailure { error, partial: Box::new(traj) });
        }
    }
    Ok(traj)
}

/// Simultaneous gradient descent (min player) / ascent (max player) in
/// parameter space: `θ̇_i = −∇f_i·∂L/∂f_i`, `φ̇_j = +∇g_j·∂L/∂g_j`.
pub fn gda_flow(game: &HccGame, theta0: &[f64], phi0: &[f64], opts: &FlowOptions) -> Result<Trajectory, FlowFailure> {
    opts.validate().map_err(FlowFailure::early)?;
    game.check_params(theta0, phi0).map_err(FlowFailure::early)?;
    let (nt, np) = (theta0.len(), phi0.len());
    let (n, m) = (game.bank_f.len(), game.bank_g.len());
    let payoff = game.payoff.as_ref();
    let guard = payoff.domain_guard();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut df = vec![0.0; n];
    let mut dg = vec![0.0; m];
    let mut x0 = theta0.to_vec();
    x0.extend_from_slice(phi0);

    let rhs = |t: f64, x: &[f64], out: &mut [f64]| -> Result<(), FlowError> {
        let (theta, phi) = x.split_at(nt);
        game.bank_f.eval_into(theta, &mut f);
        game.bank_g.eval_into(phi, &mut g);
        guard_error(&guard, &f, &g, t)?;
        payoff.grad_f_into(&f, &g, &mut df);
        payoff.grad_g_into(&f, &g, &mut dg);
        let (out_t, out_p) = out.split_at_mut(nt);
        for i in 0..n {
            let r = game.bank_f.block_range(i);
            game.bank_f.operator(i).grad_into(&theta[r.clone()], &mut out_t[r.clone()]);
            for o in &mut out_t[r] {
                *o *= -df[i];
            }
        }
        for j in 0..m {
            let r = game.bank_g.block_range(j);
            game.bank_g.operator(j).grad_into(&phi[r.clone()], &mut out_p[r.clone()]);
            for o in &mut out_p[r] {
                *o *= dg[j];
            }
        }
        Ok(())
    };
    let mut fr = vec![0.0; n];
    let mut gr = vec![0.0; m];
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], store: bool| -> Result<(), FlowError> {
        let (theta, phi) = x.split_at(nt);
        debug_assert_eq!(phi.len(), np);
        game.bank_f.eval_into(theta, &mut fr);
        game.bank_g.eval_into(phi, &mut gr);
        if fr.iter().chain(&gr).any(|v| !v.is_finite()) {
            return Err(FlowError::NonFiniteState { t });
        }
        guard_error(&guard, &fr, &gr, t)?;
        if store {
            traj.push(t, theta, phi, &fr, &gr);
        }
        Ok(())
    };
    let mut traj = drive(x0, opts, rhs, record).map_err(|mut e| {
        e.partial.compute_l(payoff);
        e
    })?;
    traj.compute_l(payoff);
    Ok(traj)
}

fn check_interior(paths: &[AscentPath], z: &[f64], side: Side, t: f64) -> Result<(), FlowError> {
    for (index, (path, &value)) in paths.iter().zip(z).enumerate() {
        if !path.range().contains_with_margin(value, 1e-9) {
            return Err(FlowError::OutOfRange { t, side, index, value });
        }
    }
    Ok(())
}

fn weight(path: &AscentPath, z: f64, side: Side, index: usize, t: f64) -> Result<f64, FlowError> {
    grad_norm_sq_at_output(path, z).map_err(|e| match e {
        OperatorError::OutOfRange { z, .. } => FlowError::OutOfRange { t, side, index, value: z },
        OperatorError::DegeneratePath => FlowError::DegeneratePath { side, index },
        other => FlowError::Operator(other),
    })
}

/// Output-space flow `ḟ_i = −‖∇f_i(X(f_i))‖²·∂L/∂f_i`, `ġ_j = +‖∇g_j(X(g_j))‖²·∂L/∂g_j`.
pub fn transformed_flow(
    game: &HccGame,
    paths_f: &[AscentPath],
    paths_g: &[AscentPath],
    f0: &[f64],
    g0: &[f64],
    opts: &FlowOptions,
) -> Result<Trajectory, FlowFailure> {
    opts.validate().map_err(FlowFailure::early)?;
    let (n, m) = (game.bank_f.len(), game.bank_g.len());
    for (what, expected, got) in [("paths_f", n, paths_f.len()), ("paths_g", m, paths_g.len()), ("f0", n, f0.len()), ("g0", m, g0.len())] {
        if expected != got {
            return Err(FlowFailure::early(FlowError::DimensionMismatch { what, expected, got }));
        }
    }
    for (side, paths) in [(Side::F, paths_f), (Side::G, paths_g)] {
        if let Some(index) = paths.iter().position(|p| p.is_degenerate()) {
            return Err(FlowFailure::early(FlowError::DegeneratePath { side, index }));
        }
    }
    let payoff = game.payoff.as_ref();
    let guard = payoff.domain_guard();
    let mut df = vec![0.0; n];
    let mut dg = vec![0.0; m];
    let mut x0 = f0.to_vec();
    x0.extend_from_slice(g0);

    let rhs = |t: f64, x: &[f64], out: &mut [f64]| -> Result<(), FlowError> {
        let (f, g) = x.split_at(n);
        check_interior(paths_f, f, Side::F, t)?;
        check_interior(paths_g, g, Side::G, t)?;
        guard_error(&guard, f, g, t)?;
        payoff.grad_f_into(f, g, &mut df);
        payoff.grad_g_into(f, g, &mut dg);
        for i in 0..n {
            out[i] = -weight(&paths_f[i], f[i], Side::F, i, t)? * df[i];
        }
        for j in 0..m {
            out[n + j] = weight(&paths_g[j], g[j], Side::G, j, t)? * dg[j];
        }
        Ok(())
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], store: bool| -> Result<(), FlowError> {
        let (f, g) = x.split_at(n);
        check_interior(paths_f, f, Side::F, t)?;
        check_interior(paths_g, g, Side::G, t)?;
        guard_error(&guard, f, g, t)?;
        if store {
            traj.push(t, &[], &[], f, g);
        }
        Ok(())
    };
    let mut traj = drive(x0, opts, rhs, record).map_err(|mut e| {
        e.partial.compute_l(payoff);
        e
    })?;
    traj.compute_l(payoff);
    Ok(traj)
}

/// Modified Hamiltonian gradient descent for `L = (f−p)(g−q)`:
/// `θ̇ = −∇f·‖∇g‖²·(f−p)`, `φ̇ = −∇g·‖∇f‖²·(g−q)`.
pub fn hgd_mod_flow(
    f_op: &ScalarOperator,
    g_op: &ScalarOperator,
    p: f64,
    q: f64,
    theta0: &[f64],
    phi0: &[f64],
    opts: &FlowOptions,
) -> Result<Trajectory, FlowFailure> {
    opts.validate().map_err(FlowFailure::early)?;
    let (nt, np) = (f_op.input_dim(), g_op.input_dim());
    if theta0.len() != nt {
        return Err(FlowFailure::early(FlowError::DimensionMismatch { what: "theta", expected: nt, got: theta0.len() }));
    }
    if phi0.len() != np {
        return Err(FlowFailure::early(FlowError::DimensionMismatch { what: "phi", expected: np, got: phi0.len() }));
    }
    let mut x0 = theta0.to_vec();
    x0.extend_from_slice(phi0);
    let rhs = |_t: f64, x: &[f64], out: &mut [f64]| -> Result<(), FlowError> {
        let (theta, phi) = x.split_at(nt);
        let (fv, gv) = (f_op.eval(theta), g_op.eval(phi));
        let (nf, ng) = (f_op.grad_norm_sq(theta), g_op.grad_norm_sq(phi));
        let (out_t, out_p) = out.split_at_mut(nt);
        f_op.grad_into(theta, out_t);
        g_op.grad_into(phi, out_p);
        for o in out_t.iter_mut() {
            *o *= -ng * (fv - p);
        }
        for o in out_p.iter_mut() {
            *o *= -nf * (gv - q);
        }
        Ok(())
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], store: bool| -> Result<(), FlowError> {
        let (theta, phi) = x.split_at(nt);
        let (fv, gv) = (f_op.eval(theta), g_op.eval(phi));
        if !fv.is_finite() || !gv.is_finite() {
            return Err(FlowError::NonFiniteState { t });
        }
        if store {
            traj.push(t, theta, phi, &[fv], &[gv]);
        }
        Ok(())
    };
    let payoff = bilinear_payoff(p, q);
    let mut traj = drive(x0, opts, rhs, record).map_err(|mut e| {
        e.partial.compute_l(&payoff);
        e
    })?;
    traj.compute_l(&payoff);
    Ok(traj)
}

/// Unbiased estimates of `(∂L/∂θ, ∂L/∂φ)` in parameter space from a fresh batch.
pub trait StochasticGradSource {
    fn estimate(&self, theta: &[f64], phi: &[f64], rng: &mut ChaCha8Rng, grad_theta: &mut [f64], grad_phi: &mut [f64]);
}

/// Sampled gradients of the Gaussian WGAN objective
/// `v·E[x_data²] − v·E[x_gen²] (− v²/2)` with data `α*·z` and generator `α·z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WganSampler {
    pub alpha_star_sq: f64,
    pub batch: usize,
    pub regularized: bool,
}

impl StochasticGradSource for WganSampler {
    fn estimate(&self, theta: &[f64], phi: &[f64], rng: &mut ChaCha8Rng, grad_theta: &mut [f64], grad_phi: &mut [f64]) {
        let (alpha, v) = (theta[0], phi[0]);
        let mut sd = 0.0;
        let mut sg = 0.0;
        for _ in 0..self.batch {
            let zd: f64 = StandardNormal.sample(rng);
            let zg: f64 = StandardNormal.sample(rng);
            sd += zd * zd;
            sg += zg * zg;
        }
        let b = self.batch as f64;
        let (md, mg) = (sd / b, sg / b);
        grad_theta[0] = -2.0 * alpha * v * mg;
        grad_phi[0] = self.alpha_star_sq * md - alpha * alpha * mg - if self.regularized { v } else { 0.0 };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdaOptions {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub record_every: usize,
}

/// Stochastic GDA: `θ ← θ − lr·ĝ_θ`, `φ ← φ + lr·ĝ_φ`, a fresh batch per step.
///
/// Step `k` draws from a ChaCha8 stream keyed by `(seed, k)`, so the run is
/// reproducible and independent of how it is chunked. Time is `t = k·lr`.
pub fn sgda_discrete(
    game: &HccGame,
    sampler: &dyn StochasticGradSource,
    theta0: &[f64],
    phi0: &[f64],
    opts: &SgdaOptions,
) -> Result<Trajectory, FlowFailure> {
    if !(opts.lr >= 0.0) || !opts.lr.is_finite() || opts.record_every == 0 {
        return Err(FlowFailure::early(FlowError::InvalidOptions("lr must be nonnegative and record_every positive".into())));
    }
    game.check_params(theta0, phi0).map_err(FlowFailure::early)?;
    let payoff = game.payoff.as_ref();
    let mut theta = theta0.to_vec();
    let mut phi = phi0.to_vec();
    let mut gt = vec![0.0; theta.len()];
    let mut gp = vec![0.0; phi.len()];
    let mut traj = Trajectory::default();
    let push = |traj: &mut Trajectory, t: f64, theta: &[f64], phi: &[f64]| {
        let (f, g) = (game.bank_f.eval(theta), game.bank_g.eval(phi));
        traj.push(t, theta, phi, &f, &g);
    };
    push(&mut traj, 0.0, &theta, &phi);
    for k in 0..opts.steps {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(k as u64);
        sampler.estimate(&theta, &phi, &mut rng, &mut gt, &mut gp);
        for (x, g) in theta.iter_mut().zip(&gt) {
            *x -= opts.lr * g;
        }
        for (x, g) in phi.iter_mut().zip(&gp) {
            *x += opts.lr * g;
        }
        let step = k + 1;
        let t = step as f64 * opts.lr;
        if theta.iter().chain(&phi).any(|v| !v.is_finite()) {
            traj.compute_l(payoff);
            return Err(FlowFailure { error: FlowError::NonFiniteState { t }, partial: Box::new(traj) });
        }
        if step % opts.record_every == 0 {
            push(&mut traj, t, &theta, &phi);
        }
    }
    traj.compute_l(payoff);
    Ok(traj)
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Trajectory({} rows, t in [0, {}])", self.len(), self.duration())
    }
}
