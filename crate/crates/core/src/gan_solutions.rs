//! Closed-form and numerical equilibria of GAN games on a finite support.
//!
//! The generator is a distribution `p_G` on `N` points, the discriminator a
//! vector `D`. Three objectives are covered:
//!
//! * GAN: `Σ p_data log D + Σ p_G log(1 − D)`
//! * f-GAN: `Σ p_data·D − Σ p_G·f*(D)`
//! * WGAN: `Σ (p_data − p_G)·D` over 1-Lipschitz `D`
//!
//! For an unrestricted generator the max-min discriminator is constant; for a
//! generator restricted to a convex set the min-max generator minimizes the
//! matching divergence and is found by projected gradient descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergences::{jsd, jsd_grad_q, kl, DivergenceError, FDivergence};
use crate::transport::{solve_transport, TransportError};

/// Tie tolerance for the generator's best-response support.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GanError {
    #[error("p_data(x) + p_G(x) = 0 at x = {0}")]
    ZeroDenominator(usize),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("transport problem infeasible: {0}")]
    Infeasible(#[from] TransportError),
    #[error("generator constraint set is empty")]
    EmptyFeasibleSet,
    #[error("projection onto the generator set did not converge (violation {0})")]
    ProjectionFailure(f64),
    #[error("objective is infinite at the computed equilibrium")]
    InfiniteValue,
    #[error("WGAN needs a metric")]
    MissingMetric,
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "f_div", rename_all = "snake_case")]
pub enum GanKind {
    Gan,
    Fgan(FDivergence),
    Wgan,
}

/// `a·p ≤ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorSet {
    FullSimplex,
    Restricted(Vec<LinearConstraint>),
}

impl GeneratorSet {
    pub fn constraints(&self) -> &[LinearConstraint] {
        match self {
            GeneratorSet::FullSimplex => &[],
            GeneratorSet::Restricted(c) => c,
        }
    }

    pub fn max_violation(&self, p: &[f64]) -> f64 {
        let simplex = p.iter().map(|&x| (-x).max(0.0)).fold((p.iter().sum::<f64>() - 1.0).abs(), f64::max);
        self.constraints().iter().map(|c| (dot(&c.a, p) - c.b).max(0.0)).fold(simplex, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGanInstance {
    p_data: Vec<f64>,
    metric: Option<Vec<Vec<f64>>>,
    generator_set: GeneratorSet,
}

impl DiscreteGanInstance {
    pub fn new(p_data: Vec<f64>, metric: Option<Vec<Vec<f64>>>, generator_set: GeneratorSet) -> Result<Self, GanError> {
        check_distribution(&p_data)?;
        let n = p_data.len();
        if let Some(d) = &metric {
            validate_metric(d, n)?;
        }
        for c in generator_set.constraints() {
            if c.a.len() != n || c.a.iter().any(|x| !x.is_finite()) || !c.b.is_finite() {
                return Err(GanError::InvalidInstance("constraint has wrong length or non-finite entries".into()));
            }
        }
        Ok(Self { p_data, metric, generator_set })
    }

    pub fn support_size(&self) -> usize {
        self.p_data.len()
    }

    pub fn p_data(&self) -> &[f64] {
        &self.p_data
    }

    pub fn metric(&self) -> Option<&[Vec<f64>]> {
        self.metric.as_deref()
    }

    pub fn generator_set(&self) -> &GeneratorSet {
        &self.generator_set
    }

    pub fn is_realizable(&self) -> bool {
        self.generator_set.max_violation(&self.p_data) <= 1e-12
    }
}

fn check_distribution(p: &[f64]) -> Result<(), GanError> {
    if p.is_empty() || p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(GanError::InvalidInstance("p_data must be a nonempty nonnegative vector".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(GanError::InvalidInstance(format!("p_data sums to {s}")));
    }
    Ok(())
}

/// Symmetric, nonnegative, zero diagonal, triangle inequality within 1e−9.
pub fn validate_metric(d: &[Vec<f64>], n: usize) -> Result<(), GanError> {
    if d.len() != n || d.iter().any(|r| r.len() != n) {
        return Err(GanError::InvalidMetric(format!("expected a {n}x{n} matrix")));
    }
    for i in 0..n {
        if d[i][i] != 0.0 {
            return Err(GanError::InvalidMetric(format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            if !(d[i][j] >= 0.0) || !d[i][j].is_finite() {
                return Err(GanError::InvalidMetric(format!("entry ({i},{j}) must be finite and nonnegative")));
            }
            if d[i][j] != d[j][i] {
                return Err(GanError::InvalidMetric(format!("asymmetric at ({i},{j})")));
            }
            for k in 0..n {
                if d[i][k] > d[i][j] + d[j][k] + 1e-9 {
                    return Err(GanError::InvalidMetric(format!("triangle inequality fails for ({i},{j},{k})")));
                }
            }
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w·ln(x)` with `0·ln(anything) = 0`.
fn wlog(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x.ln()
    }
}

/// `Σ p_data log D + Σ p_G log(1 − D)` with the convention `0·log 0 = 0`.
pub fn gan_value(p_data: &[f64], p_g: &[f64], d: &[f64]) -> f64 {
    (0..p_data.len()).map(|x| wlog(p_data[x], d[x]) + wlog(p_g[x], 1.0 - d[x])).sum()
}

/// `Σ p_data·D − Σ p_G·f*(D)`; `−∞` if `D` leaves the conjugate's domain where `p_G > 0`.
pub fn fgan_value(p_data: &[f64], p_g: &[f64], d: &[f64], div: FDivergence) -> f64 {
    let mut v = 0.0;
    for x in 0..p_data.len() {
        v += p_data[x] * d[x];
        if p_g[x] != 0.0 {
            match div.conj(d[x]) {
                Ok(c) => v -= p_g[x] * c,
                Err(_) => return f64::NEG_INFINITY,
            }
        }
    }
    v
}

/// `Σ (p_data − p_G)·D`.
pub fn wgan_value(p_data: &[f64], p_g: &[f64], d: &[f64]) -> f64 {
    (0..p_data.len()).map(|x| (p_data[x] - p_g[x]) * d[x]).sum()
}

pub fn game_value(kind: GanKind, p_data: &[f64], p_g: &[f64], d: &[f64]) -> f64 {
    match kind {
        GanKind::Gan => gan_value(p_data, p_g, d),
        GanKind::Fgan(div) => fgan_value(p_data, p_g, d, div),
        GanKind::Wgan => wgan_value(p_data, p_g, d),
    }
}

/// `D*(x) = p_data(x)/(p_data(x) + p_G(x))`.
pub fn gan_opt_discriminator(p_data: &[f64], p_g: &[f64]) -> Result<Vec<f64>, GanError> {
    p_data
        .iter()
        .zip(p_g)
        .enumerate()
        .map(|(x, (&a, &b))| if a + b > 0.0 { Ok(a / (a + b)) } else { Err(GanError::ZeroDenominator(x)) })
        .collect()
}

/// `V(G, D*_G)` and `JSD(p_data‖p_G)`, computed independently and cross-checked
/// against `V = −log 4 + 2·JSD`.
pub fn gan_value_and_jsd(p_data: &[f64], p_g: &[f64]) -> Result<(f64, f64), GanError> {
    let d = gan_opt_discriminator(p_data, p_g)?;
    let v = gan_value(p_data, p_g, &d);
    let m: Vec<f64> = p_data.iter().zip(p_g).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl(p_data, &m) + 0.5 * kl(p_g, &m);
    let identity = -(4.0f64).ln() + 2.0 * js;
    assert!((v - identity).abs() <= 1e-10, "GAN value {v} disagrees with -log4 + 2 JSD = {identity}");
    Ok((v, js))
}

/// `D*(x) = f′(p_data(x)/p_G(x))`.
pub fn fgan_opt_discriminator(p_data: &[f64], p_g: &[f64], div: FDivergence) -> Result<Vec<f64>, GanError> {
    p_data
        .iter()
        .zip(p_g)
        .enumerate()
        .map(|(x, (&a, &b))| {
            if b <= 0.0 {
                return Err(GanError::ZeroDenominator(x));
            }
            Ok(div.f_prime(a / b)?)
        })
        .collect()
}

/// `V(G, D*_G)` and `D_f(p_data‖p_G)`, cross-checked to 1e−9.
pub fn fgan_value_and_fdiv(p_data: &[f64], p_g: &[f64], div: FDivergence) -> Result<(f64, f64), GanError> {
    let d = fgan_opt_discriminator(p_data, p_g, div)?;
    let v = fgan_value(p_data, p_g, &d, div);
    let df = div.divergence(p_data, p_g)?;
    assert!((v - df).abs() <= 1e-9 * df.abs().max(1.0), "f-GAN value {v} disagrees with D_f = {df}");
    Ok((v, df))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmdSolution {
    /// Optimal transport cost.
    pub value: f64,
    /// `Σ (p_data − p_G)·potential`, the Kantorovich dual objective.
    pub dual_value: f64,
    /// 1-Lipschitz optimal discriminator.
    pub potentials: Vec<f64>,
    pub plan: Vec<Vec<f64>>,
}

/// Earth mover's distance and an optimal 1-Lipschitz potential.
pub fn wgan_emd(p_data: &[f64], p_g: &[f64], metric: &[Vec<f64>]) -> Result<EmdSolution, GanError> {
    let n = p_data.len();
    if p_g.len() != n {
        return Err(GanError::InvalidInstance("p_data and p_G differ in length".into()));
    }
    if n > 64 {
        return Err(GanError::InvalidInstance("supports above 64 points are not supported".into()));
    }
    validate_metric(metric, n)?;
    let sol = solve_transport(p_data, p_g, metric)?;
    // c-transform of the column potentials: φ(x) = min_j d(x, j) − v_j.
    let potentials: Vec<f64> = (0..n).map(|x| (0..n).map(|j| metric[x][j] - sol.v[j]).fold(f64::INFINITY, f64::min)).collect();
    let dual_value = wgan_value(p_data, p_g, &potentials);
    Ok(EmdSolution { value: sol.cost, dual_value, potentials, plan: sol.plan })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxminDiscriminator {
    /// `None` for WGAN, where any constant works.
    pub constant: Option<f64>,
    /// Max-min value of the game.
    pub value: f64,
    /// f-GAN only: `D + f*(D)` at `D = f′(1)`, the expression printed in the derivation.
    pub printed_formula_value: Option<f64>,
    /// f-GAN only: max over constant `D` of the inner minimum, by golden-section search.
    pub line_search_value: Option<f64>,
}

/// Max-min discriminator and value for an unrestricted generator.
pub fn maxmin_discriminator(kind: GanKind) -> Result<MaxminDiscriminator, GanError> {
    Ok(match kind {
        GanKind::Gan => MaxminDiscriminator {
            constant: Some(0.5),
            value: 0.5f64.ln() + 0.5f64.ln(),
            printed_formula_value: None,
            line_search_value: None,
        },
        GanKind::Wgan => MaxminDiscriminator { constant: None, value: 0.0, printed_formula_value: None, line_search_value: None },
        GanKind::Fgan(div) => {
            let d = div.f_prime(1.0)?;
            let conj = div.conj(d)?;
            // For constant D the inner minimum is D·Σp_data − f*(D) = D − f*(D).
            let inner = |t: f64| t - div.conj(t).unwrap_or(f64::INFINITY);
            let (lo, hi) = (div.f_prime(0.01)?, div.f_prime(100.0)?);
            let best = golden_section_max(inner, lo, hi, 1e-12);
            MaxminDiscriminator {
                constant: Some(d),
                value: d - conj,
                printed_formula_value: Some(d + conj),
                line_search_value: Some(inner(best)),
            }
        }
    })
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Generator best response to a fixed `D` over the full simplex.
///
/// Returns the support set `S` (all points maximizing the generator's
/// per-point penalty, within [`TIE_TOL`]) and the resulting inner minimum.
pub fn inner_min_generator(d: &[f64], p_data: &[f64], kind: GanKind) -> Result<(Vec<usize>, f64), GanError> {
    let score: Vec<f64> = match kind {
        GanKind::Gan | GanKind::Wgan => d.to_vec(),
        GanKind::Fgan(div) => d.iter().map(|&t| div.conj(t)).collect::<Result<_, _>>()?,
    };
    let top = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let support: Vec<usize> = (0..score.len()).filter(|&x| score[x] >= top - TIE_TOL).collect();
    let value = match kind {
        GanKind::Gan => (0..d.len()).map(|x| wlog(p_data[x], d[x])).sum::<f64>() + (1.0 - top).ln(),
        GanKind::Fgan(_) | GanKind::Wgan => dot(p_data, d) - top,
    };
    Ok((support, value))
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut tau = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|&v| (v - tau).max(0.0)).collect()
}

fn project_halfspace(y: &[f64], c: &LinearConstraint) -> Vec<f64> {
    let excess = dot(&c.a, y) - c.b;
    let nrm = dot(&c.a, &c.a);
    if excess <= 0.0 || nrm == 0.0 {
        return y.to_vec();
    }
    y.iter().zip(&c.a).map(|(v, a)| v - excess / nrm * a).collect()
}

const DYKSTRA_MAX_SWEEPS: usize = 100_000;

/// Exact projection onto `simplex ∩ {a_k·p ≤ b_k}` by Dykstra's algorithm.
pub fn project_generator_set(y: &[f64], set: &GeneratorSet) -> Result<Vec<f64>, GanError> {
    let cons = set.constraints();
    if cons.is_empty() {
        return Ok(project_simplex(y));
    }
    let k = cons.len() + 1;
    let mut x = y.to_vec();
    let mut incr = vec![vec![0.0; y.len()]; k];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let prev = x.clone();
        for s in 0..k {
            let z: Vec<f64> = x.iter().zip(&incr[s]).map(|(a, b)| a + b).collect();
            let proj = if s == 0 { project_simplex(&z) } else { project_halfspace(&z, &cons[s - 1]) };
            incr[s] = z.iter().zip(&proj).map(|(a, b)| a - b).collect();
            x = proj;
        }
        let moved = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < 1e-15 {
            break;
        }
    }
    // The last projection is onto a halfspace; finish on the simplex if still feasible.
    let snapped = project_simplex(&x);
    let x = if set.max_violation(&snapped) <= set.max_violation(&x) { snapped } else { x };
    let viol = set.max_violation(&x);
    if viol > 1e-6 {
        return Err(GanError::EmptyFeasibleSet);
    }
    if viol > 1e-10 {
        return Err(GanError::ProjectionFailure(viol));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdOptions {
    pub step: f64,
    pub max_iters: usize,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self { step: 1e-2, max_iters: 10_000 }
    }
}

/// Objective minimized by the min-max generator, with its gradient in `p_G`.
fn divergence_and_grad(kind: GanKind, p_data: &[f64], q: &[f64], metric: Option<&[Vec<f64>]>) -> Result<(f64, Vec<f64>), GanError> {
    match kind {
        GanKind::Gan => Ok((jsd(p_data, q), jsd_grad_q(p_data, q))),
        GanKind::Fgan(div) => {
            let floor: Vec<f64> = q.iter().map(|&v| v.max(1e-12)).collect();
            let value = fdiv_with_limits(div, p_data, q);
            Ok((value, div.divergence_grad_q(p_data, &floor)?))
        }
        GanKind::Wgan => {
            let emd = wgan_emd(p_data, q, metric.ok_or(GanError::MissingMetric)?)?;
            Ok((emd.value, emd.potentials.iter().map(|v| -v).collect()))
        }
    }
}

/// `D_f` allowing `q_x = 0`, using `0·f(p/0) = p·lim f(u)/u`.
fn fdiv_with_limits(div: FDivergence, p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if b > 0.0 {
            acc += b * div.f(a / b).unwrap_or(f64::INFINITY);
        } else if a > 0.0 {
            acc += match div {
                FDivergence::ReverseKl => 0.0,
                FDivergence::Js => a * std::f64::consts::LN_2,
                FDivergence::Kl | FDivergence::Pearson => f64::INFINITY,
            };
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanSolution {
    pub g_star: Vec<f64>,
    /// `None` for WGAN with a restricted generator: no closed form.
    pub d_star: Option<Vec<f64>>,
    /// Optimal Kantorovich potential at `G*` (WGAN only).
    pub potentials: Option<Vec<f64>>,
    pub value: f64,
    /// Divergence at `G*`.
    pub divergence: f64,
    pub iterations: usize,
}

/// Min-max generator over the instance's generator set and the matching discriminator.
pub fn nonrealizable_solve(inst: &DiscreteGanInstance, kind: GanKind, opts: &PgdOptions) -> Result<GanSolution, GanError> {
    let p = inst.p_data();
    let metric = inst.metric();
    if kind == GanKind::Wgan && metric.is_none() {
        return Err(GanError::MissingMetric);
    }
    let (g_star, iterations) = if inst.is_realizable() {
        (p.to_vec(), 0)
    } else {
        let mut x = project_generator_set(p, inst.generator_set())?;
        let (mut fx, mut grad) = divergence_and_grad(kind, p, &x, metric)?;
        let mut step = opts.step;
        let mut iters = 0;
        while iters < opts.max_iters && step > 1e-18 {
            iters += 1;
            let y: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let cand = project_generator_set(&y, inst.generator_set())?;
            let (fc, gc) = divergence_and_grad(kind, p, &cand, metric)?;
            if fc < fx {
                let moved = cand.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = cand;
                fx = fc;
                grad = gc;
                if moved < 1e-16 {
                    break;
                }
            } else {
                step *= 0.5;
            }
        }
        (x, iters)
    };

    let (d_star, potentials, value, divergence) = match kind {
        GanKind::Gan => {
            let d = gan_opt_discriminator(p, &g_star)?;
            let v = gan_value(p, &g_star, &d);
            if !v.is_finite() {
                return Err(GanError::InfiniteValue);
            }
            (Some(d), None, v, jsd(p, &g_star))
        }
        GanKind::Fgan(div) => {
            let d = fgan_opt_discriminator(p, &g_star, div)?;
            let v = fgan_value(p, &g_star, &d, div);
            if !v.is_finite() {
                return Err(GanError::InfiniteValue);
            }
            (Some(d), None, v, div.divergence(p, &g_star)?)
        }
        GanKind::Wgan => {
            let emd = wgan_emd(p, &g_star, metric.unwrap())?;
            let d = if inst.is_realizable() { Some(vec![0.0; p.len()]) } else { None };
            (d, Some(emd.potentials), emd.value, emd.value)
        }
    };
    Ok(GanSolution { g_star, d_star, potentials, value, divergence, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// `max_D V(G*, D) − value` over the sampled discriminators.
    pub max_primal_violation: f64,
    /// `max_G value − V(G, D*)` over the sampled feasible generators.
    pub max_dual_violation: f64,
}

impl Certificates {
    pub fn holds(&self, eps: f64) -> bool {
        self.max_primal_violation <= eps && self.max_dual_violation <= eps
    }
}

/// Random point of the simplex, uniform (Dirichlet(1)).
pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Random feasible generator: a simplex sample projected onto the set.
fn random_feasible(rng: &mut impl Rng, set: &GeneratorSet, n: usize) -> Result<Vec<f64>, GanError> {
    let y = random_simplex(rng, n);
    match set {
        GeneratorSet::FullSimplex => Ok(y),
        _ => project_generator_set(&y, set),
    }
}

/// Random discriminator admissible for `kind`, near `center` half of the time.
fn random_discriminator(rng: &mut impl Rng, kind: GanKind, center: Option<&[f64]>, metric: Option<&[Vec<f64>]>, n: usize) -> Vec<f64> {
    let local = center.is_some() && rng.random_bool(0.5);
    match kind {
        GanKind::Gan => (0..n)
            .map(|x| match (local, center) {
                (true, Some(c)) => (c[x] + rng.random_range(-0.05..0.05)).clamp(1e-6, 1.0 - 1e-6),
                _ => rng.random_range(1e-6..1.0 - 1e-6),
            })
            .collect(),
        GanKind::Fgan(div) => (0..n)
            .map(|x| {
                let t = match (local, center) {
                    (true, Some(c)) => c[x] + rng.random_range(-0.1..0.1),
                    _ => div.f_prime(10f64.powf(rng.random_range(-2.0..2.0))).unwrap(),
                };
                if div.conj_domain_contains(t) {
                    t
                } else {
                    div.f_prime(1.0).unwrap()
                }
            })
            .collect(),
        GanKind::Wgan => {
            // c-transforms of random offsets are 1-Lipschitz for any metric.
            let d = metric.expect("metric checked by caller");
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            (0..n).map(|x| (0..n).map(|j| d[x][j] + w[j]).fold(f64::INFINITY, f64::min)).collect()
        }
    }
}

/// Random-deviation saddle certificates for a solution.
///
/// WGAN with a restricted generator has no closed-form `D*`; its dual side
/// instead checks `EMD(p_data, G) ≥ value` over the sampled generators.
pub fn certify(inst: &DiscreteGanInstance, kind: GanKind, sol: &GanSolution, deviations: usize, seed: u64) -> Result<Certificates, GanError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = inst.p_data();
    let n = p.len();
    let metric = inst.metric();
    let mut primal = f64::NEG_INFINITY;
    for _ in 0..deviations {
        let d = random_discriminator(&mut rng, kind, sol.d_star.as_deref(), metric, n);
        primal = primal.max(game_value(kind, p, &sol.g_star, &d) - sol.value);
    }
    let mut dual = f64::NEG_INFINITY;
    for _ in 0..deviations {
        let g = random_feasible(&mut rng, inst.generator_set(), n)?;
        let v = match (&sol.d_star, kind) {
            (Some(d), _) => game_value(kind, p, &g, d),
            (None, _) => wgan_emd(p, &g, metric.unwrap())?.value,
        };
        dual = dual.max(sol.value - v);
    }
    Ok(Certificates { max_primal_violation: primal, max_dual_violation: dual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::ALL_F_DIVERGENCES;

    #[test]
    fn gan_discriminator_examples() {
        let d = gan_opt_discriminator(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15);
        let p = [0.1, 0.2, 0.7];
        assert!(gan_opt_discriminator(&p, &p).unwrap().iter().all(|&x| x == 0.5));
        assert_eq!(gan_opt_discriminator(&[0.0, 1.0], &[0.0, 1.0]), Err(GanError::ZeroDenominator(0)));
    }

    #[test]
    fn gan_value_identity() {
        let p = [0.25, 0.25, 0.5];
        let (v, j) = gan_value_and_jsd(&p, &p).unwrap();
        assert!((v + 4f64.ln()).abs() < 1e-15 && j.abs() < 1e-15);
        let (a, b) = ([0.9, 0.1], [0.1, 0.9]);
        let (v, j) = gan_value_and_jsd(&a, &b).unwrap();
        // Direct KL sums against the midpoint (0.5, 0.5).
        let direct = 0.5 * (0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln()) * 2.0;
        assert!((j - direct).abs() < 1e-12);
        assert!((v - (-4f64.ln() + 2.0 * direct)).abs() < 1e-12);
        let (_, j2) = gan_value_and_jsd(&b, &a).unwrap();
        assert!((j - j2).abs() < 1e-12);
    }

    #[test]
    fn fgan_discriminator_examples() {
        let p = [0.3, 0.7];
        let d = fgan_opt_discriminator(&p, &p, FDivergence::Kl).unwrap();
        assert!(d.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let d = fgan_opt_discriminator(&[0.4, 0.6], &[0.2, 0.8], FDivergence::Pearson).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-12);
        for div in ALL_F_DIVERGENCES {
            let (v, df) = fgan_value_and_fdiv(&p, &p, div).unwrap();
            assert!(v.abs() < 1e-12 && df.abs() < 1e-12);
        }
        let (_, df) = fgan_value_and_fdiv(&[0.6, 0.4], &[0.5, 0.5], FDivergence::Pearson).unwrap();
        assert!((df - (0.5 * 0.2f64.powi(2) + 0.5 * 0.2f64.powi(2))).abs() < 1e-12);
    }

    #[test]
    fn js_member_matches_gan_up_to_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let (p, q) = (random_simplex(&mut rng, 4), random_simplex(&mut rng, 4));
            let (vg, _) = gan_value_and_jsd(&p, &q).unwrap();
            let (vf, _) = fgan_value_and_fdiv(&p, &q, FDivergence::Js).unwrap();
            assert!((vg - (vf - 4f64.ln())).abs() < 1e-10);
        }
    }

    #[test]
    fn emd_examples() {
        let d = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let e = wgan_emd(&[1.0, 0.0], &[0.0, 1.0], &d).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.dual_value, 1.0);
        let p = [0.3, 0.7];
        let e = wgan_emd(&p, &p, &d).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(matches!(wgan_emd(&p, &p, &[vec![0.0, 1.0], vec![2.0, 0.0]]), Err(GanError::InvalidMetric(_))));
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(matches!(validate_metric(&bad, 3), Err(GanError::InvalidMetric(_))));
    }

    #[test]
    fn maxmin_constants() {
        let g = maxmin_discriminator(GanKind::Gan).unwrap();
        assert_eq!(g.constant, Some(0.5));
        assert!((g.value + 4f64.ln()).abs() < 1e-15);
        assert_eq!(maxmin_discriminator(GanKind::Wgan).unwrap().value, 0.0);
        for div in ALL_F_DIVERGENCES {
            let m = maxmin_discriminator(GanKind::Fgan(div)).unwrap();
            assert_eq!(m.constant, Some(div.f_prime(1.0).unwrap()));
            assert!(m.value.abs() < 1e-12);
            assert!(m.line_search_value.unwrap().abs() < 1e-9, "{div:?}");
        }
        // The printed sign gives 2 for KL instead of the value 0.
        let kl = maxmin_discriminator(GanKind::Fgan(FDivergence::Kl)).unwrap();
        assert!((kl.printed_formula_value.unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn inner_min_support() {
        let p = [0.2, 0.3, 0.5];
        let (s, v) = inner_min_generator(&[0.9, 0.5, 0.5], &p, GanKind::Gan).unwrap();
        assert_eq!(s, vec![0]);
        let expect = 0.2 * 0.9f64.ln() + 0.8 * 0.5f64.ln() + 0.1f64.ln();
        assert!((v - expect).abs() < 1e-14);
        let (s, _) = inner_min_generator(&[0.4; 3], &p, GanKind::Gan).unwrap();
        assert_eq!(s, vec![0, 1, 2]);
        let (s, _) = inner_min_generator(&[0.1, 0.1 + 1e-10, -0.3], &p, GanKind::Wgan).unwrap();
        assert_eq!(s, vec![0, 1]);
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let x = project_simplex(&[2.0, 0.0, -1.0]);
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
        let x = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(x.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let set = GeneratorSet::Restricted(vec![LinearConstraint { a: vec![1.0, 0.0], b: 0.3 }]);
        let x = project_generator_set(&[0.6, 0.4], &set).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-12 && (x[1] - 0.7).abs() < 1e-12);
        let empty = GeneratorSet::Restricted(vec![
            LinearConstraint { a: vec![1.0, 0.0], b: 0.2 },
            LinearConstraint { a: vec![0.0, 1.0], b: 0.2 },
        ]);
        assert!(matches!(project_generator_set(&[0.5, 0.5], &empty), Err(GanError::EmptyFeasibleSet)));
    }

    #[test]
    fn realizable_solve_is_data() {
        let inst = DiscreteGanInstance::new(vec![0.2, 0.3, 0.5], None, GeneratorSet::FullSimplex).unwrap();
        let sol = nonrealizable_solve(&inst, GanKind::Gan, &PgdOptions::default()).unwrap();
        assert_eq!(sol.g_star, vec![0.2, 0.3, 0.5]);
        assert_eq!(sol.d_star, Some(vec![0.5; 3]));
        assert!((sol.value + 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn constrained_gan_two_points() {
        let set = GeneratorSet::Restricted(vec![LinearConstraint { a: vec![1.0, 0.0], b: 0.3 }]);
        let inst = DiscreteGanInstance::new(vec![0.6, 0.4], None, set).unwrap();
        let sol = nonrealizable_solve(&inst, GanKind::Gan, &PgdOptions::default()).unwrap();
        assert!((sol.g_star[0] - 0.3).abs() < 1e-9, "{:?}", sol.g_star);
        let d = sol.d_star.clone().unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-8 && (d[1] - 0.4 / 1.1).abs() < 1e-8);
        let cert = certify(&inst, GanKind::Gan, &sol, 1000, 17).unwrap();
        assert!(cert.holds(1e-4), "{cert:?}");
    }

    #[test]
    fn wgan_restricted_has_no_closed_form_discriminator() {
        let metric = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let set = GeneratorSet::Restricted(vec![LinearConstraint { a: vec![0.0, 0.0, 1.0], b: 0.1 }]);
        let inst = DiscreteGanInstance::new(vec![0.2, 0.3, 0.5], Some(metric), set).unwrap();
        let sol = nonrealizable_solve(&inst, GanKind::Wgan, &PgdOptions::default()).unwrap();
        assert!(sol.d_star.is_none() && sol.potentials.is_some());
        // Moving 0.4 mass one step from the last point is optimal.
        assert!((sol.value - 0.4).abs() < 1e-3, "{}", sol.value);
        let cert = certify(&inst, GanKind::Wgan, &sol, 200, 3).unwrap();
        assert!(cert.max_primal_violation <= 1e-9 && cert.max_dual_violation <= 1e-3, "{cert:?}");
    }
}
