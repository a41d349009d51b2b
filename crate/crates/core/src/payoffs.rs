//! Convex-concave payoffs `L(F, G)` in operator-output space.
//!
//! The min player controls `F` and the max player controls `G`. Every payoff
//! exposes its partial derivatives analytically; [`regularize`] wraps any
//! payoff with the quadratic terms `(λ/2)‖F−c_f‖² − (λ/2)‖G−c_g‖²`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergences::{DivergenceError, FDivergence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayoffError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convexity {
    ConvexConcave,
    StrictlyConvexConcave,
    BilinearLinearLinear,
}

/// Which side of the game a coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    F,
    G,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::F => "f",
            Side::G => "g",
        })
    }
}

/// Per-coordinate open intervals the outputs must stay in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DomainGuard {
    pub f: Vec<Option<(f64, f64)>>,
    pub g: Vec<Option<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardViolation {
    pub side: Side,
    pub index: usize,
    pub value: f64,
}

impl DomainGuard {
    pub fn unconstrained(n: usize, m: usize) -> Self {
        Self { f: vec![None; n], g: vec![None; m] }
    }

    pub fn first_violation(&self, f: &[f64], g: &[f64]) -> Option<GuardViolation> {
        let scan = |side, vals: &[f64], ivs: &[Option<(f64, f64)>]| {
            vals.iter().zip(ivs).enumerate().find_map(|(index, (&value, iv))| match iv {
                Some((lo, hi)) if !(value > *lo && value < *hi) => Some(GuardViolation { side, index, value }),
                _ => None,
            })
        };
        scan(Side::F, f, &self.f).or_else(|| scan(Side::G, g, &self.g))
    }
}

pub trait Payoff: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dim_f(&self) -> usize;
    fn dim_g(&self) -> usize;
    fn value(&self, f: &[f64], g: &[f64]) -> f64;
    fn grad_f_into(&self, f: &[f64], g: &[f64], out: &mut [f64]);
    fn grad_g_into(&self, f: &[f64], g: &[f64], out: &mut [f64]);
    fn convexity(&self) -> Convexity;

    fn domain_guard(&self) -> DomainGuard {
        DomainGuard::unconstrained(self.dim_f(), self.dim_g())
    }

    fn grad_f(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_f()];
        self.grad_f_into(f, g, &mut out);
        out
    }

    fn grad_g(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_g()];
        self.grad_g_into(f, g, &mut out);
        out
    }
}

pub type PayoffRef = Arc<dyn Payoff>;

fn check_distribution(p: &[f64]) -> Result<(), PayoffError> {
    if p.is_empty() {
        return Err(PayoffError::InvalidDistribution("empty support".into()));
    }
    if p.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(PayoffError::InvalidDistribution("entries must be strictly positive".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(PayoffError::InvalidDistribution(format!("entries sum to {s}")));
    }
    Ok(())
}

/// `(f−p)(g−q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bilinear {
    pub p: f64,
    pub q: f64,
}

impl Payoff for Bilinear {
    fn name(&self) -> String {
        format!("bilinear({}, {})", self.p, self.q)
    }
    fn dim_f(&self) -> usize {
        1
    }
    fn dim_g(&self) -> usize {
        1
    }
    fn value(&self, f: &[f64], g: &[f64]) -> f64 {
        (f[0] - self.p) * (g[0] - self.q)
    }
    fn grad_f_into(&self, _f: &[f64], g: &[f64], out: &mut [f64]) {
        out[0] = g[0] - self.q;
    }
    fn grad_g_into(&self, f: &[f64], _g: &[f64], out: &mut [f64]) {
        out[0] = f[0] - self.p;
    }
    fn convexity(&self) -> Convexity {
        Convexity::BilinearLinearLinear
    }
}

pub fn bilinear_payoff(p: f64, q: f64) -> Bilinear {
    Bilinear { p, q }
}

/// `F⊤AG`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBilinear {
    a: Vec<Vec<f64>>,
}

impl MatrixBilinear {
    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.a
    }
}

pub fn matrix_bilinear_payoff(a: Vec<Vec<f64>>) -> Result<MatrixBilinear, PayoffError> {
    let m = a.first().map(Vec::len).unwrap_or(0);
    if a.is_empty() || m == 0 {
        return Err(PayoffError::InvalidParameter("matrix must be non-empty".into()));
    }
    for row in &a {
        if row.len() != m {
            return Err(PayoffError::DimensionMismatch { what: "matrix row", expected: m, got: row.len() });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(PayoffError::InvalidParameter("matrix entries must be finite".into()));
        }
    }
    Ok(MatrixBilinear { a })
}

/// The rock-paper-scissors table.
pub fn rps_matrix() -> Vec<Vec<f64>> {
    vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]]
}

impl Payoff for MatrixBilinear {
    fn name(&self) -> String {
        format!("matrix_bilinear({}x{})", self.a.len(), self.a[0].len())
    }
    fn dim_f(&self) -> usize {
        self.a.len()
    }
    fn dim_g(&self) -> usize {
        self.a[0].len()
    }
    fn value(&self, f: &[f64], g: &[f64]) -> f64 {
        self.a.iter().zip(f).map(|(row, fi)| fi * row.iter().zip(g).map(|(a, gj)| a * gj).sum::<f64>()).sum()
    }
    fn grad_f_into(&self, _f: &[f64], g: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.a) {
            *o = row.iter().zip(g).map(|(a, gj)| a * gj).sum();
        }
    }
    fn grad_g_into(&self, f: &[f64], _g: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.a.iter().zip(f).map(|(row, fi)| row[j] * fi).sum();
        }
    }
    fn convexity(&self) -> Convexity {
        Convexity::BilinearLinearLinear
    }
}

/// Lagrangian of the discrete-support GAN with the generator's mass
/// constraint: `Σ p log g + Σ f log(1−g) + λ(Σf − 1)`.
///
/// The max player's vector is `(g_1, …, g_d, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaGan {
    p_data: Vec<f64>,
}

pub fn vanilla_gan_payoff(p_data: Vec<f64>) -> Result<VanillaGan, PayoffError> {
    check_distribution(&p_data)?;
    Ok(VanillaGan { p_data })
}

impl VanillaGan {
    pub fn p_data(&self) -> &[f64] {
        &self.p_data
    }

    /// `(F, G, λ) = (p_data, ½, log 2)`; `λ` cancels `∂L/∂f = log(1 − ½)`.
    pub fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        let mut g = vec![0.5; self.p_data.len()];
        g.push(std::f64::consts::LN_2);
        (self.p_data.clone(), g)
    }
}

impl Payoff for VanillaGan {
    fn name(&self) -> String {
        format!("vanilla_gan(d={})", self.p_data.len())
    }
    fn dim_f(&self) -> usize {
        self.p_data.len()
    }
    fn dim_g(&self) -> usize {
        self.p_data.len() + 1
    }
    fn value(&self, f: &[f64], g: &[f64]) -> f64 {
        let d = self.p_data.len();
        let lam = g[d];
        let mut v = 0.0;
        for x in 0..d {
            v += self.p_data[x] * g[x].ln() + f[x] * (1.0 - g[x]).ln();
        }
        v + lam * (f.iter().sum::<f64>() - 1.0)
    }
    fn grad_f_into(&self, _f: &[f64], g: &[f64], out: &mut [f64]) {
        let d = self.p_data.len();
        for x in 0..d {
            out[x] = (1.0 - g[x]).ln() + g[d];
        }
    }
    fn grad_g_into(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        let d = self.p_data.len();
        for x in 0..d {
            out[x] = self.p_data[x] / g[x] - f[x] / (1.0 - g[x]);
        }
        out[d] = f.iter().sum::<f64>() - 1.0;
    }
    fn convexity(&self) -> Convexity {
        Convexity::ConvexConcave
    }
    fn domain_guard(&self) -> DomainGuard {
        let d = self.p_data.len();
        let mut g = vec![Some((0.0, 1.0)); d];
        g.push(None);
        DomainGuard { f: vec![Some((0.0, 1.0)); d], g }
    }
}

/// One-dimensional Gaussian WGAN in hidden form.
///
/// The min player's output is `x = α*² − α²` (generator), the max player's is
/// `y = v` (discriminator). Regularized: `x·y − y²/2`; otherwise `x·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WganGaussian {
    pub alpha_star_sq: f64,
    pub regularized: bool,
}

pub fn wgan_gaussian_payoff(alpha_star_sq: f64) -> Result<WganGaussian, PayoffError> {
    wgan_gaussian_payoff_with(alpha_star_sq, true)
}

pub fn wgan_gaussian_payoff_with(alpha_star_sq: f64, regularized: bool) -> Result<WganGaussian, PayoffError> {
    if !(alpha_star_sq > 0.0) || !alpha_star_sq.is_finite() {
        return Err(PayoffError::InvalidParameter(format!("alpha_star_sq must be positive, got {alpha_star_sq}")));
    }
    Ok(WganGaussian { alpha_star_sq, regularized })
}

impl Payoff for WganGaussian {
    fn name(&self) -> String {
        format!("wgan_gaussian({}{})", self.alpha_star_sq, if self.regularized { "" } else { ", unregularized" })
    }
    fn dim_f(&self) -> usize {
        1
    }
    fn dim_g(&self) -> usize {
        1
    }
    fn value(&self, f: &[f64], g: &[f64]) -> f64 {
        let v = f[0] * g[0];
        if self.regularized {
            v - 0.5 * g[0] * g[0]
        } else {
            v
        }
    }
    fn grad_f_into(&self, _f: &[f64], g: &[f64], out: &mut [f64]) {
        out[0] = g[0];
    }
    fn grad_g_into(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        out[0] = if self.regularized { f[0] - g[0] } else { f[0] };
    }
    fn convexity(&self) -> Convexity {
        if self.regularized {
            Convexity::StrictlyConvexConcave
        } else {
            Convexity::BilinearLinearLinear
        }
    }
}

/// `Σ p_data·g − Σ f·f*(g)` with `F = p_G` and `G = D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FGan {
    p_data: Vec<f64>,
    div: FDivergence,
}

pub fn fgan_payoff(p_data: Vec<f64>, div: FDivergence) -> Result<FGan, PayoffError> {
    check_distribution(&p_data)?;
    Ok(FGan { p_data, div })
}

impl FGan {
    pub fn divergence(&self) -> FDivergence {
        self.div
    }

    pub fn p_data(&self) -> &[f64] {
        &self.p_data
    }
}

impl Payoff for FGan {
    fn name(&self) -> String {
        format!("fgan({}, d={})", self.div.name(), self.p_data.len())
    }
    fn dim_f(&self) -> usize {
        self.p_data.len()
    }
    fn dim_g(&self) -> usize {
        self.p_data.len()
    }
    fn value(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut v = 0.0;
        for x in 0..self.p_data.len() {
            v += self.p_data[x] * g[x] - f[x] * self.div.conj(g[x]).unwrap_or(f64::NAN);
        }
        v
    }
    fn grad_f_into(&self, _f: &[f64], g: &[f64], out: &mut [f64]) {
        for (o, &gx) in out.iter_mut().zip(g) {
            *o = -self.div.conj(gx).unwrap_or(f64::NAN);
        }
    }
    fn grad_g_into(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        for x in 0..self.p_data.len() {
            out[x] = self.p_data[x] - f[x] * self.div.conj_prime(g[x]).unwrap_or(f64::NAN);
        }
    }
    fn convexity(&self) -> Convexity {
        Convexity::ConvexConcave
    }
    fn domain_guard(&self) -> DomainGuard {
        let d = self.p_data.len();
        let g = match self.div {
            FDivergence::Kl | FDivergence::Pearson => None,
            FDivergence::ReverseKl => Some((f64::NEG_INFINITY, 0.0)),
            FDivergence::Js => Some((f64::NEG_INFINITY, std::f64::consts::LN_2)),
        };
        DomainGuard { f: vec![None; d], g: vec![g; d] }
    }
}

/// `L + (λ/2)‖F−c_f‖² − (λ/2)‖G−c_g‖²`.
#[derive(Debug, Clone)]
pub struct Regularized {
    base: PayoffRef,
    lambda: f64,
    center_f: Vec<f64>,
    center_g: Vec<f64>,
}

pub fn regularize(base: PayoffRef, lambda: f64, center_f: Vec<f64>, center_g: Vec<f64>) -> Result<Regularized, PayoffError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(PayoffError::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    if center_f.len() != base.dim_f() {
        return Err(PayoffError::DimensionMismatch { what: "center_f", expected: base.dim_f(), got: center_f.len() });
    }
    if center_g.len() != base.dim_g() {
        return Err(PayoffError::DimensionMismatch { what: "center_g", expected: base.dim_g(), got: center_g.len() });
    }
    Ok(Regularized { base, lambda, center_f, center_g })
}

impl Regularized {
    pub fn base(&self) -> &PayoffRef {
        &self.base
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn center_f(&self) -> &[f64] {
        &self.center_f
    }
    pub fn center_g(&self) -> &[f64] {
        &self.center_g
    }
}

fn half_sq_dist(x: &[f64], c: &[f64]) -> f64 {
    0.5 * x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

impl Payoff for Regularized {
    fn name(&self) -> String {
        format!("regularized({}, lambda={})", self.base.name(), self.lambda)
    }
    fn dim_f(&self) -> usize {
        self.base.dim_f()
    }
    fn dim_g(&self) -> usize {
        self.base.dim_g()
    }
    fn value(&self, f: &[f64], g: &[f64]) -> f64 {
        self.base.value(f, g) + self.lambda * half_sq_dist(f, &self.center_f) - self.lambda * half_sq_dist(g, &self.center_g)
    }
    fn grad_f_into(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        self.base.grad_f_into(f, g, out);
        for ((o, x), c) in out.iter_mut().zip(f).zip(&self.center_f) {
            *o += self.lambda * (x - c);
        }
    }
    fn grad_g_into(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        self.base.grad_g_into(f, g, out);
        for ((o, y), c) in out.iter_mut().zip(g).zip(&self.center_g) {
            *o -= self.lambda * (y - c);
        }
    }
    fn convexity(&self) -> Convexity {
        if self.lambda > 0.0 {
            Convexity::StrictlyConvexConcave
        } else {
            self.base.convexity()
        }
    }
    fn domain_guard(&self) -> DomainGuard {
        self.base.domain_guard()
    }
}

/// Largest mixed relative error `|a − fd| / max(1, |a|)` between the analytic
/// gradients and central differences with step `h`.
pub fn gradient_check(payoff: &dyn Payoff, f: &[f64], g: &[f64], h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let gf = payoff.grad_f(f, g);
    let gg = payoff.grad_g(f, g);
    let mut probe = |side: Side, i: usize, analytic: f64| {
        let (mut fa, mut fb, mut ga, mut gb) = (f.to_vec(), f.to_vec(), g.to_vec(), g.to_vec());
        match side {
            Side::F => {
                fa[i] += h;
                fb[i] -= h;
            }
            Side::G => {
                ga[i] += h;
                gb[i] -= h;
            }
        }
        let fd = (payoff.value(&fa, &ga) - payoff.value(&fb, &gb)) / (2.0 * h);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(1.0));
    };
    for (i, &a) in gf.iter().enumerate() {
        probe(Side::F, i, a);
    }
    for (i, &a) in gg.iter().enumerate() {
        probe(Side::G, i, a);
    }
    worst
}
