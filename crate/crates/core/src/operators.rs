//! Scalar operators, gradient-ascent paths and initialization safety.
//!
//! Every coordinate of the min player's `F` and the max player's `G` is a
//! smooth map from its own parameter block to the reals. Gradient ascent on a
//! single operator traces a curve along which the output is strictly
//! monotone; the image of that curve is the set of outputs reachable from the
//! initialization, and the curve itself is the inverse map used by the
//! output-space flow and the Lyapunov function.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("operator returned a non-finite value at {context}")]
    NonFiniteValue { context: String },
    #[error("operator has zero-dimensional input")]
    ZeroDimInput,
    #[error("output {z} is outside the attainable range {range}")]
    OutOfRange { z: f64, range: Range },
    #[error("path starts at a stationary point of the operator")]
    DegeneratePath,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid path settings: {0}")]
    InvalidSettings(&'static str),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
}

/// Which closed forms are available for an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Sigmoid1D,
    Identity1D,
    Custom,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
enum Imp {
    Sigmoid,
    Identity,
    /// Probabilistic relaxation of XOR on two sigmoid inputs.
    XorRelax,
    /// `alpha_star_sq - alpha^2`, the generator operator of the Gaussian WGAN.
    WganQuadratic { alpha_star_sq: f64 },
    Closure { eval: Arc<EvalFn>, grad: Arc<GradFn> },
}

/// One coordinate map `R^input_dim -> R` together with its gradient.
#[derive(Clone)]
pub struct ScalarOperator {
    name: String,
    input_dim: usize,
    kind: OperatorKind,
    imp: Imp,
}

impl fmt::Debug for ScalarOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarOperator")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("kind", &self.kind)
            .finish()
    }
}

impl ScalarOperator {
    pub fn sigmoid() -> Self {
        Self { name: "sigmoid".into(), input_dim: 1, kind: OperatorKind::Sigmoid1D, imp: Imp::Sigmoid }
    }

    pub fn identity() -> Self {
        Self { name: "identity".into(), input_dim: 1, kind: OperatorKind::Identity1D, imp: Imp::Identity }
    }

    /// `σ(a)(1−σ(b)) + σ(b)(1−σ(a))`; stationary on the whole point `(0, 0)`.
    pub fn xor_relax() -> Self {
        Self { name: "xor_relax".into(), input_dim: 2, kind: OperatorKind::Custom, imp: Imp::XorRelax }
    }

    /// `alpha_star_sq − α²`.
    pub fn wgan_quadratic(alpha_star_sq: f64) -> Self {
        Self {
            name: format!("wgan_quadratic({alpha_star_sq})"),
            input_dim: 1,
            kind: OperatorKind::Custom,
            imp: Imp::WganQuadratic { alpha_star_sq },
        }
    }

    /// User supplied operator. `grad` writes the gradient into its second argument.
    pub fn custom<E, G>(name: impl Into<String>, input_dim: usize, eval: E, grad: G) -> Result<Self, OperatorError>
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if input_dim == 0 {
            return Err(OperatorError::ZeroDimInput);
        }
        Ok(Self {
            name: name.into(),
            input_dim,
            kind: OperatorKind::Custom,
            imp: Imp::Closure { eval: Arc::new(eval), grad: Arc::new(grad) },
        })
    }

    /// Looks up a built-in operator: `sigmoid`, `identity`, `xor_relax`,
    /// `wgan_quadratic(<alpha_star_sq>)`.
    pub fn from_name(name: &str) -> Result<Self, OperatorError> {
        let name = name.trim();
        match name {
            "sigmoid" => return Ok(Self::sigmoid()),
            "identity" => return Ok(Self::identity()),
            "xor_relax" => return Ok(Self::xor_relax()),
            _ => {}
        }
        if let Some(arg) = name.strip_prefix("wgan_quadratic(").and_then(|s| s.strip_suffix(')')) {
            let a2: f64 = arg.trim().parse().map_err(|_| OperatorError::UnknownOperator(name.to_string()))?;
            return Ok(Self::wgan_quadratic(a2));
        }
        Err(OperatorError::UnknownOperator(name.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim);
        match &self.imp {
            Imp::Sigmoid => sigmoid(x[0]),
            Imp::Identity => x[0],
            Imp::XorRelax => {
                let (a, b) = (sigmoid(x[0]), sigmoid(x[1]));
                a * (1.0 - b) + b * (1.0 - a)
            }
            Imp::WganQuadratic { alpha_star_sq } => alpha_star_sq - x[0] * x[0],
            Imp::Closure { eval, .. } => eval(x),
        }
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_dim);
        debug_assert_eq!(out.len(), self.input_dim);
        match &self.imp {
            Imp::Sigmoid => {
                let s = sigmoid(x[0]);
                out[0] = s * (1.0 - s);
            }
            Imp::Identity => out[0] = 1.0,
            Imp::XorRelax => {
                let (a, b) = (sigmoid(x[0]), sigmoid(x[1]));
                out[0] = a * (1.0 - a) * (1.0 - 2.0 * b);
                out[1] = b * (1.0 - b) * (1.0 - 2.0 * a);
            }
            Imp::WganQuadratic { .. } => out[0] = -2.0 * x[0],
            Imp::Closure { grad, .. } => grad(x, out),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.input_dim];
        self.grad_into(x, &mut out);
        out
    }

    pub fn grad_norm_sq(&self, x: &[f64]) -> f64 {
        match &self.imp {
            Imp::Sigmoid => {
                let s = sigmoid(x[0]);
                let d = s * (1.0 - s);
                d * d
            }
            Imp::Identity => 1.0,
            Imp::WganQuadratic { .. } => 4.0 * x[0] * x[0],
            _ => self.grad(x).iter().map(|g| g * g).sum(),
        }
    }
}

/// Ordered operators with disjoint parameter blocks laid out back to back.
#[derive(Debug, Clone)]
pub struct OperatorBank {
    operators: Vec<ScalarOperator>,
    offsets: Vec<usize>,
}

impl OperatorBank {
    pub fn new(operators: Vec<ScalarOperator>) -> Self {
        let mut offsets = Vec::with_capacity(operators.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for op in &operators {
            acc += op.input_dim();
            offsets.push(acc);
        }
        Self { operators, offsets }
    }

    pub fn uniform(op: ScalarOperator, n: usize) -> Self {
        Self::new(vec![op; n])
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[ScalarOperator] {
        &self.operators
    }

    pub fn operator(&self, i: usize) -> &ScalarOperator {
        &self.operators[i]
    }

    pub fn total_param_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn block<'a>(&self, i: usize, params: &'a [f64]) -> &'a [f64] {
        &params[self.block_range(i)]
    }

    pub fn eval_into(&self, params: &[f64], out: &mut [f64]) {
        for (i, op) in self.operators.iter().enumerate() {
            out[i] = op.eval(self.block(i, params));
        }
    }

    pub fn eval(&self, params: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(params, &mut out);
        out
    }

    pub fn check_params(&self, params: &[f64]) -> Result<(), OperatorError> {
        if params.len() != self.total_param_dim() {
            return Err(OperatorError::DimensionMismatch { expected: self.total_param_dim(), got: params.len() });
        }
        Ok(())
    }
}

/// One end of an attainable output interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Endpoint {
    /// Limit value of the path (stall reached or known in closed form). Open.
    Exact(f64),
    /// Last observed value before the horizon or sample budget ran out.
    Truncated(f64),
    Unbounded,
}

impl Endpoint {
    pub fn value(&self, sign: f64) -> f64 {
        match *self {
            Endpoint::Exact(v) | Endpoint::Truncated(v) => v,
            Endpoint::Unbounded => sign * f64::INFINITY,
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self, Endpoint::Truncated(_))
    }
}

/// Attainable outputs `(lo, hi)` of gradient ascent/descent from one init.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: Endpoint,
    pub hi: Endpoint,
}

impl Range {
    pub fn lo_value(&self) -> f64 {
        self.lo.value(-1.0)
    }

    pub fn hi_value(&self) -> f64 {
        self.hi.value(1.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo_value() == self.hi_value()
    }

    pub fn contains_strictly(&self, z: f64) -> bool {
        z > self.lo_value() && z < self.hi_value()
    }

    /// Strict interior membership with a margin from each finite endpoint.
    pub fn contains_with_margin(&self, z: f64, margin: f64) -> bool {
        z > self.lo_value() + margin && z < self.hi_value() - margin
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |e: &Endpoint, sign: &str| match e {
            Endpoint::Exact(v) => format!("{v}"),
            Endpoint::Truncated(v) => format!("{v}~"),
            Endpoint::Unbounded => format!("{sign}inf"),
        };
        write!(f, "({}, {})", show(&self.lo, "-"), show(&self.hi, "+"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSettings {
    pub horizon: f64,
    pub step: f64,
    pub stall_tol: f64,
    /// Largest allowed output gap between consecutive samples.
    pub max_gap: f64,
    /// Per-direction sample budget; exhausting it truncates the range.
    pub max_samples: usize,
}

impl Default for PathSettings {
    fn default() -> Self {
        Self { horizon: 50.0, step: 1e-2, stall_tol: 1e-12, max_gap: 1e-3, max_samples: 200_000 }
    }
}

impl PathSettings {
    fn validate(&self) -> Result<(), OperatorError> {
        if !(self.step > 0.0) {
            return Err(OperatorError::InvalidSettings("step must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(OperatorError::InvalidSettings("horizon must be positive"));
        }
        if !(self.stall_tol > 0.0) {
            return Err(OperatorError::InvalidSettings("stall_tol must be positive"));
        }
        if !(self.max_gap > 0.0) || self.max_samples == 0 {
            return Err(OperatorError::InvalidSettings("resampling gap and budget must be positive"));
        }
        Ok(())
    }
}

/// Sampled gradient-ascent curve through one initialization, sorted by output.
#[derive(Debug, Clone)]
pub struct AscentPath {
    op: ScalarOperator,
    init: Vec<f64>,
    init_output: f64,
    outputs: Vec<f64>,
    /// Flat, `input_dim` values per sample.
    inputs: Vec<f64>,
    grad_norm_sq: Vec<f64>,
    range: Range,
    degenerate: bool,
}

impl AscentPath {
    pub fn operator(&self) -> &ScalarOperator {
        &self.op
    }

    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn init_output(&self) -> f64 {
        self.init_output
    }

    pub fn range(&self) -> Range {
        self.range
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn sample_input(&self, k: usize) -> &[f64] {
        let d = self.op.input_dim();
        &self.inputs[k * d..(k + 1) * d]
    }

    pub fn sample_grad_norm_sq(&self, k: usize) -> f64 {
        self.grad_norm_sq[k]
    }

    /// Point on the chord between samples `k` and `k + 1` whose output is `z`.
    ///
    /// Starts from linear interpolation in `z` and polishes with Newton steps
    /// along the chord. For 1-D operators the chord is the path itself, so
    /// the result is exact rather than second-order accurate.
    pub fn point_on_segment(&self, k: usize, z: f64) -> Vec<f64> {
        let (z0, z1) = (self.outputs[k], self.outputs[k + 1]);
        let (a, b) = (self.sample_input(k), self.sample_input(k + 1));
        let at = |w: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + w * (b - a)).collect() };
        let mut w = ((z - z0) / (z1 - z0)).clamp(0.0, 1.0);
        let mut grad = vec![0.0; a.len()];
        for _ in 0..6 {
            let x = at(w);
            let resid = self.op.eval(&x) - z;
            self.op.grad_into(&x, &mut grad);
            let slope: f64 = grad.iter().zip(a.iter().zip(b)).map(|(g, (a, b))| g * (b - a)).sum();
            if !(slope.abs() > 0.0) {
                break;
            }
            let next = (w - resid / slope).clamp(0.0, 1.0);
            let done = (next - w).abs() <= 1e-15;
            w = next;
            if done {
                break;
            }
        }
        at(w)
    }
}

fn check_finite(v: f64, context: impl FnOnce() -> String) -> Result<f64, OperatorError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OperatorError::NonFiniteValue { context: context() })
    }
}

struct Sample {
    z: f64,
    x: Vec<f64>,
    g2: f64,
}

/// Integrates `ż = sign·∇op(z)` from `init` with RK4, shrinking individual
/// steps so the output never jumps more than `max_gap`.
fn integrate_direction(
    op: &ScalarOperator,
    init: &[f64],
    sign: f64,
    settings: &PathSettings,
) -> Result<(Vec<Sample>, bool), OperatorError> {
    let d = op.input_dim();
    let mut x = init.to_vec();
    let mut z = op.eval(&x);
    let mut t = 0.0;
    let mut samples = Vec::new();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut h = settings.step;

    loop {
        let g2 = op.grad_norm_sq(&x);
        check_finite(g2, || format!("gradient at {x:?}"))?;
        if g2 < settings.stall_tol {
            return Ok((samples, true));
        }
        if t >= settings.horizon || samples.len() >= settings.max_samples {
            return Ok((samples, false));
        }
        let h_step = h.min(settings.horizon - t).max(f64::MIN_POSITIVE);

        op.grad_into(&x, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h_step * sign * k1[i];
        }
        op.grad_into(&tmp, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h_step * sign * k2[i];
        }
        op.grad_into(&tmp, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + h_step * sign * k3[i];
        }
        op.grad_into(&tmp, &mut k4);
        for i in 0..d {
            next[i] = x[i] + h_step * sign * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
            check_finite(next[i], || format!("path state near {x:?}"))?;
        }
        let z_next = check_finite(op.eval(&next), || format!("value at {next:?}"))?;
        let jump = (z_next - z).abs();
        if jump > settings.max_gap && h_step > 1e-14 {
            h = h_step * (0.9 * settings.max_gap / jump).max(0.05);
            continue;
        }
        // No progress in the output means we have numerically stalled.
        if (z_next - z) * sign <= 0.0 {
            return Ok((samples, true));
        }
        t += h_step;
        x.copy_from_slice(&next);
        z = z_next;
        let g2_next = op.grad_norm_sq(&x);
        samples.push(Sample { z, x: x.clone(), g2: g2_next });
        // Let the step recover after a refinement.
        h = (h * 2.0).min(settings.step);
    }
}

/// Builds the gradient ascent/descent path of `op` through `init`.
pub fn build_ascent_path(op: &ScalarOperator, init: &[f64], settings: &PathSettings) -> Result<AscentPath, OperatorError> {
    if op.input_dim() == 0 {
        return Err(OperatorError::ZeroDimInput);
    }
    if init.len() != op.input_dim() {
        return Err(OperatorError::DimensionMismatch { expected: op.input_dim(), got: init.len() });
    }
    settings.validate()?;
    let z0 = check_finite(op.eval(init), || format!("value at {init:?}"))?;
    let g0 = check_finite(op.grad_norm_sq(init), || format!("gradient at {init:?}"))?;

    if g0 < settings.stall_tol {
        return Ok(AscentPath {
            op: op.clone(),
            init: init.to_vec(),
            init_output: z0,
            outputs: vec![z0],
            inputs: init.to_vec(),
            grad_norm_sq: vec![g0],
            range: Range { lo: Endpoint::Exact(z0), hi: Endpoint::Exact(z0) },
            degenerate: true,
        });
    }

    let (up, up_stalled) = integrate_direction(op, init, 1.0, settings)?;
    let (down, down_stalled) = integrate_direction(op, init, -1.0, settings)?;

    let n = up.len() + down.len() + 1;
    let d = op.input_dim();
    let mut outputs = Vec::with_capacity(n);
    let mut inputs = Vec::with_capacity(n * d);
    let mut grad_norm_sq = Vec::with_capacity(n);
    for s in down.iter().rev() {
        outputs.push(s.z);
        inputs.extend_from_slice(&s.x);
        grad_norm_sq.push(s.g2);
    }
    outputs.push(z0);
    inputs.extend_from_slice(init);
    grad_norm_sq.push(g0);
    for s in &up {
        outputs.push(s.z);
        inputs.extend_from_slice(&s.x);
        grad_norm_sq.push(s.g2);
    }
    debug_assert!(outputs.windows(2).all(|w| w[0] < w[1]));

    let observed = |v: f64, stalled: bool| if stalled { Endpoint::Exact(v) } else { Endpoint::Truncated(v) };
    let range = match op.kind() {
        OperatorKind::Sigmoid1D => Range { lo: Endpoint::Exact(0.0), hi: Endpoint::Exact(1.0) },
        OperatorKind::Identity1D => Range { lo: Endpoint::Unbounded, hi: Endpoint::Unbounded },
        OperatorKind::Custom => Range {
            lo: observed(outputs[0], down_stalled),
            hi: observed(*outputs.last().unwrap(), up_stalled),
        },
    };

    Ok(AscentPath {
        op: op.clone(),
        init: init.to_vec(),
        init_output: z0,
        outputs,
        inputs,
        grad_norm_sq,
        range,
        degenerate: false,
    })
}

/// Builds one path per operator of `bank`, each through its own parameter block.
pub fn build_bank_paths(bank: &OperatorBank, params: &[f64], settings: &PathSettings) -> Result<Vec<AscentPath>, OperatorError> {
    bank.check_params(params)?;
    (0..bank.len()).map(|i| build_ascent_path(bank.operator(i), bank.block(i, params), settings)).collect()
}

fn closed_form_inverse(kind: OperatorKind, z: f64) -> Option<f64> {
    match kind {
        OperatorKind::Sigmoid1D => Some((z / (1.0 - z)).ln()),
        OperatorKind::Identity1D => Some(z),
        OperatorKind::Custom => None,
    }
}

/// The input on the path whose output is `z`, see [`AscentPath::point_on_segment`].
pub fn inverse_map(path: &AscentPath, z: f64) -> Result<Vec<f64>, OperatorError> {
    if path.degenerate {
        return Err(OperatorError::DegeneratePath);
    }
    if !path.range.contains_strictly(z) {
        return Err(OperatorError::OutOfRange { z, range: path.range });
    }
    let outs = &path.outputs;
    let (first, last) = (outs[0], *outs.last().unwrap());
    if z < first || z > last {
        // Only closed-form operators have a range wider than their samples.
        return match closed_form_inverse(path.op.kind(), z) {
            Some(x) => Ok(vec![x]),
            None => Err(OperatorError::OutOfRange { z, range: path.range }),
        };
    }
    let k = outs.partition_point(|&o| o < z);
    if k < outs.len() && outs[k] == z {
        return Ok(path.sample_input(k).to_vec());
    }
    Ok(path.point_on_segment(k - 1, z))
}

/// `‖∇op‖²` at the point of the path whose output is `z`.
pub fn grad_norm_sq_at_output(path: &AscentPath, z: f64) -> Result<f64, OperatorError> {
    match path.op.kind() {
        OperatorKind::Sigmoid1D | OperatorKind::Identity1D => {
            if path.degenerate {
                return Err(OperatorError::DegeneratePath);
            }
            if !path.range.contains_strictly(z) {
                return Err(OperatorError::OutOfRange { z, range: path.range });
            }
            Ok(if path.op.kind() == OperatorKind::Sigmoid1D {
                let d = z * (1.0 - z);
                d * d
            } else {
                1.0
            })
        }
        OperatorKind::Custom => {
            let x = inverse_map(path, z)?;
            Ok(path.op.grad_norm_sq(&x))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SafetyVerdict {
    Safe,
    Unsafe,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub f: Vec<SafetyVerdict>,
    pub g: Vec<SafetyVerdict>,
    pub overall: SafetyVerdict,
}

fn coordinate_verdict(path: &AscentPath, target: f64) -> SafetyVerdict {
    if path.degenerate {
        return SafetyVerdict::Unsafe;
    }
    let r = path.range;
    if r.contains_strictly(target) {
        return SafetyVerdict::Safe;
    }
    let (lo, hi) = (r.lo_value(), r.hi_value());
    if target == lo || target == hi {
        return SafetyVerdict::Unknown;
    }
    let beyond = if target < lo { r.lo } else { r.hi };
    if beyond.is_truncated() {
        SafetyVerdict::Unknown
    } else {
        SafetyVerdict::Unsafe
    }
}

/// Checks whether each coordinate can reach its target output from its init.
pub fn is_safe(paths_f: &[AscentPath], paths_g: &[AscentPath], p: &[f64], q: &[f64]) -> Result<SafetyReport, OperatorError> {
    if paths_f.len() != p.len() {
        return Err(OperatorError::DimensionMismatch { expected: paths_f.len(), got: p.len() });
    }
    if paths_g.len() != q.len() {
        return Err(OperatorError::DimensionMismatch { expected: paths_g.len(), got: q.len() });
    }
    let f: Vec<_> = paths_f.iter().zip(p).map(|(path, &t)| coordinate_verdict(path, t)).collect();
    let g: Vec<_> = paths_g.iter().zip(q).map(|(path, &t)| coordinate_verdict(path, t)).collect();
    let all = f.iter().chain(&g);
    let overall = if all.clone().any(|v| *v == SafetyVerdict::Unsafe) {
        SafetyVerdict::Unsafe
    } else if all.into_iter().all(|v| *v == SafetyVerdict::Safe) {
        SafetyVerdict::Safe
    } else {
        SafetyVerdict::Unknown
    };
    Ok(SafetyReport { f, g, overall })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(op: &ScalarOperator, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (op.eval(&a) - op.eval(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn sigmoid_gradient_identity() {
        let op = ScalarOperator::sigmoid();
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            let s = op.eval(&[x]);
            assert!(s > 0.0 && s < 1.0);
            assert!((op.grad(&[x])[0] - s * (1.0 - s)).abs() < 1e-12);
        }
    }

    #[test]
    fn builtin_gradients_match_finite_differences() {
        let ops = [
            ScalarOperator::sigmoid(),
            ScalarOperator::identity(),
            ScalarOperator::xor_relax(),
            ScalarOperator::wgan_quadratic(1.0),
        ];
        let pts: [&[f64]; 4] = [&[0.3, -1.2], &[1.7, 0.4], &[-0.8, 2.1], &[0.05, -0.6]];
        for op in &ops {
            for p in pts {
                let x = &p[..op.input_dim()];
                let g = op.grad(x);
                let fd = central_diff(op, x, 1e-6);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-3), "{} {a} vs {b}", op.name());
                }
            }
        }
    }

    #[test]
    fn registry_names() {
        assert_eq!(ScalarOperator::from_name("sigmoid").unwrap().kind(), OperatorKind::Sigmoid1D);
        let w = ScalarOperator::from_name("wgan_quadratic(2.5)").unwrap();
        assert_eq!(w.eval(&[1.0]), 1.5);
        assert!(matches!(ScalarOperator::from_name("tanh"), Err(OperatorError::UnknownOperator(_))));
        assert!(matches!(
            ScalarOperator::custom("z", 0, |_| 0.0, |_, _| {}),
            Err(OperatorError::ZeroDimInput)
        ));
    }

    #[test]
    fn bank_layout() {
        let bank = OperatorBank::new(vec![ScalarOperator::sigmoid(), ScalarOperator::xor_relax(), ScalarOperator::identity()]);
        assert_eq!(bank.total_param_dim(), 4);
        assert_eq!(bank.block_range(1), 1..3);
        let out = bank.eval(&[0.0, 0.0, 0.0, 2.5]);
        assert_eq!(out, vec![0.5, 0.5, 2.5]);
    }

    #[test]
    fn sigmoid_path_from_zero() {
        let path = build_ascent_path(&ScalarOperator::sigmoid(), &[0.0], &PathSettings::default()).unwrap();
        assert!(!path.is_degenerate());
        assert_eq!(path.range(), Range { lo: Endpoint::Exact(0.0), hi: Endpoint::Exact(1.0) });
        assert!(path.outputs().windows(2).all(|w| w[0] < w[1]));
        assert!(path.outputs()[0] < 0.5 && *path.outputs().last().unwrap() > 0.5);
    }

    #[test]
    fn xor_stationary_init_is_degenerate() {
        let path = build_ascent_path(&ScalarOperator::xor_relax(), &[0.0, 0.0], &PathSettings::default()).unwrap();
        assert!(path.is_degenerate());
        assert_eq!(path.len(), 1);
        assert_eq!(path.init_output(), 0.5);
        assert_eq!(path.range(), Range { lo: Endpoint::Exact(0.5), hi: Endpoint::Exact(0.5) });
        assert_eq!(inverse_map(&path, 0.5), Err(OperatorError::DegeneratePath));
    }

    #[test]
    fn wgan_quadratic_path() {
        let op = ScalarOperator::wgan_quadratic(1.0);
        let path = build_ascent_path(&op, &[0.5], &PathSettings::default()).unwrap();
        let r = path.range();
        // Ascent drives α → 0 where the gradient vanishes: output → 1.
        assert!(matches!(r.hi, Endpoint::Exact(v) if v < 1.0 && v > 1.0 - 1e-9));
        // Descent is unbounded and has to be cut off.
        assert!(r.lo.is_truncated());
        assert!(r.lo_value() < -10.0);
        // Ascent samples follow α(t) = 0.5·e^{−2t}.
        let k = path.outputs().partition_point(|&z| z < 0.75 + 0.1);
        let alpha = path.sample_input(k)[0];
        let z = path.outputs()[k];
        assert!((1.0 - alpha * alpha - z).abs() < 1e-12);
    }

    #[test]
    fn inverse_map_sigmoid() {
        let path = build_ascent_path(&ScalarOperator::sigmoid(), &[0.0], &PathSettings::default()).unwrap();
        assert!(inverse_map(&path, 0.5).unwrap()[0].abs() < 1e-6);
        let z = sigmoid(1.0);
        let oracle = (z / (1.0 - z)).ln();
        assert!((inverse_map(&path, z).unwrap()[0] - oracle).abs() < 1e-4);
        assert!(matches!(inverse_map(&path, 1.5), Err(OperatorError::OutOfRange { .. })));
    }

    #[test]
    fn grad_norm_closed_forms() {
        let sp = build_ascent_path(&ScalarOperator::sigmoid(), &[0.0], &PathSettings::default()).unwrap();
        assert_eq!(grad_norm_sq_at_output(&sp, 0.5).unwrap(), 0.0625);
        let ip = build_ascent_path(&ScalarOperator::identity(), &[0.0], &PathSettings::default()).unwrap();
        assert_eq!(grad_norm_sq_at_output(&ip, -123.0).unwrap(), 1.0);
        let wp = build_ascent_path(&ScalarOperator::wgan_quadratic(1.0), &[0.5], &PathSettings::default()).unwrap();
        let g2 = grad_norm_sq_at_output(&wp, 0.75).unwrap();
        assert!((g2 - 1.0).abs() < 1e-9, "{g2}");
    }

    #[test]
    fn safety_examples() {
        let s = PathSettings::default();
        let sig: Vec<_> = [0.3, -1.0, 2.0].iter().map(|&x| build_ascent_path(&ScalarOperator::sigmoid(), &[x], &s).unwrap()).collect();
        let rep = is_safe(&sig, &sig[..1], &[0.2, 0.5, 0.9], &[0.01]).unwrap();
        assert_eq!(rep.overall, SafetyVerdict::Safe);

        let xor = build_ascent_path(&ScalarOperator::xor_relax(), &[0.0, 0.0], &s).unwrap();
        let rep = is_safe(&[xor], &[], &[0.3], &[]).unwrap();
        assert_eq!(rep.f[0], SafetyVerdict::Unsafe);

        let w0 = build_ascent_path(&ScalarOperator::wgan_quadratic(1.0), &[0.0], &s).unwrap();
        let rep = is_safe(&[w0], &[], &[0.0], &[]).unwrap();
        assert_eq!(rep.overall, SafetyVerdict::Unsafe);

        assert!(matches!(is_safe(&sig, &[], &[0.5], &[]), Err(OperatorError::DimensionMismatch { .. })));
    }

    #[test]
    fn safety_at_endpoint_and_beyond() {
        let s = PathSettings::default();
        let w = build_ascent_path(&ScalarOperator::wgan_quadratic(1.0), &[0.5], &s).unwrap();
        // Above the stalled top: unreachable.
        assert_eq!(is_safe(&[w.clone()], &[], &[1.5], &[]).unwrap().overall, SafetyVerdict::Unsafe);
        // Below the truncated bottom: undecidable from the samples.
        assert_eq!(is_safe(&[w.clone()], &[], &[-1e9], &[]).unwrap().overall, SafetyVerdict::Unknown);
        let top = w.range().hi_value();
        assert_eq!(is_safe(&[w], &[], &[top], &[]).unwrap().overall, SafetyVerdict::Unknown);
    }
}
