//! Versioned JSON experiment configs (`"schema": "hcc/1"`).
//!
//! Parsing reports the JSON path of the first offending field, and
//! [`ExperimentConfig::validate`] checks cross-field invariants such as
//! dimensions against the payoff.

use std::sync::Arc;

use hcc_core::divergences::FDivergence;
use hcc_core::payoffs::{
    bilinear_payoff, fgan_payoff, matrix_bilinear_payoff, regularize, rps_matrix, vanilla_gan_payoff, wgan_gaussian_payoff_with,
};
use hcc_core::{ConvergenceOptions, FlowOptions, HccGame, OperatorBank, PayoffRef, ScalarOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA: &str = "hcc/1";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub game: GameSpec,
    pub flow: FlowSpec,
    pub init: InitSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    pub outputs: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub payoff: PayoffSpec,
    pub operators_f: Vec<String>,
    pub operators_g: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<RegularizationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    Bilinear { p: f64, q: f64 },
    Matrix { matrix: Vec<Vec<f64>> },
    Rps,
    VanillaGan { p_data: Vec<f64> },
    WganGaussian {
        alpha_star_sq: f64,
        #[serde(default = "yes")]
        regularized: bool,
    },
    Fgan { p_data: Vec<f64>, f_div: FDivergence },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSpec {
    pub lambda: f64,
    pub center_f: Vec<f64>,
    pub center_g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowSpec {
    Gda { dt: f64, t_end: f64 },
    Transformed { dt: f64, t_end: f64 },
    HgdMod { dt: f64, t_end: f64 },
    Sgda { steps: usize, lr: f64, batch: usize },
}

impl FlowSpec {
    pub fn method(&self) -> &'static str {
        match self {
            FlowSpec::Gda { .. } => "gda",
            FlowSpec::Transformed { .. } => "transformed",
            FlowSpec::HgdMod { .. } => "hgd_mod",
            FlowSpec::Sgda { .. } => "sgda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Explicit(Vec<InitPoint>),
    /// Independent uniform draws per coordinate, seeded by the config seed.
    UniformBox { lo: Vec<f64>, hi: Vec<f64>, count: usize },
    /// Cartesian grid with the last axis varying fastest.
    Grid { lo: Vec<f64>, hi: Vec<f64>, per_axis: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitPoint {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    pub tol: f64,
    pub window: f64,
    pub excursion_factor: f64,
    pub increment_tol: f64,
    pub constant_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_interval: Option<[f64; 2]>,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        let c = ConvergenceOptions::default();
        let a = hcc_core::AuditOptions::default();
        Self {
            tol: c.tol,
            window: c.window,
            excursion_factor: c.excursion_factor,
            increment_tol: a.increment_tol,
            constant_tol: a.constant_tol,
            fit_interval: None,
        }
    }
}

impl DiagnosticsSpec {
    pub fn convergence(&self) -> ConvergenceOptions {
        ConvergenceOptions { tol: self.tol, window: self.window, excursion_factor: self.excursion_factor }
    }

    pub fn audit(&self) -> hcc_core::AuditOptions {
        hcc_core::AuditOptions { increment_tol: self.increment_tol, constant_tol: self.constant_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: String,
    pub summary: String,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Row table written by `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Replaces the top-level `init` as the init axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
}

/// Parses a config, reporting the JSON path of any type error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::new(e.path().to_string(), e.inner().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies `HCC_SEED` if set.
pub fn apply_seed_override(cfg: &mut ExperimentConfig, value: Option<&str>) -> Result<(), ConfigError> {
    if let Some(v) = value {
        cfg.seed = v.trim().parse().map_err(|_| ConfigError::new("HCC_SEED", format!("not an unsigned integer: {v:?}")))?;
    }
    Ok(())
}

fn positive(path: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive and finite, got {x}")))
    }
}

fn finite_all(path: &str, xs: &[f64]) -> Result<(), ConfigError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(ConfigError::new(format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn check_len(path: &str, expected: usize, got: usize) -> Result<(), ConfigError> {
    if expected == got {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("expected length {expected}, got {got}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA {
            return Err(ConfigError::new("schema", format!("expected {SCHEMA:?}, got {:?}", self.schema)));
        }
        if self.name.trim().is_empty() {
            return Err(ConfigError::new("name", "must be nonempty"));
        }
        let game = self.build_game()?;
        match self.flow {
            FlowSpec::Gda { dt, t_end } | FlowSpec::Transformed { dt, t_end } | FlowSpec::HgdMod { dt, t_end } => {
                positive("flow.dt", dt)?;
                positive("flow.t_end", t_end)?;
                if dt > t_end {
                    return Err(ConfigError::new("flow.dt", "must not exceed t_end"));
                }
            }
            FlowSpec::Sgda { steps, lr, batch } => {
                positive("flow.lr", lr)?;
                if steps == 0 {
                    return Err(ConfigError::new("flow.steps", "must be positive"));
                }
                if batch == 0 {
                    return Err(ConfigError::new("flow.batch", "must be positive"));
                }
                if !matches!(self.game.payoff, PayoffSpec::WganGaussian { .. }) {
                    return Err(ConfigError::new("game.payoff.kind", "sgda needs the wgan_gaussian payoff"));
                }
                if self.game.regularization.is_some() {
                    return Err(ConfigError::new("game.regularization", "not supported with sgda"));
                }
                // The sampler differentiates α*² − α² itself, so the bank must match it.
                let op = game.bank_f().operator(0);
                if game.bank_f().len() != 1 || !op.name().starts_with("wgan_quadratic") || op.eval(&[0.0]) != self.alpha_star_sq().unwrap() {
                    return Err(ConfigError::new("game.operators_f", "sgda needs [\"wgan_quadratic(a)\"] with a = alpha_star_sq"));
                }
                if self.game.operators_g.len() != 1 || self.game.operators_g[0].trim() != "identity" {
                    return Err(ConfigError::new("game.operators_g", "sgda needs [\"identity\"] for the critic"));
                }
            }
        }
        if let FlowSpec::HgdMod { .. } = self.flow {
            if !matches!(self.game.payoff, PayoffSpec::Bilinear { .. }) || self.game.regularization.is_some() {
                return Err(ConfigError::new("game.payoff", "hgd_mod needs an unregularized bilinear payoff"));
            }
        }
        if self.outputs.record_every == 0 {
            return Err(ConfigError::new("outputs.record_every", "must be positive"));
        }
        for (key, v) in [("outputs.csv", &self.outputs.csv), ("outputs.summary", &self.outputs.summary)] {
            if v.trim().is_empty() {
                return Err(ConfigError::new(key, "must be nonempty"));
            }
        }
        let d = &self.diagnostics;
        positive("diagnostics.tol", d.tol)?;
        positive("diagnostics.window", d.window)?;
        positive("diagnostics.excursion_factor", d.excursion_factor)?;
        positive("diagnostics.increment_tol", d.increment_tol)?;
        positive("diagnostics.constant_tol", d.constant_tol)?;
        if let Some([lo, hi]) = d.fit_interval {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(ConfigError::new("diagnostics.fit_interval", "needs 0 <= lo < hi"));
            }
        }
        let (n, m) = (game.bank_f().len(), game.bank_g().len());
        for (i, t) in self.targets.iter().enumerate() {
            check_len(&format!("targets[{i}].p"), n, t.p.len())?;
            check_len(&format!("targets[{i}].q"), m, t.q.len())?;
            finite_all(&format!("targets[{i}].p"), &t.p)?;
            finite_all(&format!("targets[{i}].q"), &t.q)?;
        }
        let dims = (game.bank_f().total_param_dim(), game.bank_g().total_param_dim());
        validate_init("init", &self.init, dims)?;
        if let Some(sw) = &self.sweep {
            if sw.lambda.is_none() && sw.seeds.is_none() && sw.init.is_none() {
                return Err(ConfigError::new("sweep", "needs at least one axis"));
            }
            if let Some(l) = &sw.lambda {
                if l.is_empty() {
                    return Err(ConfigError::new("sweep.lambda", "axis is empty"));
                }
                for (i, &x) in l.iter().enumerate() {
                    positive(&format!("sweep.lambda[{i}]"), x)?;
                }
                if self.game.regularization.is_none() {
                    return Err(ConfigError::new("game.regularization", "a lambda axis needs a regularization block"));
                }
            }
            if sw.seeds.as_ref().is_some_and(|s| s.is_empty()) {
                return Err(ConfigError::new("sweep.seeds", "axis is empty"));
            }
            if let Some(init) = &sw.init {
                validate_init("sweep.init", init, dims)?;
            }
            if self.outputs.table.is_none() {
                return Err(ConfigError::new("outputs.table", "sweeps need a table path"));
            }
        }
        Ok(())
    }

    fn alpha_star_sq(&self) -> Option<f64> {
        match self.game.payoff {
            PayoffSpec::WganGaussian { alpha_star_sq, .. } => Some(alpha_star_sq),
            _ => None,
        }
    }

    /// Builds the game, with regularization applied when configured.
    pub fn build_game(&self) -> Result<HccGame, ConfigError> {
        self.build_game_with_lambda(None)
    }

    /// As [`Self::build_game`], with the regularization strength replaced.
    pub fn build_game_with_lambda(&self, lambda: Option<f64>) -> Result<HccGame, ConfigError> {
        let g = &self.game;
        let payoff: PayoffRef = match &g.payoff {
            PayoffSpec::Bilinear { p, q } => {
                finite_all("game.payoff", &[*p, *q])?;
                Arc::new(bilinear_payoff(*p, *q))
            }
            PayoffSpec::Matrix { matrix } => {
                Arc::new(matrix_bilinear_payoff(matrix.clone()).map_err(|e| ConfigError::new("game.payoff.matrix", e.to_string()))?)
            }
            PayoffSpec::Rps => Arc::new(matrix_bilinear_payoff(rps_matrix()).expect("valid matrix")),
            PayoffSpec::VanillaGan { p_data } => {
                Arc::new(vanilla_gan_payoff(p_data.clone()).map_err(|e| ConfigError::new("game.payoff.p_data", e.to_string()))?)
            }
            PayoffSpec::WganGaussian { alpha_star_sq, regularized } => Arc::new(
                wgan_gaussian_payoff_with(*alpha_star_sq, *regularized)
                    .map_err(|e| ConfigError::new("game.payoff.alpha_star_sq", e.to_string()))?,
            ),
            PayoffSpec::Fgan { p_data, f_div } => {
                Arc::new(fgan_payoff(p_data.clone(), *f_div).map_err(|e| ConfigError::new("game.payoff.p_data", e.to_string()))?)
            }
        };
        let payoff: PayoffRef = match &g.regularization {
            Some(r) => {
                let lam = lambda.unwrap_or(r.lambda);
                positive("game.regularization.lambda", lam)?;
                Arc::new(
                    regularize(payoff, lam, r.center_f.clone(), r.center_g.clone())
                        .map_err(|e| ConfigError::new("game.regularization", e.to_string()))?,
                )
            }
            None => payoff,
        };
        let bank = |key: &str, names: &[String]| -> Result<OperatorBank, ConfigError> {
            if names.is_empty() {
                return Err(ConfigError::new(key, "needs at least one operator"));
            }
            names
                .iter()
                .enumerate()
                .map(|(i, n)| ScalarOperator::from_name(n).map_err(|e| ConfigError::new(format!("{key}[{i}]"), e.to_string())))
                .collect::<Result<Vec<_>, _>>()
                .map(OperatorBank::new)
        };
        let bank_f = bank("game.operators_f", &g.operators_f)?;
        let bank_g = bank("game.operators_g", &g.operators_g)?;
        HccGame::new(payoff, bank_f, bank_g).map_err(|e| ConfigError::new("game", e.to_string()))
    }

    /// Continuous-flow options, or `None` for `sgda`.
    pub fn flow_options(&self) -> Option<FlowOptions> {
        match self.flow {
            FlowSpec::Gda { dt, t_end } | FlowSpec::Transformed { dt, t_end } | FlowSpec::HgdMod { dt, t_end } => {
                Some(FlowOptions::new(dt, t_end).with_record_every(self.outputs.record_every))
            }
            FlowSpec::Sgda { .. } => None,
        }
    }

    /// Initial points for the top-level `init`, seeded by `seed`.
    pub fn init_points(&self, seed: u64) -> Result<Vec<InitPoint>, ConfigError> {
        let game = self.build_game()?;
        expand_init(&self.init, (game.bank_f().total_param_dim(), game.bank_g().total_param_dim()), seed)
    }
}

fn broadcast(path: &str, v: &[f64], dim: usize) -> Result<Vec<f64>, ConfigError> {
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        k if k == dim => Ok(v.to_vec()),
        k => Err(ConfigError::new(path, format!("expected length 1 or {dim}, got {k}"))),
    }
}

fn validate_init(path: &str, init: &InitSpec, (nt, np): (usize, usize)) -> Result<(), ConfigError> {
    let dim = nt + np;
    match init {
        InitSpec::Explicit(points) => {
            if points.is_empty() {
                return Err(ConfigError::new(path, "needs at least one point"));
            }
            for (i, pt) in points.iter().enumerate() {
                check_len(&format!("{path}.explicit[{i}].theta"), nt, pt.theta.len())?;
                check_len(&format!("{path}.explicit[{i}].phi"), np, pt.phi.len())?;
                finite_all(&format!("{path}.explicit[{i}].theta"), &pt.theta)?;
                finite_all(&format!("{path}.explicit[{i}].phi"), &pt.phi)?;
            }
        }
        InitSpec::UniformBox { lo, hi, count } => {
            let (lo, hi) = (broadcast(&format!("{path}.uniform_box.lo"), lo, dim)?, broadcast(&format!("{path}.uniform_box.hi"), hi, dim)?);
            if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                return Err(ConfigError::new(format!("{path}.uniform_box"), "needs finite lo < hi"));
            }
            if *count == 0 {
                return Err(ConfigError::new(format!("{path}.uniform_box.count"), "must be positive"));
            }
        }
        InitSpec::Grid { lo, hi, per_axis } => {
            let lo = broadcast(&format!("{path}.grid.lo"), lo, dim)?;
            let hi = broadcast(&format!("{path}.grid.hi"), hi, dim)?;
            if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
                return Err(ConfigError::new(format!("{path}.grid"), "needs finite lo <= hi"));
            }
            let k = match per_axis.len() {
                1 => vec![per_axis[0]; dim],
                n if n == dim => per_axis.clone(),
                n => return Err(ConfigError::new(format!("{path}.grid.per_axis"), format!("expected length 1 or {dim}, got {n}"))),
            };
            if k.iter().any(|&c| c == 0) {
                return Err(ConfigError::new(format!("{path}.grid.per_axis"), "counts must be positive"));
            }
        }
    }
    Ok(())
}

/// Expands an init spec into concrete points.
pub fn expand_init(init: &InitSpec, (nt, np): (usize, usize), seed: u64) -> Result<Vec<InitPoint>, ConfigError> {
    validate_init("init", init, (nt, np))?;
    let dim = nt + np;
    let split = |v: Vec<f64>| InitPoint { theta: v[..nt].to_vec(), phi: v[nt..].to_vec() };
    Ok(match init {
        InitSpec::Explicit(points) => points.clone(),
        InitSpec::UniformBox { lo, hi, count } => {
            let (lo, hi) = (broadcast("", lo, dim)?, broadcast("", hi, dim)?);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..*count).map(|_| split((0..dim).map(|i| rng.random_range(lo[i]..hi[i])).collect())).collect()
        }
        InitSpec::Grid { lo, hi, per_axis } => {
            let (lo, hi) = (broadcast("", lo, dim)?, broadcast("", hi, dim)?);
            let k: Vec<usize> = if per_axis.len() == 1 { vec![per_axis[0]; dim] } else { per_axis.clone() };
            let axis = |i: usize, j: usize| if k[i] == 1 { lo[i] } else { lo[i] + (hi[i] - lo[i]) * j as f64 / (k[i] - 1) as f64 };
            let total: usize = k.iter().product();
            (0..total)
                .map(|mut flat| {
                    let mut v = vec![0.0; dim];
                    for i in (0..dim).rev() {
                        v[i] = axis(i, flat % k[i]);
                        flat /= k[i];
                    }
                    split(v)
                })
                .collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> String {
        r#"{
            "schema": "hcc/1",
            "name": "t",
            "game": {"payoff": {"kind": "bilinear", "p": 0.5, "q": 0.5}, "operators_f": ["sigmoid"], "operators_g": ["sigmoid"]},
            "flow": {"method": "gda", "dt": 0.01, "t_end": 1.0},
            "init": {"explicit": [{"theta": [1.0], "phi": [-1.0]}]},
            "outputs": {"csv": "a.csv", "summary": "a.json"}
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_round_trips() {
        let cfg = parse_config(&minimal()).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.outputs.record_every, 1);
        let again = parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = minimal().replace("\"dt\": 0.01", "\"dt\": \"x\"");
        let e = parse_config(&bad).unwrap_err();
        assert_eq!(e.path, "flow");
        let bad = minimal().replace("\"phi\": [-1.0]", "\"phi\": [-1.0, 2.0]");
        assert_eq!(parse_config(&bad).unwrap_err().path, "init.explicit[0].phi");
        let bad = minimal().replace("\"sigmoid\"]}", "\"tanh\"]}");
        assert_eq!(parse_config(&bad).unwrap_err().path, "game.operators_g[0]");
        let bad = minimal().replace("hcc/1", "hcc/2");
        assert_eq!(parse_config(&bad).unwrap_err().path, "schema");
        let bad = minimal().replace("\"t_end\": 1.0", "\"t_end\": -1.0");
        assert_eq!(parse_config(&bad).unwrap_err().path, "flow.t_end");
    }

    #[test]
    fn grid_order_and_box_determinism() {
        let g = InitSpec::Grid { lo: vec![-1.0, 0.0], hi: vec![1.0, 1.0], per_axis: vec![3, 2] };
        let pts = expand_init(&g, (1, 1), 0).unwrap();
        let flat: Vec<(f64, f64)> = pts.iter().map(|p| (p.theta[0], p.phi[0])).collect();
        assert_eq!(flat, vec![(-1.0, 0.0), (-1.0, 1.0), (0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
        let b = InitSpec::UniformBox { lo: vec![-1.0], hi: vec![1.0], count: 4 };
        assert_eq!(expand_init(&b, (1, 1), 9).unwrap(), expand_init(&b, (1, 1), 9).unwrap());
        assert_ne!(expand_init(&b, (1, 1), 9).unwrap(), expand_init(&b, (1, 1), 10).unwrap());
    }

    #[test]
    fn seed_override() {
        let mut cfg = parse_config(&minimal()).unwrap();
        apply_seed_override(&mut cfg, Some("42")).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(apply_seed_override(&mut cfg, Some("x")).unwrap_err().path, "HCC_SEED");
    }

    #[test]
    fn empty_sweep_axis_rejected() {
        let text = minimal()
            .replace("\"operators_g\": [\"sigmoid\"]}", "\"operators_g\": [\"sigmoid\"], \"regularization\": {\"lambda\": 0.5, \"center_f\": [0.5], \"center_g\": [0.5]}}")
            .replace("\"summary\": \"a.json\"}", "\"summary\": \"a.json\", \"table\": \"t.csv\"}, \"sweep\": {\"lambda\": []}");
        assert_eq!(parse_config(&text).unwrap_err().path, "sweep.lambda");
    }
}
