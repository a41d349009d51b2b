//! `gan-solve`: equilibrium and saddle certificates for a discrete GAN instance.

use hcc_core::divergences::FDivergence;
use hcc_core::gan_solutions::{
    certify, maxmin_discriminator, nonrealizable_solve, DiscreteGanInstance, GanKind, GeneratorSet, LinearConstraint, MaxminDiscriminator,
    PgdOptions,
};
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::CliError;

pub const DEFAULT_DEVIATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Gan,
    Fgan,
    Wgan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanInstanceSpec {
    pub kind: KindName,
    pub p_data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<LinearConstraint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_div: Option<FDivergence>,
    #[serde(default = "default_deviations")]
    pub deviations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_deviations() -> usize {
    DEFAULT_DEVIATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub max_primal_violation: f64,
    pub max_dual_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanSolveOutput {
    pub kind: GanKind,
    pub realizable: bool,
    #[serde(rename = "G_star")]
    pub g_star: Vec<f64>,
    /// `null` when no closed form exists (restricted WGAN).
    #[serde(rename = "D_star")]
    pub d_star: Option<Vec<f64>>,
    pub potentials: Option<Vec<f64>>,
    pub value: f64,
    pub divergence: f64,
    pub iterations: usize,
    pub certificates: CertificateReport,
    /// Max-min discriminator for an unrestricted generator.
    pub maxmin: Option<MaxminDiscriminator>,
    pub notes: Vec<String>,
}

pub fn parse_instance(text: &str) -> Result<GanInstanceSpec, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::new(e.path().to_string(), e.inner().to_string()))
}

pub fn solve(spec: &GanInstanceSpec) -> Result<GanSolveOutput, CliError> {
    let kind = match (&spec.kind, spec.f_div) {
        (KindName::Gan, None) => GanKind::Gan,
        (KindName::Wgan, None) => GanKind::Wgan,
        (KindName::Fgan, Some(d)) => GanKind::Fgan(d),
        (KindName::Fgan, None) => return Err(ConfigError::new("f_div", "required for kind fgan").into()),
        (_, Some(_)) => return Err(ConfigError::new("f_div", "only allowed for kind fgan").into()),
    };
    if spec.deviations == 0 {
        return Err(ConfigError::new("deviations", "must be positive").into());
    }
    let set = match &spec.constraints {
        Some(c) if !c.is_empty() => GeneratorSet::Restricted(c.clone()),
        _ => GeneratorSet::FullSimplex,
    };
    let full = matches!(set, GeneratorSet::FullSimplex);
    let inst = DiscreteGanInstance::new(spec.p_data.clone(), spec.metric.clone(), set)?;
    let sol = nonrealizable_solve(&inst, kind, &PgdOptions::default())?;
    let cert = certify(&inst, kind, &sol, spec.deviations, spec.seed)?;
    let mut notes = Vec::new();
    if sol.d_star.is_none() {
        notes.push("D_star has no closed form here; potentials are an optimal Kantorovich potential at G_star".to_string());
    }
    Ok(GanSolveOutput {
        kind,
        realizable: inst.is_realizable(),
        g_star: sol.g_star,
        d_star: sol.d_star,
        potentials: sol.potentials,
        value: sol.value,
        divergence: sol.divergence,
        iterations: sol.iterations,
        certificates: CertificateReport { max_primal_violation: cert.max_primal_violation, max_dual_violation: cert.max_dual_violation },
        maxmin: if full { Some(maxmin_discriminator(kind)?) } else { None },
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constrained_two_point_instance() {
        let spec = parse_instance(r#"{"kind": "gan", "p_data": [0.6, 0.4], "constraints": [{"a": [1.0, 0.0], "b": 0.3}]}"#).unwrap();
        let out = solve(&spec).unwrap();
        assert!(!out.realizable);
        assert!((out.g_star[0] - 0.3).abs() < 1e-6);
        assert!(out.certificates.max_primal_violation <= 1e-4 && out.certificates.max_dual_violation <= 1e-4);
        let json = serde_json::to_value(&out).unwrap();
        assert!(json.get("G_star").is_some() && json.get("D_star").is_some());
        assert!(json["maxmin"].is_null());
    }

    #[test]
    fn realizable_fgan_reports_maxmin() {
        let spec = parse_instance(r#"{"kind": "fgan", "f_div": "kl", "p_data": [0.2, 0.8]}"#).unwrap();
        let out = solve(&spec).unwrap();
        assert!(out.realizable);
        assert_eq!(out.g_star, vec![0.2, 0.8]);
        assert_eq!(out.maxmin.unwrap().constant, Some(1.0));
    }

    #[test]
    fn bad_instances() {
        let spec = parse_instance(r#"{"kind": "fgan", "p_data": [0.2, 0.8]}"#).unwrap();
        assert!(matches!(solve(&spec), Err(CliError::Config(e)) if e.path == "f_div"));
        assert_eq!(parse_instance(r#"{"kind": "gan", "p_data": "x"}"#).unwrap_err().path, "p_data");
        let spec = parse_instance(r#"{"kind": "wgan", "p_data": [0.2, 0.8]}"#).unwrap();
        assert!(solve(&spec).is_err());
    }
}
