//! `audit`: verdict, rate and `H` audit for a trajectory CSV.
//!
//! `H` is recomputed from the first row's parameters when a config supplies
//! the operators; otherwise the CSV's own `H` column is audited as is.

use std::path::Path;

use hcc_core::lyapunov::{audit_series, default_fit_interval};
use hcc_core::{
    detect_convergence, fit_rate, AuditOptions, ConvergenceOptions, ConvergenceVerdict, LyapunovContext, LyapunovError, PathSettings,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::read_trajectory_csv;
use crate::summary::FittedRate;
use crate::CliError;

/// Parses `P,Q`, each a `:`-separated vector, e.g. `0.2:0.8,0.5:0.5`.
pub fn parse_target(text: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = || CliError::InvalidArgument(format!("target {text:?} is not of the form P,Q with P and Q colon-separated vectors"));
    let (p, q) = text.split_once(',').ok_or_else(bad)?;
    let vec = |s: &str| s.split(':').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<f64>, _>>();
    Ok((vec(p)?, vec(q)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutput {
    pub rows: usize,
    pub verdict: Option<String>,
    pub converged_to: Option<usize>,
    pub fitted_rate: Option<FittedRate>,
    pub r_squared: Option<f64>,
    pub final_r: f64,
    /// `"recomputed"`, `"csv"` or `null`.
    #[serde(rename = "H_source")]
    pub h_source: Option<String>,
    #[serde(rename = "monotone_H")]
    pub monotone_h: Option<bool>,
    #[serde(rename = "constant_H")]
    pub constant_h: Option<bool>,
    #[serde(rename = "max_H_increment")]
    pub max_h_increment: Option<f64>,
    pub notes: Vec<String>,
}

pub fn audit(
    csv: &Path,
    targets: &[(Vec<f64>, Vec<f64>)],
    config: Option<&ExperimentConfig>,
    conv: &ConvergenceOptions,
    audit_opts: &AuditOptions,
) -> Result<AuditOutput, CliError> {
    let (p, q) = targets.first().ok_or_else(|| CliError::InvalidArgument("at least one --target is required".into()))?;
    let traj = read_trajectory_csv(csv)?;
    if traj.is_empty() {
        return Err(CliError::InvalidArgument(format!("{} has no rows", csv.display())));
    }
    let r = hcc_core::distance_r(&traj, p, q).map_err(|e| CliError::InvalidArgument(e.to_string()))?;
    let mut notes = Vec::new();

    let h = match config {
        Some(cfg) => {
            if !traj.has_parameters() {
                return Err(CliError::InvalidArgument("recomputing H needs parameter columns in the CSV".into()));
            }
            let game = cfg.build_game()?;
            let ctx = LyapunovContext::for_initialization(&game, &traj.theta[0], &traj.phi[0], p.clone(), q.clone(), &PathSettings::default())?;
            Some(("recomputed", ctx.h_series(&traj)?))
        }
        None => traj.diagnostics.h.clone().map(|h| ("csv", h)),
    };
    let report = h.as_ref().map(|(_, h)| audit_series(h.clone(), audit_opts));

    let (verdict, converged_to, fit_idx) = match detect_convergence(&traj, targets, conv) {
        Ok(ConvergenceVerdict::Converged(i)) => (Some("converged".to_string()), Some(i), i),
        Ok(v) => (Some(v.label().to_string()), None, 0),
        Err(e) => {
            notes.push(format!("verdict unavailable: {e}"));
            (None, None, 0)
        }
    };
    let (fp, fq) = &targets[fit_idx];
    let (fitted_rate, r_squared) = match fit_rate(&traj, fp, fq, default_fit_interval(&traj)) {
        Ok(fit) => (Some(FittedRate::Value(fit.rate)), fit.r_squared),
        Err(LyapunovError::NonPositiveR { .. }) => (Some(FittedRate::infinite()), None),
        Err(e) => {
            notes.push(format!("rate unavailable: {e}"));
            (None, None)
        }
    };
    Ok(AuditOutput {
        rows: traj.len(),
        verdict,
        converged_to,
        fitted_rate,
        r_squared,
        final_r: *r.last().unwrap(),
        h_source: h.as_ref().map(|(s, _)| s.to_string()),
        monotone_h: report.as_ref().map(|a| a.monotone),
        constant_h: report.as_ref().map(|a| a.constant),
        max_h_increment: report.as_ref().map(|a| a.max_increment),
        notes,
    })
}
