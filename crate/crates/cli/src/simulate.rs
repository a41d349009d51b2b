//! Runs one config: every init through the configured flow, then the
//! diagnostics (`r`, `H`, audit, verdict, rate) and the output files.

use std::path::{Path, PathBuf};

use hcc_core::lyapunov::{audit_series, default_fit_interval};
use hcc_core::operators::build_bank_paths;
use hcc_core::{
    detect_convergence, fit_rate, gda_flow, hgd_mod_flow, sgda_discrete, transformed_flow, ConvergenceVerdict, FlowFailure, HccGame,
    LyapunovContext, LyapunovError, PathSettings, SgdaOptions, Trajectory, WganSampler,
};

use crate::config::{ExperimentConfig, FlowSpec, InitPoint, PayoffSpec};
use crate::output::{indexed_path, resolve, trajectory_csv, write_atomic};
use crate::summary::{FittedRate, RunSummary, Summary};
use crate::CliError;

/// Integrates one init. A failed flow yields its partial trajectory and the error text.
pub fn integrate(cfg: &ExperimentConfig, game: &HccGame, init: &InitPoint, seed: u64) -> (Trajectory, Option<String>) {
    let result: Result<Trajectory, FlowFailure> = match cfg.flow {
        FlowSpec::Gda { .. } => gda_flow(game, &init.theta, &init.phi, &cfg.flow_options().unwrap()),
        FlowSpec::Transformed { .. } => {
            let settings = PathSettings::default();
            let paths = build_bank_paths(game.bank_f(), &init.theta, &settings)
                .and_then(|pf| build_bank_paths(game.bank_g(), &init.phi, &settings).map(|pg| (pf, pg)));
            match paths {
                Ok((pf, pg)) => {
                    let (f0, g0) = (game.bank_f().eval(&init.theta), game.bank_g().eval(&init.phi));
                    transformed_flow(game, &pf, &pg, &f0, &g0, &cfg.flow_options().unwrap())
                }
                Err(e) => return (Trajectory::default(), Some(e.to_string())),
            }
        }
        FlowSpec::HgdMod { .. } => {
            let PayoffSpec::Bilinear { p, q } = cfg.game.payoff else { unreachable!("validated") };
            let (f_op, g_op) = (game.bank_f().operator(0), game.bank_g().operator(0));
            hgd_mod_flow(f_op, g_op, p, q, &init.theta, &init.phi, &cfg.flow_options().unwrap())
        }
        FlowSpec::Sgda { steps, lr, batch } => {
            let PayoffSpec::WganGaussian { alpha_star_sq, regularized } = cfg.game.payoff else { unreachable!("validated") };
            let sampler = WganSampler { alpha_star_sq, batch, regularized };
            let opts = SgdaOptions { steps, lr, seed, record_every: cfg.outputs.record_every };
            sgda_discrete(game, &sampler, &init.theta, &init.phi, &opts)
        }
    };
    match result {
        Ok(t) => (t, None),
        Err(f) => (*f.partial, Some(f.error.to_string())),
    }
}

/// Fills `r` and `H` into `traj` and summarizes the run.
pub fn diagnose(cfg: &ExperimentConfig, game: &HccGame, init: &InitPoint, traj: &mut Trajectory, index: usize) -> RunSummary {
    let last = |rows: &[Vec<f64>]| rows.last().cloned().unwrap_or_default();
    let mut s = RunSummary {
        index,
        csv: None,
        rows: traj.len(),
        theta0: init.theta.clone(),
        phi0: init.phi.clone(),
        final_theta: last(&traj.theta),
        final_phi: last(&traj.phi),
        final_f: last(&traj.outputs_f),
        final_g: last(&traj.outputs_g),
        monotone_h: None,
        constant_h: None,
        max_h_increment: None,
        h_initial: None,
        h_final: None,
        verdict: None,
        converged_to: None,
        fitted_rate: None,
        r_squared: None,
        final_r: None,
        audit_report: None,
        fit_report: None,
        notes: Vec::new(),
        error: None,
    };
    let Some(target) = cfg.targets.first() else {
        return s;
    };
    if traj.is_empty() {
        return s;
    }
    if let Err(e) = traj.compute_r(&target.p, &target.q) {
        s.notes.push(format!("r unavailable: {e}"));
        return s;
    }
    s.final_r = traj.diagnostics.r.as_ref().and_then(|r| r.last().copied());

    let ctx = LyapunovContext::for_initialization(game, &init.theta, &init.phi, target.p.clone(), target.q.clone(), &PathSettings::default());
    match ctx.and_then(|c| c.h_series(traj)) {
        Ok(h) => {
            let rep = audit_series(h.clone(), &cfg.diagnostics.audit());
            s.monotone_h = Some(rep.monotone);
            s.constant_h = Some(rep.constant);
            s.max_h_increment = Some(rep.max_increment);
            s.h_initial = h.first().copied();
            s.h_final = h.last().copied();
            s.audit_report = Some(rep.to_string());
            traj.diagnostics.h = Some(h);
        }
        Err(e) => s.notes.push(format!("H unavailable: {e}")),
    }

    let solutions: Vec<(Vec<f64>, Vec<f64>)> = cfg.targets.iter().map(|t| (t.p.clone(), t.q.clone())).collect();
    let mut fit_target = 0;
    match detect_convergence(traj, &solutions, &cfg.diagnostics.convergence()) {
        Ok(v) => {
            if let ConvergenceVerdict::Converged(i) = v {
                s.converged_to = Some(i);
                fit_target = i;
            }
            s.verdict = Some(v.label().to_string());
        }
        Err(e) => s.notes.push(format!("verdict unavailable: {e}")),
    }

    let interval = cfg.diagnostics.fit_interval.map_or_else(|| default_fit_interval(traj), |[lo, hi]| (lo, hi));
    let (p, q) = &solutions[fit_target];
    match fit_rate(traj, p, q, interval) {
        Ok(fit) => {
            s.fitted_rate = Some(FittedRate::Value(fit.rate));
            s.r_squared = fit.r_squared;
            s.fit_report = Some(fit.to_string());
        }
        Err(LyapunovError::NonPositiveR { t, .. }) => {
            s.fitted_rate = Some(FittedRate::infinite());
            s.notes.push(format!("r reached zero at t = {t}"));
        }
        Err(e) => s.notes.push(format!("rate unavailable: {e}")),
    }
    s
}

/// One init end to end, without writing anything.
pub fn run_one(cfg: &ExperimentConfig, game: &HccGame, init: &InitPoint, seed: u64, index: usize) -> (RunSummary, Trajectory) {
    let (mut traj, err) = integrate(cfg, game, init, seed);
    let mut s = diagnose(cfg, game, init, &mut traj, index);
    s.error = err;
    (s, traj)
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub summary: Summary,
    pub summary_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
}

/// Runs every init, writes one CSV per init and the summary JSON.
///
/// Failed runs still write their partial trajectory; check
/// `summary.failed_runs` for the exit status.
pub fn simulate(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<SimulateOutcome, CliError> {
    let game = cfg.build_game()?;
    let inits = cfg.init_points(cfg.seed)?;
    let mut runs = Vec::with_capacity(inits.len());
    let mut csv_paths = Vec::with_capacity(inits.len());
    for (k, init) in inits.iter().enumerate() {
        let (mut s, traj) = run_one(cfg, &game, init, cfg.seed, k);
        let rel = if inits.len() == 1 { PathBuf::from(&cfg.outputs.csv) } else { indexed_path(Path::new(&cfg.outputs.csv), k) };
        let path = resolve(out_dir, &rel.to_string_lossy());
        write_atomic(&path, &trajectory_csv(&traj)?)?;
        // As written in the config, so summaries do not depend on --out-dir.
        s.csv = Some(rel.to_string_lossy().into_owned());
        csv_paths.push(path);
        runs.push(s);
    }
    let lambda = cfg.game.regularization.as_ref().map(|r| r.lambda);
    let summary = Summary::from_runs(&cfg.name, cfg.seed, cfg.flow.method(), lambda, runs);
    let summary_path = resolve(out_dir, &cfg.outputs.summary);
    write_atomic(&summary_path, summary.to_json().map_err(CliError::Summary)?.as_bytes())?;
    Ok(SimulateOutcome { summary, summary_path, csv_paths })
}
