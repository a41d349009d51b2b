//! Cross-product parameter sweeps over λ, seeds and initializations.
//!
//! Rows run in parallel on a bounded pool but are reported in axis order, so
//! the table is byte-identical across runs and thread counts. Wall times go
//! to a separate `.timing.csv` next to the table.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{expand_init, ExperimentConfig, InitPoint};
use crate::output::{fmt_f64, resolve, write_atomic, OutputError};
use crate::simulate::run_one;
use crate::summary::RunSummary;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub row: usize,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub init_index: usize,
    pub init: InitPoint,
    pub result: Result<RunSummary, String>,
    pub wall_seconds: f64,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        match &self.result {
            Ok(s) => s.error.is_some(),
            Err(_) => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub table_path: PathBuf,
    pub timing_path: PathBuf,
}

impl SweepOutcome {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }
}

struct Job {
    lambda: Option<f64>,
    seed: u64,
    init_index: usize,
    init: InitPoint,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

fn table_csv(rows: &[SweepRow]) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "lambda", "seed", "init", "theta0", "phi0", "status", "verdict", "fitted_rate", "r_squared", "final_r", "message"])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), fmt_f64);
    for r in rows {
        let mut rec = vec![
            r.row.to_string(),
            opt(r.lambda),
            r.seed.to_string(),
            r.init_index.to_string(),
            join(&r.init.theta),
            join(&r.init.phi),
        ];
        match &r.result {
            Ok(s) => {
                rec.push(if s.error.is_some() { "FAILED" } else { "ok" }.to_string());
                rec.push(s.verdict.clone().unwrap_or_default());
                rec.push(s.fitted_rate.as_ref().map_or(String::new(), |f| match f {
                    crate::summary::FittedRate::Value(v) => fmt_f64(*v),
                    crate::summary::FittedRate::Label(l) => l.clone(),
                }));
                rec.push(opt(s.r_squared));
                rec.push(opt(s.final_r));
                rec.push(s.error.clone().unwrap_or_default());
            }
            Err(msg) => {
                rec.extend(["FAILED".to_string(), String::new(), String::new(), String::new(), String::new(), msg.clone()]);
            }
        }
        w.write_record(rec)?;
    }
    w.into_inner().map_err(|e| OutputError::Malformed(e.to_string()))
}

fn timing_csv(rows: &[SweepRow]) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "wall_seconds"])?;
    for r in rows {
        w.write_record([r.row.to_string(), format!("{:.6}", r.wall_seconds)])?;
    }
    w.into_inner().map_err(|e| OutputError::Malformed(e.to_string()))
}

/// Runs the sweep on `jobs` threads and writes the table.
pub fn sweep(cfg: &ExperimentConfig, out_dir: Option<&Path>, jobs: usize) -> Result<SweepOutcome, CliError> {
    let spec = cfg.sweep.clone().ok_or_else(|| crate::config::ConfigError::new("sweep", "missing sweep block"))?;
    let base = cfg.build_game()?;
    let dims = (base.bank_f().total_param_dim(), base.bank_g().total_param_dim());
    let lambdas: Vec<Option<f64>> = match &spec.lambda {
        Some(l) => l.iter().map(|&x| Some(x)).collect(),
        None => vec![cfg.game.regularization.as_ref().map(|r| r.lambda)],
    };
    let seeds = spec.seeds.clone().unwrap_or_else(|| vec![cfg.seed]);
    let init_spec = spec.init.as_ref().unwrap_or(&cfg.init);
    let mut work = Vec::new();
    for &lambda in &lambdas {
        for &seed in &seeds {
            for (init_index, init) in expand_init(init_spec, dims, seed)?.into_iter().enumerate() {
                work.push(Job { lambda, seed, init_index, init });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::InvalidArgument(format!("cannot start {jobs} worker threads: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        work.par_iter()
            .enumerate()
            .map(|(row, job)| {
                let start = Instant::now();
                let result = cfg
                    .build_game_with_lambda(job.lambda)
                    .map(|game| run_one(cfg, &game, &job.init, job.seed, job.init_index).0)
                    .map_err(|e| e.to_string());
                SweepRow {
                    row,
                    lambda: job.lambda,
                    seed: job.seed,
                    init_index: job.init_index,
                    init: job.init.clone(),
                    result,
                    wall_seconds: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });
    let table_path = resolve(out_dir, cfg.outputs.table.as_deref().expect("validated"));
    let mut timing_name = table_path.file_stem().unwrap_or_default().to_os_string();
    timing_name.push(".timing.csv");
    let timing_path = table_path.with_file_name(timing_name);
    write_atomic(&table_path, &table_csv(&rows)?)?;
    write_atomic(&timing_path, &timing_csv(&rows)?)?;
    Ok(SweepOutcome { rows, table_path, timing_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(axes: &str) -> ExperimentConfig {
        parse_config(&format!(
            r#"{{
            "schema": "hcc/1", "name": "s", "seed": 3,
            "game": {{"payoff": {{"kind": "bilinear", "p": 0.0, "q": 0.0}}, "operators_f": ["identity"], "operators_g": ["identity"],
                      "regularization": {{"lambda": 0.5, "center_f": [0.0], "center_g": [0.0]}}}},
            "flow": {{"method": "gda", "dt": 0.01, "t_end": 10.0}},
            "init": {{"grid": {{"lo": [0.5], "hi": [1.5], "per_axis": [3]}}}},
            "targets": [{{"p": [0.0], "q": [0.0]}}],
            "outputs": {{"csv": "s.csv", "summary": "s.json", "record_every": 10, "table": "s_table.csv"}},
            "sweep": {axes}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn rates_increase_with_lambda() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(r#"{"lambda": [0.25, 0.5, 1.0], "init": {"explicit": [{"theta": [1.0], "phi": [0.5]}]}}"#);
        let out = sweep(&cfg, Some(dir.path()), 2).unwrap();
        assert_eq!(out.rows.len(), 3);
        let rates: Vec<f64> = out.rows.iter().map(|r| r.result.as_ref().unwrap().fitted_rate.as_ref().unwrap().as_f64()).collect();
        assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
        assert!(out.timing_path.ends_with("s_table.timing.csv"));
    }

    #[test]
    fn grid_rows_are_deterministic_across_thread_counts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(r#"{"seeds": [3]}"#);
        let a = sweep(&cfg, Some(dir.path()), 1).unwrap();
        let first = std::fs::read(&a.table_path).unwrap();
        let b = sweep(&cfg, Some(dir.path()), 4).unwrap();
        assert_eq!(b.rows.len(), 9);
        assert_eq!(std::fs::read(&b.table_path).unwrap(), first);
        assert_eq!(b.failed_rows(), 0);
    }
}
