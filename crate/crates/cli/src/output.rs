//! Atomic file writes and the trajectory CSV format.
//!
//! Header: `t, theta_*, phi_*, f_*, g_*, L, r, H`, with the parameter columns
//! omitted for output-space runs and empty fields for absent diagnostics.
//! Numbers use Rust's shortest round-trip formatting, which is independent of
//! the process locale.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hcc_core::Trajectory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed trajectory CSV: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Writes via a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let err = |source| OutputError::Write { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn header(traj: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let width = |rows: &[Vec<f64>]| rows.first().map_or(0, Vec::len);
    if traj.has_parameters() {
        h.extend((0..width(&traj.theta)).map(|i| format!("theta_{i}")));
        h.extend((0..width(&traj.phi)).map(|i| format!("phi_{i}")));
    }
    h.extend((0..width(&traj.outputs_f)).map(|i| format!("f_{i}")));
    h.extend((0..width(&traj.outputs_g)).map(|i| format!("g_{i}")));
    h.extend(["L", "r", "H"].map(String::from));
    h
}

/// Renders a trajectory as CSV text.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(traj))?;
    let opt = |v: &Option<Vec<f64>>, k: usize| v.as_ref().map_or(String::new(), |s| fmt_f64(s[k]));
    for k in 0..traj.len() {
        let mut row = vec![fmt_f64(traj.times[k])];
        if traj.has_parameters() {
            row.extend(traj.theta[k].iter().chain(&traj.phi[k]).map(|&x| fmt_f64(x)));
        }
        row.extend(traj.outputs_f[k].iter().chain(&traj.outputs_g[k]).map(|&x| fmt_f64(x)));
        row.push(traj.diagnostics.l.get(k).map_or(String::new(), |&x| fmt_f64(x)));
        row.push(opt(&traj.diagnostics.r, k));
        row.push(opt(&traj.diagnostics.h, k));
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| OutputError::Malformed(e.to_string()))
}

/// Parses a trajectory CSV written by [`trajectory_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory, OutputError> {
    let text = fs::read_to_string(path).map_err(|source| OutputError::Read { path: path.to_path_buf(), source })?;
    parse_trajectory_csv(&text)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory, OutputError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let cols = |prefix: &str| -> Vec<usize> {
        head.iter().enumerate().filter(|(_, h)| h.strip_prefix(prefix).is_some_and(|r| r.parse::<usize>().is_ok())).map(|(i, _)| i).collect()
    };
    let (ct, cp, cf, cg) = (cols("theta_"), cols("phi_"), cols("f_"), cols("g_"));
    let find = |name: &str| head.iter().position(|h| h == name).ok_or_else(|| OutputError::Malformed(format!("missing column {name}")));
    let (ci_t, ci_l, ci_r, ci_h) = (find("t")?, find("L")?, find("r")?, find("H")?);
    if cf.is_empty() || cg.is_empty() {
        return Err(OutputError::Malformed("needs f_* and g_* columns".into()));
    }
    let mut traj = Trajectory::default();
    let (mut r, mut h) = (Vec::new(), Vec::new());
    let (mut any_r, mut any_h) = (false, false);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, OutputError> {
            rec.get(i)
                .ok_or_else(|| OutputError::Malformed(format!("row {} is short", line + 1)))?
                .parse::<f64>()
                .map_err(|_| OutputError::Malformed(format!("row {} column {} is not a number", line + 1, head[i])))
        };
        let maybe = |i: usize, seen: &mut bool| -> Result<f64, OutputError> {
            if rec.get(i).is_some_and(|s| !s.is_empty()) {
                *seen = true;
                num(i)
            } else {
                Ok(f64::NAN)
            }
        };
        let many = |idx: &[usize]| idx.iter().map(|&i| num(i)).collect::<Result<Vec<f64>, _>>();
        traj.times.push(num(ci_t)?);
        if !ct.is_empty() || !cp.is_empty() {
            traj.theta.push(many(&ct)?);
            traj.phi.push(many(&cp)?);
        }
        traj.outputs_f.push(many(&cf)?);
        traj.outputs_g.push(many(&cg)?);
        traj.diagnostics.l.push(maybe(ci_l, &mut false)?);
        r.push(maybe(ci_r, &mut any_r)?);
        h.push(maybe(ci_h, &mut any_h)?);
    }
    if any_r {
        if r.iter().any(|x| x.is_nan()) {
            return Err(OutputError::Malformed("column r is partially empty".into()));
        }
        traj.diagnostics.r = Some(r);
    }
    if any_h {
        if h.iter().any(|x| x.is_nan()) {
            return Err(OutputError::Malformed("column H is partially empty".into()));
        }
        traj.diagnostics.h = Some(h);
    }
    Ok(traj)
}

/// `name.csv` → `name_init3.csv`.
pub fn indexed_path(path: &Path, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_init{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}_init{index}"),
    };
    path.with_file_name(name)
}

/// Resolves a relative output path against an optional output directory.
pub fn resolve(out_dir: Option<&Path>, path: &str) -> PathBuf {
    let p = Path::new(path);
    match out_dir {
        Some(d) if p.is_relative() => d.join(p),
        _ => p.to_path_buf(),
    }
}
