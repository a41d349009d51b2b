use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hcc_cli::output::write_atomic;
use hcc_cli::{audit, gan, load_config, presets, read_text, simulate, sweep, CliError};
use hcc_core::{AuditOptions, ConvergenceOptions};

/// Simulate, sweep and audit learning dynamics in hidden convex-concave games.
#[derive(Debug, Parser)]
#[command(name = "hcc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a config (file path or preset name) and write its CSV and summary.
    Simulate {
        config: String,
        /// Directory that relative output paths are resolved against.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the cross product of a config's sweep axes.
    Sweep {
        config: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Solve a discrete GAN instance and certify the saddle point.
    GanSolve {
        instance: PathBuf,
        /// Write the solution here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verdict, rate and H audit of an existing trajectory CSV.
    Audit {
        csv: PathBuf,
        /// Solution as P,Q with colon-separated entries, e.g. 0.5:0.5,0.5:0.5.
        #[arg(long, required = true)]
        target: Vec<String>,
        /// Config whose operators are used to recompute H.
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets, or export them as files.
    Presets {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let seed_env = std::env::var("HCC_SEED").ok();
    let seed_env = seed_env.as_deref();
    match cli.command {
        Command::Simulate { config, out_dir } => {
            let cfg = load_config(&config, seed_env)?;
            let out = simulate::simulate(&cfg, out_dir.as_deref())?;
            for path in &out.csv_paths {
                println!("wrote {}", path.display());
            }
            println!("wrote {}", out.summary_path.display());
            for r in out.summary.runs.iter().filter(|r| r.error.is_some()) {
                eprintln!("run {} failed: {}", r.index, r.error.as_deref().unwrap_or_default());
            }
            Ok(if out.summary.failed_runs > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Sweep { config, jobs, out_dir } => {
            if jobs == 0 {
                return Err(CliError::InvalidArgument("--jobs must be at least 1".into()));
            }
            let cfg = load_config(&config, seed_env)?;
            let out = sweep::sweep(&cfg, out_dir.as_deref(), jobs)?;
            println!("wrote {} ({} rows)", out.table_path.display(), out.rows.len());
            println!("wrote {}", out.timing_path.display());
            let failed = out.failed_rows();
            if failed > 0 {
                eprintln!("{failed} of {} rows FAILED", out.rows.len());
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::GanSolve { instance, out } => {
            let spec = gan::parse_instance(&read_text(&instance)?)?;
            let sol = gan::solve(&spec)?;
            emit(&pretty(&sol), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { csv, target, config, tol, window, out } => {
            let targets = target.iter().map(|t| audit::parse_target(t)).collect::<Result<Vec<_>, _>>()?;
            let cfg = config.map(|c| load_config(&c, None)).transpose()?;
            let mut conv = cfg.as_ref().map_or_else(ConvergenceOptions::default, |c| c.diagnostics.convergence());
            conv.tol = tol.unwrap_or(conv.tol);
            conv.window = window.unwrap_or(conv.window);
            let audit_opts = cfg.as_ref().map_or_else(AuditOptions::default, |c| c.diagnostics.audit());
            let report = audit::audit(&csv, &targets, cfg.as_ref(), &conv, &audit_opts)?;
            emit(&pretty(&report), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { write } => {
            match write {
                Some(dir) => {
                    for (name, text) in presets::PRESETS {
                        let path = dir.join(format!("{name}.json"));
                        write_atomic(&path, text.as_bytes())?;
                        println!("wrote {}", path.display());
                    }
                }
                None => presets::names().for_each(|n| println!("{n}")),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
