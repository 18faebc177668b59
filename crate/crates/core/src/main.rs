#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use sarmmv::config::{preset_text, ExperimentConfig, PRESETS};
use sarmmv::pipeline::{coherence_reports, run_experiment, RunOptions};
use sarmmv::segmentation::regime_report;
use sarmmv::Error;

/// Direction and frequency dependent SAR imaging via MMV sparse recovery.
#[derive(Parser)]
#[command(name = "sarmmv", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one or more experiments. A config is a TOML path or `preset:<name>`.
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Continue even if the regime check fails.
        #[arg(long)]
        force: bool,
        /// Experiments run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the reference matrix and MMV problem.
        #[arg(long)]
        dump_model: bool,
        /// Run directory (single config only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the regime diagnostics.
    Regime { config: String },
    /// Print column and row coherence summaries for subset (0, 0).
    Coherence {
        config: String,
        /// Write the pair tables as CSV into this directory.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-render the figures of a run directory.
    Plot { run_dir: PathBuf },
    /// Print a preset config, or list presets.
    Preset { name: Option<String> },
}

fn load(spec: &str) -> Result<ExperimentConfig, Error> {
    let text = match spec.strip_prefix("preset:") {
        Some(name) => preset_text(name).ok_or_else(|| Error::Config(format!("unknown preset {name}")))?.to_string(),
        None => std::fs::read_to_string(Path::new(spec)).map_err(|e| Error::Config(format!("{spec}: {e}")))?,
    };
    let cfg = ExperimentConfig::from_toml(&text)?;
    // Values the builder rejects are configuration errors too.
    cfg.build().map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(format!("{spec}: {other}")),
    })?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::RegimeFail(_) => 3,
        Error::Diverged { .. } => 4,
        _ => 1,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { configs, force, jobs, seed, dump_model, out } => {
            if out.is_some() && configs.len() > 1 {
                return fail(Error::Config("--out needs a single config".into()));
            }
            let cfgs = match configs.iter().map(|c| load(c)).collect::<Result<Vec<_>, _>>() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let opts = RunOptions { force, seed, dump_model, out_dir: out };
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
                Ok(p) => p,
                Err(e) => return fail(Error::Config(e.to_string())),
            };
            let results: Vec<_> = pool.install(|| cfgs.par_iter().map(|c| (c, run_experiment(c, &opts))).collect());
            let mut code = 0u8;
            for (cfg, r) in results {
                match r {
                    Ok(m) => {
                        let s = &m.score;
                        println!(
                            "{}: iterations {} converged {} precision {:.3} recall {:.3} rel_err {:.3e} migration_hits {:.3}",
                            m.name, m.solver.iterations, m.solver.converged, s.precision, s.recall, s.relative_error, s.migration_hit_rate
                        );
                        for w in &m.warnings {
                            eprintln!("{}: warning: {w}", m.name);
                        }
                    }
                    Err(e) => {
                        eprintln!("{}: error: {e}", cfg.name);
                        code = code.max(exit_code(&e));
                    }
                }
            }
            ExitCode::from(code)
        }
        Cmd::Regime { config } => {
            let setup = match load(&config).and_then(|c| c.build()) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let r = regime_report(&setup.traj, &setup.grid, &setup.seg, &setup.pulse, &setup.thresholds);
            print!("{}", r.to_text());
            if r.failures().is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Cmd::Coherence { config, csv } => {
            let res = load(&config).and_then(|c| c.build()).and_then(|s| coherence_reports(&s));
            let (col, row) = match res {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            println!("column_max_offdiag = {:.6}", col.max_column_offdiag.unwrap_or(0.0));
            println!("column_adjacent_max = {:.6}", col.adjacent_max.unwrap_or(0.0));
            println!("column_fine_grid = {}", col.fine_grid());
            println!("column_max_sinc_error = {:.6}", col.max_abs_error);
            println!("column_invalid_pairs = {}", col.n_invalid);
            println!("row_max_offdiag = {:.6}", row.max_row_offdiag.unwrap_or(0.0));
            println!("row_max_sinc_error = {:.6}", row.max_abs_error);
            println!("row_invalid_pairs = {}", row.n_invalid);
            if let Some(dir) = csv {
                let w = std::fs::create_dir_all(&dir)
                    .and_then(|_| std::fs::write(dir.join("coherence_columns.csv"), col.to_csv()))
                    .and_then(|_| std::fs::write(dir.join("coherence_rows.csv"), row.to_csv()));
                if let Err(e) = w {
                    return fail(e.into());
                }
            }
            ExitCode::SUCCESS
        }
        Cmd::Plot { run_dir } => match sarmmv::plot::emit_plots(&run_dir) {
            Ok(names) => {
                for n in names {
                    println!("{}", run_dir.join(n).display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Cmd::Preset { name } => match name {
            None => {
                for (n, _) in PRESETS {
                    println!("{n}");
                }
                ExitCode::SUCCESS
            }
            Some(n) => match preset_text(&n) {
                Some(t) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                None => fail(Error::Config(format!("unknown preset {n}"))),
            },
        },
    }
}
