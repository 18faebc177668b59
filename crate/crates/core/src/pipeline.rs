//! End-to-end experiment: simulate, segment, build the MMV problem, solve,
//! demodulate, score, migrate, and write the run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{column_coherence, peak_map, row_coherence, score, CoherenceReport, ScoreReport};
use crate::config::{ExperimentConfig, Setup};
use crate::io;
use crate::model::{assemble_subset, build_mmv, demodulate, MmvProblem, ReflectivityField};
use crate::scene::{ground_truth_matrix, GroundTruth};
use crate::segmentation::{regime_report, RegimeReport};
use crate::simulator::{add_noise, simulate, DataCube};
use crate::solver::{gelma_mmv, migrate, SolveResult};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    pub seed: Option<u64>,
    pub dump_model: bool,
    pub out_dir: Option<PathBuf>,
}

/// In-memory products of one run.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub regime: RegimeReport,
    pub data: DataCube,
    pub truth: GroundTruth,
    pub problem: MmvProblem,
    pub solve: SolveResult,
    pub field: ReflectivityField,
    pub migration: Array1<C64>,
    pub score: ScoreReport,
    pub warnings: Vec<String>,
    pub timings: Vec<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Run the numerical pipeline without touching the disk.
pub fn run_setup(setup: &Setup, noise_level: f64, seed: u64, force: bool) -> Result<RunOutputs> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<Timing>| {
        timings.push(Timing { stage: name.into(), seconds: clock.elapsed().as_secs_f64() });
        clock = Instant::now();
    };
    let Setup { traj, pulse, grid, seg, scene, .. } = setup;
    let regime = regime_report(traj, grid, seg, pulse, &setup.thresholds);
    let fails = regime.failures();
    if !fails.is_empty() && !force {
        let names: Vec<String> = fails.iter().map(|d| format!("{} = {:.4}", d.name, d.value)).collect();
        return Err(Error::RegimeFail(names.join(", ")));
    }
    let mut warnings: Vec<String> =
        regime.warnings().iter().map(|d| format!("regime: {} = {:.4} ({})", d.name, d.value, d.status.as_str())).collect();
    if !fails.is_empty() {
        warnings.extend(fails.iter().map(|d| format!("regime failure forced: {} = {:.4}", d.name, d.value)));
    }
    lap("regime", &mut timings);

    let clean = simulate(scene, grid, traj, pulse, seg, setup.data_model, setup.profile)?;
    let data = add_noise(&clean, noise_level, seed)?;
    warnings.extend(data.warnings.iter().cloned());
    let truth = ground_truth_matrix(scene, grid, seg.n_alpha, seg.n_beta)?;
    lap("simulate", &mut timings);

    let problem = build_mmv(&data, traj, grid, seg, pulse, setup.doppler)?;
    lap("build_mmv", &mut timings);

    let solve = gelma_mmv(&problem, &setup.solver)?;
    if !solve.converged {
        warnings.push(format!("solver stopped at max_iters = {} before converging", solve.iterations));
    }
    let field = demodulate(&solve.x, seg, grid, traj, setup.doppler, setup.solver.support_threshold)?;
    lap("solve", &mut timings);

    let migration = migrate(&data, traj, grid, pulse)?;
    lap("migrate", &mut timings);

    let score = score(&field, &truth, setup.solver.support_threshold)?
        .with_profiles(&field.values, &truth, seg.n_alpha, seg.n_beta)
        .with_migration(&migration, grid, &truth);
    lap("score", &mut timings);
    Ok(RunOutputs { regime, data, truth, problem, solve, field, migration, score, warnings, timings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEntry {
    pub name: String,
    pub value: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSummary {
    pub column_max_offdiag: f64,
    pub column_max_abs_error: f64,
    pub column_adjacent_max: f64,
    pub fine_grid: bool,
    pub column_invalid_pairs: usize,
    pub row_max_offdiag: f64,
    pub row_max_abs_error: f64,
}

impl CoherenceSummary {
    pub fn from_reports(col: &CoherenceReport, row: &CoherenceReport) -> Self {
        CoherenceSummary {
            column_max_offdiag: col.max_column_offdiag.unwrap_or(0.0),
            column_max_abs_error: col.max_abs_error,
            column_adjacent_max: col.adjacent_max.unwrap_or(0.0),
            fine_grid: col.fine_grid(),
            column_invalid_pairs: col.n_invalid,
            row_max_offdiag: row.max_row_offdiag.unwrap_or(0.0),
            row_max_abs_error: row.max_abs_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub precision: f64,
    pub recall: f64,
    pub estimated_support: Vec<usize>,
    pub true_support: Vec<usize>,
    pub relative_error: f64,
    pub relative_error_support: f64,
    pub max_entry_error: f64,
    pub migration_hit_rate: f64,
    pub direction_rmse: Vec<f64>,
    pub frequency_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub relative_residual: f64,
    pub step: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Grid and segmentation shape, read back by the plotter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub n_range: usize,
    pub n_cross: usize,
    pub step_range_m: f64,
    pub step_cross_m: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub true_support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub name: String,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub solver: SolverSummary,
    pub score: ScoreSummary,
    pub coherence: CoherenceSummary,
    pub regime: Vec<RegimeEntry>,
    pub files: Vec<FileEntry>,
    pub timings: Vec<Timing>,
    pub config: ExperimentConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn column(v: &Array1<C64>) -> Array2<C64> {
    v.clone().insert_axis(ndarray::Axis(1))
}

/// Coherence of subset `(0, 0)`.
pub fn coherence_reports(setup: &Setup) -> Result<(CoherenceReport, CoherenceReport)> {
    let a = assemble_subset(&setup.traj, &setup.grid, &setup.seg, &setup.pulse, 0, 0)?;
    Ok((
        column_coherence(&a, &setup.grid, &setup.seg, 0, 0)?,
        row_coherence(&a, &setup.grid, &setup.seg, 0, 0)?,
    ))
}

pub fn run_directory(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| cfg.outputs.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
}

/// Full experiment with all artifacts written under the run directory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let start = Instant::now();
    let setup = cfg.build()?;
    let seed = opts.seed.unwrap_or(cfg.noise.seed);
    let out = run_setup(&setup, cfg.noise.level, seed, opts.force)?;
    let t = Instant::now();
    let (col, row) = coherence_reports(&setup)?;
    let mut timings = out.timings.clone();
    timings.push(Timing { stage: "coherence".into(), seconds: t.elapsed().as_secs_f64() });

    let dir = run_directory(cfg, opts);
    fs::create_dir_all(&dir)?;
    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("data.sarc".into(), io::encode_cube(&out.data)),
        ("truth.sarc".into(), io::encode_matrix(&out.truth.values)),
        ("estimate.sarc".into(), io::encode_matrix(&out.field.values)),
        ("x.sarc".into(), io::encode_matrix(&out.solve.x)),
        ("migration.sarc".into(), io::encode_matrix(&column(&out.migration))),
        ("history.csv".into(), io::history_csv(&out.solve).into_bytes()),
        ("regime.txt".into(), out.regime.to_text().into_bytes()),
        ("coherence_columns.csv".into(), col.to_csv().into_bytes()),
        ("coherence_rows.csv".into(), row.to_csv().into_bytes()),
        ("peak_truth.csv".into(), io::vector_csv("peak", &peak_map(&out.truth.values)).into_bytes()),
        ("peak_estimate.csv".into(), io::vector_csv("peak", &peak_map(&out.field.values)).into_bytes()),
    ];
    let layout = Layout {
        n_range: setup.grid.n_range,
        n_cross: setup.grid.n_cross,
        step_range_m: setup.grid.step_range,
        step_cross_m: setup.grid.step_cross,
        n_alpha: setup.seg.n_alpha,
        n_beta: setup.seg.n_beta,
        true_support: out.truth.support.clone(),
    };
    files.push(("layout.toml".into(), toml::to_string(&layout).expect("layout serializes").into_bytes()));
    if opts.dump_model || cfg.outputs.dump_model {
        files.push(("reference.sarc".into(), io::encode_model(&out.problem.a_ref)));
        files.push(("mmv.sarc".into(), io::encode_mmv(&out.problem)));
    }
    let mut entries = Vec::new();
    for (name, bytes) in &files {
        io::write_bytes(&dir.join(name), bytes)?;
        entries.push(FileEntry { path: name.clone(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
    }
    if cfg.outputs.plots {
        for (name, svg) in crate::plot::render(&dir)? {
            let bytes = svg.into_bytes();
            io::write_bytes(&dir.join(&name), &bytes)?;
            entries.push(FileEntry { path: name, bytes: bytes.len(), sha256: sha256_hex(&bytes) });
        }
    }

    let s = &out.score;
    let final_residual = out.solve.residual_history.last().copied().unwrap_or(0.0);
    let norm_d = out.problem.d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    timings.push(Timing { stage: "total".into(), seconds: start.elapsed().as_secs_f64() });
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        name: cfg.name.clone(),
        seed,
        warnings: out.warnings.clone(),
        solver: SolverSummary {
            iterations: out.solve.iterations,
            converged: out.solve.converged,
            final_residual,
            relative_residual: if norm_d > 0.0 { final_residual / norm_d } else { 0.0 },
            step: out.solve.step,
            threshold: out.solve.threshold,
        },
        score: ScoreSummary {
            precision: s.precision,
            recall: s.recall,
            estimated_support: s.estimated_support.clone(),
            true_support: out.truth.support.clone(),
            relative_error: s.relative_error,
            relative_error_support: s.relative_error_support,
            max_entry_error: s.max_entry_error,
            migration_hit_rate: s.migration_hit_rate.unwrap_or(0.0),
            direction_rmse: s.profiles.iter().map(|p| p.direction_rmse).collect(),
            frequency_rmse: s.profiles.iter().map(|p| p.frequency_rmse).collect(),
        },
        coherence: CoherenceSummary::from_reports(&col, &row),
        regime: out
            .regime
            .entries
            .iter()
            .map(|d| RegimeEntry { name: d.name.into(), value: d.value, status: d.status.as_str().into() })
            .collect(),
        files: entries,
        timings,
        config: cfg.clone(),
    };
    write_manifest(&dir, &manifest)?;
    Ok(manifest)
}

/// Write `manifest.toml` through a temporary file and a rename.
pub fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    let text = toml::to_string(m).map_err(|e| Error::Format(e.to_string()))?;
    let tmp = dir.join("manifest.toml.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, dir.join("manifest.toml"))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join("manifest.toml"))?;
    toml::from_str(&text).map_err(|e| Error::Format(e.to_string()))
}
