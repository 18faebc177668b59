//! Experiment configuration in TOML.
//!
//! Every physical quantity carries its unit in the key name (`speed_mps`,
//! `aperture_m`, `subband_hz`, ...). Unknown keys are rejected. Omitted
//! blocks and keys fall back to the GOTCHA-like defaults.
//!
//! ```toml
//! name = "example"
//!
//! [trajectory]          # kind = "circular" | "sampled"
//! height_m = 7300.0
//! radius_m = 7100.0
//! speed_mps = 70.0
//! slow_step_s = 0.015
//!
//! [pulse]
//! carrier_hz = 9.6e9
//! bandwidth_hz = 622e6
//!
//! [grid]
//! extent_range_m = 40.0
//! extent_cross_m = 40.0
//! step_range_m = 2.0
//! step_cross_m = 1.0
//!
//! [segmentation]
//! n_alpha = 8
//! n_beta = 8
//! aperture_m = 42.0
//! n_omega = 15
//!
//! [[scene.scatterers]]
//! range_m = 6.0
//! cross_m = -6.0
//! amplitude = 1.0
//! alpha = { kind = "only", indices = [0, 1] }
//! beta = { kind = "gaussian", center = 3.0, width = 2.0 }
//!
//! [noise]
//! level = 0.2
//! seed = 7
//! ```

use serde::{Deserialize, Serialize};

use crate::geometry::Trajectory;
use crate::scene::{make_grid, Factor, GridSpec, ImageGrid, Location, Reflectivity, Scatterer, Scene};
use crate::segmentation::{segment, RegimeThresholds, Segmentation};
use crate::simulator::{DataModel, ProfileMode};
use crate::solver::SolverConfig;
use crate::waveform::Pulse;
use crate::{Error, Result, C64};

pub const GOTCHA_HEIGHT_M: f64 = 7300.0;
pub const GOTCHA_RADIUS_M: f64 = 7100.0;
pub const GOTCHA_SPEED_MPS: f64 = 70.0;
pub const GOTCHA_SLOW_STEP_S: f64 = 0.015;
pub const GOTCHA_CARRIER_HZ: f64 = 9.6e9;
pub const GOTCHA_BANDWIDTH_HZ: f64 = 622e6;
pub const WAVE_SPEED_MPS: f64 = 3e8;
pub const GOTCHA_APERTURE_M: f64 = 42.0;
pub const GOTCHA_N_OMEGA: usize = 15;

macro_rules! default_fn {
    ($($name:ident: $t:ty = $v:expr;)*) => { $(fn $name() -> $t { $v })* };
}

default_fn! {
    d_height: f64 = GOTCHA_HEIGHT_M;
    d_radius: f64 = GOTCHA_RADIUS_M;
    d_speed: f64 = GOTCHA_SPEED_MPS;
    d_slow_step: f64 = GOTCHA_SLOW_STEP_S;
    d_carrier: f64 = GOTCHA_CARRIER_HZ;
    d_bandwidth: f64 = GOTCHA_BANDWIDTH_HZ;
    d_wave_speed: f64 = WAVE_SPEED_MPS;
    d_one: f64 = 1.0;
    d_extent: f64 = 40.0;
    d_step_range: f64 = 2.0;
    d_step_cross: f64 = 1.0;
    d_one_usize: usize = 1;
    d_aperture: f64 = GOTCHA_APERTURE_M;
    d_n_omega: usize = GOTCHA_N_OMEGA;
    d_gamma: f64 = 0.005;
    d_max_iters: usize = 20000;
    d_tol_residual: f64 = 1e-6;
    d_tol_change: f64 = 1e-9;
    d_stall: f64 = 1e-2;
    d_support: f64 = 0.1;
    d_true: bool = true;
    d_small: f64 = 0.1;
    d_warn: f64 = 1.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    #[default]
    Circular,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default)]
    pub kind: TrajectoryKind,
    #[serde(default = "d_height")]
    pub height_m: f64,
    #[serde(default = "d_radius")]
    pub radius_m: f64,
    #[serde(default = "d_speed")]
    pub speed_mps: f64,
    #[serde(default = "d_slow_step")]
    pub slow_step_s: f64,
    /// Defaults to just enough samples for `n_alpha` sub-apertures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_slow: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_m: Option<Vec<[f64; 3]>>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            kind: TrajectoryKind::Circular,
            height_m: d_height(),
            radius_m: d_radius(),
            speed_mps: d_speed(),
            slow_step_s: d_slow_step(),
            n_slow: None,
            times_s: None,
            points_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    #[serde(default = "d_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "d_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "d_one")]
    pub spectrum_level: f64,
    #[serde(default = "d_wave_speed")]
    pub wave_speed_mps: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            carrier_hz: d_carrier(),
            bandwidth_hz: d_bandwidth(),
            spectrum_level: 1.0,
            wave_speed_mps: d_wave_speed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub center_m: [f64; 3],
    #[serde(default = "d_extent")]
    pub extent_range_m: f64,
    #[serde(default = "d_extent")]
    pub extent_cross_m: f64,
    #[serde(default = "d_step_range")]
    pub step_range_m: f64,
    #[serde(default = "d_step_cross")]
    pub step_cross_m: f64,
    /// Horizontal range axis; defaults to the direction toward the
    /// platform at the middle of the recorded aperture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_axis: Option<[f64; 3]>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            center_m: [0.0; 3],
            extent_range_m: d_extent(),
            extent_cross_m: d_extent(),
            step_range_m: d_step_range(),
            step_cross_m: d_step_cross(),
            range_axis: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationConfig {
    #[serde(default = "d_one_usize")]
    pub n_alpha: usize,
    #[serde(default = "d_one_usize")]
    pub n_beta: usize,
    #[serde(default = "d_aperture")]
    pub aperture_m: f64,
    /// Defaults to `B / 15`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subband_hz: Option<f64>,
    #[serde(default = "d_n_omega")]
    pub n_omega: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            n_alpha: 1,
            n_beta: 1,
            aperture_m: d_aperture(),
            subband_hz: None,
            n_omega: d_n_omega(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorConfig {
    #[default]
    All,
    Only { indices: Vec<usize> },
    Gaussian { center: f64, width: f64 },
}

impl FactorConfig {
    fn build(&self) -> Result<Factor> {
        Ok(match self {
            FactorConfig::All => Factor::All,
            FactorConfig::Only { indices } => Factor::Only(indices.clone()),
            FactorConfig::Gaussian { center, width } => {
                if !(*width > 0.0) || !center.is_finite() {
                    return Err(Error::Config(format!("gaussian profile width {width}, center {center}")));
                }
                Factor::Gaussian { center: *center, width: *width }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_range: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_cross: Option<usize>,
    #[serde(default = "d_one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub alpha: FactorConfig,
    #[serde(default)]
    pub beta: FactorConfig,
    /// Explicit `n_alpha × n_beta` magnitudes, scaled by the amplitude and phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
}

impl ScattererConfig {
    fn build(&self) -> Result<Scatterer> {
        let location = match (self.range_m, self.cross_m, self.i_range, self.i_cross) {
            (r, c, None, None) if r.is_some() || c.is_some() => Location::Offset {
                range_m: r.unwrap_or(0.0),
                cross_m: c.unwrap_or(0.0),
            },
            (None, None, Some(i), Some(j)) => Location::Pixel { i_range: i, i_cross: j },
            _ => {
                return Err(Error::Config(
                    "scatterer needs range_m/cross_m or both i_range and i_cross".into(),
                ))
            }
        };
        let amp = C64::from_polar(self.amplitude, self.phase_rad);
        let reflectivity = match &self.table {
            Some(t) => {
                let rows = t.len();
                let cols = t.first().map_or(0, |r| r.len());
                if rows == 0 || t.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config("ragged reflectivity table".into()));
                }
                let a = ndarray::Array2::from_shape_fn((rows, cols), |(i, j)| amp * t[i][j]);
                Reflectivity::Table(a)
            }
            None => Reflectivity::Parametric { amplitude: amp, alpha: self.alpha.build()?, beta: self.beta.build()? },
        };
        Ok(Scatterer { location, reflectivity })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub scatterers: Vec<ScattererConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataModelName {
    #[default]
    StartStop,
    Doppler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    #[default]
    Frozen,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Data model used by the simulator.
    #[serde(default)]
    pub data: DataModelName,
    /// Use the Doppler-corrected reference matrix and demodulation.
    #[serde(default)]
    pub doppler_correction: bool,
    #[serde(default)]
    pub profile: ProfileName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_steps: Option<f64>,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_tol_residual")]
    pub tol_residual: f64,
    #[serde(default = "d_tol_change")]
    pub tol_change: f64,
    #[serde(default = "d_stall")]
    pub stall_residual: f64,
    #[serde(default = "d_support")]
    pub support_threshold: f64,
    /// Stop at the noise level when the data are noisy.
    #[serde(default = "d_true")]
    pub stop_at_noise: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            step: None,
            gamma: d_gamma(),
            entry_steps: None,
            max_iters: d_max_iters(),
            tol_residual: d_tol_residual(),
            tol_change: d_tol_change(),
            stall_residual: d_stall(),
            support_threshold: d_support(),
            stop_at_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    #[serde(default = "d_small")]
    pub small: f64,
    #[serde(default = "d_warn")]
    pub warn: f64,
}

impl Default for RegimeSection {
    fn default() -> Self {
        RegimeSection { small: d_small(), warn: d_warn() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Run directory; defaults to `runs/<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "d_true")]
    pub plots: bool,
    #[serde(default)]
    pub dump_model: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: None, plots: true, dump_model: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub segmentation: SegmentationConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub regime: RegimeSection,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// Everything a run needs, built and validated from a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub traj: Trajectory,
    pub pulse: Pulse,
    pub grid: ImageGrid,
    pub seg: Segmentation,
    pub scene: Scene,
    pub solver: SolverConfig,
    pub thresholds: RegimeThresholds,
    pub data_model: DataModel,
    pub profile: ProfileMode,
    /// Doppler speed for the model matrices, `None` for start-stop matrices.
    pub doppler: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<Setup> {
        let t = &self.trajectory;
        let s = &self.segmentation;
        let p = &self.pulse;
        let pulse = Pulse::new(p.carrier_hz, p.bandwidth_hz, p.spectrum_level, p.wave_speed_mps)?;
        let traj = match t.kind {
            TrajectoryKind::Circular => {
                let n = t.n_slow.unwrap_or_else(|| {
                    (s.n_alpha as f64 * s.aperture_m / (t.speed_mps * t.slow_step_s)).round() as usize + 1
                });
                Trajectory::circular(t.height_m, t.radius_m, t.speed_mps, t.slow_step_s, n, p.wave_speed_mps)?
            }
            TrajectoryKind::Sampled => {
                let (Some(times), Some(points)) = (&t.times_s, &t.points_m) else {
                    return Err(Error::Config("sampled trajectory needs times_s and points_m".into()));
                };
                Trajectory::sampled(times.clone(), points.clone(), t.speed_mps, p.wave_speed_mps)?
            }
        };
        let g = &self.grid;
        let range_axis = match g.range_axis {
            Some(a) => a,
            None => {
                let (t0, t1) = traj.span();
                let mid = traj.position(0.5 * (t0 + t1))?;
                let d = crate::geometry::sub(mid, g.center_m);
                [d[0], d[1], 0.0]
            }
        };
        let grid = make_grid(&GridSpec {
            center: g.center_m,
            extent_range: g.extent_range_m,
            extent_cross: g.extent_cross_m,
            step_range: g.step_range_m,
            step_cross: g.step_cross_m,
            range_axis,
        })?;
        let subband = s.subband_hz.unwrap_or(p.bandwidth_hz / 15.0);
        let seg = segment(&traj, &pulse, grid.center, s.n_alpha, s.n_beta, s.aperture_m, subband, s.n_omega)?;
        let scene = Scene {
            scatterers: self.scene.scatterers.iter().map(|c| c.build()).collect::<Result<_>>()?,
        };
        scene.validate(&grid, seg.n_alpha, seg.n_beta)?;
        if !(self.noise.level >= 0.0) || !self.noise.level.is_finite() {
            return Err(Error::Config(format!("noise level {}", self.noise.level)));
        }
        let sv = &self.solver;
        let solver = SolverConfig {
            step: sv.step,
            gamma: sv.gamma,
            entry_steps: sv.entry_steps,
            max_iters: sv.max_iters,
            tol_residual: sv.tol_residual,
            tol_change: sv.tol_change,
            stall_residual: sv.stall_residual,
            support_threshold: sv.support_threshold,
            noise_level: if sv.stop_at_noise { self.noise.level } else { 0.0 },
        };
        solver.validate()?;
        let data_model = match self.model.data {
            DataModelName::StartStop => DataModel::StartStop,
            DataModelName::Doppler => DataModel::Doppler,
        };
        let profile = match self.model.profile {
            ProfileName::Frozen => ProfileMode::Frozen,
            ProfileName::Continuous => ProfileMode::Continuous,
        };
        Ok(Setup {
            doppler: self.model.doppler_correction.then_some(traj.speed),
            traj,
            pulse,
            grid,
            seg,
            scene,
            solver,
            thresholds: RegimeThresholds { small: self.regime.small, warn: self.regime.warn },
            data_model,
            profile,
        })
    }
}

/// Built-in scenario presets, analogs of the published experiments.
pub const PRESETS: &[(&str, &str)] = &[
    ("isotropic-11", include_str!("../presets/isotropic-11.toml")),
    ("aniso-6", include_str!("../presets/aniso-6.toml")),
    ("aniso-6-noise10", include_str!("../presets/aniso-6-noise10.toml")),
    ("2d-4-n8x8-noise20", include_str!("../presets/2d-4-n8x8-noise20.toml")),
    ("extended-point", include_str!("../presets/extended-point.toml")),
    ("gotcha", include_str!("../presets/gotcha.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| Error::Config(format!("unknown preset {name}")))?;
    ExperimentConfig::from_toml(text)
}
