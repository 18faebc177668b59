//! Down-ramped frequency-domain data from point scatterers, under the
//! start-stop model or the first-order Doppler model, plus additive noise.
//!
//! Reflectivity values carry the grid-cell area, so a unit scatterer
//! contributes `k² |f̂|² / (4π |r - y|)²` times a pure phase.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::geometry::{add, norm, sub, Trajectory, Vec3};
use crate::scene::{ImageGrid, Reflectivity, Scene};
use crate::segmentation::Segmentation;
use crate::waveform::Pulse;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataModel {
    StartStop,
    Doppler,
}

/// How `ρ` is evaluated inside a sub-aperture / sub-band cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMode {
    /// Value frozen at the cell center of the sample's `(α, β)`.
    Frozen,
    /// Parametric profiles evaluated at the sample's fractional `(α, β)`.
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    /// `N_s × N_ω` samples `d(s_j, ω_l)`.
    pub values: Array2<C64>,
    pub slow_times: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub model: DataModel,
    pub noise_level: f64,
    pub warnings: Vec<String>,
}

impl DataCube {
    pub fn zeros_like(&self) -> DataCube {
        DataCube {
            values: Array2::zeros(self.values.dim()),
            warnings: Vec::new(),
            ..self.clone()
        }
    }
}

struct Source<'a> {
    y: Vec3,
    rho: &'a Reflectivity,
}

fn sources<'a>(scene: &'a Scene, grid: &ImageGrid) -> Result<Vec<Source<'a>>> {
    scene
        .scatterers
        .iter()
        .map(|s| {
            Ok(Source {
                y: add(grid.center, s.offset(grid)?),
                rho: &s.reflectivity,
            })
        })
        .collect()
}

/// Simulate the data cube on the segmentation lattice.
pub fn simulate(
    scene: &Scene,
    grid: &ImageGrid,
    traj: &Trajectory,
    pulse: &Pulse,
    seg: &Segmentation,
    model: DataModel,
    mode: ProfileMode,
) -> Result<DataCube> {
    let doppler_speed = match model {
        DataModel::StartStop => None,
        DataModel::Doppler => Some(traj.speed),
    };
    simulate_impl(scene, grid, traj, pulse, seg, doppler_speed, mode)
}

/// Doppler model whose Doppler factors use a platform speed `speed`
/// instead of the trajectory's own (the flight geometry is unchanged).
/// `speed = 0` reproduces the start-stop data bit for bit.
pub fn simulate_doppler_with_speed(
    scene: &Scene,
    grid: &ImageGrid,
    traj: &Trajectory,
    pulse: &Pulse,
    seg: &Segmentation,
    speed: f64,
) -> Result<DataCube> {
    simulate_impl(scene, grid, traj, pulse, seg, Some(speed), ProfileMode::Frozen)
}

fn simulate_impl(
    scene: &Scene,
    grid: &ImageGrid,
    traj: &Trajectory,
    pulse: &Pulse,
    seg: &Segmentation,
    doppler_speed: Option<f64>,
    mode: ProfileMode,
) -> Result<DataCube> {
    let model = if doppler_speed.is_some() { DataModel::Doppler } else { DataModel::StartStop };
    let vel_scale = doppler_speed.unwrap_or(0.0) / traj.speed;
    scene.validate(grid, seg.n_alpha, seg.n_beta)?;
    let src = sources(scene, grid)?;
    let times = seg.slow_times();
    let freqs = seg.frequencies();
    let c = traj.wave_speed;
    let y_o = grid.center;
    let mut warnings = Vec::new();
    let outside = freqs.iter().filter(|&&w| pulse.spectrum(w) == 0.0).count();
    if outside > 0 {
        warnings.push(format!("{outside} frequency samples lie outside the pulse band"));
    }

    // Per row: cell index, position, velocity.
    let rows: Vec<(usize, Vec3, Vec3, f64)> = times
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let v = crate::geometry::scale(traj.velocity(s)?, vel_scale);
            Ok((seg.alpha_of_row(j), traj.position(s)?, v, s))
        })
        .collect::<Result<_>>()?;

    let nw = freqs.len();
    let out: Vec<Result<(Vec<C64>, usize)>> = rows
        .par_iter()
        .map(|&(alpha, r, vel, s)| {
            let mut row = vec![C64::new(0.0, 0.0); nw];
            let mut dropped = 0usize;
            let l_o = norm(sub(r, y_o));
            if !(l_o > 0.0) {
                return Err(Error::ZeroRange(s));
            }
            let gamma_o = crate::geometry::dot(vel, sub(r, y_o)) / (l_o * c);
            for sc in &src {
                let d = sub(r, sc.y);
                let dist = norm(d);
                if !(dist > 0.0) {
                    return Err(Error::ZeroRange(s));
                }
                let gamma = crate::geometry::dot(vel, d) / (dist * c);
                let spread = 1.0 / (4.0 * PI * dist).powi(2);
                for (l, &w) in freqs.iter().enumerate() {
                    let (a_pos, b_pos) = match mode {
                        ProfileMode::Frozen => (alpha as f64, seg.beta_of_col(l) as f64),
                        ProfileMode::Continuous => (seg.alpha_coordinate(s), seg.beta_coordinate(w)),
                    };
                    let rho = sc.rho.value(a_pos, b_pos);
                    if rho == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let k = w / c;
                    let (amp, phase) = match model {
                        DataModel::StartStop => {
                            let f = pulse.spectrum(w);
                            (k * k * f * f * spread, 2.0 * w * (dist - l_o) / c)
                        }
                        DataModel::Doppler => {
                            let fo = pulse.spectrum(w * (1.0 + 2.0 * gamma_o));
                            let fy = pulse.spectrum(w * (1.0 + 2.0 * gamma));
                            if fo * fy == 0.0 && pulse.spectrum(w) > 0.0 {
                                dropped += 1;
                            }
                            (
                                k * k * fo * fy * spread,
                                2.0 * w * ((1.0 + gamma) * dist - (1.0 + gamma_o) * l_o) / c,
                            )
                        }
                    };
                    row[l] += rho * C64::from_polar(amp, phase);
                }
            }
            Ok((row, dropped))
        })
        .collect();

    let mut values = Array2::<C64>::zeros((times.len(), nw));
    let mut dropped = 0;
    for (j, r) in out.into_iter().enumerate() {
        let (row, dr) = r?;
        dropped += dr;
        for (l, v) in row.into_iter().enumerate() {
            values[[j, l]] = v;
        }
    }
    if dropped > 0 {
        warnings.push(format!(
            "{dropped} scatterer samples left the band after the Doppler shift"
        ));
    }
    Ok(DataCube {
        values,
        slow_times: times,
        frequencies: freqs,
        model,
        noise_level: 0.0,
        warnings,
    })
}

pub fn simulate_start_stop(
    scene: &Scene,
    grid: &ImageGrid,
    traj: &Trajectory,
    pulse: &Pulse,
    seg: &Segmentation,
) -> Result<DataCube> {
    simulate(scene, grid, traj, pulse, seg, DataModel::StartStop, ProfileMode::Frozen)
}

pub fn simulate_doppler(
    scene: &Scene,
    grid: &ImageGrid,
    traj: &Trajectory,
    pulse: &Pulse,
    seg: &Segmentation,
) -> Result<DataCube> {
    simulate(scene, grid, traj, pulse, seg, DataModel::Doppler, ProfileMode::Frozen)
}

/// Circular complex Gaussian noise with `E‖n‖_F² = level² ‖d‖_F²`.
pub fn add_noise(data: &DataCube, level: f64, seed: u64) -> Result<DataCube> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level {level}")));
    }
    let mut out = data.clone();
    out.noise_level = level;
    if level == 0.0 {
        return Ok(out);
    }
    let fro = data.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n = data.values.len().max(1) as f64;
    let sigma = level * fro / n.sqrt() / 2f64.sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for z in out.values.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += C64::new(sigma * re, sigma * im);
    }
    Ok(out)
}
