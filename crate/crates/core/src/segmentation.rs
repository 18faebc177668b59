//! Sub-aperture / sub-band segmentation, regime diagnostics and data
//! subset extraction.
//!
//! The data lattice is the concatenation of the per-subset lattices:
//! slow-time row `α n_s + j` holds `s*_α + Δs_j` and frequency column
//! `β n_ω + l` holds `ω*_β + Δω_l`. Neighbouring sub-apertures share an
//! edge time, which therefore appears twice. Extraction is pure indexing.

use std::f64::consts::PI;
use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use crate::geometry::{dot, sub, SubapertureFrame, Trajectory, Vec3};
use crate::scene::ImageGrid;
use crate::simulator::DataCube;
use crate::waveform::Pulse;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Sub-aperture length `a` in meters.
    pub aperture: f64,
    /// Sub-band width `b` in Hz.
    pub subband_hz: f64,
    pub n_s: usize,
    pub n_omega: usize,
    pub slow_step: f64,
    /// `h_ω`, zero when `n_ω = 1`.
    pub omega_step: f64,
    pub centers_s: Vec<f64>,
    pub centers_omega: Vec<f64>,
    pub offsets_s: Vec<f64>,
    pub offsets_omega: Vec<f64>,
    pub frames: Vec<SubapertureFrame>,
    pub y_o: Vec3,
    pub speed: f64,
    pub wave_speed: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn segment(
    traj: &Trajectory,
    pulse: &Pulse,
    y_o: Vec3,
    n_alpha: usize,
    n_beta: usize,
    aperture: f64,
    subband_hz: f64,
    n_omega: usize,
) -> Result<Segmentation> {
    if n_alpha == 0 || n_beta == 0 || n_omega == 0 {
        return Err(Error::InvalidParameter("segment counts must be positive".into()));
    }
    if !(aperture > 0.0) || !(subband_hz > 0.0) {
        return Err(Error::InvalidParameter("sub-aperture and sub-band sizes must be positive".into()));
    }
    let v = traj.speed;
    let hs = traj.slow_time_step;
    let total = traj.aperture_length();
    if n_alpha as f64 * aperture > total * (1.0 + 1e-9) + 1e-9 {
        return Err(Error::SegmentationTooLarge(format!(
            "aperture: {n_alpha} x {aperture} m > {total} m"
        )));
    }
    if n_beta as f64 * subband_hz > pulse.bandwidth_hz * (1.0 + 1e-12) {
        return Err(Error::SegmentationTooLarge(format!(
            "band: {n_beta} x {subband_hz} Hz > {} Hz",
            pulse.bandwidth_hz
        )));
    }
    let n_s = (aperture / (v * hs)).round() as usize + 1;
    let half_s = 0.5 * (n_s - 1) as f64;
    let offsets_s: Vec<f64> = (0..n_s).map(|j| (j as f64 - half_s) * hs).collect();
    let (t0, _) = traj.span();
    let centers_s: Vec<f64> = (0..n_alpha)
        .map(|a| t0 + aperture / (2.0 * v) + a as f64 * aperture / v)
        .collect();
    let wb = 2.0 * PI * subband_hz;
    let half_b = 0.5 * (n_beta - 1) as f64;
    let centers_omega: Vec<f64> =
        (0..n_beta).map(|b| pulse.omega_o() + (b as f64 - half_b) * wb).collect();
    let (offsets_omega, omega_step) = if n_omega == 1 {
        (vec![0.0], 0.0)
    } else {
        let h = wb / (n_omega - 1) as f64;
        ((0..n_omega).map(|l| -PI * subband_hz + l as f64 * h).collect(), h)
    };
    let frames = centers_s
        .iter()
        .map(|&s| traj.frame(s, y_o))
        .collect::<Result<Vec<_>>>()?;
    Ok(Segmentation {
        n_alpha,
        n_beta,
        aperture,
        subband_hz,
        n_s,
        n_omega,
        slow_step: hs,
        omega_step,
        centers_s,
        centers_omega,
        offsets_s,
        offsets_omega,
        frames,
        y_o,
        speed: v,
        wave_speed: traj.wave_speed,
    })
}

impl Segmentation {
    pub fn n_columns(&self) -> usize {
        self.n_alpha * self.n_beta
    }

    /// Rows of one subset vector (`n_s n_ω`).
    pub fn subset_len(&self) -> usize {
        self.n_s * self.n_omega
    }

    /// All slow times of the data lattice.
    pub fn slow_times(&self) -> Vec<f64> {
        self.centers_s
            .iter()
            .flat_map(|c| self.offsets_s.iter().map(move |d| c + d))
            .collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.centers_omega
            .iter()
            .flat_map(|c| self.offsets_omega.iter().map(move |d| c + d))
            .collect()
    }

    /// Sub-aperture of lattice row `row`.
    pub fn alpha_of_row(&self, row: usize) -> usize {
        row / self.n_s
    }

    pub fn beta_of_col(&self, col: usize) -> usize {
        col / self.n_omega
    }

    /// Continuous sub-aperture coordinate of slow time `s` (integer at centers).
    pub fn alpha_coordinate(&self, s: f64) -> f64 {
        (s - self.centers_s[0]) * self.speed / self.aperture
    }

    pub fn beta_coordinate(&self, omega: f64) -> f64 {
        (omega - self.centers_omega[0]) / (2.0 * PI * self.subband_hz)
    }

    pub fn k_beta(&self, beta: usize) -> f64 {
        self.centers_omega[beta] / self.wave_speed
    }

    /// Sampled sub-aperture length `n_s V h_s` (effective integration width).
    pub fn effective_aperture(&self) -> f64 {
        self.n_s as f64 * self.speed * self.slow_step
    }

    /// Sampled sub-band width `n_ω h_ω / 2π` in Hz.
    pub fn effective_subband(&self) -> f64 {
        self.n_omega as f64 * self.omega_step / (2.0 * PI)
    }

    /// Frequency spread actually sampled inside a sub-band, in Hz.
    pub fn sampled_subband(&self) -> f64 {
        (self.n_omega - 1) as f64 * self.omega_step / (2.0 * PI)
    }
}

/// Subset `(α, β)` of the cube, frequency-block-major (`l n_s + j`).
pub fn extract_subset(data: &DataCube, seg: &Segmentation, alpha: usize, beta: usize) -> Result<Array1<C64>> {
    check_alignment(data, seg)?;
    if alpha >= seg.n_alpha || beta >= seg.n_beta {
        return Err(Error::IndexOutOfRange(format!("subset ({alpha}, {beta})")));
    }
    let (r0, c0) = (alpha * seg.n_s, beta * seg.n_omega);
    let mut v = Array1::zeros(seg.subset_len());
    for l in 0..seg.n_omega {
        for j in 0..seg.n_s {
            v[l * seg.n_s + j] = data.values[[r0 + j, c0 + l]];
        }
    }
    Ok(v)
}

/// Inverse of [`extract_subset`]: writes a subset vector back into a cube-shaped array.
pub fn insert_subset(target: &mut Array2<C64>, seg: &Segmentation, alpha: usize, beta: usize, v: &Array1<C64>) -> Result<()> {
    if target.dim() != (seg.n_alpha * seg.n_s, seg.n_beta * seg.n_omega) || v.len() != seg.subset_len() {
        return Err(Error::Shape("subset insertion".into()));
    }
    let (r0, c0) = (alpha * seg.n_s, beta * seg.n_omega);
    for l in 0..seg.n_omega {
        for j in 0..seg.n_s {
            target[[r0 + j, c0 + l]] = v[l * seg.n_s + j];
        }
    }
    Ok(())
}

pub fn check_alignment(data: &DataCube, seg: &Segmentation) -> Result<()> {
    let rows = seg.n_alpha * seg.n_s;
    let cols = seg.n_beta * seg.n_omega;
    if data.values.dim() != (rows, cols) {
        return Err(Error::Misaligned(format!(
            "cube is {:?}, segmentation needs ({rows}, {cols})",
            data.values.dim()
        )));
    }
    let ts = seg.slow_times();
    let tol_s = 1e-9 * seg.slow_step.max(1e-300);
    if let Some(i) = (0..rows).find(|&i| (data.slow_times[i] - ts[i]).abs() > tol_s) {
        return Err(Error::Misaligned(format!("slow time at row {i}")));
    }
    let ws = seg.frequencies();
    if let Some(i) = (0..cols).find(|&i| (data.frequencies[i] - ws[i]).abs() > 1e-12 * ws[i].abs()) {
        return Err(Error::Misaligned(format!("frequency at column {i}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    /// Should be `≳ 1`.
    AtLeastOne,
    /// Should be `≪ 1`.
    Small,
    /// Informational value, no threshold.
    Info,
    /// Reported against the small threshold but never fatal.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Warn,
    Fail,
    Info,
    Marginal,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "fail",
            Status::Info => "info",
            Status::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub name: &'static str,
    pub value: f64,
    pub expectation: Expectation,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    /// `≪ 1` passes up to this value.
    pub small: f64,
    /// Warning band upper limit; larger values fail.
    pub warn: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds { small: 0.1, warn: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub entries: Vec<Diagnostic>,
}

impl RegimeReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|d| d.name == name).map(|d| d.value)
    }

    pub fn status(&self, name: &str) -> Option<Status> {
        self.entries.iter().find(|d| d.name == name).map(|d| d.status)
    }

    pub fn failures(&self) -> Vec<&Diagnostic> {
        self.entries.iter().filter(|d| d.status == Status::Fail).collect()
    }

    pub fn warnings(&self) -> Vec<&Diagnostic> {
        self.entries.iter().filter(|d| d.status == Status::Warn).collect()
    }

    /// Flat `name = value  # status` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for d in &self.entries {
            let _ = writeln!(s, "{:<20} = {:<24e} # {}", d.name, d.value, d.status.as_str());
        }
        s
    }
}

fn classify(value: f64, e: Expectation, th: &RegimeThresholds) -> Status {
    match e {
        Expectation::Info => Status::Info,
        Expectation::AtLeastOne => {
            if value >= 1.0 {
                Status::Pass
            } else {
                Status::Warn
            }
        }
        Expectation::Small => {
            if value <= th.small {
                Status::Pass
            } else if value <= th.warn {
                Status::Warn
            } else {
                Status::Fail
            }
        }
        Expectation::Marginal => {
            if value <= th.small {
                Status::Pass
            } else {
                Status::Marginal
            }
        }
    }
}

/// Regime diagnostics for a segmentation over an image window. `Y` and
/// `Y⊥` are the window side lengths; the projected extents of the grid
/// are reported alongside as `window_*_proj`.
pub fn regime_report(
    traj: &Trajectory,
    grid: &ImageGrid,
    seg: &Segmentation,
    pulse: &Pulse,
    th: &RegimeThresholds,
) -> RegimeReport {
    let c = pulse.wave_speed;
    let lam = pulse.wavelength();
    let w_o = pulse.omega_o();
    let f1 = &seg.frames[0];
    let l = f1.range;
    let a = seg.aperture;
    let b = seg.subband_hz;
    let v = traj.speed;
    let y = grid.extent_range;
    let yp = grid.extent_cross;

    let offsets = grid.offsets();
    let mut y_proj = 0.0f64;
    let mut yp_proj = 0.0f64;
    for dy in &offsets {
        y_proj = y_proj.max(f1.range_offset(*dy).abs());
        let p = crate::geometry::mat_vec(&f1.projector, *dy);
        yp_proj = yp_proj.max(crate::geometry::norm(p));
    }

    let b_sampled = seg.sampled_subband();
    let vs_span = (seg.n_s - 1) as f64 * seg.slow_step * v;
    let k1 = seg.k_beta(0);
    let mut rot_range = 0.0f64;
    let mut rot_cross = 0.0f64;
    for fa in &seg.frames {
        let dm = sub(fa.m, f1.m);
        for dy in &offsets {
            rot_range = rot_range.max(b_sampled / c * dot(dm, *dy).abs());
            let ca = fa.cross_offset(*dy) / fa.range;
            let c1 = f1.cross_offset(*dy) / f1.range;
            for be in 0..seg.n_beta {
                let x = vs_span * (seg.k_beta(be) * ca - k1 * c1);
                rot_cross = rot_cross.max(x.abs());
            }
        }
    }

    let rr = traj.curvature_radius();
    // Window conditions along an axis of zero extent do not apply.
    let window = |extent: f64| if extent > 0.0 { Expectation::AtLeastOne } else { Expectation::Info };
    let e: Vec<(&'static str, f64, Expectation)> = vec![
        ("crossrange_resolution", lam * l / a, Expectation::Info),
        ("range_resolution", c / b, Expectation::Info),
        ("fresnel_a", a * a / (lam * l), Expectation::AtLeastOne),
        ("fresnel_Y", yp * yp / (lam * l), window(yp)),
        ("crossrange_window", a * yp / (lam * l), window(yp)),
        ("range_window", y / (c / b), window(y)),
        ("m8", (b / w_o) * yp / (lam * l / a), Expectation::Small),
        ("m8_hz", (b / pulse.carrier_hz) * yp / (lam * l / a), Expectation::Info),
        ("m10_range", a * a * y / (lam * l * l), Expectation::Small),
        ("m10_cross", a * a * yp / (lam * l * l), Expectation::Small),
        ("window_range_proj", y_proj, Expectation::Info),
        ("window_cross_proj", yp_proj, Expectation::Info),
        ("fresnel_Y_proj", yp_proj * yp_proj / (lam * l), Expectation::Info),
        ("m10_range_proj", a * a * y_proj / (lam * l * l), Expectation::Info),
        ("m10_cross_proj", a * a * yp_proj / (lam * l * l), Expectation::Info),
        ("rot_range", rot_range, Expectation::Marginal),
        ("rot_cross", rot_cross, Expectation::Marginal),
        ("doppler_band", (v / c) * (yp / l) / (b / w_o), Expectation::Small),
        ("doppler_curv", if rr.is_finite() { (v / c) * (a / rr) * (y / (c / b)) } else { 0.0 }, Expectation::Small),
        ("startstop_travel", w_o * (l / c) * (v / c), Expectation::Marginal),
        ("startstop_pulse", (w_o / pulse.bandwidth_hz) * (v / c), Expectation::Small),
    ];
    let entries = e
        .into_iter()
        .map(|(name, value, expectation)| Diagnostic {
            name,
            value,
            expectation,
            status: classify(value, expectation, th),
        })
        .collect();
    RegimeReport { entries }
}
