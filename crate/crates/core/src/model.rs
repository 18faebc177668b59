//! Reflectivity-to-data matrices, the MMV data matrix and the
//! modulation that links `X` to the reflectivity.
//!
//! Rows of every per-subset matrix are frequency-block-major,
//! `row = l n_s + j`; columns are grid pixels.

use std::f64::consts::PI;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::geometry::{dot, norm, sub, SubapertureFrame, Trajectory, Vec3};
use crate::scene::{column_index, ImageGrid};
use crate::segmentation::{extract_subset, Segmentation};
use crate::simulator::DataCube;
use crate::waveform::Pulse;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Exact,
    Subset,
    Reference,
    SubsetDoppler,
    ReferenceDoppler,
}

impl MatrixKind {
    pub fn tag(self) -> u8 {
        match self {
            MatrixKind::Exact => 1,
            MatrixKind::Subset => 2,
            MatrixKind::Reference => 3,
            MatrixKind::SubsetDoppler => 4,
            MatrixKind::ReferenceDoppler => 5,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        Some(match t {
            1 => MatrixKind::Exact,
            2 => MatrixKind::Subset,
            3 => MatrixKind::Reference,
            4 => MatrixKind::SubsetDoppler,
            5 => MatrixKind::ReferenceDoppler,
            _ => return None,
        })
    }
}

/// Linear map with an adjoint, applied to blocks of column vectors.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: ArrayView2<C64>) -> Array2<C64>;
    fn adjoint(&self, y: ArrayView2<C64>) -> Array2<C64>;
}

#[derive(Debug)]
pub struct ModelMatrix {
    pub values: Array2<C64>,
    pub kind: MatrixKind,
    pub n_s: usize,
    pub n_omega: usize,
    adjoint: OnceLock<Array2<C64>>,
}

impl Clone for ModelMatrix {
    fn clone(&self) -> Self {
        ModelMatrix::new(self.values.clone(), self.kind, self.n_s, self.n_omega)
    }
}

impl PartialEq for ModelMatrix {
    fn eq(&self, o: &Self) -> bool {
        self.kind == o.kind && self.n_s == o.n_s && self.n_omega == o.n_omega && self.values == o.values
    }
}

impl ModelMatrix {
    pub fn new(values: Array2<C64>, kind: MatrixKind, n_s: usize, n_omega: usize) -> Self {
        ModelMatrix { values, kind, n_s, n_omega, adjoint: OnceLock::new() }
    }

    fn conj_transpose(&self) -> &Array2<C64> {
        self.adjoint
            .get_or_init(|| self.values.t().mapv(|z| z.conj()).as_standard_layout().to_owned())
    }

    pub fn apply_vec(&self, x: &Array1<C64>) -> Array1<C64> {
        self.values.dot(x)
    }

    pub fn adjoint_vec(&self, y: &Array1<C64>) -> Array1<C64> {
        self.conj_transpose().dot(y)
    }

    /// Column `q`.
    pub fn column(&self, q: usize) -> Array1<C64> {
        self.values.column(q).to_owned()
    }
}

impl LinearOperator for ModelMatrix {
    fn nrows(&self) -> usize {
        self.values.nrows()
    }
    fn ncols(&self) -> usize {
        self.values.ncols()
    }
    fn apply(&self, x: ArrayView2<C64>) -> Array2<C64> {
        self.values.dot(&x)
    }
    fn adjoint(&self, y: ArrayView2<C64>) -> Array2<C64> {
        self.conj_transpose().dot(&y)
    }
}

/// Geometric factors of one pixel in one sub-aperture frame.
#[derive(Debug, Clone, Copy)]
struct PixelTerms {
    /// `m·Δy (+ V/c t·Δy)`.
    range: f64,
    /// `t·PΔy (+ L/R V/c n·Δy)`, with `n` toward the centre of curvature.
    cross: f64,
    /// `Δy·PΔy / L`.
    quad: f64,
}

fn pixel_terms(f: &SubapertureFrame, dy: Vec3, doppler: Option<(f64, f64, f64)>) -> PixelTerms {
    let (mut range, mut cross) = (f.range_offset(dy), f.cross_offset(dy));
    if let Some((v, c, radius)) = doppler {
        range += v / c * dot(f.t, dy);
        let curv = if radius.is_finite() { f.range / radius } else { 0.0 };
        cross += curv * (v / c) * dot(f.n, dy);
    }
    PixelTerms { range, cross, quad: f.quadratic(dy) / f.range }
}

fn doppler_params(traj: &Trajectory, speed: Option<f64>) -> Option<(f64, f64, f64)> {
    speed.map(|v| (v, traj.wave_speed, traj.curvature_radius()))
}

fn fill_columns<F>(rows: usize, cols: usize, f: F) -> Array2<C64>
where
    F: Fn(usize, &mut [C64]) + Sync,
{
    let columns: Vec<Vec<C64>> = (0..cols)
        .into_par_iter()
        .map(|q| {
            let mut v = vec![C64::new(0.0, 0.0); rows];
            f(q, &mut v);
            v
        })
        .collect();
    let mut a = Array2::zeros((rows, cols));
    for (q, col) in columns.into_iter().enumerate() {
        for (r, z) in col.into_iter().enumerate() {
            a[[r, q]] = z;
        }
    }
    a
}

/// Exact start-stop matrix on arbitrary slow times and frequencies, rows `l N_s + j`.
pub fn assemble_exact(
    traj: &Trajectory,
    grid: &ImageGrid,
    pulse: &Pulse,
    slow_times: &[f64],
    frequencies: &[f64],
) -> Result<ModelMatrix> {
    let c = traj.wave_speed;
    let pos: Vec<Vec3> = slow_times.iter().map(|&s| traj.position(s)).collect::<Result<_>>()?;
    let l_o: Vec<f64> = pos.iter().map(|r| norm(sub(*r, grid.center))).collect();
    for (j, &l) in l_o.iter().enumerate() {
        if !(l > 0.0) {
            return Err(Error::ZeroRange(slow_times[j]));
        }
    }
    for q in 0..grid.len() {
        let y = grid.point(q);
        if let Some(j) = pos.iter().position(|r| norm(sub(*r, y)) == 0.0) {
            return Err(Error::ZeroRange(slow_times[j]));
        }
    }
    let ns = slow_times.len();
    let rows = ns * frequencies.len();
    let values = fill_columns(rows, grid.len(), |q, col| {
        let y = grid.point(q);
        for (l, &w) in frequencies.iter().enumerate() {
            let k = w / c;
            let f = pulse.spectrum(w);
            for (j, r) in pos.iter().enumerate() {
                let dist = norm(sub(*r, y));
                let amp = k * k * f * f / (4.0 * PI * dist).powi(2);
                col[l * ns + j] = C64::from_polar(amp, 2.0 * w * (dist - l_o[j]) / c);
            }
        }
    });
    Ok(ModelMatrix::new(values, MatrixKind::Exact, ns, frequencies.len()))
}

/// Exact matrix restricted to subset `(α, β)` of the segmentation lattice.
pub fn assemble_exact_subset(
    traj: &Trajectory,
    grid: &ImageGrid,
    pulse: &Pulse,
    seg: &Segmentation,
    alpha: usize,
    beta: usize,
) -> Result<ModelMatrix> {
    check_subset(seg, alpha, beta)?;
    let times: Vec<f64> = seg.offsets_s.iter().map(|d| seg.centers_s[alpha] + d).collect();
    let freqs: Vec<f64> = seg.offsets_omega.iter().map(|d| seg.centers_omega[beta] + d).collect();
    assemble_exact(traj, grid, pulse, &times, &freqs)
}

fn check_subset(seg: &Segmentation, alpha: usize, beta: usize) -> Result<()> {
    if alpha >= seg.n_alpha || beta >= seg.n_beta {
        return Err(Error::IndexOutOfRange(format!("subset ({alpha}, {beta})")));
    }
    Ok(())
}

/// Common amplitude `k_o² |f̂(ω_o)|² / (4π L_α)²` of subset matrices.
pub fn subset_amplitude(pulse: &Pulse, frame: &SubapertureFrame) -> f64 {
    let k = pulse.k_o() * pulse.spectrum_level;
    k * k / (4.0 * PI * frame.range).powi(2)
}

fn subset_impl(
    traj: &Trajectory,
    grid: &ImageGrid,
    seg: &Segmentation,
    pulse: &Pulse,
    alpha: usize,
    beta: usize,
    doppler: Option<f64>,
) -> Result<ModelMatrix> {
    check_subset(seg, alpha, beta)?;
    let f = &seg.frames[alpha];
    let amp = subset_amplitude(pulse, f);
    let kb = seg.k_beta(beta);
    let c = traj.wave_speed;
    let v = seg.speed;
    let dp = doppler_params(traj, doppler);
    let ns = seg.n_s;
    let values = fill_columns(seg.subset_len(), grid.len(), |q, col| {
        let p = pixel_terms(f, grid.offset(q), dp);
        for (l, dw) in seg.offsets_omega.iter().enumerate() {
            let k = kb + dw / c;
            for (j, ds) in seg.offsets_s.iter().enumerate() {
                let phase = -2.0 * k * p.range - 2.0 * kb * v * ds / f.range * p.cross + kb * p.quad;
                col[l * ns + j] = C64::from_polar(amp, phase);
            }
        }
    });
    let kind = if doppler.is_some() { MatrixKind::SubsetDoppler } else { MatrixKind::Subset };
    Ok(ModelMatrix::new(values, kind, ns, seg.n_omega))
}

pub fn assemble_subset(
    traj: &Trajectory,
    grid: &ImageGrid,
    seg: &Segmentation,
    pulse: &Pulse,
    alpha: usize,
    beta: usize,
) -> Result<ModelMatrix> {
    subset_impl(traj, grid, seg, pulse, alpha, beta, None)
}

pub fn assemble_subset_doppler(
    traj: &Trajectory,
    grid: &ImageGrid,
    seg: &Segmentation,
    pulse: &Pulse,
    alpha: usize,
    beta: usize,
) -> Result<ModelMatrix> {
    subset_impl(traj, grid, seg, pulse, alpha, beta, Some(traj.speed))
}

/// Doppler subset matrix with the Doppler terms evaluated at `speed`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_subset_doppler_with_speed(
    traj: &Trajectory,
    grid: &ImageGrid,
    seg: &Segmentation,
    pulse: &Pulse,
    alpha: usize,
    beta: usize,
    speed: f64,
) -> Result<ModelMatrix> {
    subset_impl(traj, grid, seg, pulse, alpha, beta, Some(speed))
}

/// Per-pixel coefficients of the reference matrix, shared by the dense
/// and matrix-free forms.
#[derive(Debug, Clone)]
pub struct ReferenceOperator {
    /// `2 Δω_l / c`.
    freq: Vec<f64>,
    /// `2 k_1 V Δs_j / L_1`.
    slow: Vec<f64>,
    range: Vec<f64>,
    cross: Vec<f64>,
    n_s: usize,
    pub doppler: bool,
}

impl ReferenceOperator {
    pub fn new(traj: &Trajectory, grid: &ImageGrid, seg: &Segmentation, doppler: Option<f64>) -> Self {
        let f = &seg.frames[0];
        let c = traj.wave_speed;
        let k1 = seg.k_beta(0);
        let dp = doppler_params(traj, doppler);
        let terms: Vec<PixelTerms> = (0..grid.len()).map(|q| pixel_terms(f, grid.offset(q), dp)).collect();
        ReferenceOperator {
            freq: seg.offsets_omega.iter().map(|dw| 2.0 * dw / c).collect(),
            slow: seg.offsets_s.iter().map(|ds| 2.0 * k1 * seg.speed * ds / f.range).collect(),
            range: terms.iter().map(|t| t.range).collect(),
            cross: terms.iter().map(|t| t.cross).collect(),
            n_s: seg.n_s,
            doppler: doppler.is_some(),
        }
    }

    pub fn entry(&self, row: usize, q: usize) -> C64 {
        let (l, j) = (row / self.n_s, row % self.n_s);
        C64::from_polar(1.0, -self.freq[l] * self.range[q] - self.slow[j] * self.cross[q])
    }

    pub fn to_matrix(&self) -> ModelMatrix {
        let rows = self.freq.len() * self.n_s;
        let values = fill_columns(rows, self.range.len(), |q, col| {
            for (r, z) in col.iter_mut().enumerate() {
                *z = self.entry(r, q);
            }
        });
        let kind = if self.doppler { MatrixKind::ReferenceDoppler } else { MatrixKind::Reference };
        ModelMatrix::new(values, kind, self.n_s, self.freq.len())
    }
}

impl LinearOperator for ReferenceOperator {
    fn nrows(&self) -> usize {
        self.freq.len() * self.n_s
    }
    fn ncols(&self) -> usize {
        self.range.len()
    }
    fn apply(&self, x: ArrayView2<C64>) -> Array2<C64> {
        let k = x.ncols();
        let mut out = Array2::zeros((self.nrows(), k));
        out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(r, mut row)| {
            for q in 0..self.ncols() {
                let a = self.entry(r, q);
                for c in 0..k {
                    row[c] += a * x[[q, c]];
                }
            }
        });
        out
    }
    fn adjoint(&self, y: ArrayView2<C64>) -> Array2<C64> {
        let k = y.ncols();
        let mut out = Array2::zeros((self.ncols(), k));
        out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(q, mut row)| {
            for r in 0..self.nrows() {
                let a = self.entry(r, q).conj();
                for c in 0..k {
                    row[c] += a * y[[r, c]];
                }
            }
        });
        out
    }
}

pub fn assemble_reference(traj: &Trajectory, grid: &ImageGrid, seg: &Segmentation) -> ModelMatrix {
    ReferenceOperator::new(traj, grid, seg, None).to_matrix()
}

pub fn assemble_reference_doppler(traj: &Trajectory, grid: &ImageGrid, seg: &Segmentation) -> ModelMatrix {
    ReferenceOperator::new(traj, grid, seg, Some(traj.speed)).to_matrix()
}

pub fn assemble_reference_doppler_with_speed(
    traj: &Trajectory,
    grid: &ImageGrid,
    seg: &Segmentation,
    speed: f64,
) -> ModelMatrix {
    ReferenceOperator::new(traj, grid, seg, Some(speed)).to_matrix()
}

/// Phase of the modulation `X = ρ e^{iθ}` for pixel `q`, column `(α, β)`.
fn modulation_phase(
    seg: &Segmentation,
    grid: &ImageGrid,
    traj: &Trajectory,
    q: usize,
    alpha: usize,
    beta: usize,
    doppler: Option<f64>,
) -> f64 {
    let f = &seg.frames[alpha];
    let dy = grid.offset(q);
    let mut range = f.range_offset(dy);
    if let Some(v) = doppler {
        range += v / traj.wave_speed * dot(f.t, dy);
    }
    let kb = seg.k_beta(beta);
    -2.0 * kb * range + kb * f.quadratic(dy) / f.range
}

fn modulation_map(
    x: &Array2<C64>,
    seg: &Segmentation,
    grid: &ImageGrid,
    traj: &Trajectory,
    doppler: Option<f64>,
    sign: f64,
) -> Result<Array2<C64>> {
    if x.dim() != (grid.len(), seg.n_columns()) {
        return Err(Error::Shape(format!(
            "reflectivity matrix {:?}, expected ({}, {})",
            x.dim(),
            grid.len(),
            seg.n_columns()
        )));
    }
    let mut out = x.clone();
    out.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(q, mut row)| {
        for a in 0..seg.n_alpha {
            for b in 0..seg.n_beta {
                let ph = modulation_phase(seg, grid, traj, q, a, b, doppler);
                row[column_index(a, b, seg.n_beta)] *= C64::from_polar(1.0, sign * ph);
            }
        }
    });
    Ok(out)
}

/// `ρ → X`.
pub fn modulate(
    rho: &Array2<C64>,
    seg: &Segmentation,
    grid: &ImageGrid,
    traj: &Trajectory,
    doppler: Option<f64>,
) -> Result<Array2<C64>> {
    modulation_map(rho, seg, grid, traj, doppler, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityField {
    /// `Q × (N_α N_β)` values `ρ_q^(α,β)`.
    pub values: Array2<C64>,
    pub support: Vec<usize>,
    pub support_threshold: f64,
}

/// `X → ρ`, with the row support at relative threshold `tau_supp`.
pub fn demodulate(
    x: &Array2<C64>,
    seg: &Segmentation,
    grid: &ImageGrid,
    traj: &Trajectory,
    doppler: Option<f64>,
    tau_supp: f64,
) -> Result<ReflectivityField> {
    let values = modulation_map(x, seg, grid, traj, doppler, -1.0)?;
    let support = crate::solver::row_support(&values, tau_supp);
    Ok(ReflectivityField { values, support, support_threshold: tau_supp })
}

#[derive(Debug, Clone)]
pub struct MmvProblem {
    pub a_ref: ModelMatrix,
    /// `(n_s n_ω) × (N_α N_β)`.
    pub d: Array2<C64>,
    /// `(4π L_α)² / (k_o² |f̂(ω_o)|²)` per column.
    pub column_scale: Vec<f64>,
    /// Doppler speed used in the model, `None` for start-stop.
    pub doppler: Option<f64>,
}

/// Assemble `D` from the cube and the reference matrix.
pub fn build_mmv(
    data: &DataCube,
    traj: &Trajectory,
    grid: &ImageGrid,
    seg: &Segmentation,
    pulse: &Pulse,
    doppler: Option<f64>,
) -> Result<MmvProblem> {
    let mut d = Array2::zeros((seg.subset_len(), seg.n_columns()));
    let mut column_scale = vec![0.0; seg.n_columns()];
    for a in 0..seg.n_alpha {
        let s = 1.0 / subset_amplitude(pulse, &seg.frames[a]);
        for b in 0..seg.n_beta {
            let col = column_index(a, b, seg.n_beta);
            let v = extract_subset(data, seg, a, b)?;
            d.column_mut(col).assign(&v.mapv(|z| z * s));
            column_scale[col] = s;
        }
    }
    let a_ref = ReferenceOperator::new(traj, grid, seg, doppler).to_matrix();
    Ok(MmvProblem { a_ref, d, column_scale, doppler })
}
