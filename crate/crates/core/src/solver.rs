//! GeLMA iteration for row-sparse MMV problems, row-norm utilities and the
//! baseline imagers (weighted Kirchhoff migration, matched filter).

use std::f64::consts::PI;
use std::ops::Range;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::geometry::{norm, sub, Trajectory, Vec3};
use crate::model::{LinearOperator, MmvProblem, ModelMatrix};
use crate::scene::ImageGrid;
use crate::simulator::DataCube;
use crate::waveform::Pulse;
use crate::{Error, Result, C64};

/// Entry steps used when the iteration is run to a tight residual.
pub const ENTRY_STEPS_NOISELESS: f64 = 60.0;
/// Entry steps used with a noise-level residual target.
pub const ENTRY_STEPS_NOISY: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Step `μ` on the internally scaled problem; `None` picks `0.5/σ_max²`.
    pub step: Option<f64>,
    /// Multiplier update weight `γ`, dimensionless, in `(0, 1)`.
    pub gamma: f64,
    /// Multiplier steps `Z += γE` from `Z = 0` before the first row of `X`
    /// can leave zero. Sets the internal scaling of `D`: larger values
    /// give a smaller relative threshold and a slower, more selective
    /// growth of the support.
    pub entry_steps: Option<f64>,
    pub max_iters: usize,
    /// Stop when `‖𝔸X − D‖_F < tol_residual ‖D‖_F`.
    pub tol_residual: f64,
    /// Stop when `‖X_{k+1} − X_k‖_F < tol_change ‖X_{k+1}‖_F` and the
    /// multiplier update `γ‖E‖_F` is below `tol_change ‖Z‖_F`, or the
    /// relative residual is already below `stall_residual`.
    pub tol_change: f64,
    pub stall_residual: f64,
    pub support_threshold: f64,
    /// Known relative noise level; the residual target is never below it.
    pub noise_level: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: None,
            gamma: 0.005,
            entry_steps: None,
            max_iters: 20000,
            tol_residual: 1e-6,
            tol_change: 1e-9,
            stall_residual: 1e-2,
            support_threshold: 0.1,
            noise_level: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn residual_target(&self) -> f64 {
        self.tol_residual.max(self.noise_level)
    }

    pub fn entry_steps(&self) -> f64 {
        self.entry_steps.unwrap_or(if self.residual_target() >= 1e-3 {
            ENTRY_STEPS_NOISY
        } else {
            ENTRY_STEPS_NOISELESS
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if let Some(k) = self.entry_steps {
            if !(k >= 1.0) || !k.is_finite() {
                return Err(Error::InvalidParameter(format!("entry steps {k}")));
            }
        }
        if let Some(m) = self.step {
            if !(m > 0.0) {
                return Err(Error::InvalidParameter(format!("step {m}")));
            }
        }
        if !(0.0..1.0).contains(&self.support_threshold) {
            return Err(Error::InvalidParameter(format!(
                "support threshold {} outside [0, 1)",
                self.support_threshold
            )));
        }
        if self.max_iters == 0
            || !(self.tol_residual >= 0.0)
            || !(self.tol_change >= 0.0)
            || !(self.stall_residual >= 0.0)
        {
            return Err(Error::InvalidParameter("iteration limits".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Solution in the units of `D`.
    pub x: Array2<C64>,
    pub iterations: usize,
    /// `‖𝔸X_k − D‖_F` per iteration, in the units of `D`.
    pub residual_history: Vec<f64>,
    pub j21_history: Vec<f64>,
    pub converged: bool,
    /// Idle iterations at `X = 0` skipped before the loop started.
    pub skipped_iterations: usize,
    /// Step actually used on the scaled problem.
    pub step: f64,
    pub sigma_max_sq: f64,
    /// Shrink threshold `μγ` expressed in the units of `D`.
    pub threshold: f64,
}

pub fn row_norms(x: &Array2<C64>) -> Vec<f64> {
    x.outer_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect()
}

pub fn j21_norm(x: &Array2<C64>) -> f64 {
    row_norms(x).iter().sum()
}

fn shrink_rows(x: &mut Array2<C64>, t: f64) {
    for mut row in x.outer_iter_mut() {
        let n = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n <= t {
            row.fill(C64::new(0.0, 0.0));
        } else {
            let f = (n - t) / n;
            row.mapv_inplace(|z| z * f);
        }
    }
}

/// Prox of `t J_{2,1}`: every row shrinks toward zero by `t` in ℓ2 norm.
pub fn row_soft_threshold(x: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold {t}")));
    }
    let mut out = x.clone();
    shrink_rows(&mut out, t);
    Ok(out)
}

/// Rows whose ℓ2 norm exceeds `tau` times the largest row norm.
pub fn row_support(x: &Array2<C64>, tau: f64) -> Vec<usize> {
    let n = row_norms(x);
    let max = n.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    n.iter().enumerate().filter(|(_, &v)| v > tau * max).map(|(q, _)| q).collect()
}

fn fro(x: &Array2<C64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Estimate of `σ_max(A)²` from `iters` power iterations on `A*A`.
pub fn spectral_norm_sq<O: LinearOperator + ?Sized>(op: &O, iters: usize) -> f64 {
    let n = op.ncols();
    if n == 0 || op.nrows() == 0 {
        return 0.0;
    }
    let mut v = Array2::from_shape_fn((n, 1), |(q, _)| C64::new(1.0 + 0.37 * (q as f64).sin(), 0.0));
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let nv = fro(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.mapv_inplace(|z| z / nv);
        let w = op.adjoint(op.apply(v.view()).view());
        est = fro(&w);
        v = w;
    }
    est
}

/// Largest column count for which the Gram matrix is formed.
const GRAM_LIMIT: usize = 4096;

/// `A*(Z + E)` for the current iterate. Small problems keep `A`, `A*A`
/// and `A*Z` explicitly so each step only touches the active rows of `X`.
#[allow(clippy::large_enum_variant)]
enum Gradient {
    Dense,
    Gram { a: Array2<C64>, gram: Array2<C64>, ad: Array2<C64>, az: Array2<C64>, ae: Array2<C64> },
}

impl Gradient {
    fn new<O: LinearOperator + ?Sized>(op: &O, dn: &Array2<C64>, z0: f64) -> Self {
        let q = op.ncols();
        if q > GRAM_LIMIT {
            return Gradient::Dense;
        }
        let a = op.apply(Array2::<C64>::eye(q).view());
        let gram = op.adjoint(a.view());
        let ad = op.adjoint(dn.view());
        let az = ad.mapv(|v| v * z0);
        Gradient::Gram { a, gram, ad, az, ae: Array2::zeros((0, 0)) }
    }

    fn residual<O: LinearOperator + ?Sized>(&mut self, op: &O, dn: &Array2<C64>, x: &Array2<C64>) -> Array2<C64> {
        match self {
            Gradient::Dense => dn - &op.apply(x.view()),
            Gradient::Gram { a, gram, ad, ae, .. } => {
                let rows: Vec<usize> =
                    x.outer_iter().enumerate().filter(|(_, r)| r.iter().any(|z| z.norm_sqr() > 0.0)).map(|(q, _)| q).collect();
                let xs = x.select(Axis(0), &rows);
                *ae = &*ad - &gram.select(Axis(1), &rows).dot(&xs);
                dn - &a.select(Axis(1), &rows).dot(&xs)
            }
        }
    }

    /// Gradient direction; also advances the cached `A*Z` by `γ A*E`.
    fn step<O: LinearOperator + ?Sized>(&mut self, op: &O, z: &Array2<C64>, e: &Array2<C64>, gamma: f64) -> Array2<C64> {
        match self {
            Gradient::Dense => op.adjoint((z + e).view()),
            Gradient::Gram { az, ae, .. } => {
                let g = &*az + &*ae;
                az.scaled_add(C64::new(gamma, 0.0), ae);
                g
            }
        }
    }
}

/// GeLMA on `A X = D` with an arbitrary operator.
pub fn gelma<O: LinearOperator + ?Sized>(op: &O, d: &Array2<C64>, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if d.nrows() != op.nrows() {
        return Err(Error::Shape(format!("D has {} rows, operator {}", d.nrows(), op.nrows())));
    }
    if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("data matrix"));
    }
    let (q, k) = (op.ncols(), d.ncols());
    let sigma_sq = spectral_norm_sq(op, 30);
    let step = match cfg.step {
        Some(m) if m * sigma_sq > 0.9 => {
            return Err(Error::InvalidParameter(format!(
                "step {m} exceeds 0.9/sigma_max^2 = {}",
                0.9 / sigma_sq
            )))
        }
        Some(m) => m,
        None => 0.5 / sigma_sq.max(f64::MIN_POSITIVE),
    };
    let norm_d = fro(d);
    let zero = Array2::<C64>::zeros((q, k));
    if norm_d == 0.0 {
        return Ok(SolveResult {
            x: zero,
            iterations: 1,
            residual_history: vec![0.0],
            j21_history: vec![0.0],
            converged: true,
            skipped_iterations: 0,
            step,
            sigma_max_sq: sigma_sq,
            threshold: 0.0,
        });
    }

    // Scale D so that the largest row of A*D is 1/entry_steps: Z_k = kγD
    // then reaches the threshold μγ after about entry_steps iterations.
    let thr = step * cfg.gamma;
    let peak = row_norms(&op.adjoint(d.view())).into_iter().fold(0.0, f64::max);
    let scale = if peak > 0.0 { peak * cfg.entry_steps() } else { 1.0 };
    let dn = d.mapv(|z| z / scale);
    let target = cfg.residual_target() * norm_d / scale;

    // While X = 0 the multiplier grows as Z_k = kγD, so the idle start
    // is skipped in one jump to just before the first row can enter.
    let peak_n = peak / scale;
    let skipped = if peak_n > 0.0 {
        ((thr / (step * peak_n) - 1.0) / cfg.gamma).floor().max(0.0) as usize
    } else {
        0
    };
    let mut x = zero.clone();
    let mut z = dn.mapv(|v| v * (skipped as f64 * cfg.gamma));
    let mut grad = Gradient::new(op, &dn, skipped as f64 * cfg.gamma);
    let mut res_hist = Vec::new();
    let mut j21_hist = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut peak_old = 0.0f64;
    for it in 0..cfg.max_iters {
        iterations = it + 1;
        let e = grad.residual(op, &dn, &x);
        let r = fro(&e);
        res_hist.push(r * scale);
        j21_hist.push(j21_norm(&x) * scale);
        if !r.is_finite() {
            return Err(Error::Diverged { iteration: iterations, residual: r * scale });
        }
        // Growth is measured against the largest residual seen at least
        // 100 iterations back, so damped oscillations are not flagged.
        if it >= 100 {
            peak_old = peak_old.max(res_hist[it - 100]);
            if res_hist[it] > 10.0 * peak_old {
                return Err(Error::Diverged { iteration: iterations, residual: res_hist[it] });
            }
        }
        if r <= target {
            converged = true;
            break;
        }
        let g = grad.step(op, &z, &e, cfg.gamma);
        let mut xn = &x + &g.mapv(|v| v * step);
        shrink_rows(&mut xn, thr);
        z.zip_mut_with(&e, |zz, ee| *zz += ee * cfg.gamma);
        let nx = fro(&xn);
        let dx = fro(&(&xn - &x));
        x = xn;
        // A stationary X is the least-squares fit on its current support.
        // It is accepted once the misfit is small; otherwise Z keeps
        // growing until another row enters.
        let still = nx > 0.0 && dx <= cfg.tol_change * nx;
        let fixed = cfg.gamma * r <= cfg.tol_change * fro(&z);
        if still && (fixed || r <= cfg.stall_residual * norm_d / scale) {
            converged = true;
            break;
        }
    }
    x.mapv_inplace(|v| v * scale);
    Ok(SolveResult {
        x,
        iterations,
        residual_history: res_hist,
        j21_history: j21_hist,
        converged,
        skipped_iterations: skipped,
        step,
        sigma_max_sq: sigma_sq,
        threshold: thr * scale,
    })
}

pub fn gelma_mmv(problem: &MmvProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    gelma(&problem.a_ref, &problem.d, cfg)
}

/// Weighted backprojection of the whole cube.
pub fn migrate(data: &DataCube, traj: &Trajectory, grid: &ImageGrid, pulse: &Pulse) -> Result<Array1<C64>> {
    migrate_rows(data, traj, grid, pulse, 0..data.values.nrows())
}

/// Weighted backprojection using only the slow-time rows in `rows`.
pub fn migrate_rows(
    data: &DataCube,
    traj: &Trajectory,
    grid: &ImageGrid,
    pulse: &Pulse,
    rows: Range<usize>,
) -> Result<Array1<C64>> {
    if rows.end > data.values.nrows() || rows.start > rows.end {
        return Err(Error::IndexOutOfRange(format!("rows {rows:?}")));
    }
    let c = traj.wave_speed;
    let pos: Vec<Vec3> = rows.clone().map(|j| traj.position(data.slow_times[j])).collect::<Result<_>>()?;
    let l_o: Vec<f64> = pos.iter().map(|r| norm(sub(*r, grid.center))).collect();
    let k = pulse.k_o() * pulse.spectrum_level;
    let n = (rows.len() * data.values.ncols()).max(1) as f64;
    let w = (4.0 * PI).powi(2) / (k * k * n);
    let img: Vec<C64> = (0..grid.len())
        .into_par_iter()
        .map(|q| {
            let y = grid.point(q);
            let mut acc = C64::new(0.0, 0.0);
            for (i, j) in rows.clone().enumerate() {
                let dist = norm(sub(pos[i], y));
                let dd = dist - l_o[i];
                for (l, &om) in data.frequencies.iter().enumerate() {
                    acc += data.values[[j, l]] * dist * dist * C64::from_polar(1.0, -2.0 * om * dd / c);
                }
            }
            acc * w
        })
        .collect();
    Ok(Array1::from(img))
}

/// `(A*d)_q / ‖a_q‖²`.
pub fn matched_filter(a: &ModelMatrix, d: &Array1<C64>) -> Result<Array1<C64>> {
    if d.len() != a.values.nrows() {
        return Err(Error::Shape(format!("vector of length {}, matrix has {} rows", d.len(), a.values.nrows())));
    }
    let num = a.adjoint_vec(d);
    let col_sq = a.values.map_axis(Axis(0), |c| c.iter().map(|z| z.norm_sqr()).sum::<f64>());
    Ok(Array1::from_shape_fn(num.len(), |q| {
        if col_sq[q] > 0.0 {
            num[q] / col_sq[q]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}
