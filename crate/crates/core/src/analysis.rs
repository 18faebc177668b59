//! Coherence diagnostics (numeric Gram entries against closed-form sinc
//! products) and reconstruction scoring.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::geometry::{dot, mat_vec, sub};
use crate::model::{ModelMatrix, ReflectivityField};
use crate::scene::{GroundTruth, ImageGrid};
use crate::segmentation::Segmentation;
use crate::solver::row_support;
use crate::{Error, Result, C64};

/// `sin(x)/x`, 1 at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `|Σ_{k<n} e^{ikθ}| / n`.
pub fn dirichlet(theta: f64, n: usize) -> f64 {
    let half = 0.5 * theta;
    let s = half.sin();
    if s.abs() < 1e-12 {
        return 1.0;
    }
    ((n as f64 * half).sin() / (n as f64 * s)).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherencePair {
    pub i: usize,
    pub j: usize,
    pub numeric: f64,
    pub predicted: f64,
    pub abs_error: f64,
    /// Per-sample phase steps of both factors at most π/2, so the sums
    /// behave like the integrals behind the prediction.
    pub valid: bool,
    /// Pair lies within the near-field window of resolution cells.
    pub near: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub max_column_offdiag: Option<f64>,
    pub max_row_offdiag: Option<f64>,
    /// Largest `|numeric - predicted|` over valid near pairs.
    pub max_abs_error: f64,
    pub n_invalid: usize,
    /// Largest coherence between grid neighbours (columns only).
    pub adjacent_max: Option<f64>,
    pub pairs: Vec<CoherencePair>,
}

impl CoherenceReport {
    /// Neighbouring pixels are strongly coherent: the grid is finer than the resolution.
    pub fn fine_grid(&self) -> bool {
        self.adjacent_max.is_some_and(|v| v > 0.5)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,numeric,predicted,abs_error,valid,near\n");
        for p in &self.pairs {
            s.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{},{}\n",
                p.i, p.j, p.numeric, p.predicted, p.abs_error, p.valid as u8, p.near as u8
            ));
        }
        s
    }
}

/// Normalized Gram `|⟨a_i, a_j⟩| / (‖a_i‖ ‖a_j‖)` of the columns.
fn normalized_gram(a: &Array2<C64>) -> Array2<f64> {
    let norms: Vec<f64> =
        a.columns().into_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let g = a.t().mapv(|z| z.conj()).dot(a);
    Array2::from_shape_fn(g.dim(), |(i, j)| {
        let d = norms[i] * norms[j];
        if d > 0.0 {
            g[[i, j]].norm() / d
        } else {
            0.0
        }
    })
}

/// Number of near-window resolution cells.
pub const NEAR_CELLS: f64 = 5.0;
/// Far pairs drawn at random in addition to the near ones.
const FAR_SAMPLES: usize = 2000;

/// Column coherence of the subset matrix `(α, β)` against the sinc product
/// in the range offset `m·δ` and cross-range offset `t·Pδ`.
pub fn column_coherence(
    a: &ModelMatrix,
    grid: &ImageGrid,
    seg: &Segmentation,
    alpha: usize,
    beta: usize,
) -> Result<CoherenceReport> {
    if a.values.ncols() != grid.len() || a.values.nrows() != seg.subset_len() {
        return Err(Error::Shape("column coherence: matrix does not match grid and segmentation".into()));
    }
    if alpha >= seg.n_alpha || beta >= seg.n_beta {
        return Err(Error::IndexOutOfRange(format!("subset ({alpha}, {beta})")));
    }
    let f = &seg.frames[alpha];
    let c = seg.wave_speed;
    let kb = seg.k_beta(beta);
    let b_eff = seg.effective_subband();
    let a_eff = seg.effective_aperture();
    let res_r = c / seg.subband_hz;
    let res_c = 2.0 * std::f64::consts::PI / kb * f.range / seg.aperture;
    let g = normalized_gram(&a.values);
    let q = grid.len();
    let pts = grid.offsets();

    let eval = |i: usize, j: usize| {
        let d = sub(pts[j], pts[i]);
        let u = dot(f.m, d);
        let x = dot(f.t, mat_vec(&f.projector, d));
        let th_w = 2.0 * seg.omega_step * u / c;
        let th_s = 2.0 * kb * seg.speed * seg.slow_step * x / f.range;
        let pred = (sinc(2.0 * std::f64::consts::PI * b_eff * u / c) * sinc(kb * a_eff * x / f.range)).abs();
        let numeric = g[[i, j]];
        let near = u.abs() <= NEAR_CELLS * res_r && x.abs() <= NEAR_CELLS * res_c;
        let valid = th_w.abs() <= std::f64::consts::FRAC_PI_2 && th_s.abs() <= std::f64::consts::FRAC_PI_2;
        CoherencePair { i, j, numeric, predicted: pred, abs_error: (numeric - pred).abs(), valid, near }
    };

    let mut pairs: Vec<CoherencePair> = (0..q)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..q).map(move |j| (i, j)))
        .map(|(i, j)| eval(i, j))
        .filter(|p| p.near)
        .collect();
    let total = q * q.saturating_sub(1) / 2;
    if total > pairs.len() {
        let mut rng = ChaCha20Rng::seed_from_u64(0x5a5a);
        for _ in 0..FAR_SAMPLES {
            let i = rng.random_range(0..q);
            let j = rng.random_range(0..q);
            if i != j {
                let p = eval(i.min(j), i.max(j));
                if !p.near {
                    pairs.push(p);
                }
            }
        }
    }

    let mut max_off = 0.0f64;
    for i in 0..q {
        for j in i + 1..q {
            max_off = max_off.max(g[[i, j]]);
        }
    }
    let mut adj = 0.0f64;
    for ir in 0..grid.n_range {
        for ic in 0..grid.n_cross {
            let i = grid.index(ir, ic);
            if ir + 1 < grid.n_range {
                adj = adj.max(g[[i, grid.index(ir + 1, ic)]]);
            }
            if ic + 1 < grid.n_cross {
                adj = adj.max(g[[i, grid.index(ir, ic + 1)]]);
            }
        }
    }
    Ok(summarize(pairs, Some(max_off), None, (q > 1).then_some(adj)))
}

fn summarize(
    pairs: Vec<CoherencePair>,
    col: Option<f64>,
    row: Option<f64>,
    adjacent: Option<f64>,
) -> CoherenceReport {
    let max_abs_error = pairs.iter().filter(|p| p.valid && p.near).map(|p| p.abs_error).fold(0.0, f64::max);
    let n_invalid = pairs.iter().filter(|p| !p.valid).count();
    CoherenceReport {
        max_column_offdiag: col,
        max_row_offdiag: row,
        max_abs_error,
        n_invalid,
        adjacent_max: adjacent,
        pairs,
    }
}

/// Row coherence of the subset matrix `(α, β)` against the sinc product
/// over the projected effective window extents.
pub fn row_coherence(
    a: &ModelMatrix,
    grid: &ImageGrid,
    seg: &Segmentation,
    alpha: usize,
    beta: usize,
) -> Result<CoherenceReport> {
    if a.values.ncols() != grid.len() || a.values.nrows() != seg.subset_len() {
        return Err(Error::Shape("row coherence: matrix does not match grid and segmentation".into()));
    }
    if alpha >= seg.n_alpha || beta >= seg.n_beta {
        return Err(Error::IndexOutOfRange(format!("subset ({alpha}, {beta})")));
    }
    let f = &seg.frames[alpha];
    let c = seg.wave_speed;
    let kb = seg.k_beta(beta);
    // Phase per unit grid step along each axis, for a unit (Δω, Δs) change.
    let proj = |axis| (dot(f.m, axis), dot(f.t, mat_vec(&f.projector, axis)));
    let (mr, tr) = proj(grid.range_axis);
    let (mc, tc) = proj(grid.cross_axis);
    let (nr, nc) = (grid.n_range, grid.n_cross);
    let (hr, hc) = (grid.step_range, grid.step_cross);
    let wr = nr as f64 * hr;
    let wc = nc as f64 * hc;
    let g = normalized_gram(&a.values.t().to_owned());
    let n = seg.subset_len();
    let ns = seg.n_s;
    let eval = |r1: usize, r2: usize| {
        let (l1, j1) = (r1 / ns, r1 % ns);
        let (l2, j2) = (r2 / ns, r2 % ns);
        let p1 = 2.0 * (seg.offsets_omega[l2] - seg.offsets_omega[l1]) / c;
        let p2 = 2.0 * kb * seg.speed * (seg.offsets_s[j2] - seg.offsets_s[j1]) / f.range;
        let kr = p1 * mr + p2 * tr;
        let kc = p1 * mc + p2 * tc;
        let pred = (sinc(0.5 * kr * wr) * sinc(0.5 * kc * wc)).abs();
        let numeric = g[[r1, r2]];
        let valid = (kr * hr).abs() <= std::f64::consts::FRAC_PI_2 && (kc * hc).abs() <= std::f64::consts::FRAC_PI_2;
        CoherencePair { i: r1, j: r2, numeric, predicted: pred, abs_error: (numeric - pred).abs(), valid, near: true }
    };
    let pairs: Vec<CoherencePair> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| eval(i, j))
        .collect();
    let max_off = pairs.iter().map(|p| p.numeric).fold(0.0, f64::max);
    Ok(summarize(pairs, None, Some(max_off), None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileError {
    pub pixel: usize,
    /// RMSE of the β-averaged modulus as a function of α.
    pub direction_rmse: f64,
    /// RMSE of the α-averaged modulus as a function of β.
    pub frequency_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub estimated_support: Vec<usize>,
    /// `‖|R_est| - |R_true|‖_F / ‖R_true‖_F` over all rows.
    pub relative_error: f64,
    /// The same, restricted to the true support rows.
    pub relative_error_support: f64,
    /// Largest `||R_est| - |R_true||` on the true support, relative to the row peak of `|R_true|`.
    pub max_entry_error: f64,
    pub profiles: Vec<ProfileError>,
    pub migration_hit_rate: Option<f64>,
}

/// Score the estimate against the truth. Comparisons use moduli.
pub fn score(est: &ReflectivityField, truth: &GroundTruth, tau: f64) -> Result<ScoreReport> {
    score_values(&est.values, truth, tau)
}

pub fn score_values(est: &Array2<C64>, truth: &GroundTruth, tau: f64) -> Result<ScoreReport> {
    if est.dim() != truth.values.dim() {
        return Err(Error::Shape(format!("estimate {:?} vs truth {:?}", est.dim(), truth.values.dim())));
    }
    let supp = row_support(est, tau);
    let hits = supp.iter().filter(|q| truth.support.contains(q)).count();
    let precision = match (supp.is_empty(), truth.support.is_empty()) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        _ => hits as f64 / supp.len() as f64,
    };
    let recall = if truth.support.is_empty() { 1.0 } else { hits as f64 / truth.support.len() as f64 };

    let me = est.mapv(|z| z.norm());
    let mt = truth.values.mapv(|z| z.norm());
    let diff = &me - &mt;
    let fro = |a: &Array2<f64>, rows: Option<&[usize]>| -> f64 {
        match rows {
            None => a.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Some(r) => r.iter().map(|&q| a.row(q).iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt(),
        }
    };
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    let relative_error = rel(fro(&diff, None), fro(&mt, None));
    let relative_error_support = rel(fro(&diff, Some(&truth.support)), fro(&mt, Some(&truth.support)));
    let mut max_entry_error = 0.0f64;
    for &q in &truth.support {
        let peak = mt.row(q).iter().cloned().fold(0.0, f64::max);
        for (e, t) in me.row(q).iter().zip(mt.row(q)) {
            max_entry_error = max_entry_error.max(rel((e - t).abs(), peak));
        }
    }
    Ok(ScoreReport {
        precision,
        recall,
        estimated_support: supp,
        relative_error,
        relative_error_support,
        max_entry_error,
        profiles: Vec::new(),
        migration_hit_rate: None,
    })
}

impl ScoreReport {
    /// Fill per-scatterer direction/frequency profile errors.
    pub fn with_profiles(mut self, est: &Array2<C64>, truth: &GroundTruth, n_alpha: usize, n_beta: usize) -> Self {
        let prof = |m: &Array2<C64>, q: usize| {
            let mut dir = vec![0.0; n_alpha];
            let mut fr = vec![0.0; n_beta];
            for a in 0..n_alpha {
                for b in 0..n_beta {
                    let v = m[[q, a * n_beta + b]].norm();
                    dir[a] += v / n_beta as f64;
                    fr[b] += v / n_alpha as f64;
                }
            }
            (dir, fr)
        };
        let rmse = |x: &[f64], y: &[f64]| {
            (x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len().max(1) as f64).sqrt()
        };
        self.profiles = truth
            .support
            .iter()
            .map(|&q| {
                let (de, fe) = prof(est, q);
                let (dt, ft) = prof(&truth.values, q);
                ProfileError { pixel: q, direction_rmse: rmse(&de, &dt), frequency_rmse: rmse(&fe, &ft) }
            })
            .collect();
        self
    }

    /// Fraction of true pixels found among the strongest local peaks of the migration image.
    pub fn with_migration(mut self, image: &Array1<C64>, grid: &ImageGrid, truth: &GroundTruth) -> Self {
        if truth.support.is_empty() {
            self.migration_hit_rate = Some(1.0);
            return self;
        }
        let mag: Vec<f64> = image.iter().map(|z| z.norm()).collect();
        let peaks = top_peaks(&mag, grid, truth.support.len());
        let hits = truth.support.iter().filter(|q| peaks.contains(q)).count();
        self.migration_hit_rate = Some(hits as f64 / truth.support.len() as f64);
        self
    }
}

/// Indices of the `k` largest strict-or-plateau local maxima (8-neighbourhood), largest first.
pub fn top_peaks(values: &[f64], grid: &ImageGrid, k: usize) -> Vec<usize> {
    let mut peaks: Vec<usize> = (0..grid.len())
        .filter(|&q| {
            let v = values[q];
            if !(v > 0.0) {
                return false;
            }
            let (ir, ic) = grid.split(q);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (r, c) = (ir as i64 + dr, ic as i64 + dc);
                    if (dr, dc) == (0, 0) || r < 0 || c < 0 || r >= grid.n_range as i64 || c >= grid.n_cross as i64 {
                        continue;
                    }
                    if values[grid.index(r as usize, c as usize)] > v {
                        return false;
                    }
                }
            }
            true
        })
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    peaks.truncate(k);
    peaks
}

/// Per-pixel maximum of `|ρ|` over all columns.
pub fn peak_map(values: &Array2<C64>) -> Vec<f64> {
    values.outer_iter().map(|r| r.iter().map(|z| z.norm()).fold(0.0, f64::max)).collect()
}
