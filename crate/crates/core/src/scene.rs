//! Image window discretization and ground-truth reflectivities.
//!
//! Grid index `q = i_range * n_cross + i_cross`. Offsets run from
//! `-extent/2` to `+extent/2` inclusive along each axis.

use ndarray::Array2;

use crate::geometry::{add, cross, norm, scale, Vec3};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub center: Vec3,
    pub extent_range: f64,
    pub extent_cross: f64,
    pub step_range: f64,
    pub step_cross: f64,
    /// Horizontal unit vector of the range axis.
    pub range_axis: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub center: Vec3,
    pub extent_range: f64,
    pub extent_cross: f64,
    pub step_range: f64,
    pub step_cross: f64,
    pub range_axis: Vec3,
    pub cross_axis: Vec3,
    pub n_range: usize,
    pub n_cross: usize,
}

fn axis_count(extent: f64, step: f64) -> usize {
    // Tolerate round-off in extent/step before flooring.
    ((extent / step) + 1e-9).floor() as usize + 1
}

pub fn make_grid(spec: &GridSpec) -> Result<ImageGrid> {
    let ok = |x: f64| x.is_finite() && x >= 0.0;
    if !(spec.step_range > 0.0) || !(spec.step_cross > 0.0) {
        return Err(Error::InvalidParameter("grid steps must be positive".into()));
    }
    if !ok(spec.extent_range) || !ok(spec.extent_cross) {
        return Err(Error::InvalidParameter("grid extents must be non-negative".into()));
    }
    let zero_or_at_least = |e: f64, h: f64| e == 0.0 || e >= h;
    if !zero_or_at_least(spec.extent_range, spec.step_range)
        || !zero_or_at_least(spec.extent_cross, spec.step_cross)
    {
        return Err(Error::InvalidParameter(
            "grid extents must be zero (one pixel) or at least one step".into(),
        ));
    }
    if spec.center[2] != 0.0 {
        return Err(Error::InvalidParameter("window center must lie in z = 0".into()));
    }
    let r = [spec.range_axis[0], spec.range_axis[1], 0.0];
    let rn = norm(r);
    if !(rn > 0.0) {
        return Err(Error::InvalidParameter("range axis must be horizontal and nonzero".into()));
    }
    let range_axis = scale(r, 1.0 / rn);
    let cross_axis = cross([0.0, 0.0, 1.0], range_axis);
    Ok(ImageGrid {
        center: spec.center,
        extent_range: spec.extent_range,
        extent_cross: spec.extent_cross,
        step_range: spec.step_range,
        step_cross: spec.step_cross,
        range_axis,
        cross_axis,
        n_range: axis_count(spec.extent_range, spec.step_range),
        n_cross: axis_count(spec.extent_cross, spec.step_cross),
    })
}

impl ImageGrid {
    pub fn len(&self) -> usize {
        self.n_range * self.n_cross
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i_range: usize, i_cross: usize) -> usize {
        i_range * self.n_cross + i_cross
    }

    pub fn split(&self, q: usize) -> (usize, usize) {
        (q / self.n_cross, q % self.n_cross)
    }

    pub fn range_offset(&self, i_range: usize) -> f64 {
        -0.5 * (self.n_range - 1) as f64 * self.step_range + i_range as f64 * self.step_range
    }

    pub fn cross_offset(&self, i_cross: usize) -> f64 {
        -0.5 * (self.n_cross - 1) as f64 * self.step_cross + i_cross as f64 * self.step_cross
    }

    /// `Δy_q = y_q - y_o`.
    pub fn offset(&self, q: usize) -> Vec3 {
        let (i, j) = self.split(q);
        self.offset_at(self.range_offset(i), self.cross_offset(j))
    }

    pub fn offset_at(&self, range_m: f64, cross_m: f64) -> Vec3 {
        add(scale(self.range_axis, range_m), scale(self.cross_axis, cross_m))
    }

    pub fn point(&self, q: usize) -> Vec3 {
        add(self.center, self.offset(q))
    }

    pub fn offsets(&self) -> Vec<Vec3> {
        (0..self.len()).map(|q| self.offset(q)).collect()
    }

    /// Nearest pixel to an in-plane offset, or `None` outside the window.
    pub fn nearest(&self, range_m: f64, cross_m: f64) -> Option<usize> {
        let fr = (range_m - self.range_offset(0)) / self.step_range;
        let fc = (cross_m - self.cross_offset(0)) / self.step_cross;
        let inside = |f: f64, n: usize| f.is_finite() && f > -0.5 && f < n as f64 - 0.5;
        if !inside(fr, self.n_range) || !inside(fc, self.n_cross) {
            return None;
        }
        let ir = (fr.round().max(0.0) as usize).min(self.n_range - 1);
        let ic = (fc.round().max(0.0) as usize).min(self.n_cross - 1);
        Some(self.index(ir, ic))
    }
}

/// Dependence of a parametric profile on one index (sub-aperture or sub-band).
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    All,
    /// Nonzero (value 1) only at the listed indices.
    Only(Vec<usize>),
    /// `exp(-(i - center)² / (2 width²))`.
    Gaussian { center: f64, width: f64 },
}

impl Factor {
    pub fn at(&self, i: f64) -> f64 {
        match self {
            Factor::All => 1.0,
            Factor::Only(set) => {
                let k = i.round();
                if k >= 0.0 && set.contains(&(k as usize)) {
                    1.0
                } else {
                    0.0
                }
            }
            Factor::Gaussian { center, width } => {
                let x = (i - center) / width;
                (-0.5 * x * x).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reflectivity {
    Parametric { amplitude: C64, alpha: Factor, beta: Factor },
    /// Explicit `N_α × N_β` table.
    Table(Array2<C64>),
}

impl Reflectivity {
    pub fn isotropic(amplitude: f64) -> Self {
        Reflectivity::Parametric {
            amplitude: C64::new(amplitude, 0.0),
            alpha: Factor::All,
            beta: Factor::All,
        }
    }

    /// Value at fractional sub-aperture and sub-band coordinates. Integer
    /// coordinates give the frozen cell values.
    pub fn value(&self, alpha: f64, beta: f64) -> C64 {
        match self {
            Reflectivity::Parametric { amplitude, alpha: fa, beta: fb } => {
                amplitude * fa.at(alpha) * fb.at(beta)
            }
            Reflectivity::Table(t) => {
                let a = (alpha.round().max(0.0) as usize).min(t.nrows() - 1);
                let b = (beta.round().max(0.0) as usize).min(t.ncols() - 1);
                t[[a, b]]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Location {
    Pixel { i_range: usize, i_cross: usize },
    /// In-plane offset from `y_o` along the grid axes; off-grid values are a stress test.
    Offset { range_m: f64, cross_m: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub location: Location,
    pub reflectivity: Reflectivity,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
}

impl Scatterer {
    /// Grid pixel of the scatterer (nearest pixel for off-grid offsets).
    pub fn pixel(&self, grid: &ImageGrid) -> Result<usize> {
        match self.location {
            Location::Pixel { i_range, i_cross } => {
                if i_range >= grid.n_range || i_cross >= grid.n_cross {
                    return Err(Error::OutsideWindow(format!("pixel ({i_range}, {i_cross})")));
                }
                Ok(grid.index(i_range, i_cross))
            }
            Location::Offset { range_m, cross_m } => grid
                .nearest(range_m, cross_m)
                .ok_or_else(|| Error::OutsideWindow(format!("offset ({range_m}, {cross_m}) m"))),
        }
    }

    /// Exact offset `Δy` of the scatterer.
    pub fn offset(&self, grid: &ImageGrid) -> Result<Vec3> {
        match self.location {
            Location::Pixel { .. } => Ok(grid.offset(self.pixel(grid)?)),
            Location::Offset { range_m, cross_m } => {
                self.pixel(grid)?;
                Ok(grid.offset_at(range_m, cross_m))
            }
        }
    }

    fn check(&self, n_alpha: usize, n_beta: usize) -> Result<()> {
        let finite = |z: C64| z.re.is_finite() && z.im.is_finite();
        let any_nonzero = match &self.reflectivity {
            Reflectivity::Parametric { amplitude, .. } if !finite(*amplitude) => {
                return Err(Error::NonFinite("scatterer amplitude"))
            }
            Reflectivity::Table(t) => {
                if t.dim() != (n_alpha, n_beta) {
                    return Err(Error::Shape(format!(
                        "amplitude table {:?}, expected ({n_alpha}, {n_beta})",
                        t.dim()
                    )));
                }
                if !t.iter().all(|z| finite(*z)) {
                    return Err(Error::NonFinite("amplitude table"));
                }
                t.iter().any(|z| z.norm() > 0.0)
            }
            r => (0..n_alpha)
                .any(|a| (0..n_beta).any(|b| r.value(a as f64, b as f64).norm() > 0.0)),
        };
        if !any_nonzero {
            return Err(Error::InvalidParameter("scatterer with no nonzero amplitude".into()));
        }
        Ok(())
    }
}

impl Scene {
    pub fn validate(&self, grid: &ImageGrid, n_alpha: usize, n_beta: usize) -> Result<()> {
        for s in &self.scatterers {
            s.pixel(grid)?;
            s.check(n_alpha, n_beta)?;
        }
        Ok(())
    }

    /// Frozen reflectivity `ρ_q^(α,β)` summed over the scatterers on pixel `q`.
    pub fn sample_reflectivity(
        &self,
        grid: &ImageGrid,
        q: usize,
        alpha: usize,
        beta: usize,
        n_alpha: usize,
        n_beta: usize,
    ) -> Result<C64> {
        if q >= grid.len() || alpha >= n_alpha || beta >= n_beta {
            return Err(Error::IndexOutOfRange(format!("(q, α, β) = ({q}, {alpha}, {beta})")));
        }
        let mut v = C64::new(0.0, 0.0);
        for s in &self.scatterers {
            if s.pixel(grid)? == q {
                v += s.reflectivity.value(alpha as f64, beta as f64);
            }
        }
        Ok(v)
    }
}

/// Column of `(α, β)` in the reflectivity and data matrices.
pub fn column_index(alpha: usize, beta: usize, n_beta: usize) -> usize {
    alpha * n_beta + beta
}

pub fn column_pair(col: usize, n_beta: usize) -> (usize, usize) {
    (col / n_beta, col % n_beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `Q × (N_α N_β)`.
    pub values: Array2<C64>,
    pub support: Vec<usize>,
}

pub fn ground_truth_matrix(
    scene: &Scene,
    grid: &ImageGrid,
    n_alpha: usize,
    n_beta: usize,
) -> Result<GroundTruth> {
    scene.validate(grid, n_alpha, n_beta)?;
    let mut values = Array2::<C64>::zeros((grid.len(), n_alpha * n_beta));
    for s in &scene.scatterers {
        let q = s.pixel(grid)?;
        for a in 0..n_alpha {
            for b in 0..n_beta {
                values[[q, column_index(a, b, n_beta)]] += s.reflectivity.value(a as f64, b as f64);
            }
        }
    }
    let support = (0..grid.len())
        .filter(|&q| values.row(q).iter().any(|z| z.norm() > 0.0))
        .collect();
    Ok(GroundTruth { values, support })
}
