//! Platform trajectory, travel times, sub-aperture frames and Doppler
//! factors.
//!
//! Coordinates are meters in a right-handed frame whose `z = 0` plane is
//! the (flat) imaging surface. A circular path is centred on the `z` axis
//! and its angle at slow time `s` is `V s / R`, measured from `+x`.

use crate::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

pub type Mat3 = [[f64; 3]; 3];

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// `I - u uᵀ` for a unit vector `u`.
pub fn orthogonal_projector(u: Vec3) -> Mat3 {
    let mut p = [[0.0; 3]; 3];
    for (i, row) in p.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 1.0 } else { 0.0 } - u[i] * u[j];
        }
    }
    p
}

fn finite3(v: Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Path {
    Circular { height: f64, radius: f64 },
    /// Piecewise-linear through `points[i]` at `times[i]` (strictly increasing).
    Sampled { times: Vec<f64>, points: Vec<Vec3> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub path: Path,
    /// Platform speed `V` in m/s.
    pub speed: f64,
    /// Slow time step `h_s` in seconds.
    pub slow_time_step: f64,
    /// Number of slow time samples `N_s`.
    pub n_slow: usize,
    /// Wave speed `c` in m/s.
    pub wave_speed: f64,
}

impl Trajectory {
    pub fn circular(
        height: f64,
        radius: f64,
        speed: f64,
        slow_time_step: f64,
        n_slow: usize,
        wave_speed: f64,
    ) -> Result<Self> {
        if !(radius > 0.0) || !height.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "circle radius {radius} / height {height}"
            )));
        }
        let t = Trajectory {
            path: Path::Circular { height, radius },
            speed,
            slow_time_step,
            n_slow,
            wave_speed,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn sampled(
        times: Vec<f64>,
        points: Vec<Vec3>,
        speed: f64,
        wave_speed: f64,
    ) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::InvalidParameter(
                "sampled path needs at least two (time, point) pairs".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample times must increase".into()));
        }
        if !points.iter().all(|p| finite3(*p)) {
            return Err(Error::NonFinite("trajectory point"));
        }
        let n = times.len();
        let step = (times[n - 1] - times[0]) / (n - 1) as f64;
        let t = Trajectory {
            path: Path::Sampled { times, points },
            speed,
            slow_time_step: step,
            n_slow: n,
            wave_speed,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0) || !(self.slow_time_step > 0.0) || !(self.wave_speed > 0.0) {
            return Err(Error::InvalidParameter(
                "speed, slow time step and wave speed must be positive".into(),
            ));
        }
        if self.n_slow == 0 {
            return Err(Error::InvalidParameter("n_slow must be at least 1".into()));
        }
        Ok(())
    }

    /// Slow time span `[0, (N_s - 1) h_s]` covered by the recording.
    pub fn span(&self) -> (f64, f64) {
        match &self.path {
            Path::Sampled { times, .. } => (times[0], times[times.len() - 1]),
            Path::Circular { .. } => (0.0, (self.n_slow - 1) as f64 * self.slow_time_step),
        }
    }

    /// Whether `s` lies outside the recorded span (extrapolation).
    pub fn is_extrapolated(&self, s: f64) -> bool {
        let (lo, hi) = self.span();
        let tol = 1e-9 * self.slow_time_step;
        s < lo - tol || s > hi + tol
    }

    /// Length of the synthetic aperture covered by the recording, `V (t_end - t_start)`.
    pub fn aperture_length(&self) -> f64 {
        let (lo, hi) = self.span();
        self.speed * (hi - lo)
    }

    /// Radius of curvature, infinite for sampled paths.
    pub fn curvature_radius(&self) -> f64 {
        match &self.path {
            Path::Circular { radius, .. } => *radius,
            Path::Sampled { .. } => f64::INFINITY,
        }
    }

    // Segment index and local fraction for a sampled path, clamped to the end segments.
    fn locate(times: &[f64], s: f64) -> (usize, f64) {
        let n = times.len();
        let i = match times.binary_search_by(|t| t.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        (i, (s - times[i]) / (times[i + 1] - times[i]))
    }

    pub fn position(&self, s: f64) -> Result<Vec3> {
        if !s.is_finite() {
            return Err(Error::NonFinite("slow time"));
        }
        Ok(match &self.path {
            Path::Circular { height, radius } => {
                let th = self.speed * s / radius;
                [radius * th.cos(), radius * th.sin(), *height]
            }
            Path::Sampled { times, points } => {
                let (i, f) = Self::locate(times, s);
                add(points[i], scale(sub(points[i + 1], points[i]), f))
            }
        })
    }

    /// Velocity `r'(s)`.
    pub fn velocity(&self, s: f64) -> Result<Vec3> {
        if !s.is_finite() {
            return Err(Error::NonFinite("slow time"));
        }
        Ok(match &self.path {
            Path::Circular { radius, .. } => {
                let th = self.speed * s / radius;
                [-self.speed * th.sin(), self.speed * th.cos(), 0.0]
            }
            Path::Sampled { times, points } => {
                let (i, _) = Self::locate(times, s);
                scale(sub(points[i + 1], points[i]), 1.0 / (times[i + 1] - times[i]))
            }
        })
    }

    /// One-way travel time `|r(s) - y| / c`.
    pub fn travel_time(&self, s: f64, y: Vec3) -> Result<f64> {
        if !finite3(y) {
            return Err(Error::NonFinite("point"));
        }
        Ok(norm(sub(self.position(s)?, y)) / self.wave_speed)
    }

    /// Unit vector from `y` toward the platform.
    pub fn look_direction(&self, s: f64, y: Vec3) -> Result<Vec3> {
        let d = sub(self.position(s)?, y);
        let l = norm(d);
        if !(l > 0.0) {
            return Err(Error::ZeroRange(s));
        }
        Ok(scale(d, 1.0 / l))
    }

    /// Doppler factor `γ(s, y) = r'(s)·m(s, y) / c`.
    pub fn doppler_factor(&self, s: f64, y: Vec3) -> Result<f64> {
        let m = self.look_direction(s, y)?;
        Ok(dot(self.velocity(s)?, m) / self.wave_speed)
    }

    pub fn frame(&self, center_time: f64, y_o: Vec3) -> Result<SubapertureFrame> {
        let r = self.position(center_time)?;
        let d = sub(r, y_o);
        let range = norm(d);
        if !(range > 0.0) {
            return Err(Error::ZeroRange(center_time));
        }
        let m = scale(d, 1.0 / range);
        let t = normalize(self.velocity(center_time)?);
        let n = match &self.path {
            Path::Circular { .. } => normalize([-r[0], -r[1], 0.0]),
            // Horizontal left normal of the tangent.
            Path::Sampled { .. } => {
                let h = cross([0.0, 0.0, 1.0], t);
                let hn = norm(h);
                if hn > 0.0 {
                    scale(h, 1.0 / hn)
                } else {
                    [1.0, 0.0, 0.0]
                }
            }
        };
        Ok(SubapertureFrame {
            center_time,
            center_position: r,
            m,
            t,
            n,
            range,
            projector: orthogonal_projector(m),
        })
    }
}

/// Local geometry of one sub-aperture seen from the reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubapertureFrame {
    pub center_time: f64,
    pub center_position: Vec3,
    /// Unit range vector from `y_o` to the platform.
    pub m: Vec3,
    /// Unit tangent of the path.
    pub t: Vec3,
    /// Unit normal toward the centre of curvature.
    pub n: Vec3,
    /// `L = |r(s*) - y_o|`.
    pub range: f64,
    /// `P = I - m mᵀ`.
    pub projector: Mat3,
}

impl SubapertureFrame {
    /// `m · Δy`.
    pub fn range_offset(&self, dy: Vec3) -> f64 {
        dot(self.m, dy)
    }

    /// `t · P Δy`.
    pub fn cross_offset(&self, dy: Vec3) -> f64 {
        dot(self.t, mat_vec(&self.projector, dy))
    }

    /// `Δy · P Δy`.
    pub fn quadratic(&self, dy: Vec3) -> f64 {
        dot(dy, mat_vec(&self.projector, dy))
    }
}
