//! Idealized compressed-chirp pulse: a flat spectrum on the band
//! `[ω_o - πB, ω_o + πB]` and zero elsewhere.

use std::f64::consts::PI;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    /// Carrier frequency `f_o` in Hz.
    pub carrier_hz: f64,
    /// Bandwidth `B` in Hz.
    pub bandwidth_hz: f64,
    /// `|f̂(ω_o)|`.
    pub spectrum_level: f64,
    pub wave_speed: f64,
}

impl Pulse {
    pub fn new(carrier_hz: f64, bandwidth_hz: f64, spectrum_level: f64, wave_speed: f64) -> Result<Self> {
        if !(carrier_hz > 0.0) || !(bandwidth_hz > 0.0) || !(wave_speed > 0.0) {
            return Err(Error::InvalidParameter(
                "carrier, bandwidth and wave speed must be positive".into(),
            ));
        }
        if !(spectrum_level > 0.0) {
            return Err(Error::InvalidParameter("spectrum level must be positive".into()));
        }
        if bandwidth_hz / carrier_hz >= 0.2 {
            return Err(Error::InvalidParameter(format!(
                "narrow band model needs B/f_o < 0.2, got {}",
                bandwidth_hz / carrier_hz
            )));
        }
        Ok(Pulse { carrier_hz, bandwidth_hz, spectrum_level, wave_speed })
    }

    pub fn omega_o(&self) -> f64 {
        2.0 * PI * self.carrier_hz
    }

    pub fn wavelength(&self) -> f64 {
        self.wave_speed / self.carrier_hz
    }

    pub fn k_o(&self) -> f64 {
        self.omega_o() / self.wave_speed
    }

    /// Angular band edges `ω_o ∓ πB`.
    pub fn band(&self) -> (f64, f64) {
        let w = self.omega_o();
        let h = PI * self.bandwidth_hz;
        (w - h, w + h)
    }

    /// `|f̂(ω)|`. The band is closed, with a relative guard of `1e-8 ω_o`
    /// so that lattice samples placed on the edges stay inside after
    /// floating point reconstruction.
    pub fn spectrum(&self, omega: f64) -> f64 {
        let (lo, hi) = self.band();
        let tol = 1e-8 * self.omega_o();
        if omega >= lo - tol && omega <= hi + tol {
            self.spectrum_level
        } else {
            0.0
        }
    }

    pub fn wavenumber(&self, omega: f64) -> f64 {
        omega / self.wave_speed
    }
}

/// Uniform angular frequency samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySampling {
    pub samples: Vec<f64>,
    pub step: f64,
}

impl FrequencySampling {
    /// `n` samples on `[lo, hi]` inclusive; a single sample sits at the midpoint.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(hi >= lo) {
            return Err(Error::InvalidParameter("frequency sampling".into()));
        }
        if n == 1 {
            return Ok(FrequencySampling { samples: vec![0.5 * (lo + hi)], step: 0.0 });
        }
        let step = (hi - lo) / (n - 1) as f64;
        let samples = (0..n).map(|l| lo + l as f64 * step).collect();
        Ok(FrequencySampling { samples, step })
    }

    pub fn within(&self, pulse: &Pulse) -> bool {
        self.samples.iter().all(|&w| pulse.spectrum(w) > 0.0)
    }
}
