use std::f64::consts::PI;

use proptest::prelude::*;
use sarmmv::waveform::{FrequencySampling, Pulse};

fn gotcha() -> Pulse {
    Pulse::new(9.6e9, 622e6, 1.0, 3e8).unwrap()
}

#[test]
fn spectrum_examples() {
    let p = Pulse::new(9.6e9, 622e6, 2.5, 3e8).unwrap();
    let w = p.omega_o();
    assert_eq!(p.spectrum(w), 2.5);
    assert_eq!(p.spectrum(w + PI * 622e6 * 1.001), 0.0);
    assert_eq!(p.spectrum(w + 0.9 * PI * 622e6), 2.5);
}

#[test]
fn wavenumber_examples() {
    let p = gotcha();
    assert!((p.k_o() - 2.0 * PI * 32.0).abs() < 1e-9);
    assert!((p.k_o() - 201.06).abs() < 0.01);
    assert!((p.wavelength() - 0.03125).abs() < 1e-12);
    assert_eq!(p.wavenumber(3e8), 1.0);
    assert_eq!(p.wavenumber(2.0 * p.omega_o()), 2.0 * p.k_o());
}

#[test]
fn pulse_invariants_enforced() {
    assert!(Pulse::new(9.6e9, 2e9, 1.0, 3e8).is_err());
    assert!(Pulse::new(9.6e9, 622e6, 0.0, 3e8).is_err());
    assert!(Pulse::new(-1.0, 622e6, 1.0, 3e8).is_err());
}

#[test]
fn sampling_inside_band() {
    let p = gotcha();
    let (lo, hi) = p.band();
    let s = FrequencySampling::uniform(lo, hi, 15).unwrap();
    assert!(s.within(&p));
    assert_eq!(s.samples.len(), 15);
    assert!((s.step - 2.0 * PI * 622e6 / 14.0).abs() < 1e-3);
    let out = FrequencySampling::uniform(lo, hi * 1.01, 3).unwrap();
    assert!(!out.within(&p));
    assert!(FrequencySampling::uniform(hi, lo, 3).is_err());
}

#[test]
fn energy_quadrature() {
    // Midpoint rule with the band edges on cell boundaries.
    let p = Pulse::new(9.6e9, 622e6, 1.7, 3e8).unwrap();
    let (lo, hi) = p.band();
    let n = 6000;
    let (a, b) = (lo - 0.25 * (hi - lo), hi + 0.25 * (hi - lo));
    let h = (b - a) / n as f64;
    let e: f64 = (0..n).map(|i| p.spectrum(a + (i as f64 + 0.5) * h).powi(2)).sum::<f64>() * h;
    let want = 1.7f64.powi(2) * 2.0 * PI * 622e6;
    assert!((e / want - 1.0).abs() < 1e-10, "{}", e / want - 1.0);
}

proptest! {
    #[test]
    fn spectrum_even_about_carrier(x in 0.0f64..2.0) {
        let p = gotcha();
        let d = x * PI * 622e6;
        prop_assert_eq!(p.spectrum(p.omega_o() + d), p.spectrum(p.omega_o() - d));
    }
}
