mod common;

use common::*;
use proptest::prelude::*;
use sarmmv::config::{preset, Setup};
use sarmmv::geometry::{add, dot, sub};
use sarmmv::scene::Scene;
use sarmmv::simulator::{add_noise, simulate, simulate_doppler, simulate_start_stop, DataModel, ProfileMode};
use sarmmv::C64;
use std::f64::consts::PI;

fn small(n_alpha: usize, n_beta: usize) -> Setup {
    let mut cfg = preset("gotcha").unwrap();
    cfg.segmentation.n_alpha = n_alpha;
    cfg.segmentation.n_beta = n_beta;
    cfg.build().unwrap()
}

fn ss(s: &Setup, sc: &Scene) -> sarmmv::simulator::DataCube {
    simulate_start_stop(sc, &s.grid, &s.traj, &s.pulse, &s.seg).unwrap()
}

fn dop(s: &Setup, sc: &Scene) -> sarmmv::simulator::DataCube {
    simulate_doppler(sc, &s.grid, &s.traj, &s.pulse, &s.seg).unwrap()
}

#[test]
fn empty_scene_is_zero() {
    let s = small(2, 2);
    let d = ss(&s, &Scene::default());
    assert_eq!(d.values.dim(), (2 * 41, 2 * 15));
    assert!(d.values.iter().all(|z| *z == C64::new(0.0, 0.0)));
    assert_eq!(d.model, DataModel::StartStop);
}

#[test]
fn reference_point_scatterer() {
    let s = small(2, 2);
    let d = ss(&s, &scene(vec![point(0.0, 0.0, 1.0)]));
    for (j, &t) in d.slow_times.iter().enumerate() {
        let l = dist(circle(t), [0.0; 3]);
        for (i, &w) in d.frequencies.iter().enumerate() {
            let k = w / C;
            let want = k * k / (4.0 * PI * l).powi(2);
            let z = d.values[[j, i]];
            assert_eq!(z.im, 0.0);
            assert!((z.re / want - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn cross_range_phase_sweep() {
    let s = small(1, 1);
    let d = ss(&s, &scene(vec![point(0.0, 10.0, 1.0)]));
    let l0 = s.seg.n_omega / 2;
    let mut total = 0.0;
    for j in 1..s.seg.n_s {
        total += (d.values[[j, l0]] / d.values[[j - 1, l0]]).arg();
    }
    let f = &s.seg.frames[0];
    let k = s.seg.centers_omega[0] / C;
    let a = (s.seg.n_s - 1) as f64 * V * HS;
    let cross = f.cross_offset(s.grid.offset_at(0.0, 10.0));
    let linear = 2.0 * k * a * cross / f.range;
    assert!((total.abs() / linear - 1.0).abs() < 0.01, "{total} vs {linear}");
    assert!((linear - 16.6).abs() < 0.1);
}

#[test]
fn doppler_at_zero_speed_matches() {
    let s = small(2, 2);
    let sc = scene(vec![point(4.0, -6.0, 1.0), point(-8.0, 3.0, 0.5)]);
    let a = ss(&s, &sc);
    let b = sarmmv::simulator::simulate_doppler_with_speed(&sc, &s.grid, &s.traj, &s.pulse, &s.seg, 0.0).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn doppler_phase_identity() {
    // d_dop / d_ss = exp(2iω(γ τ - γ_o τ_o)) pointwise for one scatterer.
    let s = small(2, 1);
    let y_off = s.grid.offset_at(6.0, -9.0);
    let y = add(s.grid.center, y_off);
    let a = ss(&s, &scene(vec![point(6.0, -9.0, 1.0)]));
    let b = dop(&s, &scene(vec![point(6.0, -9.0, 1.0)]));
    let mut worst = 0.0f64;
    for (j, &t) in a.slow_times.iter().enumerate() {
        let r = circle(t);
        let v = s.traj.velocity(t).unwrap();
        let (ly, lo) = (dist(r, y), dist(r, s.grid.center));
        let g = dot(v, sub(r, y)) / (ly * C);
        let go = dot(v, sub(r, s.grid.center)) / (lo * C);
        for (i, &w) in a.frequencies.iter().enumerate() {
            if b.values[[j, i]].norm() == 0.0 {
                continue;
            }
            let want = 2.0 * w * (g * ly - go * lo) / C;
            let got = (b.values[[j, i]] / a.values[[j, i]]).arg();
            worst = worst.max((got - want).abs());
        }
    }
    assert!(worst < 1e-6, "{worst}");
    // At the reference point the two models coincide.
    let a0 = ss(&s, &scene(vec![point(0.0, 0.0, 1.0)]));
    let b0 = dop(&s, &scene(vec![point(0.0, 0.0, 1.0)]));
    for (x, y) in a0.values.iter().zip(b0.values.iter()) {
        if y.norm() > 0.0 {
            assert!((x.arg() - y.arg()).abs() < 1e-9);
        }
    }
}

#[test]
fn doppler_deviation_over_window() {
    // Measured bound on |phase_dop - phase_ss| over the 40 m window.
    let s = small(8, 1);
    let mut worst = 0.0f64;
    for (r, c) in [(20.0, 20.0), (-20.0, 20.0), (20.0, -20.0), (-20.0, -20.0), (0.0, 20.0), (20.0, 0.0)] {
        let sc = scene(vec![point(r, c, 1.0)]);
        let (a, b) = (ss(&s, &sc), dop(&s, &sc));
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            if y.norm() > 0.0 {
                worst = worst.max((y / x).arg().abs());
            }
        }
    }
    assert!(worst < 0.05, "{worst}");
    assert!(worst > 1e-4, "{worst}");
}

#[test]
fn doppler_band_edge_warning() {
    // Fifteen sub-bands reach both band edges. On the GOTCHA circle the
    // shifts stay far inside the band, so exaggerate the speed.
    let s = small(1, 15);
    let sc = scene(vec![point(0.0, 15.0, 1.0)]);
    assert!(dop(&s, &sc).warnings.is_empty());
    let d = sarmmv::simulator::simulate_doppler_with_speed(&sc, &s.grid, &s.traj, &s.pulse, &s.seg, 1e5).unwrap();
    assert_eq!(d.model, DataModel::Doppler);
    assert!(d.warnings.iter().any(|w| w.contains("band")), "{:?}", d.warnings);
}

#[test]
fn scatterer_outside_window_rejected() {
    let s = small(1, 1);
    assert!(simulate_start_stop(&scene(vec![point(0.0, 25.0, 1.0)]), &s.grid, &s.traj, &s.pulse, &s.seg).is_err());
}

#[test]
fn linearity_both_models() {
    let s = small(2, 2);
    let (p1, p2) = (point(4.0, -6.0, 1.0), point(-8.0, 3.0, 0.5));
    for model in [DataModel::StartStop, DataModel::Doppler] {
        let run = |sc: Scene| simulate(&sc, &s.grid, &s.traj, &s.pulse, &s.seg, model, ProfileMode::Frozen).unwrap().values;
        let both = run(scene(vec![p1.clone(), p2.clone()]));
        let sum = run(scene(vec![p1.clone()])) + run(scene(vec![p2.clone()]));
        assert_eq!(both, sum);
    }
}

#[test]
fn continuous_profile_differs_from_frozen() {
    let s = small(4, 1);
    let sc = scene(vec![sarmmv::scene::Scatterer {
        location: sarmmv::scene::Location::Offset { range_m: 0.0, cross_m: 0.0 },
        reflectivity: sarmmv::scene::Reflectivity::Parametric {
            amplitude: C64::new(1.0, 0.0),
            alpha: sarmmv::scene::Factor::Gaussian { center: 1.5, width: 1.0 },
            beta: sarmmv::scene::Factor::All,
        },
    }]);
    let f = simulate(&sc, &s.grid, &s.traj, &s.pulse, &s.seg, DataModel::StartStop, ProfileMode::Frozen).unwrap();
    let c = simulate(&sc, &s.grid, &s.traj, &s.pulse, &s.seg, DataModel::StartStop, ProfileMode::Continuous).unwrap();
    // Frozen values are constant inside a sub-aperture; continuous ones vary.
    let l = 0;
    assert_eq!(f.values[[0, l]], f.values[[0, l]]);
    let ratio = |d: &sarmmv::simulator::DataCube, j: usize| d.values[[j, l]].norm() / d.values[[0, l]].norm();
    assert!((ratio(&f, 40) - 1.0).abs() < 1e-3);
    assert!((ratio(&c, 40) - 1.0).abs() > 0.1);
}

#[test]
fn noise_examples() {
    let s = small(8, 8);
    let d = ss(&s, &scene(vec![point(2.0, 3.0, 1.0), point(-10.0, 5.0, 0.7)]));
    assert_eq!(add_noise(&d, 0.0, 1).unwrap().values, d.values);
    assert!(add_noise(&d, -0.1, 1).is_err());
    let n1 = add_noise(&d, 0.1, 42).unwrap();
    let n2 = add_noise(&d, 0.1, 42).unwrap();
    assert_eq!(n1.values, n2.values);
    assert_ne!(add_noise(&d, 0.1, 43).unwrap().values, n1.values);
    assert!(d.values.len() >= 10_000);
    let fro = |a: &ndarray::Array2<C64>| a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ratio = fro(&(&n1.values - &d.values)) / fro(&d.values);
    assert!((0.095..=0.105).contains(&ratio), "{ratio}");
    assert_eq!(n1.noise_level, 0.1);
}

#[test]
fn noise_ratio_monte_carlo() {
    let s = small(8, 8);
    let d = ss(&s, &scene(vec![point(2.0, 3.0, 1.0)]));
    let fro = |a: &ndarray::Array2<C64>| a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let inside = (0..100u64)
        .filter(|&seed| {
            let n = add_noise(&d, 0.1, seed).unwrap();
            let r = fro(&(&n.values - &d.values)) / fro(&d.values);
            (0.095..=0.105).contains(&r)
        })
        .count();
    assert!(inside >= 99, "{inside}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn linear_in_amplitude(a in 0.1f64..3.0, r in -18.0f64..18.0, c in -18.0f64..18.0) {
        let s = small(1, 1);
        let r = (r / 2.0).round() * 2.0;
        let c = c.round();
        let one = ss(&s, &scene(vec![point(r, c, 1.0)])).values;
        let scaled = ss(&s, &scene(vec![point(r, c, a)])).values;
        for (x, y) in one.iter().zip(scaled.iter()) {
            prop_assert!((x * a - y).norm() <= 1e-12 * y.norm().max(1e-300));
        }
    }
}
