mod common;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sarmmv::analysis::*;
use sarmmv::config::{preset, Setup};
use sarmmv::model::{assemble_subset, ModelMatrix};
use sarmmv::scene::{ground_truth_matrix, GroundTruth};
use sarmmv::{Error, C64};
use std::f64::consts::PI;
use std::sync::OnceLock;

fn gotcha_setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let mut cfg = preset("gotcha").unwrap();
        cfg.segmentation.n_alpha = 1;
        cfg.segmentation.n_beta = 1;
        cfg.build().unwrap()
    })
}

fn subset() -> &'static ModelMatrix {
    static A: OnceLock<ModelMatrix> = OnceLock::new();
    A.get_or_init(|| {
        let s = gotcha_setup();
        assemble_subset(&s.traj, &s.grid, &s.seg, &s.pulse, 0, 0).unwrap()
    })
}

fn coh(a: &Array2<C64>, i: usize, j: usize) -> f64 {
    let (u, v) = (a.column(i), a.column(j));
    let ip: C64 = u.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
    let nu = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    ip.norm() / (nu * nv)
}

fn column_report() -> &'static CoherenceReport {
    static R: OnceLock<CoherenceReport> = OnceLock::new();
    R.get_or_init(|| column_coherence(subset(), &gotcha_setup().grid, &gotcha_setup().seg, 0, 0).unwrap())
}

#[test]
fn diagonal_coherence_is_one() {
    let a = &subset().values;
    for q in [0, 100, 430, 860] {
        assert!((coh(a, q, q) - 1.0).abs() < 1e-14);
    }
    let at = a.t().to_owned();
    assert!((coh(&at, 17, 17) - 1.0).abs() < 1e-14);
}

#[test]
fn gram_is_hermitian() {
    let a = &subset().values;
    for (i, j) in [(0, 1), (430, 470), (12, 800)] {
        assert!((coh(a, i, j) - coh(a, j, i)).abs() < 1e-12);
    }
}

#[test]
fn pair_table_matches_direct_products() {
    let r = column_report();
    let a = &subset().values;
    assert!(!r.pairs.is_empty());
    for p in r.pairs.iter().step_by(997) {
        assert!((p.numeric - coh(a, p.i, p.j)).abs() < 1e-12);
        assert!((p.abs_error - (p.numeric - p.predicted).abs()).abs() < 1e-15);
    }
    for p in &r.pairs {
        assert!(p.numeric >= 0.0 && p.numeric <= 1.0 + 1e-12);
        assert!(p.predicted.is_finite() && p.predicted >= 0.0 && p.predicted <= 1.0 + 1e-12);
        assert!(p.i != p.j);
    }
    let max = r.pairs.iter().map(|p| p.numeric).fold(0.0, f64::max);
    assert_eq!(r.max_column_offdiag, Some(max));
    assert!(r.max_row_offdiag.is_none());
}

#[test]
fn one_cell_cross_range_separation_is_incoherent() {
    let s = gotcha_setup();
    let a = &subset().values;
    let f = &s.seg.frames[0];
    let cell = s.pulse.wavelength() * f.range / s.seg.aperture;
    let q0 = s.grid.nearest(0.0, 0.0).unwrap();
    let r = column_report();
    for sep in [cell.floor(), cell.ceil()] {
        let q = s.grid.nearest(0.0, sep).unwrap();
        let numeric = coh(a, q0, q);
        assert!(numeric < 0.15, "{sep} m: {numeric}");
        let p = r.pairs.iter().find(|p| (p.i, p.j) == (q0.min(q), q0.max(q))).expect("near pair tabulated");
        assert!(p.near);
        assert!(p.predicted < 0.15, "{sep} m: predicted {}", p.predicted);
    }
}

#[test]
fn fine_grid_is_flagged() {
    let s = gotcha_setup();
    let r = column_report();
    assert!(r.fine_grid());
    let a = &subset().values;
    let q0 = s.grid.nearest(0.0, 0.0).unwrap();
    assert!(coh(a, q0, q0 + 1) > 0.8);
    assert!(coh(a, q0, q0 + s.grid.n_cross) > 0.5);
    assert!(r.adjacent_max.unwrap() >= coh(a, q0, q0 + 1) - 1e-12);
    let csv = r.to_csv();
    assert!(csv.starts_with("i,j,numeric,predicted,abs_error,valid,near\n"));
    assert_eq!(csv.lines().count(), r.pairs.len() + 1);
}

#[test]
fn row_coherence_examples() {
    let s = gotcha_setup();
    let r = row_coherence(subset(), &s.grid, &s.seg, 0, 0).unwrap();
    let n = s.seg.subset_len();
    assert_eq!(r.pairs.len(), n * (n - 1) / 2);
    assert!(r.max_column_offdiag.is_none());
    let at = subset().values.t().to_owned();
    let ns = s.seg.n_s;
    let row = |l: usize, j: usize| l * ns + j;
    let find = |i: usize, j: usize| r.pairs.iter().find(|p| (p.i, p.j) == (i.min(j), i.max(j))).unwrap();

    // Frequency separation πc/Y with Y the range extent of the image seen along m.
    let mr = sarmmv::geometry::dot(s.seg.frames[0].m, s.grid.range_axis).abs();
    let y = s.grid.n_range as f64 * s.grid.step_range * mr;
    let dl = (PI * C / y / s.seg.omega_step).round() as usize;
    let j0 = ns / 2;
    let p = find(row(0, j0), row(dl, j0));
    assert!((p.numeric - coh(&at, row(0, j0), row(dl, j0))).abs() < 1e-12);
    assert!(p.predicted < 0.15 && p.numeric < 0.15, "{dl} {p:?}");

    // Slow-time steps far larger than the cross-range cell of the image.
    let p = find(row(7, 0), row(7, ns - 1));
    assert!(p.numeric < 0.15, "{p:?}");
    for p in &r.pairs {
        assert!(p.numeric <= 1.0 + 1e-12 && p.numeric >= 0.0);
    }
}

#[test]
fn coherence_shape_errors() {
    let s = gotcha_setup();
    let bad = ModelMatrix::new(Array2::zeros((4, 4)), sarmmv::model::MatrixKind::Subset, 4, 1);
    assert!(matches!(column_coherence(&bad, &s.grid, &s.seg, 0, 0), Err(Error::Shape(_))));
    assert!(matches!(row_coherence(&bad, &s.grid, &s.seg, 0, 0), Err(Error::Shape(_))));
    assert!(matches!(column_coherence(subset(), &s.grid, &s.seg, 3, 0), Err(Error::IndexOutOfRange(_))));
}

#[test]
fn sinc_and_dirichlet() {
    assert_eq!(sinc(0.0), 1.0);
    assert!((sinc(PI / 2.0) - 2.0 / PI).abs() < 1e-15);
    assert!((sinc(1e-9) - 1.0).abs() < 1e-15);
    assert!((dirichlet(0.3, 1) - 1.0).abs() < 1e-15);
    // Large n approaches sinc of the total phase span.
    let (n, span) = (4000, 2.5);
    assert!((dirichlet(span / n as f64, n) - sinc(span / 2.0).abs()).abs() < 1e-6);
}

fn truth_of(values: Array2<C64>) -> GroundTruth {
    let support = (0..values.nrows()).filter(|&q| values.row(q).iter().any(|z| z.norm() > 0.0)).collect();
    GroundTruth { values, support }
}

#[test]
fn score_examples() {
    let s = gotcha_setup();
    let sc = scene(vec![point(0.0, 0.0, 1.0), seen_by(10.0, -6.0, vec![0])]);
    let t = ground_truth_matrix(&sc, &s.grid, 1, 1).unwrap();
    let r = score_values(&t.values, &t, 0.1).unwrap();
    assert_eq!((r.precision, r.recall), (1.0, 1.0));
    assert_eq!(r.relative_error, 0.0);
    assert_eq!(r.relative_error_support, 0.0);
    assert_eq!(r.max_entry_error, 0.0);
    assert_eq!(r.estimated_support, t.support);

    let z = score_values(&Array2::zeros(t.values.dim()), &t, 0.1).unwrap();
    assert_eq!(z.recall, 0.0);
    assert_eq!(z.precision, 0.0);
    assert!((z.relative_error - 1.0).abs() < 1e-15);

    let mut extra = t.values.clone();
    extra[[3, 0]] = C64::new(1.0, 0.0);
    let e = score_values(&extra, &t, 0.1).unwrap();
    assert_eq!(e.recall, 1.0);
    assert!((e.precision - 2.0 / 3.0).abs() < 1e-15);

    assert!(matches!(score_values(&Array2::zeros((2, 2)), &t, 0.1), Err(Error::Shape(_))));
}

#[test]
fn profiles_and_migration_hits() {
    let s = gotcha_setup();
    let q = s.grid.nearest(0.0, 0.0).unwrap();
    let mut v = Array2::zeros((s.grid.len(), 6));
    for k in 0..6 {
        v[[q, k]] = C64::new(1.0 + k as f64, 0.0);
    }
    let t = truth_of(v.clone());
    let r = score_values(&v, &t, 0.1).unwrap().with_profiles(&v, &t, 3, 2);
    assert_eq!(r.profiles.len(), 1);
    assert_eq!(r.profiles[0].pixel, q);
    assert_eq!(r.profiles[0].direction_rmse, 0.0);
    let mut w = v.clone();
    w[[q, 0]] = C64::new(3.0, 0.0);
    let r = score_values(&w, &t, 0.1).unwrap().with_profiles(&w, &t, 3, 2);
    // Column (0, 0) off by 2: α-profile error 1 at α = 0, β-profile error 2/3 at β = 0.
    assert!((r.profiles[0].direction_rmse - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!((r.profiles[0].frequency_rmse - (2.0 / 3.0) / 2f64.sqrt()).abs() < 1e-12);

    let mut img = Array1::zeros(s.grid.len());
    img[q] = C64::new(1.0, 0.0);
    let hit = score_values(&v, &t, 0.1).unwrap().with_migration(&img, &s.grid, &t);
    assert_eq!(hit.migration_hit_rate, Some(1.0));
    let mut off = Array1::zeros(s.grid.len());
    off[q + 5] = C64::new(1.0, 0.0);
    let miss = score_values(&v, &t, 0.1).unwrap().with_migration(&off, &s.grid, &t);
    assert_eq!(miss.migration_hit_rate, Some(0.0));
}

#[test]
fn top_peaks_and_peak_map() {
    let s = gotcha_setup();
    let mut vals = vec![0.0; s.grid.len()];
    let (a, b, c) = (s.grid.index(3, 3), s.grid.index(10, 20), s.grid.index(10, 21));
    vals[a] = 2.0;
    vals[b] = 3.0;
    vals[c] = 1.0;
    assert_eq!(top_peaks(&vals, &s.grid, 5), vec![b, a]);
    assert_eq!(top_peaks(&vals, &s.grid, 1), vec![b]);
    let m = ndarray::array![[C64::new(0.0, 1.0), C64::new(-3.0, 0.0)], [C64::new(0.0, 0.0), C64::new(0.0, 0.5)]];
    assert_eq!(peak_map(&m), vec![3.0, 0.5]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_ignore_a_global_phase(phase in 0.0f64..(2.0 * PI), seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let truth = truth_of(Array2::from_shape_fn((12, 4), |(q, _)| {
            if q % 4 == 0 { C64::new(rng.random::<f64>() + 0.1, rng.random::<f64>()) } else { C64::new(0.0, 0.0) }
        }));
        let est = truth.values.mapv(|z| z * (1.0 + 0.1 * (z.re - 0.5))) + Array2::from_elem((12, 4), C64::new(0.01, 0.0));
        let rot = C64::from_polar(1.0, phase);
        let truth_rot = GroundTruth { values: truth.values.mapv(|z| z * rot), support: truth.support.clone() };
        let a = score_values(&est, &truth, 0.1).unwrap();
        let b = score_values(&est.mapv(|z| z * rot), &truth_rot, 0.1).unwrap();
        prop_assert_eq!(a.precision, b.precision);
        prop_assert_eq!(a.recall, b.recall);
        prop_assert!((a.relative_error - b.relative_error).abs() < 1e-12);
        prop_assert!((a.max_entry_error - b.max_entry_error).abs() < 1e-12);
        prop_assert!(a.precision >= 0.0 && a.precision <= 1.0 && a.relative_error >= 0.0);
    }
}
