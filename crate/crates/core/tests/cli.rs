use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;
use sarmmv::config::{preset, ExperimentConfig, PRESETS};
use sarmmv::io::*;
use sarmmv::model::MatrixKind;
use sarmmv::pipeline::{read_manifest, sha256_hex};
use sarmmv::{Error, C64};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sarmmv"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Small 2-D direction and frequency scene on the standard grid.
const SMALL_2D: &str = r#"
name = "small-2d"

[segmentation]
n_alpha = 2
n_beta = 2
aperture_m = 42.0
n_omega = 15

[[scene.scatterers]]
range_m = 4.0
cross_m = -4.0
alpha = { kind = "only", indices = [0] }

[[scene.scatterers]]
range_m = -6.0
cross_m = 8.0
amplitude = 0.7
"#;

#[test]
fn preset_listing_and_printing() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["preset"], tmp.path());
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(names, PRESETS.iter().map(|(n, _)| n.to_string()).collect::<Vec<_>>());
    for n in &names {
        let o = run(&["preset", n], tmp.path());
        assert!(o.status.success());
        let cfg = ExperimentConfig::from_toml(&stdout(&o)).unwrap();
        assert_eq!(&cfg.name, n);
        cfg.build().unwrap();
    }
    assert_eq!(run(&["preset", "nope"], tmp.path()).status.code(), Some(2));
}

#[test]
fn config_round_trips_losslessly() {
    for (n, _) in PRESETS {
        let cfg = preset(n).unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}

#[test]
fn bad_configs_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    let unknown = write(tmp.path(), "unknown.toml", "name = \"x\"\n[grid]\nextent_range_m = 4.0\nbogus_key = 1\n");
    let broken = write(tmp.path(), "broken.toml", "name = \n");
    let invalid = write(tmp.path(), "invalid.toml", "name = \"x\"\n[pulse]\nbandwidth_hz = -5.0\n");
    for p in [&unknown, &broken, &invalid] {
        let o = run(&["run", p.to_str().unwrap()], tmp.path());
        assert_eq!(o.status.code(), Some(2), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
    }
    assert!(String::from_utf8_lossy(&run(&["run", unknown.to_str().unwrap()], tmp.path()).stderr).contains("bogus_key"));
    assert_eq!(run(&["run", "missing.toml"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["regime", "preset:nope"], tmp.path()).status.code(), Some(2));
    let two = run(&["run", "preset:isotropic-11", "preset:aniso-6", "--out", "x"], tmp.path());
    assert_eq!(two.status.code(), Some(2));
    assert!(ExperimentConfig::from_toml("name = \"x\"\nextra = 1\n").is_err());
}

const STRICT: &str = "\n[regime]\nsmall = 1e-6\nwarn = 1e-5\n";

#[test]
fn regime_failure_exits_with_code_3_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let text = preset("isotropic-11").unwrap().to_toml() + STRICT;
    let text = text.replace("[regime]\nsmall = 0.1\nwarn = 1.0\n", "");
    let p = write(tmp.path(), "strict.toml", &text);
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.regime.warn, 1e-5);
    let ps = p.to_str().unwrap();
    assert_eq!(run(&["regime", ps], tmp.path()).status.code(), Some(3));
    let o = run(&["run", ps, "--out", "strict"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("strict/manifest.toml").exists());
    let o = run(&["run", ps, "--out", "strict", "--force"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("strict/manifest.toml").exists());
}

#[test]
fn regime_and_coherence_subcommands() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["regime", "preset:gotcha"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["fresnel_a", "m8", "startstop_travel", "crossrange_resolution"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{key} missing");
    }
    let o = run(&["coherence", "preset:gotcha", "--csv", "coh"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("column_fine_grid = true"));
    let cols = std::fs::read_to_string(tmp.path().join("coh/coherence_columns.csv")).unwrap();
    assert!(cols.starts_with("i,j,numeric"));
    assert!(tmp.path().join("coh/coherence_rows.csv").exists());
}

fn numeric_hashes(dir: &Path) -> Vec<(String, String)> {
    let m = read_manifest(dir).unwrap();
    m.files.iter().filter(|f| !f.path.ends_with(".svg")).map(|f| (f.path.clone(), f.sha256.clone())).collect()
}

#[test]
fn reruns_reproduce_hashes() {
    let tmp = TempDir::new().unwrap();
    for (a, b) in [("r1", "r2"), ("n1", "n2")] {
        let cfg = if a == "r1" { "preset:isotropic-11" } else { "preset:aniso-6-noise10" };
        assert!(run(&["run", cfg, "--out", a], tmp.path()).status.success());
        assert!(run(&["run", cfg, "--out", b], tmp.path()).status.success());
        let (ha, hb) = (numeric_hashes(&tmp.path().join(a)), numeric_hashes(&tmp.path().join(b)));
        assert!(ha.len() >= 10);
        assert_eq!(ha, hb);
        for (name, h) in &ha {
            assert_eq!(&sha256_hex(&std::fs::read(tmp.path().join(a).join(name)).unwrap()), h);
        }
    }
    // A different noise seed changes the data but not the file inventory.
    assert!(run(&["run", "preset:aniso-6-noise10", "--out", "n3", "--seed", "99"], tmp.path()).status.success());
    let h3 = numeric_hashes(&tmp.path().join("n3"));
    let h1 = numeric_hashes(&tmp.path().join("n1"));
    let data = |h: &[(String, String)]| h.iter().find(|(n, _)| n == "data.sarc").unwrap().1.clone();
    assert_ne!(data(&h1), data(&h3));
    assert_eq!(read_manifest(&tmp.path().join("n3")).unwrap().seed, 99);
}

#[test]
fn manifest_contents() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["run", "preset:isotropic-11", "--out", "iso"], tmp.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("isotropic-11: iterations"));
    let m = read_manifest(&tmp.path().join("iso")).unwrap();
    assert_eq!(m.name, "isotropic-11");
    assert_eq!(m.config, preset("isotropic-11").unwrap());
    assert_eq!(m.score.precision, 1.0);
    assert_eq!(m.score.true_support, m.score.estimated_support);
    assert!(m.solver.converged);
    assert!(m.regime.iter().any(|r| r.name == "fresnel_a"));
    assert!(m.timings.iter().any(|t| t.stage == "total"));
    assert!(!tmp.path().join("iso/manifest.toml.tmp").exists());
    let hist = std::fs::read_to_string(tmp.path().join("iso/history.csv")).unwrap();
    assert_eq!(hist.lines().count(), m.solver.iterations + 1);
}

#[test]
fn default_run_directory_and_jobs() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["run", "preset:isotropic-11", "preset:aniso-6", "--jobs", "2"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("runs/isotropic-11/manifest.toml").exists());
    assert!(tmp.path().join("runs/aniso-6/manifest.toml").exists());
}

#[test]
fn plots_for_line_two_d_and_empty_scenes() {
    let tmp = TempDir::new().unwrap();
    assert!(run(&["run", "preset:isotropic-11", "--out", "line"], tmp.path()).status.success());
    let line = tmp.path().join("line");
    let svg = std::fs::read_to_string(line.join("line.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    assert!(!line.join("mmv_map.svg").exists());
    let m = read_manifest(&line).unwrap();
    assert_eq!(m.files.iter().filter(|f| f.path.starts_with("profile_")).count(), 2 * 11);

    let p = write(tmp.path(), "small.toml", SMALL_2D);
    let o = run(&["run", p.to_str().unwrap(), "--out", "map"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let map = tmp.path().join("map");
    for f in ["truth_map.svg", "mmv_map.svg", "migration_map.svg"] {
        assert!(std::fs::read_to_string(map.join(f)).unwrap().contains("<rect"), "{f}");
    }
    let m = read_manifest(&map).unwrap();
    for q in &m.score.true_support {
        assert!(map.join(format!("profile_{q}_truth.svg")).exists());
        assert!(map.join(format!("profile_{q}_mmv.svg")).exists());
    }

    assert!(run(&["run", "preset:gotcha", "--out", "empty"], tmp.path()).status.success());
    let empty = tmp.path().join("empty");
    assert!(empty.join("truth_map.svg").exists());
    let m = read_manifest(&empty).unwrap();
    assert!(m.score.true_support.is_empty());
    assert_eq!(m.score.recall, 1.0);

    // Re-render from the artifacts alone.
    std::fs::remove_file(map.join("mmv_map.svg")).unwrap();
    let o = run(&["plot", map.to_str().unwrap()], tmp.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("mmv_map.svg"));
    assert!(map.join("mmv_map.svg").exists());
    assert_eq!(run(&["plot", tmp.path().join("nothing").to_str().unwrap()], tmp.path()).status.code(), Some(1));
}

#[test]
fn dump_model_writes_decodable_matrices() {
    let tmp = TempDir::new().unwrap();
    assert!(run(&["run", "preset:isotropic-11", "--out", "dump", "--dump-model"], tmp.path()).status.success());
    let dir = tmp.path().join("dump");
    let a = decode_model(&std::fs::read(dir.join("reference.sarc")).unwrap()).unwrap();
    assert_eq!(a.kind, MatrixKind::Reference);
    assert_eq!(a.values.ncols(), 121);
    let p = decode_mmv(&std::fs::read(dir.join("mmv.sarc")).unwrap()).unwrap();
    assert_eq!(p.a_ref, a);
    assert_eq!(p.d.ncols(), 8);
    let x = decode_matrix(&std::fs::read(dir.join("x.sarc")).unwrap()).unwrap();
    assert_eq!(x.dim(), (121, 8));
    let cube = decode_cube(&std::fs::read(dir.join("data.sarc")).unwrap()).unwrap();
    assert_eq!(cube.slow_times.len(), cube.values.nrows());
    assert!(!TempDir::new().unwrap().path().join("reference.sarc").exists());
}

#[test]
fn sarc_round_trips_and_rejects_corruption() {
    let s = {
        let mut cfg = preset("gotcha").unwrap();
        cfg.segmentation.n_alpha = 1;
        cfg.segmentation.n_beta = 1;
        cfg.build().unwrap()
    };
    let sc = sarmmv::scene::Scene {
        scatterers: vec![sarmmv::scene::Scatterer {
            location: sarmmv::scene::Location::Offset { range_m: 2.0, cross_m: 3.0 },
            reflectivity: sarmmv::scene::Reflectivity::isotropic(1.0),
        }],
    };
    let d = sarmmv::simulator::simulate_start_stop(&sc, &s.grid, &s.traj, &s.pulse, &s.seg).unwrap();
    let d = sarmmv::simulator::add_noise(&d, 0.1, 4).unwrap();
    let back = decode_cube(&encode_cube(&d)).unwrap();
    assert_eq!(back.values, d.values);
    assert_eq!(back.slow_times, d.slow_times);
    assert_eq!(back.frequencies, d.frequencies);
    assert_eq!(back.model, d.model);
    assert_eq!(back.noise_level, d.noise_level);

    let m = Array2::from_shape_fn((3, 5), |(i, j)| C64::new(i as f64, -(j as f64) * 0.5));
    let bytes = encode_matrix(&m);
    assert_eq!(&bytes[..5], MAGIC);
    assert_eq!(bytes.len(), 6 + 16 + 3 * 5 * 16);
    assert_eq!(decode_matrix(&bytes).unwrap(), m);

    let a = sarmmv::model::assemble_reference_doppler(&s.traj, &s.grid, &s.seg);
    assert_eq!(decode_model(&encode_model(&a)).unwrap(), a);
    let p = sarmmv::model::build_mmv(&d, &s.traj, &s.grid, &s.seg, &s.pulse, Some(70.0)).unwrap();
    let q = decode_mmv(&encode_mmv(&p)).unwrap();
    assert_eq!((q.d, q.column_scale, q.doppler), (p.d, p.column_scale, p.doppler));

    assert!(matches!(decode_matrix(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode_matrix(&extra), Err(Error::Format(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_matrix(&bad), Err(Error::Format(_))));
    assert!(decode_model(&bytes).is_err());
    assert!(decode_cube(&bytes).is_err());
}
