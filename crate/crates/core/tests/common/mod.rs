#![allow(dead_code)]

use sarmmv::config::{preset, Setup};
use sarmmv::geometry::Trajectory;
use sarmmv::scene::{Factor, Location, Reflectivity, Scatterer, Scene};
use sarmmv::C64;

pub const H: f64 = 7300.0;
pub const R: f64 = 7100.0;
pub const V: f64 = 70.0;
pub const HS: f64 = 0.015;
pub const C: f64 = 3e8;

pub fn gotcha_traj() -> Trajectory {
    Trajectory::circular(H, R, V, HS, 321, C).unwrap()
}

pub fn gotcha() -> Setup {
    preset("gotcha").unwrap().build().unwrap()
}

pub fn point(range_m: f64, cross_m: f64, amplitude: f64) -> Scatterer {
    Scatterer { location: Location::Offset { range_m, cross_m }, reflectivity: Reflectivity::isotropic(amplitude) }
}

pub fn seen_by(range_m: f64, cross_m: f64, alphas: Vec<usize>) -> Scatterer {
    Scatterer {
        location: Location::Offset { range_m, cross_m },
        reflectivity: Reflectivity::Parametric { amplitude: C64::new(1.0, 0.0), alpha: Factor::Only(alphas), beta: Factor::All },
    }
}

pub fn scene(s: Vec<Scatterer>) -> Scene {
    Scene { scatterers: s }
}

pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn circle(s: f64) -> [f64; 3] {
    let th = V * s / R;
    [R * th.cos(), R * th.sin(), H]
}
