//! Static SVG figures: cross-range line plots for 1-D scenes, peak-value
//! heatmaps for 2-D scenes and per-scatterer (α, β) profile matrices.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::analysis::peak_map;
use crate::io::decode_matrix;
use crate::pipeline::Layout;
use crate::{Error, Result, C64};

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 50.0;

fn header(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of several series over a shared x axis.
pub fn line_plot(title: &str, x: &[f64], series: &[(&str, &[f64], &str)]) -> String {
    let mut s = header(W, H, title);
    let (x0, x1) = bounds(x);
    let ymax = series.iter().flat_map(|(_, y, _)| y.iter().cloned()).fold(0.0, f64::max);
    let ymax = if ymax > 0.0 { ymax * 1.1 } else { 1.0 };
    let px = |v: f64| M + (v - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (W - 2.0 * M);
    let py = |v: f64| H - M - v / ymax * (H - 2.0 * M);
    let _ = writeln!(
        s,
        "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * M,
        H - 2.0 * M
    );
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v:.2}</text>",
            M - 4.0,
            py(v) + 3.0
        );
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{xv:.1}</text>",
            px(xv),
            H - M + 14.0
        );
    }
    for (i, (name, y, color)) in series.iter().enumerate() {
        let pts: Vec<String> = x.iter().zip(y.iter()).map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", pts.join(" "));
        let ly = M + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            W - M - 110.0,
            W - M - 90.0,
            W - M - 85.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(x: &[f64]) -> (f64, f64) {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn gray(v: f64) -> String {
    // White for zero, dark blue at the maximum.
    let t = v.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - t)) as u8;
    let g = (255.0 * (1.0 - 0.8 * t)) as u8;
    format!("rgb({r},{g},255)")
}

/// Heatmap of `values[row * cols + col]`, rows drawn bottom to top.
pub fn heatmap(title: &str, values: &[f64], rows: usize, cols: usize) -> String {
    let size = 360.0;
    let mut s = header(size + 2.0 * M, size + 2.0 * M, title);
    let vmax = values.iter().cloned().fold(0.0, f64::max);
    let (cw, ch) = (size / cols.max(1) as f64, size / rows.max(1) as f64);
    for r in 0..rows {
        for c in 0..cols {
            let v = if vmax > 0.0 { values[r * cols + c] / vmax } else { 0.0 };
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                M + c as f64 * cw,
                M + size - (r + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                gray(v)
            );
        }
    }
    let _ = writeln!(
        s,
        "<rect x=\"{M}\" y=\"{M}\" width=\"{size}\" height=\"{size}\" fill=\"none\" stroke=\"black\"/>\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">max {vmax:.3}</text>",
        M + size,
        M + size + 16.0
    );
    s.push_str("</svg>\n");
    s
}

fn read(dir: &Path, name: &str) -> Result<Array2<C64>> {
    let p = dir.join(name);
    let bytes = fs::read(&p).map_err(|e| Error::Format(format!("missing artifact {}: {e}", p.display())))?;
    decode_matrix(&bytes)
}

/// Build all figures for a run directory as `(file name, svg)` pairs.
pub fn render(dir: &Path) -> Result<Vec<(String, String)>> {
    let lt = fs::read_to_string(dir.join("layout.toml"))
        .map_err(|e| Error::Format(format!("missing artifact layout.toml: {e}")))?;
    let layout: Layout = toml::from_str(&lt).map_err(|e| Error::Format(e.to_string()))?;
    let truth = read(dir, "truth.sarc")?;
    let est = read(dir, "estimate.sarc")?;
    let mig = read(dir, "migration.sarc")?;
    let q = layout.n_range * layout.n_cross;
    if truth.nrows() != q || est.dim() != truth.dim() || mig.nrows() != q {
        return Err(Error::Shape("run artifacts disagree with layout".into()));
    }
    let pt = peak_map(&truth);
    let pe = peak_map(&est);
    let pm: Vec<f64> = mig.column(0).iter().map(|z| z.norm()).collect();
    let mut out = Vec::new();
    if layout.n_range == 1 || layout.n_cross == 1 {
        let (n, h) = if layout.n_range == 1 {
            (layout.n_cross, layout.step_cross_m)
        } else {
            (layout.n_range, layout.step_range_m)
        };
        let x: Vec<f64> = (0..n).map(|i| (i as f64 - 0.5 * (n - 1) as f64) * h).collect();
        out.push((
            "line.svg".to_string(),
            line_plot(
                "peak reflectivity over sub-apertures",
                &x,
                &[("truth", &pt, "black"), ("MMV", &pe, "red"), ("migration", &pm, "blue")],
            ),
        ));
    } else {
        let (r, c) = (layout.n_range, layout.n_cross);
        out.push(("truth_map.svg".into(), heatmap("true reflectivity (max over columns)", &pt, r, c)));
        out.push(("mmv_map.svg".into(), heatmap("MMV reconstruction (max over columns)", &pe, r, c)));
        out.push(("migration_map.svg".into(), heatmap("Kirchhoff migration", &pm, r, c)));
    }
    for &px in &layout.true_support {
        let prof = |m: &Array2<C64>| -> Vec<f64> { m.row(px).iter().map(|z| z.norm()).collect() };
        let (na, nb) = (layout.n_alpha, layout.n_beta);
        // Rows of the profile image are sub-bands, columns sub-apertures.
        let transpose = |v: Vec<f64>| -> Vec<f64> {
            (0..nb).flat_map(|b| (0..na).map(move |a| (a, b))).map(|(a, b)| v[a * nb + b]).collect()
        };
        out.push((format!("profile_{px}_truth.svg"), heatmap(&format!("pixel {px}: true (alpha, beta)"), &transpose(prof(&truth)), nb, na)));
        out.push((format!("profile_{px}_mmv.svg"), heatmap(&format!("pixel {px}: MMV (alpha, beta)"), &transpose(prof(&est)), nb, na)));
    }
    Ok(out)
}

/// Render the figures of a run directory and write them next to the artifacts.
pub fn emit_plots(dir: &Path) -> Result<Vec<String>> {
    let figs = render(dir)?;
    let mut names = Vec::new();
    for (name, svg) in figs {
        fs::write(dir.join(&name), svg)?;
        names.push(name);
    }
    Ok(names)
}
