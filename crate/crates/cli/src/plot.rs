//! Minimal static SVG charts.

use std::fmt::Write;

use startup_core::envelope::MeasuredTrajectory;

use crate::report::StrainMap;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn open(svg: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for k in 0..=4 {
        let xv = f.x.0 + (f.x.1 - f.x.0) * k as f64 / 4.0;
        let yv = f.y.0 + (f.y.1 - f.y.0) * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{xv:.2}</text>"#, f.px(xv), H - PAD + 16.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#, PAD - 4.0, f.py(yv) + 4.0);
    }
}

fn polyline(svg: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, f: &Frame) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{:.1},{:.1} ", f.px(x), f.py(y));
    }
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#, d.trim_end());
}

fn legend(svg: &mut String, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let y = PAD + 14.0 + 14.0 * i as f64;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, W - PAD - 150.0, y - 9.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{y}">{n}</text>"#, W - PAD - 136.0);
    }
}

/// Strain against time for every startup, thinned to per-pixel extremes.
pub fn strain_series(runs: &[(String, &MeasuredTrajectory)]) -> String {
    let t_max = runs.iter().map(|(_, t)| t.t_st()).fold(1.0, f64::max);
    let lo = runs.iter().flat_map(|(_, t)| t.strain.iter().copied()).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().flat_map(|(_, t)| t.strain.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo < hi { (lo, hi) } else { (-1.0, 1.0) };
    let f = Frame {
        x: (0.0, t_max),
        y: (lo, hi),
    };
    let mut svg = String::new();
    open(&mut svg, "Measured strain per startup", "time (s)", "strain", &f);
    for (i, (_, t)) in runs.iter().enumerate() {
        let stride = (t.len() / 600).max(1);
        let pts = t.strain.chunks(stride).enumerate().flat_map(|(k, c)| {
            let x = (k * stride) as f64 / t.f_m;
            let mx = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mn = c.iter().copied().fold(f64::INFINITY, f64::min);
            [(x, mx), (x, mn)]
        });
        polyline(&mut svg, pts, PALETTE[i % PALETTE.len()], &f);
    }
    legend(&mut svg, &runs.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>());
    svg.push_str("</svg>\n");
    svg
}

fn shade(v: f64, lo: f64, hi: f64) -> String {
    let s = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    // blue to yellow to red
    let (r, g, b) = if s < 0.5 {
        let u = s * 2.0;
        (u, u, 1.0 - u)
    } else {
        let u = (s - 0.5) * 2.0;
        (1.0, 1.0 - u, 0.0)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

/// Predicted upper envelope `μ + σ` over the `(ω, o)` plane with the
/// measured startup paths drawn on top.
pub fn heat_map(map: &StrainMap, paths: &[(String, &[f64], &[f64])]) -> String {
    let (w0, w1) = (map.omega[0], *map.omega.last().expect("grid"));
    let (o0, o1) = (map.opening[0], *map.opening.last().expect("grid"));
    let f = Frame { x: (w0, w1), y: (o0, o1) };
    let lo = map.upper.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut svg = String::new();
    open(&mut svg, "Predicted upper strain envelope", "speed (fraction of synchronous)", "opening", &f);
    let no = map.opening.len();
    let dw = (w1 - w0) / (map.omega.len() - 1) as f64;
    let dop = (o1 - o0) / (no - 1) as f64;
    for (i, &w) in map.omega.iter().enumerate() {
        for (j, &o) in map.opening.iter().enumerate() {
            let x = f.px((w - dw / 2.0).max(w0));
            let y = f.py((o + dop / 2.0).min(o1));
            let x2 = f.px((w + dw / 2.0).min(w1));
            let y2 = f.py((o - dop / 2.0).max(o0));
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                x2 - x,
                y2 - y,
                shade(map.upper[i * no + j], lo, hi)
            );
        }
    }
    for (k, (_, omega, opening)) in paths.iter().enumerate() {
        let stride = (omega.len() / 400).max(1);
        let pts = omega
            .iter()
            .zip(opening.iter())
            .step_by(stride)
            .map(|(&w, &o)| (w.clamp(w0, w1), o.clamp(o0, o1)));
        polyline(&mut svg, pts, PALETTE[k % PALETTE.len()], &f);
    }
    legend(&mut svg, &paths.iter().map(|(n, _, _)| n.as_str()).collect::<Vec<_>>());
    svg.push_str("</svg>\n");
    svg
}
