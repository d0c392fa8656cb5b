//! Self-contained SVG output: error-vs-p curves and p×k heatmaps.

use std::fmt::Write as _;
use std::path::Path;

use super::{PlotMode, SweepResult};
use crate::error::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn log_floor(values: impl Iterator<Item = f64>) -> f64 {
    let min_pos = values.filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    if min_pos.is_finite() { min_pos } else { 1e-16 }
}

fn fmt_alpha(a: f64) -> String {
    if a.is_infinite() { "∞".into() } else { a.to_string() }
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

/// Averaged e_out against p, one polyline per (trajectory point, k) series,
/// on a log error axis.
pub fn curves_svg(result: &SweepResult) -> String {
    let series: Vec<(String, Vec<(usize, f64)>)> = result
        .points()
        .into_iter()
        .flat_map(|pt| {
            let mut ks: Vec<usize> = result.averaged.iter().filter(|a| a.point == pt).map(|a| a.k).collect();
            ks.sort_unstable();
            ks.dedup();
            let multi_k = ks.len() > 1;
            ks.into_iter().map(move |k| {
                let mut label = format!("α={}, n_sup={}", fmt_alpha(pt.alpha), pt.n_sup);
                if multi_k {
                    let _ = write!(label, ", k={k}");
                }
                (label, result.curve(pt, k))
            })
        })
        .filter(|(_, c)| !c.is_empty())
        .collect();

    let all = || series.iter().flat_map(|(_, c)| c.iter());
    let floor = log_floor(all().map(|&(_, e)| e));
    let ly = |e: f64| e.max(floor).log10();
    let (p_lo, p_hi) = all().fold((usize::MAX, 0), |(lo, hi), &(p, _)| (lo.min(p), hi.max(p)));
    let (mut y_lo, mut y_hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, e)| {
        (lo.min(ly(e)), hi.max(ly(e)))
    });
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    let (y_lo, y_hi) = (y_lo.floor(), y_hi.ceil().max(y_lo.floor() + 1.0));
    let p_span = (p_hi.saturating_sub(p_lo)).max(1) as f64;
    let px = |p: usize| LEFT + (p.saturating_sub(p_lo)) as f64 / p_span * (W - LEFT - RIGHT);
    let py = |e: f64| TOP + (y_hi - ly(e)) / (y_hi - y_lo) * (H - TOP - BOTTOM);

    let mut out = String::new();
    header(&mut out, W, H);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none"><line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#);
    for dec in (y_lo as i32)..=(y_hi as i32) {
        let y = py(10f64.powi(dec));
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{dec}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    if p_lo <= p_hi {
        let step = ((p_hi - p_lo) / 8).max(1);
        for p in (p_lo..=p_hi).step_by(step) {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{p}</text>"#,
                px(p),
                y1 + 18.0
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">number of features p</text>"#,
        (x0 + x1) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text class="ylabel" transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">out-of-sample error (log scale)</text>"#,
        (y0 + y1) / 2.0
    );
    for (i, (label, curve)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = curve.iter().map(|&(p, e)| format!("{:.2},{:.2}", px(p), py(e))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{label}</title></polyline>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            x1 + 12.0,
            x1 + 32.0,
            x1 + 38.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn ramp(t: f64) -> String {
    // dark blue -> teal -> yellow
    let stops = [(0.0, [48.0, 18.0, 96.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let t = t.clamp(0.0, 1.0);
    let (a, b) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let s = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + s * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Averaged e_out over the p×k grid, one panel per trajectory point. Missing
/// cells (k > p) are left blank.
pub fn heatmap_svg(result: &SweepResult) -> String {
    let points = result.points();
    let mut ps: Vec<usize> = result.averaged.iter().map(|a| a.p).collect();
    let mut ks: Vec<usize> = result.averaged.iter().map(|a| a.k).collect();
    ps.sort_unstable();
    ps.dedup();
    ks.sort_unstable();
    ks.dedup();
    let floor = log_floor(result.averaged.iter().filter_map(|a| a.e_out));
    let logs: Vec<f64> = result.averaged.iter().filter_map(|a| a.e_out).map(|e| e.max(floor).log10()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let cell = (560.0 / ps.len().max(1) as f64).clamp(2.0, 24.0);
    let panel_w = LEFT + cell * ps.len() as f64 + 40.0;
    let panel_h = TOP + cell * ks.len() as f64 + BOTTOM;
    let mut out = String::new();
    header(&mut out, panel_w, panel_h * points.len().max(1) as f64);
    for (pi, &pt) in points.iter().enumerate() {
        let oy = panel_h * pi as f64;
        let grid_bottom = oy + TOP + cell * ks.len() as f64;
        let _ = writeln!(
            out,
            r#"<g class="panel"><text x="{LEFT}" y="{:.2}">α={}, n_sup={}</text>"#,
            oy + TOP - 10.0,
            fmt_alpha(pt.alpha),
            pt.n_sup
        );
        for a in result.averaged.iter().filter(|a| a.point == pt) {
            let Some(e) = a.e_out else { continue };
            let xi = ps.binary_search(&a.p).expect("p collected above");
            let yi = ks.binary_search(&a.k).expect("k collected above");
            let t = (e.max(floor).log10() - lo) / span;
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"><title>p={}, k={}, e_out={e}</title></rect>"#,
                LEFT + cell * xi as f64,
                grid_bottom - cell * (yi + 1) as f64,
                ramp(t),
                a.p,
                a.k
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">number of features p ({}..{})</text>"#,
            LEFT + cell * ps.len() as f64 / 2.0,
            grid_bottom + 24.0,
            ps.first().unwrap_or(&0),
            ps.last().unwrap_or(&0)
        );
        let _ = writeln!(
            out,
            r#"<text class="ylabel" transform="translate(30 {:.2}) rotate(-90)" text-anchor="middle">k ({}..{})</text></g>"#,
            (oy + TOP + grid_bottom) / 2.0,
            ks.first().unwrap_or(&0),
            ks.last().unwrap_or(&0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{LEFT}" y="{:.2}">colour: log10 out-of-sample error, {lo:.3} to {hi:.3}</text>"#,
        panel_h * points.len().max(1) as f64 - 8.0
    );
    out.push_str("</svg>\n");
    out
}

pub fn plot_curves(result: &SweepResult, path: &Path, mode: PlotMode) -> Result<()> {
    let svg = match mode {
        PlotMode::Curves => curves_svg(result),
        PlotMode::Heatmap => heatmap_svg(result),
    };
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
