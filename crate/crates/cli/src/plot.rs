//! Standalone SVG plots. Each file embeds the plotted numbers as JSON inside
//! `<metadata>` so that results can be re-checked from the image alone.

use std::fmt::Write;

use fieldclt_core::diagnostics::{Matrix, Series};
use fieldclt_core::{Error, MCReport, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// A report series with error bars.
    DecayCurve,
    /// A covariance matrix as a diverging heatmap.
    CovHeatmap,
    /// A sample path on the `n × n` grid as a heatmap.
    SamplePath,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::DecayCurve => "decay-curve",
            PlotKind::CovHeatmap => "cov-heatmap",
            PlotKind::SamplePath => "sample-path",
        }
    }
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Render the series or matrix `name` of `report`.
pub fn emit_plot(report: &MCReport, kind: PlotKind, name: &str) -> Result<String> {
    match kind {
        PlotKind::DecayCurve => decay_curve(report, report.series(name)?),
        PlotKind::CovHeatmap | PlotKind::SamplePath => heatmap(report, kind, report.matrix(name)?),
    }
}

fn header(out: &mut String, title: &str, meta: &serde_json::Value) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<metadata><![CDATA[{meta}]]></metadata>");
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn decay_curve(report: &MCReport, s: &Series) -> Result<String> {
    if s.x.is_empty() {
        return Err(Error::InvalidInput(format!("series `{}` is empty", s.name)));
    }
    if s.x.len() != s.y.len() || s.y.len() != s.se.len() {
        return Err(Error::DimensionMismatch(format!("series `{}` has ragged columns", s.name)));
    }
    let mut order: Vec<usize> = (0..s.x.len()).collect();
    order.sort_by(|&a, &b| s.x[a].total_cmp(&s.x[b]));
    let x: Vec<f64> = order.iter().map(|&i| s.x[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| s.y[i]).collect();
    let se: Vec<f64> = order.iter().map(|&i| s.se[i]).collect();

    let (x0, x1) = range(x.iter().copied());
    let (y0, y1) = range(
        y.iter()
            .zip(&se)
            .flat_map(|(v, e)| [v - e, v + e])
            .chain([0.0]),
    );
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let meta = json!({
        "kind": PlotKind::DecayCurve.as_str(),
        "report": report.name,
        "series": s.name,
        "x_label": s.x_label,
        "x": x,
        "y": y,
        "se": se,
    });
    let mut out = String::new();
    header(&mut out, &format!("{}: {}", report.name, s.name), &meta);
    axes(&mut out, &s.x_label, (x0, x1), (y0, y1));
    let points: Vec<String> = x
        .iter()
        .zip(&y)
        .map(|(&a, &b)| format!("{:.3},{:.3}", px(a), py(b)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="curve" fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    for ((&a, &b), &e) in x.iter().zip(&y).zip(&se) {
        let _ = writeln!(
            out,
            r#"<line class="errorbar" x1="{0:.3}" x2="{0:.3}" y1="{1:.3}" y2="{2:.3}" stroke="gray"/>"#,
            px(a),
            py(b - e),
            py(b + e)
        );
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="3" fill="steelblue"/>"#,
            px(a),
            py(b)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn axes(out: &mut String, x_label: &str, xr: (f64, f64), yr: (f64, f64)) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{l}" y="{}" font-size="11">{:.4}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{:.4}</text>"#,
        b + 16.0,
        xr.0,
        r,
        b + 16.0,
        xr.1
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{b}" font-size="11" text-anchor="end">{:.4}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{:.4}</text>"#,
        l - 4.0,
        yr.0,
        l - 4.0,
        t + 4.0,
        yr.1
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        0.5 * (l + r),
        HEIGHT - 10.0,
        escape(x_label)
    );
}

/// Blue for negative, red for positive, white at zero.
fn diverging(v: f64, scale: f64) -> String {
    let u = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 * (1.0 - c.abs())).round() as u8;
    let (r, g, b) = if u >= 0.0 { (255, fade(u), fade(u)) } else { (fade(u), fade(u), 255) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn heatmap(report: &MCReport, kind: PlotKind, m: &Matrix) -> Result<String> {
    if m.rows == 0 || m.cols == 0 || m.values.len() != m.rows * m.cols {
        return Err(Error::InvalidInput(format!("matrix `{}` is empty or ragged", m.name)));
    }
    let scale = m.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let meta = json!({
        "kind": kind.as_str(),
        "report": report.name,
        "matrix": m.name,
        "rows": m.rows,
        "cols": m.cols,
        "values": m.values,
    });
    let mut out = String::new();
    header(&mut out, &format!("{}: {}", report.name, m.name), &meta);
    let cw = (WIDTH - 2.0 * MARGIN) / m.cols as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / m.rows as f64;
    for r in 0..m.rows {
        for c in 0..m.cols {
            // Row 0 at the bottom so the picture matches the unit square.
            let y = HEIGHT - MARGIN - (r + 1) as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                MARGIN + c as f64 * cw,
                y,
                cw,
                ch,
                diverging(m.get(r, c), scale)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Pull the embedded JSON back out of an SVG produced here.
pub fn read_metadata(svg: &str) -> Option<serde_json::Value> {
    let start = svg.find("<![CDATA[")? + "<![CDATA[".len();
    let end = svg[start..].find("]]>")? + start;
    serde_json::from_str(&svg[start..end]).ok()
}
