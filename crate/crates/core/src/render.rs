//! Plain SVG output for patches and simple line charts.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::pentagrid::{TileKind, TilingPatch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgStyle {
    /// Only tiles centered within this radius are drawn.
    pub clip: f64,
    /// Output pixels per tiling unit.
    pub scale: f64,
    pub thick_fill: &'static str,
    pub thin_fill: &'static str,
    pub stroke: &'static str,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            clip: f64::INFINITY,
            scale: 12.0,
            thick_fill: "#e8b64c",
            thin_fill: "#4c7fb8",
            stroke: "#222",
        }
    }
}

/// Draw the rhombi of `patch`. Coordinates are rounded to 1e-3 px so the
/// output is stable across platforms.
pub fn patch_svg<W: Write>(patch: &TilingPatch, style: &SvgStyle, mut out: W) -> io::Result<()> {
    let reach = style.clip.min(patch.radius) + 2.0;
    let size = 2.0 * reach * style.scale;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="{:.3} {:.3} {size:.3} {size:.3}">"#,
        -reach * style.scale,
        -reach * style.scale
    )?;
    writeln!(
        out,
        r#"<g stroke="{}" stroke-width="{:.3}" stroke-linejoin="round">"#,
        style.stroke,
        style.scale * 0.04
    )?;
    let clip2 = style.clip * style.clip;
    let mut line = String::new();
    for t in &patch.tiles {
        let c = t.center();
        if c[0] * c[0] + c[1] * c[1] > clip2 {
            continue;
        }
        line.clear();
        for (i, v) in t.vertices().iter().enumerate() {
            let sep = if i == 0 { "" } else { " " };
            // SVG's y axis points down.
            write!(line, "{sep}{:.3},{:.3}", v[0] * style.scale, -v[1] * style.scale).unwrap();
        }
        let fill = match t.kind {
            TileKind::Thick => style.thick_fill,
            TileKind::Thin => style.thin_fill,
        };
        writeln!(out, r#"<polygon points="{line}" fill="{fill}"/>"#)?;
    }
    writeln!(out, "</g>\n</svg>")
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#c0392b", "#2471a3", "#239b56", "#b9770e", "#7d3c98", "#566573"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A polyline chart. Points that cannot be placed on a log axis are dropped.
pub fn chart_svg<W: Write>(chart: &Chart, mut out: W) -> io::Result<()> {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let tx = |x: f64| if chart.log_x { x.log10() } else { x };
    let ty = |y: f64| if chart.log_y { y.log10() } else { y };
    let series: Vec<Vec<(f64, f64)>> = chart
        .series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|&(x, y)| (tx(x), ty(y)))
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .collect()
        })
        .collect();
    let all = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(&chart.title)
    )?;
    writeln!(
        out,
        r##"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="#000"/>"##,
        b = h - m,
        r = w - m
    )?;
    let axis = |log: bool, v: f64| if log { format!("1e{v:.2}") } else { format!("{v:.4}") };
    writeln!(out, r#"<text x="{m}" y="{}">{}</text>"#, h - m + 16.0, axis(chart.log_x, x0))?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        w - m,
        h - m + 16.0,
        axis(chart.log_x, x1)
    )?;
    writeln!(out, r#"<text x="4" y="{}">{}</text>"#, h - m, axis(chart.log_y, y0))?;
    writeln!(out, r#"<text x="4" y="{}">{}</text>"#, m + 4.0, axis(chart.log_y, y1))?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 16.0,
        escape(&chart.x_label)
    )?;
    writeln!(
        out,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(&chart.y_label)
    )?;
    for (i, (pts, s)) in series.iter().zip(&chart.series).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, &(x, y)) in pts.iter().enumerate() {
            let cmd = if k == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{:.2} {:.2} ", px(x), py(y)).unwrap();
        }
        writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end())?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - m - 150.0,
            m + 16.0 * (i + 1) as f64,
            escape(&s.label)
        )?;
    }
    writeln!(out, "</svg>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pentagrid::{generate_patch, GridParams};

    #[test]
    fn one_polygon_per_clipped_tile() {
        let patch = generate_patch(20.0, &GridParams::default()).unwrap();
        let style = SvgStyle {
            clip: 10.0,
            ..Default::default()
        };
        let mut buf = Vec::new();
        patch_svg(&patch, &style, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let inside = patch
            .tiles
            .iter()
            .filter(|t| t.center()[0].hypot(t.center()[1]) <= 10.0)
            .count();
        assert_eq!(text.matches("<polygon").count(), inside);
        assert!(text.ends_with("</svg>\n"));
    }

    #[test]
    fn chart_drops_unplottable_points() {
        let chart = Chart {
            title: "a < b".into(),
            x_label: "n".into(),
            y_label: "msd".into(),
            log_x: true,
            log_y: false,
            series: vec![Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (2.0, 1.0), (4.0, 2.0)],
            }],
        };
        let mut buf = Vec::new();
        chart_svg(&chart, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("a &lt; b"));
        let path = text.lines().find(|l| l.contains("stroke-width=\"1.5\"")).unwrap();
        assert_eq!(path.matches('L').count(), 1);
    }
}
