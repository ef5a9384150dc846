//! Minimal SVG figures: scatter plots with arrows, line charts and heat grids.

use std::fmt::Write;

use nalgebra::DMatrix;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

pub const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// Plans with mass above `(1/(n·m))·10⁻²` are drawn as arrows.
pub const ARROW_THRESHOLD_FACTOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Bounds {
    pub fn around<'a>(points: impl IntoIterator<Item = &'a DMatrix<f64>>) -> Self {
        let mut b = Bounds { x: (f64::INFINITY, f64::NEG_INFINITY), y: (f64::INFINITY, f64::NEG_INFINITY) };
        for m in points {
            for r in 0..m.nrows() {
                b.x = (b.x.0.min(m[(r, 0)]), b.x.1.max(m[(r, 0)]));
                b.y = (b.y.0.min(m[(r, 1)]), b.y.1.max(m[(r, 1)]));
            }
        }
        if !b.x.0.is_finite() {
            return Bounds { x: (0.0, 1.0), y: (0.0, 1.0) };
        }
        let pad = |(lo, hi): (f64, f64)| {
            let p = ((hi - lo) * 0.05).max(1e-9);
            (lo - p, hi + p)
        };
        Bounds { x: pad(b.x), y: pad(b.y) }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN);
        let sy = HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN);
        (sx, sy)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, caption: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        out,
        r##"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#444"/></marker></defs>"##
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    if !caption.is_empty() {
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" text-anchor="middle" font-size="11" fill="#555">{}</text>"##,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(caption)
        );
    }
}

fn axes(out: &mut String, b: &Bounds, xlabel: &str, ylabel: &str) {
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (v, anchor) in [(b.x.0, "start"), (b.x.1, "end")] {
        let (px, _) = b.px(v, b.y.0);
        let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#, y0 + 14.0);
    }
    for v in [b.y.0, b.y.1] {
        let (_, py) = b.px(b.x.0, v);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{py:.1}" font-size="10" text-anchor="end">{v:.3}</text>"#, x0 - 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, WIDTH / 2.0, y0 + 28.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

/// A set of 2-D points drawn in one color.
pub struct PointLayer<'a> {
    pub points: &'a DMatrix<f64>,
    pub color: &'a str,
    pub label: &'a str,
}

/// Straight arrows from `from[i]` to `to[i]`, with per-arrow opacity in `[0, 1]`.
pub struct ArrowLayer {
    pub from: Vec<(f64, f64)>,
    pub to: Vec<(f64, f64)>,
    pub opacity: Vec<f64>,
    pub color: String,
}

/// Arrows for every plan entry above `(1/(n·m))·10⁻²`, opacity proportional to mass.
pub fn coupling_arrows(plan: &DMatrix<f64>, sources: &DMatrix<f64>, targets: &DMatrix<f64>, color: &str) -> ArrowLayer {
    let (n, m) = plan.shape();
    let threshold = ARROW_THRESHOLD_FACTOR / (n * m) as f64;
    let max = plan.max().max(f64::MIN_POSITIVE);
    let mut layer = ArrowLayer { from: vec![], to: vec![], opacity: vec![], color: color.into() };
    for i in 0..n {
        for j in 0..m {
            let g = plan[(i, j)];
            if g > threshold {
                layer.from.push((sources[(i, 0)], sources[(i, 1)]));
                layer.to.push((targets[(j, 0)], targets[(j, 1)]));
                layer.opacity.push((g / max).clamp(0.05, 1.0));
            }
        }
    }
    layer
}

pub fn scatter(title: &str, caption: &str, bounds: Bounds, layers: &[PointLayer], arrows: &[ArrowLayer]) -> String {
    let mut out = String::new();
    header(&mut out, title, caption);
    axes(&mut out, &bounds, "x", "y");
    for a in arrows {
        for ((f, t), o) in a.from.iter().zip(&a.to).zip(&a.opacity) {
            let (x1, y1) = bounds.px(f.0, f.1);
            let (x2, y2) = bounds.px(t.0, t.1);
            let _ = writeln!(
                out,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{}" stroke-opacity="{o:.3}" stroke-width="0.8" marker-end="url(#head)"/>"#,
                a.color
            );
        }
    }
    for (k, l) in layers.iter().enumerate() {
        for r in 0..l.points.nrows() {
            let (x, y) = bounds.px(l.points[(r, 0)], l.points[(r, 1)]);
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.2" fill="{}" fill-opacity="0.8"/>"#, l.color);
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 14.0 * (k + 1) as f64,
            l.color,
            escape(l.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Named series of `(x, y)` points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let m = DMatrix::from_fn(all.len(), 2, |i, j| if j == 0 { all[i].0 } else { all[i].1 });
    let mut bounds = Bounds::around([&m]);
    bounds.y.0 = bounds.y.0.min(0.0);
    let mut out = String::new();
    header(&mut out, title, "");
    axes(&mut out, &bounds, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = bounds.px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for &(x, y) in &s.points {
            let (px, py) = bounds.px(x, y);
            let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            MARGIN + 14.0 * (k + 1) as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of `values[(row, col)]` over `bounds`, row 0 at the bottom, with an
/// optional marker at the reference point.
pub fn heat_grid(title: &str, caption: &str, bounds: Bounds, values: &DMatrix<f64>, reference: Option<(f64, f64)>) -> String {
    let (rows, cols) = values.shape();
    let lo = values.min();
    let hi = values.max();
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let mut out = String::new();
    header(&mut out, title, caption);
    let cw = (WIDTH - 2.0 * MARGIN) / cols as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / rows as f64;
    for r in 0..rows {
        for c in 0..cols {
            let t = (values[(r, c)] - lo) / span;
            let shade = (255.0 * (1.0 - t)).round() as u8;
            let x = MARGIN + c as f64 * cw;
            let y = HEIGHT - MARGIN - (r + 1) as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb(255,{shade},{shade})"/>"#,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    axes(&mut out, &bounds, "x", "y");
    if let Some((x, y)) = reference {
        let (px, py) = bounds.px(x, y);
        let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="black"/>"#);
    }
    out.push_str("</svg>\n");
    out
}
