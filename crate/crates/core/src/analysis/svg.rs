//! Minimal SVG writer for the static analysis plots.

use std::fmt::Write;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub const GREY: &str = "#bdbdbd";

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Sequential colour for `t` in `[0, 1]`, dark blue through green to yellow.
pub fn sequential(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, dashed: bool) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"{dash}/>"#,
            p.join(" ")
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, title: Option<&str>) {
        match title {
            Some(t) => {
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"><title>{}</title></rect>"#,
                    escape(t)
                );
            }
            None => {
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
                );
            }
        }
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, hollow: bool) {
        let style = if hollow {
            format!(r#"fill="white" stroke="{fill}" stroke-width="2""#)
        } else {
            format!(r#"fill="{fill}""#)
        };
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" {style}/>"#);
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str, size: f64) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    pub fn rotated_text(&mut self, x: f64, y: f64, s: &str, angle: f64, size: f64) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" transform="rotate({angle} {x:.2} {y:.2})">{}</text>"#,
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Linear map from data range `[d0, d1]` to pixel range `[p0, p1]`.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    d0: f64,
    d1: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    pub fn new(d0: f64, d1: f64, p0: f64, p1: f64) -> Self {
        let (d0, d1) = if (d1 - d0).abs() < 1e-12 { (d0 - 0.5, d1 + 0.5) } else { (d0, d1) };
        Self { d0, d1, p0, p1 }
    }

    pub fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }

    pub fn ticks(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|i| self.d0 + (self.d1 - self.d0) * i as f64 / n as f64).collect()
    }
}

/// Draws a rectangular frame with tick labels on both axes.
pub fn axes(svg: &mut Svg, xs: &Scale, ys: &Scale, xticks: &[(f64, String)], yticks: &[(f64, String)], labels: (&str, &str)) {
    let (x0, x1) = (xs.p0, xs.p1);
    let (y0, y1) = (ys.p0, ys.p1);
    svg.line(x0, y0, x1, y0, "black");
    svg.line(x0, y0, x0, y1, "black");
    for (v, s) in xticks {
        let x = xs.map(*v);
        svg.line(x, y0, x, y0 + 5.0, "black");
        svg.text(x, y0 + 18.0, s, "middle", 11.0);
    }
    for (v, s) in yticks {
        let y = ys.map(*v);
        svg.line(x0 - 5.0, y, x0, y, "black");
        svg.text(x0 - 8.0, y + 4.0, s, "end", 11.0);
    }
    svg.text((x0 + x1) / 2.0, y0 + 38.0, labels.0, "middle", 13.0);
    svg.rotated_text(x0 - 48.0, (y0 + y1) / 2.0, labels.1, -90.0, 13.0);
}
