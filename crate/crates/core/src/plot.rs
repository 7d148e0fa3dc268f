//! Minimal self-contained SVG line plots: curves plus operating-point
//! markers, nothing else.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Logarithmic x axis (base 2), as used for FROC curves.
    pub log_x: bool,
    pub series: Vec<Series>,
    pub markers: Vec<(String, f64, f64)>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            log_x: false,
            series: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn series(mut self, name: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series {
            name: name.into(),
            points,
        });
        self
    }

    pub fn marker(mut self, name: &str, x: f64, y: f64) -> Self {
        self.markers.push((name.into(), x, y));
        self
    }

    fn tx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        let f = if self.log_x {
            (x.max(lo).log2() - lo.log2()) / (hi.log2() - lo.log2())
        } else {
            (x - lo) / (hi - lo)
        };
        MARGIN + f.clamp(0.0, 1.0) * (W - 2.0 * MARGIN)
    }

    fn ty(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        H - MARGIN - ((y - lo) / (hi - lo)).clamp(0.0, 1.0) * (H - 2.0 * MARGIN)
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        for t in self.x_ticks() {
            let x = self.tx(t);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 16.0,
                tick(t)
            );
        }
        for i in 0..=4 {
            let t = self.y_range.0 + (self.y_range.1 - self.y_range.0) * i as f64 / 4.0;
            let y = self.ty(t);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y:.2}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                tick(t)
            );
        }
        for (i, ser) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = ser
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", self.tx(x), self.ty(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                x1 - 120.0,
                y0 - 12.0 - 16.0 * i as f64,
                escape(&ser.name)
            );
        }
        for (name, x, y) in &self.markers {
            let (px, py) = (self.tx(*x), self.ty(*y));
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="none" stroke="black"/>"#
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                px + 6.0,
                py - 6.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    fn x_ticks(&self) -> Vec<f64> {
        let (lo, hi) = self.x_range;
        if self.log_x {
            let mut t = lo;
            let mut out = Vec::new();
            while t <= hi * (1.0 + 1e-9) {
                out.push(t);
                t *= 2.0;
            }
            out
        } else {
            (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
        }
    }
}

fn tick(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
