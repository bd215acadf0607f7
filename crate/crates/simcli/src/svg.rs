//! Minimal static SVG line plots.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;

/// Axis-aligned panel mapping data coordinates into a pixel rectangle.
pub struct Panel {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Panel {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        (
            self.left + (x - x0) / (x1 - x0) * self.width,
            self.top + self.height - (y - y0) / (y1 - y0) * self.height,
        )
    }
}

#[derive(Clone, Copy)]
pub struct Style {
    pub color: &'static str,
    pub dashed: bool,
}

pub const MEASURED: Style = Style {
    color: "#1f5fbf",
    dashed: false,
};
pub const REFERENCE: Style = Style {
    color: "#999999",
    dashed: true,
};

/// Range padded by 5 % on both sides; a flat range is widened to ±1 mm.
pub fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span < 2e-3 {
        let mid = 0.5 * (lo + hi);
        return (mid - 1e-3, mid + 1e-3);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// Roughly `n` round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let raw = (hi - lo) / n.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

pub fn footer(out: &mut String) {
    out.push_str("</svg>\n");
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn axes(out: &mut String, p: &Panel, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        p.left, p.top, p.width, p.height
    );
    for x in ticks(p.x_range.0, p.x_range.1, 8) {
        let (px, _) = p.map(x, p.y_range.0);
        let bottom = p.top + p.height;
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{}" stroke="#333"/>"##,
            bottom + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            bottom + 16.0,
            label(x)
        );
    }
    for y in ticks(p.y_range.0, p.y_range.1, 4) {
        let (_, py) = p.map(p.x_range.0, y);
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#333"/>"##,
            p.left - 4.0,
            p.left
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            p.left - 6.0,
            py + 4.0,
            label(y)
        );
    }
    if !x_label.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            p.left + p.width / 2.0,
            p.top + p.height + 32.0,
            escape(x_label)
        );
    }
    let cy = p.top + p.height / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{cy}" text-anchor="middle" transform="rotate(-90 {} {cy})">{}</text>"#,
        p.left - 50.0,
        p.left - 50.0,
        escape(y_label)
    );
}

/// Polyline through already-mapped pixel points.
pub fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, style: Style) {
    let mut d = String::new();
    for (x, y) in points {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let dash = if style.dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
        d.trim_end(),
        style.color
    );
}

pub fn legend(out: &mut String, x: f64, y: f64, entries: &[(&str, Style)]) {
    for (i, (name, style)) in entries.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let dash = if style.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{yy}" x2="{}" y2="{yy}" stroke="{}" stroke-width="1.5"{dash}/>"#,
            x + 24.0,
            style.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            x + 30.0,
            yy + 4.0,
            escape(name)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 10.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let t = ticks(0.231, 0.289, 4);
        assert!(t.iter().all(|v| (0.231..=0.289).contains(v)));
    }

    #[test]
    fn flat_range_is_widened() {
        let (lo, hi) = padded_range([0.29, 0.29].into_iter());
        assert!(hi - lo > 1e-3);
    }

    #[test]
    fn labels_are_trimmed() {
        assert_eq!(label(0.25), "0.25");
        assert_eq!(label(-0.0), "0");
        assert_eq!(label(10.0), "10");
    }
}
