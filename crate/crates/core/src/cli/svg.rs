//! Standalone SVG charts: scatter, line and heatmap.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64, config_hash: &str, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<!-- config_hash: {config_hash} -->");
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", width / 2.0, escape(title));
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Axes {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Axes { x: range(&mut xs.clone()), y: range(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn draw(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
        let _ = writeln!(out, "<path d=\"M{x0} {y1} V{y0} H{x1}\" fill=\"none\" stroke=\"black\"/>");
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(out, "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", y0 + 16.0, tick(xv));
            let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{py:.1}\" text-anchor=\"end\" dy=\"4\">{}</text>", x0 - 6.0, tick(yv));
        }
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", (x0 + x1) / 2.0, H - 16.0, escape(x_label));
        let _ = writeln!(
            out,
            "<text transform=\"translate(18 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// `points` in grey, `highlight` in red.
pub fn scatter(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    highlight: &[(f64, f64)],
    config_hash: &str,
) -> String {
    let all = points.iter().chain(highlight);
    let axes = Axes::fit(all.clone().map(|p| p.0), all.map(|p| p.1));
    let mut out = String::new();
    header(&mut out, W, H, config_hash, title);
    axes.draw(&mut out, x_label, y_label);
    for (x, y) in points {
        let _ = writeln!(out, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#999\"/>", axes.px(*x), axes.py(*y));
    }
    for (x, y) in highlight {
        let _ = writeln!(out, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#c0392b\"/>", axes.px(*x), axes.py(*y));
    }
    out.push_str("</svg>\n");
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One polyline per named series.
pub fn lines(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], config_hash: &str) -> String {
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let axes = Axes::fit(all.clone().map(|p| p.0), all.map(|p| p.1));
    let mut out = String::new();
    header(&mut out, W, H, config_hash, title);
    axes.draw(&mut out, x_label, y_label);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", axes.px(*x), axes.py(*y))).collect();
        let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>", path.join(" "));
        let ly = TOP + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{ly:.1}\" fill=\"{color}\">{}</text>", LEFT + 12.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

/// Values in [0, 1] shaded white to dark blue; NaN cells are left blank.
pub fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[Vec<f64>], config_hash: &str) -> String {
    let cell = 14.0;
    let left = 130.0;
    let top = 60.0;
    let width = left + cell * cols.len() as f64 + 20.0;
    let height = top + cell * rows.len() as f64 + 20.0;
    let mut out = String::new();
    header(&mut out, width.max(300.0), height, config_hash, title);
    for (j, c) in cols.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(out, "<text transform=\"translate({x:.1} {:.1}) rotate(-60)\" font-size=\"9\">{}</text>", top - 4.0, escape(c));
    }
    for (i, r) in rows.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"9\">{}</text>", left - 4.0, y + cell - 3.0, escape(r));
        for (j, v) in values[i].iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let t = v.clamp(0.0, 1.0);
            let shade = |hi: f64, lo: f64| (hi + (lo - hi) * t).round() as u8;
            let _ = writeln!(
                out,
                "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"#{:02x}{:02x}{:02x}\"><title>{v:.3}</title></rect>",
                left + cell * j as f64,
                shade(255.0, 8.0),
                shade(255.0, 48.0),
                shade(255.0, 107.0)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_standalone_documents() {
        let s = scatter("t", "x", "y", &[(0.0, 1.0), (2.0, 3.0)], &[(1.0, 1.0)], "h");
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("config_hash: h"));
        assert_eq!(s.matches("<circle").count(), 3);
        let l = lines("t", "x", "y", &[("a".into(), vec![(0.0, 0.0), (1.0, 1.0)])], "h");
        assert_eq!(l.matches("<polyline").count(), 1);
        let m = heatmap("t", &["r".into()], &["a".into(), "b".into()], &[vec![0.5, f64::NAN]], "h");
        assert_eq!(m.matches("<rect x").count(), 1);
    }

    #[test]
    fn degenerate_ranges_do_not_divide_by_zero() {
        let s = scatter("t", "x", "y", &[(1.0, 1.0)], &[], "h");
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }
}
