//! Minimal static SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let m = 0.05 * (hi - lo);
                (lo - m, hi + m)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Frame { x0, x1, y0, y1 }
    }

    fn x(&self, v: f64) -> f64 {
        PAD + (v - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        H - PAD - (v - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn open(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        W / 2.0,
        escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 16.0,
        escape(xlabel),
        H / 2.0,
        H / 2.0,
        escape(ylabel),
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            f.x(xv),
            H - PAD + 16.0,
            tick(xv),
            PAD - 6.0,
            f.y(yv) + 4.0,
            tick(yv)
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Line through `(x, mean)` with a shaded `mean ± sd` band.
pub fn line_band_svg(title: &str, xlabel: &str, ylabel: &str, series: &[(f64, f64, f64)]) -> String {
    let f = Frame::fit(
        series.iter().map(|p| p.0),
        series.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2]),
    );
    let mut out = String::new();
    open(&mut out, title, xlabel, ylabel, &f);
    if !series.is_empty() {
        let upper: Vec<String> = series
            .iter()
            .map(|p| format!("{:.2},{:.2}", f.x(p.0), f.y(p.1 + p.2)))
            .collect();
        let lower: Vec<String> = series
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", f.x(p.0), f.y(p.1 - p.2)))
            .collect();
        let _ = writeln!(
            out,
            "<polygon points=\"{} {}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>",
            upper.join(" "),
            lower.join(" "),
            PALETTE[0]
        );
        let line: Vec<String> = series
            .iter()
            .map(|p| format!("{:.2},{:.2}", f.x(p.0), f.y(p.1)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
            line.join(" "),
            PALETTE[0]
        );
        for p in series {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
                f.x(p.0),
                f.y(p.1),
                PALETTE[0]
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One labelled point cloud per group; centroids drawn as crosses and
/// joined by lines annotated with `edges` values.
pub fn scatter_svg(title: &str, groups: &[(String, Vec<[f64; 2]>)], edges: &[(usize, usize, f64)]) -> String {
    let f = Frame::fit(
        groups.iter().flat_map(|g| g.1.iter().map(|p| p[0])),
        groups.iter().flat_map(|g| g.1.iter().map(|p| p[1])),
    );
    let mut out = String::new();
    open(&mut out, title, "PC1", "PC2", &f);
    let centroid = |pts: &[[f64; 2]]| {
        let n = pts.len().max(1) as f64;
        let s = pts.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n, s[1] / n]
    };
    for (gi, (name, pts)) in groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        for p in pts {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.5\"/>",
                f.x(p[0]),
                f.y(p[1])
            );
        }
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/><text x=\"{}\" y=\"{}\">{}</text>",
            W - PAD - 110.0,
            PAD + 16.0 * gi as f64,
            W - PAD - 95.0,
            PAD + 9.0 + 16.0 * gi as f64,
            escape(name)
        );
    }
    for &(a, b, d) in edges {
        let (ca, cb) = (centroid(&groups[a].1), centroid(&groups[b].1));
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{d:.3}</text>",
            f.x(ca[0]),
            f.y(ca[1]),
            f.x(cb[0]),
            f.y(cb[1]),
            (f.x(ca[0]) + f.x(cb[0])) / 2.0,
            (f.y(ca[1]) + f.y(cb[1])) / 2.0 - 4.0
        );
    }
    for (name, pts) in groups {
        let c = centroid(pts);
        let (x, y) = (f.x(c[0]), f.y(c[1]));
        let _ = writeln!(
            out,
            "<path d=\"M{} {} L{} {} M{} {} L{} {}\" stroke=\"black\" stroke-width=\"2\"><title>{}</title></path>",
            x - 6.0,
            y - 6.0,
            x + 6.0,
            y + 6.0,
            x - 6.0,
            y + 6.0,
            x + 6.0,
            y - 6.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
