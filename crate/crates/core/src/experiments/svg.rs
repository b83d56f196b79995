//! Minimal SVG renderings of report data.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 90.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    out: String,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn new(title: &str, y_label: &str, y_lo: f64, y_hi: f64) -> Self {
        let (y_lo, y_hi) = if y_hi > y_lo { (y_lo, y_hi) } else { (y_lo - 0.5, y_lo + 0.5) };
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            esc(y_label)
        );
        let mut f = Frame { out, y_lo, y_hi };
        for i in 0..=4 {
            let v = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
            let y = f.y(v);
            let _ = writeln!(f.out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, W - RIGHT);
            let _ = writeln!(f.out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 4.0, y + 4.0, tick(v));
        }
        let _ = writeln!(
            f.out,
            r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="#333"/><line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="#333"/>"##,
            H - BOTTOM,
            H - BOTTOM,
            W - RIGHT,
            H - BOTTOM
        );
        f
    }

    fn y(&self, v: f64) -> f64 {
        let frac = ((v - self.y_lo) / (self.y_hi - self.y_lo)).clamp(0.0, 1.0);
        H - BOTTOM - frac * (H - BOTTOM - TOP)
    }

    fn x_label(&mut self, x: f64, label: &str) {
        let y = H - BOTTOM + 12.0;
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y}" transform="rotate(35 {x:.2} {y})" text-anchor="start">{}</text>"#,
            esc(label)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

/// Bars with optional symmetric whiskers. A dashed reference line is drawn
/// at `reference` when given.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    bars: &[(String, f64, Option<f64>)],
    y_range: Option<(f64, f64)>,
    reference: Option<f64>,
) -> String {
    let (lo, hi) = y_range.unwrap_or_else(|| {
        let (_, hi) = range(bars.iter().map(|b| b.1 + b.2.unwrap_or(0.0)));
        (0.0, hi.max(0.0) * 1.05)
    });
    let mut f = Frame::new(title, y_label, lo, hi);
    let slot = (W - LEFT - RIGHT) / bars.len().max(1) as f64;
    for (i, (label, v, err)) in bars.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let (y0, y1) = (f.y(lo.max(0.0).min(hi)), f.y(*v));
        let _ = writeln!(
            f.out,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            y0.min(y1),
            slot * 0.7,
            (y0 - y1).abs(),
            PALETTE[i % PALETTE.len()]
        );
        if let Some(e) = err {
            let cx = x + slot * 0.35;
            let (a, b) = (f.y(v - e), f.y(v + e));
            let _ = writeln!(
                f.out,
                r##"<line x1="{cx:.2}" y1="{a:.2}" x2="{cx:.2}" y2="{b:.2}" stroke="#222"/><line x1="{:.2}" y1="{a:.2}" x2="{:.2}" y2="{a:.2}" stroke="#222"/><line x1="{:.2}" y1="{b:.2}" x2="{:.2}" y2="{b:.2}" stroke="#222"/>"##,
                cx - 4.0,
                cx + 4.0,
                cx - 4.0,
                cx + 4.0
            );
        }
        f.x_label(x + slot * 0.2, label);
    }
    if let Some(r) = reference {
        let y = f.y(r);
        let _ = writeln!(f.out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#c00" stroke-dasharray="5,4"/>"##, W - RIGHT);
    }
    f.finish()
}

/// Per-group quartile boxes with whiskers to the extremes and the
/// individual points overlaid.
pub fn quartile_plot(title: &str, y_label: &str, groups: &[(String, [f64; 5], Vec<f64>)]) -> String {
    let (lo, hi) = range(groups.iter().flat_map(|g| g.1));
    let pad = ((hi - lo) * 0.05).max(0.05);
    let mut f = Frame::new(title, y_label, lo - pad, hi + pad);
    let slot = (W - LEFT - RIGHT) / groups.len().max(1) as f64;
    for (i, (label, q, pts)) in groups.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = slot * 0.25;
        let [mn, q1, md, q3, mx] = q.map(|v| f.y(v));
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            f.out,
            r##"<line x1="{cx:.2}" y1="{mn:.2}" x2="{cx:.2}" y2="{mx:.2}" stroke="#333"/><rect x="{:.2}" y="{q3:.2}" width="{:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.5" stroke="#333"/><line x1="{:.2}" y1="{md:.2}" x2="{:.2}" y2="{md:.2}" stroke="#000" stroke-width="2"/>"##,
            cx - half,
            2.0 * half,
            (q1 - q3).abs(),
            cx - half,
            cx + half
        );
        for (k, &p) in pts.iter().enumerate() {
            let jitter = ((k * 37 % 11) as f64 / 10.0 - 0.5) * half;
            let _ = writeln!(f.out, r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#222" fill-opacity="0.6"/>"##, cx + jitter, f.y(p));
        }
        f.x_label(cx - 10.0, label);
    }
    f.finish()
}

/// Scatter plot with the least-squares line.
pub fn scatter(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let (ylo, yhi) = range(ys.iter().copied());
    let (xlo, xhi) = range(xs.iter().copied());
    let (ypad, xpad) = (((yhi - ylo) * 0.05).max(0.05), ((xhi - xlo) * 0.05).max(0.05));
    let mut f = Frame::new(title, y_label, ylo - ypad, yhi + ypad);
    let (x0, x1) = (xlo - xpad, xhi + xpad);
    let px = |v: f64| LEFT + (v - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    for (&x, &y) in xs.iter().zip(ys) {
        let _ = writeln!(f.out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4c72b0"/>"##, px(x), f.y(y));
    }
    let n = xs.len() as f64;
    if xs.len() >= 2 {
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx > 0.0 {
            let b = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
            let a = my - b * mx;
            let _ = writeln!(
                f.out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c44e52" stroke-width="1.5"/>"##,
                px(x0),
                f.y(a + b * x0),
                px(x1),
                f.y(a + b * x1)
            );
        }
    }
    for i in 0..=4 {
        let v = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(f.out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, px(v), H - BOTTOM + 16.0, tick(v));
    }
    let _ = writeln!(f.out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - BOTTOM + 40.0, esc(x_label));
    f.finish()
}

/// One polyline per series over shared x values.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (ylo, yhi) = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let (xlo, xhi) = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let ypad = ((yhi - ylo) * 0.05).max(0.02);
    let mut f = Frame::new(title, y_label, ylo - ypad, yhi + ypad);
    let span = if xhi > xlo { xhi - xlo } else { 1.0 };
    let px = |v: f64| LEFT + 10.0 + (v - xlo) / span * (W - LEFT - RIGHT - 20.0);
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), f.y(y))).collect();
        let _ = writeln!(f.out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, path.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(f.out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, px(x), f.y(y));
        }
        let ly = TOP + 14.0 * i as f64;
        let _ = writeln!(f.out, r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#, W - RIGHT - 90.0, esc(name));
    }
    let mut xs: Vec<f64> = series.iter().flat_map(|s| s.1.iter().map(|p| p.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let _ = writeln!(f.out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, px(x), H - BOTTOM + 16.0, tick(x));
    }
    let _ = writeln!(f.out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - BOTTOM + 40.0, esc(x_label));
    f.finish()
}
