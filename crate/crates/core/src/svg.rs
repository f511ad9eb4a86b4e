//! Minimal SVG charts: bars with error whiskers and line plots.
//!
//! Output is a pure function of the inputs; coordinates are printed with two
//! decimals so identical data yields identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 4] = ["#4477aa", "#ee6677", "#228833", "#ccbb44"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    s
}

fn finite_max(values: impl Iterator<Item = f64>) -> f64 {
    values.filter(|v| v.is_finite()).fold(0.0, f64::max)
}

struct Frame {
    y_max: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - TOP - BOTTOM;
        let v = if v.is_finite() {
            v.clamp(0.0, self.y_max)
        } else {
            0.0
        };
        HEIGHT - BOTTOM - (v / self.y_max) * h
    }

    fn axes(&self, s: &mut String, y_label: &str) {
        let (x0, x1, y0) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM);
        writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{TOP:.2}" x2="{x0:.2}" y2="{y0:.2}" stroke="black"/>"#
        )
        .unwrap();
        for i in 0..=4 {
            let v = self.y_max * f64::from(i) / 4.0;
            let y = self.y(v);
            writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#,
                x0 - 4.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                y + 4.0,
                tick(v)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
            (TOP + y0) / 2.0,
            (TOP + y0) / 2.0,
            escape(y_label)
        )
        .unwrap();
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Bars for `means` with whiskers of ±`errors`, one label per bar.
pub fn bar_chart(
    title: &str,
    labels: &[String],
    means: &[f64],
    errors: &[f64],
    y_label: &str,
) -> String {
    let n = means.len().max(1);
    let top = finite_max(means.iter().zip(errors).map(|(m, e)| m + e));
    let frame = Frame {
        y_max: if top > 0.0 { top * 1.1 } else { 1.0 },
    };
    let mut s = header(title);
    frame.axes(&mut s, y_label);
    let slot = (WIDTH - LEFT - RIGHT) / n as f64;
    let bar = slot * 0.7;
    for (i, &m) in means.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let y = frame.y(m);
        writeln!(
            s,
            r##"<rect x="{:.2}" y="{y:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"##,
            cx - bar / 2.0,
            frame.y(0.0) - y,
            PALETTE[0]
        )
        .unwrap();
        if let Some(&e) = errors.get(i) {
            let (lo, hi) = (frame.y(m - e), frame.y(m + e));
            let w = bar / 4.0;
            writeln!(
                s,
                r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="black"/>"#
            )
            .unwrap();
            for yy in [lo, hi] {
                writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="black"/>"#,
                    cx - w,
                    cx + w
                )
                .unwrap();
            }
        }
        if let Some(label) = labels.get(i) {
            let ly = HEIGHT - BOTTOM + 14.0;
            writeln!(
                s,
                r#"<text x="{cx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-45 {cx:.2} {ly:.2})">{}</text>"#,
                escape(label)
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One named series of y values over the shared x positions.
pub struct Series<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// Line chart with categorical x positions labelled by `x_labels`. Each series
/// is scaled to its own maximum so quantities of different size share the axis;
/// the legend shows that maximum.
pub fn line_chart(
    title: &str,
    x_labels: &[String],
    series: &[Series<'_>],
    x_label: &str,
) -> String {
    let frame = Frame { y_max: 1.0 };
    let mut s = header(title);
    frame.axes(&mut s, "value / series max");
    let n = x_labels.len().max(1);
    let slot = (WIDTH - LEFT - RIGHT) / n as f64;
    let x_at = |i: usize| LEFT + slot * (i as f64 + 0.5);
    for (i, label) in x_labels.iter().enumerate() {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x_at(i),
            HEIGHT - BOTTOM + 16.0,
            escape(label)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - BOTTOM + 36.0,
        escape(x_label)
    )
    .unwrap();
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let max = finite_max(ser.values.iter().map(|v| v.abs()));
        let scale = if max > 0.0 { max } else { 1.0 };
        let points: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", x_at(i), frame.y(v / scale)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        )
        .unwrap();
        for (i, v) in ser.values.iter().enumerate() {
            writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                x_at(i),
                frame.y(v / scale)
            )
            .unwrap();
        }
        let ly = HEIGHT - 14.0 - 14.0 * (series.len() - 1 - k) as f64;
        writeln!(
            s,
            r#"<text x="{LEFT:.2}" y="{ly:.2}" fill="{color}">{} (max {})</text>"#,
            escape(ser.name),
            tick(max)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
