//! Minimal native SVG line plots — polylines, axes, tick labels, legend.
//! No renderer dependency; output is deterministic for fixed input.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 18.0;
const BOTTOM: f64 = 42.0;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Line plot of the series over a shared axis; `log_y` plots log₁₀ y and
/// drops non-positive values. Returns the complete SVG document.
pub fn line_plot(x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let transformed: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|(x, y)| (*x, if log_y { y.log10() } else { *y }))
                .collect()
        })
        .collect();
    for pts in &transformed {
        for (x, y) in pts {
            xs.push(*x);
            ys.push(*y);
        }
    }
    let (mut x0, mut x1) = min_max(&xs);
    let (mut y0, mut y1) = min_max(&ys);
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    // breathing room on the value axis
    let pad = 0.04 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + ph,
        LEFT + pw,
        TOP + ph
    ));
    out.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + ph
    ));
    // ticks
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let xp = px(xv);
        out.push_str(&format!(
            "<line x1=\"{xp:.2}\" y1=\"{:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            TOP + ph,
            TOP + ph + 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{xp:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            TOP + ph + 16.0,
            fmt_tick(xv)
        ));
        let yv = y0 + f * (y1 - y0);
        let yp = py(yv);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{LEFT}\" y2=\"{yp:.2}\" stroke=\"black\"/>\n",
            LEFT - 4.0
        ));
        let label = if log_y { format!("1e{}", fmt_tick(yv)) } else { fmt_tick(yv) };
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>\n",
            LEFT - 7.0,
            yp + 4.0
        ));
    }
    // axis labels
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{x_label}</text>\n",
        LEFT + pw / 2.0,
        HEIGHT - 8.0
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}{}</text>\n",
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        if log_y { "log " } else { "" },
        y_label
    ));
    // series
    for (idx, pts) in transformed.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if !pts.is_empty() {
            let coords: Vec<String> =
                pts.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                coords.join(" ")
            ));
        }
        // legend entry
        let ly = TOP + 6.0 + 16.0 * idx as f64;
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            LEFT + pw - 110.0,
            LEFT + pw - 86.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            LEFT + pw - 80.0,
            ly + 4.0,
            series[idx].label
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn min_max(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in v {
        lo = lo.min(*x);
        hi = hi.max(*x);
    }
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}
