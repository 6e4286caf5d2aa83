//! Hand-emitted SVG for the three figure styles the pipeline produces:
//! cluster scatter plots, landscape heatmaps with trajectory overlays, and
//! cost-evolution curves. No plotting dependency; plain shapes only.

use std::fmt::Write as _;

use polclust_core::datasets::Dataset;
use polclust_core::landscape::ScanResult;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PAD: f64 = 40.0;

fn open_svg(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn from_ranges(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        let (x_lo, x_hi) = widen(x);
        let (y_lo, y_hi) = widen(y);
        Self { x_lo, x_hi, y_lo, y_hi }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * PAD)
    }

    /// SVG y grows downward; data y grows upward.
    fn py(&self, y: f64) -> f64 {
        HEIGHT - PAD - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * PAD)
    }
}

/// Scatter plot of a dataset colored by cluster label, with centroid crosses.
pub fn cluster_scatter(dataset: &Dataset, labels: &[usize], centroids: &[[f64; 2]]) -> String {
    let b = dataset.bounds();
    let frame = Frame::from_ranges(b.x, b.y);
    let mut out = String::new();
    open_svg(&mut out);
    for (p, &label) in dataset.points().iter().zip(labels) {
        let color = PALETTE[label % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
            frame.px(p.x),
            frame.py(p.y)
        );
    }
    for (label, c) in centroids.iter().enumerate() {
        let color = PALETTE[label % PALETTE.len()];
        let (x, y) = (frame.px(c[0]), frame.py(c[1]));
        let _ = writeln!(
            out,
            r#"<path d="M {x0:.2} {y0:.2} L {x1:.2} {y1:.2} M {x0:.2} {y1:.2} L {x1:.2} {y0:.2}" stroke="{color}" stroke-width="2.5" fill="none"/>"#,
            x0 = x - 6.0,
            y0 = y - 6.0,
            x1 = x + 6.0,
            y1 = y + 6.0,
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Perceptually ordered dark-to-light ramp (approximate viridis anchors).
fn ramp(t: f64) -> String {
    const ANCHORS: [(f64, [u8; 3]); 5] = [
        (0.0, [68, 1, 84]),
        (0.25, [59, 82, 139]),
        (0.5, [33, 145, 140]),
        (0.75, [94, 201, 98]),
        (1.0, [253, 231, 37]),
    ];
    let t = t.clamp(0.0, 1.0);
    let mut rgb = ANCHORS[ANCHORS.len() - 1].1;
    for pair in ANCHORS.windows(2) {
        let ((t0, c0), (t1, c1)) = (pair[0], pair[1]);
        if t <= t1 {
            let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            rgb = [0, 1, 2].map(|i| (c0[i] as f64 + f * (c1[i] as f64 - c0[i] as f64)) as u8);
            break;
        }
    }
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

/// Heatmap of a landscape scan with its trajectories drawn on top.
pub fn landscape_heatmap(result: &ScanResult) -> String {
    let res = result.resolution();
    let frame = Frame::from_ranges(result.ranges[0], result.ranges[1]);
    let (lo, hi) = result
        .costs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        });
    let span = (hi - lo).max(f64::MIN_POSITIVE);

    let mut out = String::new();
    open_svg(&mut out);
    let cell_w = (WIDTH - 2.0 * PAD) / (res - 1) as f64;
    let cell_h = (HEIGHT - 2.0 * PAD) / (res - 1) as f64;
    for i in 0..res {
        for j in 0..res {
            let t = (result.cost_at(i, j) - lo) / span;
            // Axis 0 runs horizontally, axis 1 vertically.
            let x = frame.px(result.axis_values[0][i]) - cell_w / 2.0;
            let y = frame.py(result.axis_values[1][j]) - cell_h / 2.0;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cell_w + 0.5,
                cell_h + 0.5,
                ramp(t)
            );
        }
    }
    for (idx, path) in result.trajectories.iter().enumerate() {
        if path.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = path
            .iter()
            .map(|[v0, v1, _]| format!("{:.2},{:.2}", frame.px(*v0), frame.py(*v1)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            points.join(" ")
        );
        let last = path.last().unwrap();
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}" stroke="white"/>"#,
            frame.px(last[0]),
            frame.py(last[1])
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Cost-evolution curves, one polyline per restart, optionally min-max
/// normalized to [0, 1] across the whole figure.
pub fn cost_evolution(curves: &[Vec<f64>], normalize: bool) -> String {
    let longest = curves.iter().map(Vec::len).max().unwrap_or(0).max(2);
    let (lo, hi) = curves
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        });
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let value = |c: f64| if normalize { (c - lo) / span } else { c };
    let frame = Frame::from_ranges(
        (0.0, (longest - 1) as f64),
        if normalize { (0.0, 1.0) } else { (lo, hi) },
    );

    let mut out = String::new();
    open_svg(&mut out);
    let _ = writeln!(
        out,
        r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="#999"/> <line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="#999"/>"##,
        x0 = PAD,
        y0 = HEIGHT - PAD,
        x1 = WIDTH - PAD,
        y1 = PAD,
    );
    for (idx, curve) in curves.iter().enumerate() {
        if curve.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = curve
            .iter()
            .enumerate()
            .map(|(i, &c)| format!("{:.2},{:.2}", frame.px(i as f64), frame.py(value(c))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
