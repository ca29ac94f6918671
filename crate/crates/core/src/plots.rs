//! Standalone SVG figures: the marginal scatter plot (real probability on x,
//! synthetic probability on y, one point per level combination) and the
//! overlaid, range-normalised QQ plot of all numerical variables.
//!
//! Output is plain SVG 1.1 text with fixed-precision coordinates, so the
//! same input always yields the same bytes.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{align_dictionaries, AlignedPair, Column, ColumnKind, TableData};
use crate::marginals::{count_all, enumerate_tuples, MarginalTable};
use crate::metrics::{quantiles, MetricError};

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("QQ plot needs at least one series")]
    EmptySeries,
    #[error("table of degree {found} passed where degree {expected} was requested")]
    DegreeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Shared,
    /// Present only in the real data; drawn on the x-axis.
    RealOnly,
    /// Present only in the synthetic data; drawn on the y-axis.
    SynthOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub tuple: String,
    pub levels: Vec<String>,
    pub x: f64,
    pub y: f64,
    pub class: PointClass,
}

/// One point per union-support cell over all tables, in table then cell order.
pub fn scatter_points(
    pair: &AlignedPair,
    tables: &[MarginalTable],
    degree: usize,
) -> Result<Vec<ScatterPoint>, PlotError> {
    let mut out = Vec::new();
    for t in tables {
        if t.tuple.degree() != degree {
            return Err(PlotError::DegreeMismatch {
                expected: degree,
                found: t.tuple.degree(),
            });
        }
        let tuple = t.tuple.label(&pair.schema);
        for cell in &t.cells {
            let levels = cell
                .levels
                .iter()
                .zip(t.tuple.indices())
                .map(|(&code, &col)| match pair.levels(col) {
                    Some(l) => l[code as usize].clone(),
                    None => format!("bin{code}"),
                })
                .collect();
            let (x, y) = (t.p_real(cell), t.p_synth(cell));
            let class = if cell.count_real == 0 {
                PointClass::SynthOnly
            } else if cell.count_synth == 0 {
                PointClass::RealOnly
            } else {
                PointClass::Shared
            };
            out.push(ScatterPoint {
                tuple: tuple.clone(),
                levels,
                x,
                y,
                class,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterOptions {
    pub log_scale: bool,
    /// Points beyond this are subsampled for drawing only.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        ScatterOptions {
            log_scale: false,
            max_points: 200_000,
            seed: 0,
        }
    }
}

const SIZE: f64 = 560.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 50.0;
const PLOT: f64 = 440.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn class_color(c: PointClass) -> &'static str {
    match c {
        PointClass::Shared => "#1f77b4",
        PointClass::RealOnly => "#d62728",
        PointClass::SynthOnly => "#ff7f0e",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif">
<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>
<text x="{:.2}" y="28" font-size="16" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
}

/// Maps a data value to a pixel offset along an axis of length `PLOT`.
#[derive(Clone, Copy)]
enum Scale {
    Linear { max: f64 },
    Log { min_exp: i32 },
}

impl Scale {
    fn frac(self, v: f64) -> f64 {
        match self {
            Scale::Linear { max } => (v / max).clamp(0.0, 1.0),
            Scale::Log { min_exp } => {
                if v <= 0.0 {
                    0.0
                } else {
                    ((v.log10() - min_exp as f64) / (-min_exp as f64)).clamp(0.0, 1.0)
                }
            }
        }
    }

    fn ticks(self) -> Vec<(f64, String)> {
        match self {
            Scale::Linear { max } => (0..=5)
                .map(|i| {
                    let v = max * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect(),
            Scale::Log { min_exp } => (min_exp..=0)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect(),
        }
    }
}

fn px(fx: f64, fy: f64) -> (f64, f64) {
    (LEFT + fx * PLOT, TOP + PLOT - fy * PLOT)
}

fn axes(out: &mut String, scale: Scale, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{PLOT:.2}" height="{PLOT:.2}" fill="none" stroke="#000000" stroke-width="1"/>"##
    );
    for (v, label) in scale.ticks() {
        let f = scale.frac(v);
        let (x, _) = px(f, 0.0);
        let (_, y) = px(0.0, f);
        let bottom = TOP + PLOT;
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/><text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{label}</text>"##,
            bottom + 5.0,
            bottom + 18.0
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{label}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 40.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + PLOT / 2.0,
        TOP + PLOT / 2.0,
        escape(y_label)
    );
    let (x0, y0) = px(0.0, 0.0);
    let (x1, y1) = px(1.0, 1.0);
    let _ = writeln!(
        out,
        r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#888888" stroke-dasharray="4 3"/>"##
    );
}

fn nice_max(m: f64) -> f64 {
    if m <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(m.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * mag >= m {
            return (step * mag).min(1.0).max(m);
        }
    }
    1.0
}

/// Renders a square scatter plot with the identity diagonal. Axis-hugging
/// points get their own colour. Zero coordinates sit on the axis in log mode.
pub fn render_scatter(points: &[ScatterPoint], title: &str, opts: ScatterOptions) -> String {
    let shown: Vec<&ScatterPoint> = if points.len() > opts.max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = sample(&mut rng, points.len(), opts.max_points).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &points[i]).collect()
    } else {
        points.iter().collect()
    };

    let scale = if opts.log_scale {
        let min_pos = points
            .iter()
            .flat_map(|p| [p.x, p.y])
            .filter(|v| *v > 0.0)
            .fold(1.0f64, f64::min);
        Scale::Log {
            min_exp: (min_pos.log10().floor() as i32).clamp(-12, -1),
        }
    } else {
        let m = points.iter().flat_map(|p| [p.x, p.y]).fold(0.0f64, f64::max);
        Scale::Linear { max: nice_max(m) }
    };

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, scale, "real probability", "synthetic probability");

    let mut counts = [0usize; 3];
    out.push_str("<g stroke=\"none\" fill-opacity=\"0.7\">\n");
    for p in &shown {
        let (x, y) = px(scale.frac(p.x), scale.frac(p.y));
        let slot = match p.class {
            PointClass::Shared => 0,
            PointClass::RealOnly => 1,
            PointClass::SynthOnly => 2,
        };
        counts[slot] += 1;
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#,
            class_color(p.class)
        );
    }
    out.push_str("</g>\n");

    let legend = [
        (PointClass::Shared, "shared", counts[0]),
        (PointClass::RealOnly, "real only (x-axis)", counts[1]),
        (PointClass::SynthOnly, "synthetic only (y-axis)", counts[2]),
    ];
    for (i, (class, label, n)) in legend.iter().enumerate() {
        let y = TOP + 12.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/><text x="{:.2}" y="{:.2}" font-size="11">{} ({})</text>"#,
            LEFT + 12.0,
            y,
            class_color(*class),
            LEFT + 22.0,
            y + 4.0,
            label,
            n
        );
    }
    if shown.len() < points.len() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="44" font-size="10" text-anchor="middle">showing {} of {} points</text>"#,
            SIZE / 2.0,
            shown.len(),
            points.len()
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQSeries {
    pub variable: String,
    pub real_q: Vec<f64>,
    pub synth_q: Vec<f64>,
}

/// Quantiles of both samples, min-max normalised by the real range.
pub fn qq_series(variable: &str, real: &[f64], synth: &[f64], n_points: usize) -> Result<QQSeries, PlotError> {
    let rq = quantiles(real, n_points)?;
    let sq = quantiles(synth, n_points)?;
    let lo = rq[0];
    let span = rq[rq.len() - 1] - lo;
    let span = if span > 0.0 { span } else { 1.0 };
    Ok(QQSeries {
        variable: variable.to_string(),
        real_q: rq.iter().map(|v| (v - lo) / span).collect(),
        synth_q: sq.iter().map(|v| (v - lo) / span).collect(),
    })
}

/// All variables overlaid on one normalised plot, one polyline each.
pub fn render_qq(series: &[QQSeries], title: &str) -> Result<String, PlotError> {
    if series.is_empty() {
        return Err(PlotError::EmptySeries);
    }
    let scale = Scale::Linear { max: 1.0 };
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="plot-area"><rect x="{LEFT:.2}" y="{TOP:.2}" width="{PLOT:.2}" height="{PLOT:.2}"/></clipPath></defs>"#
    );
    axes(&mut out, scale, "real quantile (normalised)", "synthetic quantile (normalised)");
    out.push_str("<g clip-path=\"url(#plot-area)\" fill=\"none\" stroke-width=\"1.5\">\n");
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .real_q
            .iter()
            .zip(&s.synth_q)
            .map(|(&rx, &sy)| {
                let (x, y) = (LEFT + rx * PLOT, TOP + PLOT - sy * PLOT);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" stroke="{}"/>"#,
            pts.join(" "),
            PALETTE[i % PALETTE.len()]
        );
    }
    out.push_str("</g>\n");
    for (i, s) in series.iter().enumerate() {
        let y = TOP + 12.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            LEFT + 8.0,
            LEFT + 24.0,
            PALETTE[i % PALETTE.len()],
            LEFT + 30.0,
            y + 4.0,
            escape(&s.variable)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Scatter figures for degree 1 and 2 over the categorical columns, plus the
/// QQ figure over the numerical ones. Figures without content are omitted.
/// Returns `(figure name, svg)` pairs.
pub fn report_figures(
    real: &TableData,
    synth: &TableData,
    title: &str,
    opts: ScatterOptions,
) -> Result<Vec<(&'static str, String)>, crate::Error> {
    let pair = align_dictionaries(real, synth)?;
    let mut out = Vec::new();
    for (degree, name) in [(1, "scatter1"), (2, "scatter2")] {
        let tuples = enumerate_tuples(&pair.schema, degree, ColumnKind::Categorical);
        if tuples.is_empty() {
            continue;
        }
        let tables = count_all(&pair, &tuples)?;
        let points = scatter_points(&pair, &tables, degree)?;
        out.push((name, render_scatter(&points, &format!("{title} (degree {degree})"), opts)));
    }
    let mut series = Vec::new();
    for (i, spec) in pair.schema.columns.iter().enumerate() {
        if let (Column::Numerical(r), Column::Numerical(s)) = (&pair.real.columns[i], &pair.synth.columns[i]) {
            let (r, s) = (r.observed(), s.observed());
            if r.is_empty() || s.is_empty() {
                continue;
            }
            series.push(qq_series(&spec.name, &r, &s, QQ_POINTS)?);
        }
    }
    if !series.is_empty() {
        out.push(("qq", render_qq(&series, &format!("{title} (QQ)"))?));
    }
    Ok(out)
}

/// Quantile count per QQ series.
pub const QQ_POINTS: usize = 101;

pub fn figure_file_name(dataset: &str, model: &str, figure: &str) -> String {
    format!("{dataset}_{model}_{figure}.svg")
}
