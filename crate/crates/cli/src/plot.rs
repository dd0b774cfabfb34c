//! The `plot` subcommand: training-curve SVGs with a mean line and a
//! translucent ±1 standard-deviation band per labeled input CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Curve {
    pub label: String,
    pub steps: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// `LABEL=PATH`, split at the first `=` so paths may contain more of them.
pub fn parse_input_spec(spec: &str) -> Result<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => {
            Ok((label.to_string(), PathBuf::from(path)))
        }
        _ => bail!("--input must look like LABEL=PATH, got {spec:?}"),
    }
}

/// Reads either an aggregate CSV (`env_step,mean,std`) or a per-seed
/// training CSV, whose first three columns carry the same quantities.
pub fn read_curve_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let recognized = header.len() >= 3
        && header[0] == "env_step"
        && ((header[1] == "mean" && header[2] == "std")
            || (header[1] == "mean_return" && header[2] == "std_return"));
    if !recognized {
        bail!(
            "{}: expected a header starting with `env_step,mean,std` or `env_step,mean_return,std_return`",
            path.display()
        );
    }
    let (mut steps, mut mean, mut std) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            bail!("{}:{}: expected at least 3 columns, got {line:?}", path.display(), i + 2);
        }
        let parse = |text: &str, what: &str| -> Result<f64> {
            text.parse::<f64>()
                .map_err(|_| anyhow!("{}:{}: bad {what} value {text:?}", path.display(), i + 2))
        };
        steps.push(parse(fields[0], "env_step")?);
        mean.push(parse(fields[1], "mean")?);
        std.push(parse(fields[2], "std")?);
    }
    Ok((steps, mean, std))
}

fn escape_xml(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            other => out.push(other),
        }
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

/// Consecutive index runs where every plotted coordinate is finite.
fn finite_runs(curve: &Curve) -> Vec<Vec<usize>> {
    let mut runs = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for i in 0..curve.steps.len() {
        if curve.steps[i].is_finite() && curve.mean[i].is_finite() {
            current.push(i);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

fn band_width(curve: &Curve, i: usize) -> f64 {
    if curve.std[i].is_finite() { curve.std[i].abs() } else { 0.0 }
}

pub fn render_svg(curves: &[Curve]) -> Result<String> {
    assert!(!curves.is_empty(), "need at least one curve");
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for curve in curves {
        for run in finite_runs(curve) {
            for i in run {
                let s = band_width(curve, i);
                x_min = x_min.min(curve.steps[i]);
                x_max = x_max.max(curve.steps[i]);
                y_min = y_min.min(curve.mean[i] - s);
                y_max = y_max.max(curve.mean[i] + s);
            }
        }
    }
    if x_min > x_max {
        bail!("no finite data points to plot");
    }
    if x_min == x_max {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if y_min == y_max {
        let pad = y_min.abs().max(1.0) * 0.05;
        y_min -= pad;
        y_max += pad;
    } else {
        let pad = (y_max - y_min) * 0.05;
        y_min -= pad;
        y_max += pad;
    }

    let plot_right = WIDTH - MARGIN_RIGHT;
    let plot_bottom = HEIGHT - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * (plot_right - MARGIN_LEFT);
    let py = |y: f64| plot_bottom - (y - y_min) / (y_max - y_min) * (plot_bottom - MARGIN_TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        for run in finite_runs(curve) {
            if run.len() < 2 {
                if let [i] = run[..] {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                        px(curve.steps[i]),
                        py(curve.mean[i]),
                    );
                }
                continue;
            }
            let mut band = String::new();
            for &i in &run {
                let _ = write!(
                    band,
                    "{:.2},{:.2} ",
                    px(curve.steps[i]),
                    py(curve.mean[i] + band_width(curve, i)),
                );
            }
            for &i in run.iter().rev() {
                let _ = write!(
                    band,
                    "{:.2},{:.2} ",
                    px(curve.steps[i]),
                    py(curve.mean[i] - band_width(curve, i)),
                );
            }
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end(),
            );
            let mut line = String::new();
            for &i in &run {
                let _ = write!(line, "{:.2},{:.2} ", px(curve.steps[i]), py(curve.mean[i]));
            }
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                line.trim_end(),
            );
        }
    }

    let axis_style = r##"stroke="#333333" stroke-width="1""##;
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{plot_bottom}" x2="{plot_right}" y2="{plot_bottom}" {axis_style}/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{plot_bottom}" {axis_style}/>"#
    );
    let text_style = r##"font-family="Helvetica, Arial, sans-serif" fill="#333333""##;
    for t in 0..5 {
        let frac = t as f64 / 4.0;
        let xv = x_min + (x_max - x_min) * frac;
        let x = px(xv);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{plot_bottom}" x2="{x:.2}" y2="{:.2}" {axis_style}/>"#, plot_bottom + 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle" {text_style}>{}</text>"#,
            plot_bottom + 20.0,
            fmt_tick(xv),
        );
        let yv = y_min + (y_max - y_min) * frac;
        let y = py(yv);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" {axis_style}/>"#, MARGIN_LEFT - 5.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end" {text_style}>{}</text>"#,
            MARGIN_LEFT - 9.0,
            y + 4.0,
            fmt_tick(yv),
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle" {text_style}>environment steps</text>"#,
        (MARGIN_LEFT + plot_right) / 2.0,
        HEIGHT - 14.0,
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})" {text_style}>return</text>"#,
        (MARGIN_TOP + plot_bottom) / 2.0,
        (MARGIN_TOP + plot_bottom) / 2.0,
    );

    let legend_x = plot_right - 180.0;
    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let y = MARGIN_TOP + 16.0 + ci as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{legend_x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/>"#,
            legend_x + 24.0,
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" {text_style}>{}</text>"#,
            legend_x + 30.0,
            y + 4.0,
            escape_xml(&curve.label),
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn cmd_plot(inputs: &[String], output: &Path) -> Result<()> {
    let mut curves = Vec::new();
    for spec in inputs {
        let (label, path) = parse_input_spec(spec)?;
        let (steps, mean, std) = read_curve_csv(&path)?;
        curves.push(Curve { label, steps, mean, std });
    }
    let svg = render_svg(&curves)?;
    std::fs::write(output, svg).with_context(|| format!("cannot write {}", output.display()))?;
    println!("wrote {} ({} curves)", output.display(), curves.len());
    Ok(())
}
