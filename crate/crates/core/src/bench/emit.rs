//! Deterministic artifact emission: trace CSVs, a summary table, and SVG
//! line plots.
//!
//! Floats in CSV bodies are printed with 17 significant digits so identical
//! configs produce byte-identical files; headers echo the full cell
//! configuration and integrator settings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::sim::Trajectory;

use super::config::{ExampleId, ExperimentConfig};
use super::run::{Artifacts, RunArtifact};

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// 17-significant-digit float formatting for CSV bodies.
fn fmt_e(v: f64) -> String {
    format!("{v:.16e}")
}

fn label_f64(v: f64) -> String {
    v.to_string()
}

/// Deterministic trace filename for a grid cell.
pub fn trace_filename(run: &RunArtifact) -> String {
    let x0 = run
        .x0
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("_");
    format!(
        "{}_{}_d{}_eps{}_x0_{}.csv",
        run.example,
        run.controller,
        label_f64(run.d_amp),
        label_f64(run.epsilon),
        x0
    )
}

/// Writes one run as CSV: commented config header, column line, then one row
/// per recorded step. An empty trajectory yields a header-only file.
pub fn write_trace_csv(
    path: &Path,
    cfg: &ExperimentConfig,
    run: &RunArtifact,
) -> Result<(), Error> {
    let mut out = String::new();
    for line in cfg.header_lines(run.d_amp, run.epsilon, &run.x0) {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&format!("# status = {}\n", run.status));

    let n = cfg.state_dim();
    let m = cfg.input_dim();
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("x_{i}")));
    cols.extend((0..m).map(|i| format!("u_{i}")));
    cols.extend((0..m).map(|i| format!("d_{i}")));
    for c in ["h", "hdot", "V", "delta", "qp_status"] {
        cols.push(c.to_string());
    }
    out.push_str(&cols.join(","));
    out.push('\n');

    if let Some(traj) = &run.trajectory {
        write_rows(&mut out, traj);
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_rows(out: &mut String, traj: &Trajectory) {
    for i in 0..traj.len() {
        let mut fields = vec![fmt_e(traj.times[i])];
        fields.extend(traj.states[i].iter().map(|v| fmt_e(*v)));
        fields.extend(traj.inputs[i].iter().map(|v| fmt_e(*v)));
        fields.extend(traj.disturbances[i].iter().map(|v| fmt_e(*v)));
        fields.push(fmt_e(traj.h_vals[i]));
        fields.push(fmt_e(traj.hdot_vals[i]));
        fields.push(fmt_e(traj.v_vals[i]));
        fields.push(fmt_e(traj.delta_vals[i]));
        fields.push(traj.statuses[i].to_string());
        let _ = writeln!(out, "{}", fields.join(","));
    }
}

/// One summary row per grid cell:
/// `example controller d epsilon x0 sup_h_violation sup_abs_x peak status`.
pub fn write_summary(path: &Path, artifacts: &Artifacts) -> Result<(), Error> {
    let mut out = String::new();
    out.push_str("# columns: example controller d epsilon x0 sup_h_violation sup_abs_x peak status\n");
    for run in &artifacts.runs {
        let x0 = run
            .x0
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            run.example,
            run.controller,
            label_f64(run.d_amp),
            label_f64(run.epsilon),
            x0,
            label_f64(run.sup_h_violation),
            label_f64(run.sup_abs_x),
            label_f64(run.peak),
            run.status
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// One plotted curve.
pub struct SvgSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Minimal hand-emitted SVG line plot: fixed canvas, one polyline per
/// series, optional dashed horizontal boundary line.
pub fn write_svg(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[SvgSeries],
    boundary: Option<f64>,
) -> Result<(), Error> {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if let Some(b) = boundary {
        ymin = ymin.min(b);
        ymax = ymax.max(b);
    }
    if !xmin.is_finite() || !xmax.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
    }
    if !ymin.is_finite() || !ymax.is_finite() {
        ymin = 0.0;
        ymax = 1.0;
    }
    if xmax - xmin < 1e-12 {
        xmax = xmin + 1.0;
    }
    if ymax - ymin < 1e-12 {
        ymax = ymin + 1.0;
    }
    let ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    let px = |x: f64| ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444\"/>",
        W - ML - MR,
        H - MT - MB
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>",
        0.5 * W
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{x_label}</text>",
        0.5 * W,
        H - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {:.2})\">{y_label}</text>",
        0.5 * H,
        0.5 * H
    );
    // Axis extremes.
    let _ = writeln!(
        svg,
        "<text x=\"{ML}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{xmin:.3}</text>",
        H - MB + 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{xmax:.3}</text>",
        W - MR,
        H - MB + 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{ymin:.3}</text>",
        ML - 6.0,
        H - MB
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{ymax:.3}</text>",
        ML - 6.0,
        MT + 11.0
    );

    if let Some(b) = boundary {
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333\" stroke-dasharray=\"6,4\"/>",
            py(b),
            W - MR,
            py(b)
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = (s.points.len() / 1200).max(1);
        let mut pts = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            if j % stride != 0 && j != s.points.len() - 1 {
                continue;
            }
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y.clamp(ymin, ymax)));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.trim_end()
        );
        let ly = MT + 18.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            W - MR - 150.0,
            W - MR - 126.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            W - MR - 120.0,
            ly + 4.0,
            s.label
        );
    }
    let _ = writeln!(svg, "</svg>");
    fs::write(path, svg)?;
    Ok(())
}

impl Artifacts {
    /// Writes every cell trace, the summary table, and the example's figure
    /// SVGs into `out_dir`. Returns the paths written.
    pub fn emit(&self, out_dir: &Path) -> Result<Vec<PathBuf>, Error> {
        fs::create_dir_all(out_dir)?;
        let mut written = Vec::new();
        for run in &self.runs {
            let path = out_dir.join(trace_filename(run));
            write_trace_csv(&path, &self.config, run)?;
            written.push(path);
        }
        let summary = out_dir.join("summary.txt");
        write_summary(&summary, self)?;
        written.push(summary);
        written.extend(self.emit_figures(out_dir)?);
        Ok(written)
    }

    fn emit_figures(&self, out_dir: &Path) -> Result<Vec<PathBuf>, Error> {
        let mut written = Vec::new();
        let cfg = &self.config;
        let runs_with_traj: Vec<&RunArtifact> = self
            .runs
            .iter()
            .filter(|r| r.trajectory.is_some())
            .collect();
        if runs_with_traj.is_empty() {
            return Ok(written);
        }

        let prefer = |values: &[f64], want: f64, fallback_last: bool| -> f64 {
            values
                .iter()
                .copied()
                .find(|v| (v - want).abs() < 1e-12)
                .unwrap_or(if fallback_last {
                    *values.last().unwrap()
                } else {
                    values[0]
                })
        };

        match cfg.example {
            ExampleId::Scalar => {
                let x0_ref = cfg
                    .x0_list
                    .iter()
                    .find(|x| (x[0] - 2.0).abs() < 1e-12)
                    .unwrap_or(&cfg.x0_list[0])
                    .clone();
                let series: Vec<SvgSeries> = runs_with_traj
                    .iter()
                    .filter(|r| r.x0 == x0_ref)
                    .map(|r| SvgSeries {
                        label: format!("d = {}", label_f64(r.d_amp)),
                        points: coord_series(r, 0),
                    })
                    .collect();
                if !series.is_empty() {
                    let p = out_dir.join("fig_response_vs_d.svg");
                    write_svg(
                        &p,
                        &format!("state response, x0 = {}", label_f64(x0_ref[0])),
                        "t [s]",
                        "x",
                        &series,
                        Some(2.0),
                    )?;
                    written.push(p);
                }

                let d_ref = prefer(&cfg.d_values, 1.0, true);
                let series: Vec<SvgSeries> = runs_with_traj
                    .iter()
                    .filter(|r| r.d_amp == d_ref)
                    .map(|r| SvgSeries {
                        label: format!("x0 = {}", label_f64(r.x0[0])),
                        points: coord_series(r, 0),
                    })
                    .collect();
                if !series.is_empty() {
                    let p = out_dir.join("fig_response_vs_x0.svg");
                    write_svg(
                        &p,
                        &format!("state response, d = {}", label_f64(d_ref)),
                        "t [s]",
                        "x",
                        &series,
                        Some(2.0),
                    )?;
                    written.push(p);
                }
            }
            ExampleId::Arctan => {
                let eps_ref = prefer(&cfg.epsilon_values, 1.0, false);
                let series: Vec<SvgSeries> = runs_with_traj
                    .iter()
                    .filter(|r| r.epsilon == eps_ref)
                    .map(|r| SvgSeries {
                        label: format!("d = {}", label_f64(r.d_amp)),
                        points: abs_coord_series(r, 0),
                    })
                    .collect();
                if !series.is_empty() {
                    let p = out_dir.join("fig_response_vs_d.svg");
                    write_svg(
                        &p,
                        &format!("|x(t)|, epsilon = {}", label_f64(eps_ref)),
                        "t [s]",
                        "|x|",
                        &series,
                        Some(2.0),
                    )?;
                    written.push(p);
                }

                let d_ref = prefer(&cfg.d_values, 10.0, true);
                let series: Vec<SvgSeries> = runs_with_traj
                    .iter()
                    .filter(|r| r.d_amp == d_ref)
                    .map(|r| SvgSeries {
                        label: format!("eps = {}", label_f64(r.epsilon)),
                        points: abs_coord_series(r, 0),
                    })
                    .collect();
                if !series.is_empty() {
                    let p = out_dir.join("fig_response_vs_eps.svg");
                    write_svg(
                        &p,
                        &format!("|x(t)|, d = {}", label_f64(d_ref)),
                        "t [s]",
                        "|x|",
                        &series,
                        Some(2.0),
                    )?;
                    written.push(p);
                }
            }
            ExampleId::Robot2dof => {
                let d_ref = cfg.d_values[0];
                let series: Vec<SvgSeries> = runs_with_traj
                    .iter()
                    .filter(|r| r.d_amp == d_ref)
                    .map(|r| SvgSeries {
                        label: format!("eps = {}", label_f64(r.epsilon)),
                        points: coord_series(r, 1),
                    })
                    .collect();
                if !series.is_empty() {
                    let p = out_dir.join("fig_r_vs_eps.svg");
                    write_svg(
                        &p,
                        &format!("r(t), d = {}", label_f64(d_ref)),
                        "t [s]",
                        "r [m]",
                        &series,
                        Some(cfg.robot.r_star),
                    )?;
                    written.push(p);
                }
            }
        }
        Ok(written)
    }
}

fn coord_series(run: &RunArtifact, i: usize) -> Vec<(f64, f64)> {
    let traj = run.trajectory.as_ref().expect("filtered for Some");
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, x)| (t, x[i]))
        .collect()
}

fn abs_coord_series(run: &RunArtifact, i: usize) -> Vec<(f64, f64)> {
    let traj = run.trajectory.as_ref().expect("filtered for Some");
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, x)| (t, x[i].abs()))
        .collect()
}
