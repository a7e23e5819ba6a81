//! SVG figures drawn from the CSV artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{CliError, Result};

/// Numeric columns of a CSV file, in the order requested.
pub fn read_columns(path: &Path, wanted: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
    let headers = r.headers().map_err(CliError::csv(path))?.clone();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|c| {
            headers.iter().position(|h| h == *c).ok_or_else(|| CliError::MissingColumn {
                file: path.to_path_buf(),
                column: c.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); wanted.len()];
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(CliError::csv(path))?;
        for (col, &i) in cols.iter_mut().zip(&idx) {
            let cell = rec.get(i).unwrap_or("");
            col.push(cell.parse().map_err(|_| {
                CliError::schema(format!("{}: row {}", path.display(), row + 1), format!("not a number: {cell:?}"))
            })?);
        }
    }
    Ok(cols)
}

fn plot_err(path: &Path) -> impl Fn(String) -> CliError + '_ {
    move |message| CliError::Plot {
        path: path.to_path_buf(),
        message,
    }
}

const FLOOR: f64 = 1e-4;
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Log-scale `p̂_{k,t}` for the given agents, with the bound overlaid when
/// `bound_csv` is given. Values below 1e-4 are drawn at the floor.
pub fn error_prob_figure(error_csv: &Path, bound_csv: Option<&Path>, agents: &[usize], out: &Path) -> Result<()> {
    let cols = read_columns(error_csv, &["t", "agent", "p_hat"])?;
    let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = agents.iter().map(|a| (*a, Vec::new())).collect();
    for ((t, a), p) in cols[0].iter().zip(&cols[1]).zip(&cols[2]) {
        if let Some(c) = curves.get_mut(&(*a as usize)) {
            c.push((*t, p.max(FLOOR)));
        }
    }
    let bound = match bound_csv {
        Some(b) => {
            let c = read_columns(b, &["t", "bound_clipped"])?;
            c[0].iter().zip(&c[1]).map(|(t, v)| (*t, v.max(FLOOR))).collect()
        }
        None => Vec::new(),
    };
    let t_max = cols[0].iter().copied().fold(1.0, f64::max);

    let e = plot_err(out);
    let root = SVGBackend::new(out, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|x| e(x.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Instantaneous error probability", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..t_max, (FLOOR..1.0).log_scale())
        .map_err(|x| e(x.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc("error probability")
        .draw()
        .map_err(|x| e(x.to_string()))?;
    for (i, (agent, pts)) in curves.into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|x| e(x.to_string()))?
            .label(format!("agent {agent}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    if !bound.is_empty() {
        chart
            .draw_series(LineSeries::new(bound, BLACK.stroke_width(1)))
            .map_err(|x| e(x.to_string()))?
            .label("bound")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|x| e(x.to_string()))?;
    root.present().map_err(|x| e(x.to_string()))
}

/// Steady-state error against `δ + η + η̃`, one point per triplet, with the
/// confidence interval as a vertical bar.
pub fn sweep_figure(sweep_csv: &Path, agent: usize, out: &Path) -> Result<()> {
    let c = read_columns(sweep_csv, &["delta", "eta", "eta_tilde", "agent", "p_ss", "ci_lo", "ci_hi"])?;
    let pts: Vec<(f64, f64, f64, f64)> = (0..c[0].len())
        .filter(|&i| c[3][i] as usize == agent)
        .map(|i| (c[0][i] + c[1][i] + c[2][i], c[4][i], c[5][i], c[6][i]))
        .collect();
    let x_max = pts.iter().map(|p| p.0).fold(0.0, f64::max) * 1.1 + 1e-12;
    let y_max = pts.iter().map(|p| p.3).fold(0.0, f64::max).max(0.01) * 1.1;

    let e = plot_err(out);
    let root = SVGBackend::new(out, (720, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|x| e(x.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("Steady-state error, agent {agent}"), ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(|x| e(x.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("delta + eta + eta_tilde")
        .y_desc("steady-state error")
        .draw()
        .map_err(|x| e(x.to_string()))?;
    let color = PALETTE[0];
    chart
        .draw_series(pts.iter().map(|(x, _, lo, hi)| PathElement::new(vec![(*x, *lo), (*x, *hi)], color)))
        .map_err(|x| e(x.to_string()))?;
    chart
        .draw_series(pts.iter().map(|(x, y, _, _)| Circle::new((*x, *y), 4, color.filled())))
        .map_err(|x| e(x.to_string()))?;
    root.present().map_err(|x| e(x.to_string()))
}

/// Draw every figure whose inputs exist in `dir`; returns the files written.
pub fn plot_directory(dir: &Path, agents: &[usize]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let err = dir.join("error_prob.csv");
    if err.is_file() {
        let bound = dir.join("bound.csv");
        let out = dir.join("error_prob.svg");
        error_prob_figure(&err, bound.is_file().then_some(bound.as_path()), agents, &out)?;
        written.push(out);
    }
    let sweep = dir.join("sweep.csv");
    if sweep.is_file() {
        for &a in agents {
            let out = dir.join(format!("sweep_agent{a}.svg"));
            sweep_figure(&sweep, a, &out)?;
            written.push(out);
        }
    }
    if written.is_empty() {
        return Err(CliError::schema(dir.display().to_string(), "no error_prob.csv or sweep.csv to plot"));
    }
    Ok(written)
}
