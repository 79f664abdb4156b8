//! SVG charts of a finished run, read back from its CSV and log files.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use plotters::coord::ranged1d::ValueFormatter;
use plotters::coord::types::RangedCoordf64;
use plotters::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Series {
    Transmittance,
    Impedance,
    Events,
    Fill,
}

impl Series {
    fn name(self) -> &'static str {
        match self {
            Series::Transmittance => "transmittance",
            Series::Impedance => "impedance",
            Series::Events => "events",
            Series::Fill => "fill",
        }
    }
}

#[derive(Debug)]
pub enum PlotError {
    /// Missing or malformed run files.
    Input(String),
    Render(String),
}

type Line = (String, Vec<(f64, f64)>);

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(23, 190, 207),
];

fn read(path: &Path) -> Result<String, PlotError> {
    fs::read_to_string(path).map_err(|e| PlotError::Input(format!("{}: {e}", path.display())))
}

/// Rows of a CSV file as string cells, keyed by the header.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    path: PathBuf,
}

impl Table {
    fn load(path: &Path) -> Result<Self, PlotError> {
        let text = read(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| PlotError::Input(format!("{}: empty file", path.display())))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Ok(Self {
            header,
            rows,
            path: path.to_path_buf(),
        })
    }

    fn col(&self, name: &str) -> Result<usize, PlotError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PlotError::Input(format!("{}: no column {name}", self.path.display())))
    }

    fn num(&self, row: &[String], col: usize) -> Result<f64, PlotError> {
        row.get(col)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| PlotError::Input(format!("{}: bad number in row {row:?}", self.path.display())))
    }
}

/// Receptor ids that have files named `<prefix><id><suffix>` in `dir`.
fn receptor_ids(dir: &Path, prefix: &str, suffix: &str) -> Result<Vec<u32>, PlotError> {
    let entries = fs::read_dir(dir).map_err(|e| PlotError::Input(format!("{}: {e}", dir.display())))?;
    let mut ids: Vec<u32> = entries
        .filter_map(Result::ok)
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix(prefix)?.strip_suffix(suffix)?.parse().ok()
        })
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

fn transmittance_lines(dir: &Path) -> Result<Vec<Line>, PlotError> {
    let t = Table::load(&dir.join("transmittance.csv"))?;
    let (ct, cr, cv) = (t.col("t")?, t.col("receptor")?, t.col("transmittance")?);
    let mut lines: Vec<(u32, Vec<(f64, f64)>)> = Vec::new();
    for row in &t.rows {
        let id = t.num(row, cr)? as u32;
        let point = (t.num(row, ct)?, t.num(row, cv)?);
        match lines.iter_mut().find(|l| l.0 == id) {
            Some(l) => l.1.push(point),
            None => lines.push((id, vec![point])),
        }
    }
    Ok(lines.into_iter().map(|(id, pts)| (format!("receptor {id}"), pts)).collect())
}

fn impedance_lines(dir: &Path) -> Result<Vec<Line>, PlotError> {
    let mut out = Vec::new();
    for id in receptor_ids(dir, "readout_r", ".csv")? {
        let t = Table::load(&dir.join(format!("readout_r{id}.csv")))?;
        let (ct, cp, cz) = (t.col("t")?, t.col("polarity")?, t.col("z_ohm")?);
        let mut pts = Vec::new();
        for row in t.rows.iter().filter(|r| r.get(cp).map(String::as_str) == Some("+")) {
            let z = t.num(row, cz)?;
            if z.is_finite() {
                pts.push((t.num(row, ct)?, z / 1e3));
            }
        }
        out.push((format!("receptor {id}"), pts));
    }
    Ok(out)
}

fn fill_lines(dir: &Path) -> Result<Vec<Line>, PlotError> {
    let t = Table::load(&dir.join("fill.csv"))?;
    let ct = t.col("t")?;
    ["filled_mL", "pumped_mL", "vented_mL"]
        .iter()
        .map(|name| {
            let c = t.col(name)?;
            let pts = t
                .rows
                .iter()
                .map(|r| Ok((t.num(r, ct)?, t.num(r, c)?)))
                .collect::<Result<_, PlotError>>()?;
            Ok((name.trim_end_matches("_mL").to_string(), pts))
        })
        .collect()
}

/// Event markers as `(label, points)`, one group per LED colour plus flaps;
/// the y coordinate is the receptor's row.
fn event_groups(dir: &Path) -> Result<(Vec<Line>, Vec<u32>), PlotError> {
    let ids = receptor_ids(dir, "events_r", ".log")?;
    let mut groups: Vec<Line> = ["red", "yellow", "both", "flap"]
        .iter()
        .map(|g| (g.to_string(), Vec::new()))
        .collect();
    for (row, id) in ids.iter().enumerate() {
        let path = dir.join(format!("events_r{id}.log"));
        for line in read(&path)?.lines() {
            let field = |key: &str| {
                line.split_whitespace()
                    .find_map(|f| f.strip_prefix(key)?.strip_prefix('='))
            };
            let t: f64 = field("t")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| PlotError::Input(format!("{}: bad event line {line:?}", path.display())))?;
            let group = match (field("kind"), field("color")) {
                (Some("flap"), _) if field("flap") == Some("1") => "flap",
                (Some("led"), Some(c)) => c,
                _ => continue,
            };
            if let Some(g) = groups.iter_mut().find(|g| g.0 == group) {
                g.1.push((t, row as f64));
            }
        }
    }
    Ok((groups, ids))
}

fn x_range(lines: &[Line]) -> (f64, f64) {
    let hi = lines
        .iter()
        .flat_map(|l| l.1.iter().map(|p| p.0))
        .fold(f64::NEG_INFINITY, f64::max);
    if hi.is_finite() && hi > 0.0 {
        (0.0, hi)
    } else {
        (0.0, 1.0)
    }
}

fn y_range(lines: &[Line]) -> (f64, f64) {
    let (lo, hi) = lines
        .iter()
        .flat_map(|l| l.1.iter().map(|p| p.1))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(hi.abs() * 1e-3).max(1e-9);
    (lo - pad, hi + pad)
}

fn render_err(e: impl std::fmt::Display) -> PlotError {
    PlotError::Render(e.to_string())
}

fn draw_lines<'a, DB, Y>(
    mut chart: ChartContext<'a, DB, Cartesian2d<RangedCoordf64, Y>>,
    y_desc: &str,
    lines: &[Line],
) -> Result<(), PlotError>
where
    DB: DrawingBackend + 'a,
    DB::ErrorType: 'static,
    Y: Ranged<ValueType = f64> + ValueFormatter<f64>,
{
    chart
        .configure_mesh()
        .x_desc("t (s)")
        .y_desc(y_desc)
        .light_line_style(TRANSPARENT)
        .draw()
        .map_err(render_err)?;
    for (k, (label, pts)) in lines.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(render_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    if !lines.is_empty() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(render_err)?;
    }
    Ok(())
}

fn line_chart(
    path: &Path,
    title: &str,
    y_desc: &str,
    lines: &[Line],
    y: Option<(f64, f64)>,
    log_y: bool,
) -> Result<(), PlotError> {
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(render_err)?;
    let (x0, x1) = x_range(lines);
    let (y0, y1) = y.unwrap_or_else(|| y_range(lines));
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70);
    if log_y {
        let (lo, hi) = if y0 > 0.0 { (y0 * 0.9, y1 * 1.1) } else { (1.0, 10.0) };
        let chart = builder.build_cartesian_2d(x0..x1, (lo..hi).log_scale()).map_err(render_err)?;
        draw_lines(chart, y_desc, lines)?;
    } else {
        let chart = builder.build_cartesian_2d(x0..x1, y0..y1).map_err(render_err)?;
        draw_lines(chart, y_desc, lines)?;
    }
    root.present().map_err(render_err)
}

fn events_chart(path: &Path, groups: &[Line], ids: &[u32]) -> Result<(), PlotError> {
    let root = SVGBackend::new(path, (900, 400)).into_drawing_area();
    root.fill(&WHITE).map_err(render_err)?;
    let (x0, x1) = x_range(groups);
    let rows = ids.len().max(1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .caption("controller events", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(90)
        .build_cartesian_2d(x0..x1, -0.5..rows - 0.5)
        .map_err(render_err)?;
    let labels: Vec<String> = ids.iter().map(|id| format!("receptor {id}")).collect();
    chart
        .configure_mesh()
        .x_desc("t (s)")
        .y_labels(ids.len().max(1))
        .y_label_formatter(&|y| {
            let k = y.round();
            if (y - k).abs() < 1e-6 && k >= 0.0 {
                labels.get(k as usize).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .draw()
        .map_err(render_err)?;
    let colors = [RED, RGBColor(230, 180, 0), RGBColor(255, 120, 0), BLACK];
    for ((label, pts), color) in groups.iter().zip(colors) {
        // flaps sit just above the LED markers of their row
        let dy = if label == "flap" { 0.2 } else { 0.0 };
        chart
            .draw_series(pts.iter().map(move |&(t, y)| Circle::new((t, y + dy), 3, color.filled())))
            .map_err(render_err)?
            .label(label.as_str())
            .legend(move |(x, y)| Circle::new((x + 8, y), 4, color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(render_err)?;
    root.present().map_err(render_err)
}

/// Writes `plot_<series>.svg` into `run_dir` and returns its path.
pub fn plot(run_dir: &Path, which: Series) -> Result<PathBuf, PlotError> {
    if !run_dir.is_dir() {
        return Err(PlotError::Input(format!("{}: not a run directory", run_dir.display())));
    }
    let path = run_dir.join(format!("plot_{}.svg", which.name()));
    match which {
        Series::Transmittance => line_chart(
            &path,
            "580 nm transmittance",
            "T580",
            &transmittance_lines(run_dir)?,
            Some((0.0, 1.05)),
            false,
        )?,
        Series::Impedance => line_chart(&path, "impedance estimate", "Z (kΩ)", &impedance_lines(run_dir)?, None, true)?,
        Series::Fill => line_chart(&path, "fill volume", "volume (mL)", &fill_lines(run_dir)?, None, false)?,
        Series::Events => {
            let (groups, ids) = event_groups(run_dir)?;
            events_chart(&path, &groups, &ids)?;
        }
    }
    Ok(path)
}
