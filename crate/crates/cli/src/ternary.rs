use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{create_dir, load, write, Provenance};
use crate::failure::Failure;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 693.0;
/// Side of the triangle in pixels; the frame is centred in the viewport.
const SIDE: f64 = 760.0;
const LEFT: f64 = (WIDTH - SIDE) / 2.0;
const SQRT3_2: f64 = 0.866_025_403_784_438_6;
/// Longest arrow glyph, as a fraction of the side.
const ARROW: f64 = 0.045;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TernaryConfig {
    /// Trajectory, ensemble or portrait CSV written by `simulate`.
    pub input: PathBuf,
}

/// Barycentric projection onto the unit-side triangle with `e_1` at the
/// origin, `e_2` at `(1, 0)` and `e_3` at `(1/2, √3/2)`.
pub fn project(p: &[f64]) -> (f64, f64) {
    (p[1] + p[2] / 2.0, SQRT3_2 * p[2])
}

/// Unit-triangle coordinates to SVG pixels (y grows downwards).
pub fn to_pixels((x, y): (f64, f64)) -> (f64, f64) {
    let bottom = HEIGHT - (HEIGHT - SIDE * SQRT3_2) / 2.0;
    (LEFT + SIDE * x, bottom - SIDE * y)
}

pub fn pixel(p: &[f64]) -> (f64, f64) {
    to_pixels(project(p))
}

/// What the CSV header says the rows are.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Trajectory,
    Ensemble,
    Portrait,
}

pub struct Plot {
    pub layout: Layout,
    /// Composition columns of every row.
    pub points: Vec<[f64; 3]>,
    /// Velocity columns, portraits only.
    pub vectors: Vec<[f64; 3]>,
}

fn columns(headers: &[String], prefix: &str) -> Vec<usize> {
    let mut idx: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(prefix).and_then(|k| k.parse::<usize>().ok()).map(|k| (k, i)))
        .collect();
    idx.sort();
    idx.into_iter().map(|(_, i)| i).collect()
}

pub fn read_plot(bytes: &[u8]) -> Result<Plot, Failure> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers: Vec<String> =
        reader.headers().map_err(|e| Failure::Parse(e.to_string()))?.iter().map(str::to_string).collect();
    let layout = match headers.first().map(String::as_str) {
        Some("t") => Layout::Trajectory,
        Some("trajectory_id") => Layout::Ensemble,
        Some("p_1") if headers.iter().any(|h| h == "v_1") => Layout::Portrait,
        _ => return Err(Failure::Parse(format!("unrecognized CSV header {headers:?}"))),
    };
    let p_cols = columns(&headers, "p_");
    if p_cols.len() != 3 {
        return Err(Failure::Dimension(format!("ternary plots need n = 3, got n = {}", p_cols.len())));
    }
    let v_cols = columns(&headers, "v_");
    if layout == Layout::Portrait && v_cols.len() != 3 {
        return Err(Failure::Dimension(format!("portrait needs 3 velocity columns, got {}", v_cols.len())));
    }
    let mut plot = Plot { layout, points: Vec::new(), vectors: Vec::new() };
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::Parse(e.to_string()))?;
        let cell = |i: usize| -> Result<f64, Failure> {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Parse(format!("row {}: column {} is not a finite number", line + 1, headers[i])))
        };
        plot.points.push([cell(p_cols[0])?, cell(p_cols[1])?, cell(p_cols[2])?]);
        if layout == Layout::Portrait {
            plot.vectors.push([cell(v_cols[0])?, cell(v_cols[1])?, cell(v_cols[2])?]);
        }
    }
    Ok(plot)
}

/// Provenance of the plotted data, read from its `simulate` sidecar if present.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Source {
    pub config_sha256: String,
    pub seed: Option<u64>,
}

fn source_of(input: &Path) -> Option<Source> {
    #[derive(Deserialize)]
    struct Sidecar {
        provenance: Source,
    }
    let text = fs::read_to_string(input.with_extension("json")).ok()?;
    serde_json::from_str::<Sidecar>(&text).ok().map(|s| s.provenance)
}

pub fn render(plot: &Plot, provenance: &Provenance, source: Option<&Source>) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="693" viewBox="0 0 800 693">"#);
    let meta = serde_json::json!({
        "version": provenance.version,
        "config_sha256": provenance.config_sha256,
        "seed": source.and_then(|s| s.seed),
        "source_config_sha256": source.map(|s| s.config_sha256.clone()),
    });
    let _ = writeln!(w, "<metadata>{meta}</metadata>");
    let _ = writeln!(
        w,
        r##"<defs><marker id="head" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="5" markerHeight="5" orient="auto"><path d="M0,0L10,5L0,10z" fill="#1f4e79"/></marker></defs>"##
    );
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let frame: Vec<String> = corners.iter().map(|c| fmt_point(pixel(c))).collect();
    let _ = writeln!(w, r#"<polygon points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#, frame.join(" "));
    for (k, c) in corners.iter().enumerate() {
        let (x, y) = pixel(c);
        let dy = if k == 2 { -6.0 } else { 14.0 };
        let anchor = ["end", "start", "middle"][k];
        let _ = writeln!(w, r#"<text x="{x:.3}" y="{:.3}" font-size="12" text-anchor="{anchor}">e{}</text>"#, y + dy, k + 1);
    }
    match plot.layout {
        Layout::Trajectory => {
            let pts: Vec<String> = plot.points.iter().map(|p| fmt_point(pixel(p))).collect();
            let _ = writeln!(w, r##"<polyline points="{}" fill="none" stroke="#1f4e79" stroke-width="1"/>"##, pts.join(" "));
        }
        Layout::Ensemble => {
            for p in &plot.points {
                let (x, y) = pixel(p);
                let _ = writeln!(w, r##"<circle cx="{x:.3}" cy="{y:.3}" r="1.5" fill="#1f4e79"/>"##);
            }
        }
        Layout::Portrait => {
            let projected: Vec<(f64, f64)> = plot.vectors.iter().map(|v| project(v)).collect();
            let longest = projected.iter().map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max);
            for (p, (vx, vy)) in plot.points.iter().zip(&projected) {
                let speed = vx.hypot(*vy);
                if speed == 0.0 || longest == 0.0 {
                    continue;
                }
                // Direction from the field, length growing with the speed.
                let len = ARROW * (speed / longest).sqrt();
                let (x0, y0) = project(p);
                let (x1, y1) = to_pixels((x0 + len * vx / speed, y0 + len * vy / speed));
                let (x0, y0) = to_pixels((x0, y0));
                let _ = writeln!(
                    w,
                    r##"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="#1f4e79" stroke-width="1" marker-end="url(#head)"/>"##
                );
            }
        }
    }
    let _ = writeln!(w, "</svg>");
    s
}

fn fmt_point((x, y): (f64, f64)) -> String {
    format!("{x:.3},{y:.3}")
}

pub fn ternary(config: &Path, out: &Path) -> Result<(), Failure> {
    let loaded = load::<TernaryConfig>(config)?;
    let input = loaded.resolve(&loaded.config.input);
    let bytes = fs::read(&input).map_err(|e| Failure::Parse(format!("{}: {e}", input.display())))?;
    let plot = read_plot(&bytes)?;
    let source = source_of(&input);
    let provenance = loaded.provenance("ternary", source.as_ref().and_then(|s| s.seed));
    let svg = render(&plot, &provenance, source.as_ref());
    create_dir(out)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let path = out.join(format!("{stem}.svg"));
    write(&path, svg.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}
