use std::io::Write;
use std::path::{Path, PathBuf};

use dsmp::bench::{load_demos, map_to_sphere, RawDemoSet};
use dsmp::curve::{normalize_phases, CompositeBezierCurve, CurveFile, DemoSet, TimedDemo};
use dsmp::geom::{Manifold, ManifoldKind};

use crate::error::{reading, require_exists, CliError, CliResult};

pub fn parse_coords(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("bad number {c:?} in {s:?}")))
        })
        .collect()
}

/// Rows of coordinates from a CSV file with a header line.
pub fn read_points_csv(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    require_exists(path)?;
    let bad = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(bad)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(bad)?;
        let row = rec
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::input(format!("{}: line {}: not a number", path.display(), i + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Query points from repeated `--x` flags followed by rows of `--points`.
pub fn query_points(xs: &[String], file: Option<&Path>) -> CliResult<Vec<Vec<f64>>> {
    let mut out = xs.iter().map(|s| parse_coords(s)).collect::<CliResult<Vec<_>>>()?;
    if let Some(f) = file {
        out.extend(read_points_csv(f)?);
    }
    if out.is_empty() {
        return Err(CliError::input("no query points (use --x or --points)"));
    }
    Ok(out)
}

pub fn read_curve_file(path: &Path) -> CliResult<(CurveFile, ManifoldKind)> {
    require_exists(path)?;
    let file = reading(path, CurveFile::read(path))?;
    let kind = reading(path, file.kind())?;
    Ok((file, kind))
}

pub fn curve_on<M: Manifold>(m: M, file: &CurveFile, path: &Path) -> CliResult<CompositeBezierCurve<M>> {
    reading(path, CompositeBezierCurve::from_file(m, file))
}

pub fn read_demos(path: &Path) -> CliResult<RawDemoSet> {
    require_exists(path)?;
    reading(path, load_demos(path))
}

/// Demonstrations as points of `m`. Planar demos on `S²` go through the
/// benchmark's sphere mapping; otherwise each row must be a point in the
/// manifold's flat layout.
pub fn demos_on<M: Manifold>(m: &M, raw: &RawDemoSet, radius_scale: f64, path: &Path) -> CliResult<DemoSet<M::Point>> {
    let kind = m.kind();
    let timed: Vec<TimedDemo<Vec<f64>>> = if kind == ManifoldKind::S2 && raw.dim == 2 {
        reading(path, map_to_sphere(raw, radius_scale))?
            .into_iter()
            .map(|d| TimedDemo {
                times: d.times,
                points: d.points.iter().map(|p| vec![p.x, p.y, p.z]).collect(),
            })
            .collect()
    } else if raw.dim == kind.point_len() {
        raw.timed()
    } else {
        return Err(CliError::input(format!(
            "{}: demos have {} coordinates but {kind} points have {}",
            path.display(),
            raw.dim,
            kind.point_len()
        )));
    };
    let set = reading(path, normalize_phases(&timed))?;
    reading(path, set.map_points(|c| m.point_from_coords(c)))
}

pub fn point_on<M: Manifold>(m: &M, coords: &[f64]) -> CliResult<M::Point> {
    m.point_from_coords(coords)
        .map_err(|e| CliError::input(format!("bad {} point {coords:?}: {e}", m.kind())))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&PathBuf>, body: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(dsmp::Error::from)?;
            }
            std::fs::write(p, body).map_err(dsmp::Error::from)?;
            log::info!("wrote {}", p.display());
        }
        None => std::io::stdout().write_all(body).map_err(dsmp::Error::from)?,
    }
    Ok(())
}
