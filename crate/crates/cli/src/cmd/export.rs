use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use dsmp::bench::{synthetic_corpus, write_demos_csv, SyntheticOptions, SHAPES};
use dsmp::curve::CurveFile;
use dsmp::geom::{Manifold, TangentVec};
use dsmp::with_manifold;

use super::{columns, Table};
use crate::config::{pick_path, CliConfig};
use crate::error::{CliError, CliResult};
use crate::input::{curve_on, emit, read_curve_file};
use crate::Outcome;

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    /// Curve points (and optionally velocities) at uniform phases.
    Curve(CurveExport),
    /// The built-in synthetic shapes as a CSV corpus directory.
    Synthetic(SyntheticExport),
}

#[derive(Debug, Args)]
pub struct CurveExport {
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Add the phase derivative as `v` columns.
    #[arg(long)]
    pub derivative: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SyntheticExport {
    /// Output directory; one `<Shape>.csv` per shape.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub shapes: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub demos: Option<usize>,
    /// Samples per demonstration.
    #[arg(long)]
    pub samples: Option<usize>,
}

pub fn run(cmd: ExportCommand, cfg: &CliConfig) -> CliResult<Outcome> {
    match cmd {
        ExportCommand::Curve(a) => curve(a, cfg),
        ExportCommand::Synthetic(a) => synthetic(a, cfg),
    }
}

fn curve(args: CurveExport, cfg: &CliConfig) -> CliResult<Outcome> {
    let path = pick_path(args.curve.clone(), &cfg.io.curve, "curve file")?;
    if args.samples < 2 {
        return Err(CliError::input("--samples must be at least 2"));
    }
    let (file, kind) = read_curve_file(&path)?;
    let body = with_manifold!(kind, |m| sample_on(m, &file, &path, &args))?;
    emit(args.output.as_ref(), &body)?;
    Ok(Outcome::Done)
}

fn sample_on<M: Manifold>(m: M, file: &CurveFile, path: &Path, args: &CurveExport) -> CliResult<Vec<u8>> {
    let kind = m.kind();
    let curve = curve_on(m, file, path)?;
    let mut header = vec!["s".to_string()];
    header.extend(columns("x", kind.point_len()));
    if args.derivative {
        header.extend(columns("v", kind.tangent_len()));
    }
    let mut table = Table::new(&header)?;
    let (phases, points) = curve.sample(args.samples)?;
    for (s, x) in phases.iter().zip(&points) {
        let mut row = vec![*s];
        row.extend(curve.manifold().point_to_coords(x));
        if args.derivative {
            row.extend(curve.derivative(*s)?.coords());
        }
        table.row(row)?;
    }
    table.into_bytes()
}

fn synthetic(args: SyntheticExport, cfg: &CliConfig) -> CliResult<Outcome> {
    let defaults = SyntheticOptions::default();
    let opts = SyntheticOptions {
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
        demos: args.demos.unwrap_or(defaults.demos),
        samples: args.samples.unwrap_or(defaults.samples),
        ..defaults
    };
    if let Some(bad) = args.shapes.iter().find(|s| !SHAPES.contains(&s.as_str())) {
        return Err(CliError::input(format!(
            "unknown shape {bad:?}; known shapes: {}",
            SHAPES.join(", ")
        )));
    }
    for (name, set) in synthetic_corpus(&args.shapes, &opts)? {
        let mut buf = Vec::new();
        write_demos_csv(&set, &mut buf)?;
        emit(Some(&args.output.join(format!("{name}.csv"))), &buf)?;
    }
    Ok(Outcome::Done)
}
