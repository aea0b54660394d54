use std::path::{Path, PathBuf};

use clap::Args;
use dsmp::curve::CurveFile;
use dsmp::ds::{CurveDs, DsParams};
use dsmp::geom::{Manifold, TangentVec};
use dsmp::with_manifold;

use super::{columns, GainArgs, Table};
use crate::config::{pick_path, CliConfig};
use crate::error::CliResult;
use crate::input::{curve_on, emit, point_on, query_points, read_curve_file};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct QueryPoints {
    /// Query point in the manifold's flat layout (repeatable).
    #[arg(long = "x", value_name = "COORDS", allow_hyphen_values = true)]
    pub x: Vec<String>,
    /// CSV of query points with a header line.
    #[arg(long)]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub query: QueryPoints,
    #[command(flatten)]
    pub gains: GainArgs,
    /// CSV output; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub query: QueryPoints,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn eval(args: EvalArgs, cfg: &CliConfig) -> CliResult<Outcome> {
    let path = pick_path(args.curve.clone(), &cfg.io.curve, "curve file")?;
    let (file, kind) = read_curve_file(&path)?;
    let params = args.gains.resolve(&cfg.ds)?;
    let xs = query_points(&args.query.x, args.query.points.as_deref())?;
    let body = with_manifold!(kind, |m| eval_on(m, &file, &path, &params, &xs))?;
    emit(args.output.as_ref(), &body)?;
    Ok(Outcome::Done)
}

fn eval_on<M: Manifold>(m: M, file: &CurveFile, path: &Path, params: &DsParams, xs: &[Vec<f64>]) -> CliResult<Vec<u8>> {
    let kind = m.kind();
    let ds = CurveDs::new(curve_on(m, file, path)?, params.clone())?;
    let mut header: Vec<String> = columns("x", kind.point_len()).collect();
    header.extend(columns("v", kind.tangent_len()));
    header.extend(["phase", "dist", "V"].map(String::from));
    let mut table = Table::new(&header)?;
    for c in xs {
        let x = point_on(ds.manifold(), c)?;
        let out = ds.eval(&x)?;
        let v = ds.lyapunov_from(&out.projection);
        let mut row = ds.manifold().point_to_coords(&x);
        row.extend(out.velocity.coords());
        row.extend([out.projection.s_tilde, out.projection.dist, v]);
        table.row(row)?;
    }
    table.into_bytes()
}

pub fn project(args: ProjectArgs, cfg: &CliConfig) -> CliResult<Outcome> {
    let path = pick_path(args.curve.clone(), &cfg.io.curve, "curve file")?;
    let (file, kind) = read_curve_file(&path)?;
    let xs = query_points(&args.query.x, args.query.points.as_deref())?;
    let body = with_manifold!(kind, |m| project_on(m, &file, &path, &cfg.ds, &xs))?;
    emit(args.output.as_ref(), &body)?;
    Ok(Outcome::Done)
}

fn project_on<M: Manifold>(m: M, file: &CurveFile, path: &Path, params: &DsParams, xs: &[Vec<f64>]) -> CliResult<Vec<u8>> {
    let n = m.kind().point_len();
    let ds = CurveDs::new(curve_on(m, file, path)?, params.clone())?;
    let mut header: Vec<String> = columns("x", n).collect();
    header.push("phase".into());
    header.extend(columns("p", n));
    header.push("dist".into());
    let mut table = Table::new(&header)?;
    for c in xs {
        let x = point_on(ds.manifold(), c)?;
        let proj = ds.project(&x)?;
        let mut row = ds.manifold().point_to_coords(&x);
        row.push(proj.s_tilde);
        row.extend(ds.manifold().point_to_coords(&proj.point));
        row.push(proj.dist);
        table.row(row)?;
    }
    table.into_bytes()
}
