use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use dsmp::bench::RawDemoSet;
use dsmp::curve::{CurveFile, FitReport};
use dsmp::damping::{DampingOptions, DampingProfile, DampingProfileFile};
use dsmp::ds::{ProjectionOptions, Projector};
use dsmp::geom::Manifold;
use dsmp::io::to_json_string;
use dsmp::with_manifold;

use super::{columns, Table};
use crate::config::{pick_path, CliConfig};
use crate::error::{reading, require_exists, CliError, CliResult};
use crate::input::{curve_on, demos_on, emit, parse_coords, point_on, query_points, read_curve_file, read_demos};
use crate::Outcome;

#[derive(Debug, Subcommand)]
pub enum DampingCommand {
    /// Damping matrices from demonstration spread around a fitted curve.
    Build(BuildArgs),
    /// Damping matrix at given phases and distances, or at states near a curve.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    pub demos: Option<PathBuf>,
    /// Motion curve the demonstrations were fitted with.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Shared phases after resampling.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Keep only the covariance diagonal.
    #[arg(long)]
    pub diagonal: bool,
    /// Segments of the SPD curve.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Profile file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub allow_partial: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub profile: PathBuf,
    /// `PHASE:DIST` pair (repeatable).
    #[arg(long, value_name = "PHASE:DIST")]
    pub at: Vec<String>,
    /// Motion curve used to project `--x` states.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long = "x", value_name = "COORDS", allow_hyphen_values = true)]
    pub x: Vec<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(cmd: DampingCommand, cfg: &CliConfig) -> CliResult<Outcome> {
    match cmd {
        DampingCommand::Build(a) => build(a, cfg),
        DampingCommand::Query(a) => query(a),
    }
}

fn build(args: BuildArgs, cfg: &CliConfig) -> CliResult<Outcome> {
    let demo_path = pick_path(args.demos.clone(), &cfg.io.demos, "demonstration file")?;
    let curve_path = pick_path(args.curve.clone(), &cfg.io.curve, "curve file (--curve)")?;
    let (file, kind) = read_curve_file(&curve_path)?;
    let raw = read_demos(&demo_path)?;
    let mut opts = cfg.damping.clone();
    opts.gain = args.gain.unwrap_or(opts.gain);
    opts.threshold = args.threshold.unwrap_or(opts.threshold);
    opts.samples = args.samples.unwrap_or(opts.samples);
    opts.diagonal |= args.diagonal;
    opts.fit.segments = args.segments.unwrap_or(opts.fit.segments);
    let (profile, fit) = with_manifold!(kind, |m| build_on(m, &file, &curve_path, &raw, &demo_path, &opts, cfg.radius_scale))?;
    emit(args.output.as_ref(), to_json_string(&profile)?.as_bytes())?;
    if let Some(p) = &args.report {
        emit(Some(p), to_json_string(&fit)?.as_bytes())?;
    }
    if !fit.converged {
        eprintln!("warning: damping curve fit did not converge ({:?})", fit.stop_reason);
        if !args.allow_partial {
            return Ok(Outcome::Partial);
        }
    }
    Ok(Outcome::Done)
}

fn build_on<M: Manifold>(
    m: M,
    file: &CurveFile,
    curve_path: &Path,
    raw: &RawDemoSet,
    demo_path: &Path,
    opts: &DampingOptions,
    radius_scale: f64,
) -> CliResult<(DampingProfileFile, FitReport)> {
    let demos = demos_on(&m, raw, radius_scale, demo_path)?;
    let curve = curve_on(m, file, curve_path)?;
    let built = DampingProfile::build(&demos, &curve, opts)?;
    Ok((built.profile.to_file(), built.fit))
}

fn parse_at(s: &str) -> CliResult<(f64, f64)> {
    let v = s
        .split_once(':')
        .map(|(a, b)| format!("{a},{b}"))
        .ok_or_else(|| CliError::input(format!("{s:?} is not PHASE:DIST")))?;
    let c = parse_coords(&v)?;
    Ok((c[0], c[1]))
}

fn query(args: QueryArgs) -> CliResult<Outcome> {
    require_exists(&args.profile)?;
    let text = std::fs::read_to_string(&args.profile).map_err(dsmp::Error::from)?;
    let file: DampingProfileFile = reading(&args.profile, serde_json::from_str(&text).map_err(dsmp::Error::from))?;
    let profile = reading(&args.profile, DampingProfile::from_file(&file))?;
    let mut queries = args.at.iter().map(|s| parse_at(s)).collect::<CliResult<Vec<_>>>()?;
    if !args.x.is_empty() {
        let path = args
            .curve
            .as_ref()
            .ok_or_else(|| CliError::input("--x needs --curve to project onto"))?;
        let (cf, kind) = read_curve_file(path)?;
        let xs = query_points(&args.x, None)?;
        queries.extend(with_manifold!(kind, |m| project_all(m, &cf, path, &xs))?);
    }
    if queries.is_empty() {
        return Err(CliError::input("no queries (use --at or --curve with --x)"));
    }
    let n = profile.n();
    let mut header = vec!["phase".to_string(), "dist".to_string()];
    header.extend(columns("d", n * n));
    let mut table = Table::new(&header)?;
    for (s, dist) in queries {
        let d = profile
            .query_at(s, dist)
            .map_err(|e| CliError::input(format!("query {s}:{dist}: {e}")))?;
        table.row([s, dist].into_iter().chain(d.matrix().transpose().iter().copied()))?;
    }
    emit(args.output.as_ref(), &table.into_bytes()?)?;
    Ok(Outcome::Done)
}

fn project_all<M: Manifold>(m: M, file: &CurveFile, path: &Path, xs: &[Vec<f64>]) -> CliResult<Vec<(f64, f64)>> {
    let projector = Projector::new(curve_on(m, file, path)?, ProjectionOptions::default())?;
    xs.iter()
        .map(|c| {
            let p = projector.project(&point_on(projector.curve().manifold(), c)?)?;
            Ok((p.s_tilde, p.dist))
        })
        .collect()
}
