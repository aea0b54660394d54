use std::path::{Path, PathBuf};

use clap::Args;
use dsmp::curve::{CompositeBezierCurve, CurveFile};
use dsmp::ds::{CurveDs, DsParams};
use dsmp::geom::Manifold;
use dsmp::io::to_json_string;
use dsmp::rollout::{rollout, Perturbation, RolloutConfig, Trajectory};
use dsmp::with_manifold;

use super::GainArgs;
use crate::config::{pick_path, CliConfig};
use crate::error::{CliError, CliResult};
use crate::input::{curve_on, emit, parse_coords, point_on, read_curve_file};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct RolloutArgs {
    pub curve: Option<PathBuf>,
    /// Initial state: `start`, `end`, `phase:S` (the curve point at S) or
    /// comma-separated coordinates.
    #[arg(long, default_value = "start", allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// `STEP:COORDS` jump in local coordinates before the given step (repeatable).
    #[arg(long, value_name = "STEP:COORDS", allow_hyphen_values = true)]
    pub perturb: Vec<String>,
    /// Add the Lyapunov value as a `V` column.
    #[arg(long)]
    pub lyapunov: bool,
    #[command(flatten)]
    pub gains: GainArgs,
    /// Trajectory file, JSON for a `.json` extension and CSV otherwise;
    /// stdout (CSV) when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn parse_perturbation(s: &str) -> CliResult<Perturbation> {
    let (step, coords) = s
        .split_once(':')
        .ok_or_else(|| CliError::input(format!("perturbation {s:?} is not STEP:COORDS")))?;
    let step = step
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("bad perturbation step in {s:?}")))?;
    Ok(Perturbation {
        step,
        offset: parse_coords(coords)?,
    })
}

enum Start {
    Begin,
    Goal,
    Phase(f64),
    Coords(Vec<f64>),
}

fn parse_start(s: &str) -> CliResult<Start> {
    match s.trim() {
        "start" => Ok(Start::Begin),
        "end" => Ok(Start::Goal),
        other => match other.strip_prefix("phase:") {
            Some(p) => p
                .trim()
                .parse()
                .ok()
                .filter(|s: &f64| (0.0..=1.0).contains(s))
                .map(Start::Phase)
                .ok_or_else(|| CliError::input(format!("phase in {s:?} must be in [0, 1]"))),
            None => parse_coords(other).map(Start::Coords),
        },
    }
}

fn start_point<M: Manifold>(c: &CompositeBezierCurve<M>, start: &Start) -> CliResult<M::Point> {
    Ok(match start {
        Start::Begin => c.start().clone(),
        Start::Goal => c.end()?,
        Start::Phase(s) => c.eval(*s)?,
        Start::Coords(x) => point_on(c.manifold(), x)?,
    })
}

pub fn run(args: RolloutArgs, cfg: &CliConfig) -> CliResult<Outcome> {
    let path = pick_path(args.curve.clone(), &cfg.io.curve, "curve file")?;
    let (file, kind) = read_curve_file(&path)?;
    let params = args.gains.resolve(&cfg.ds)?;
    let mut rc = cfg.rollout.clone();
    rc.dt = args.dt.unwrap_or(rc.dt);
    rc.steps = args.steps.unwrap_or(rc.steps);
    rc.record_lyapunov |= args.lyapunov;
    for p in &args.perturb {
        rc.perturbations.push(parse_perturbation(p)?);
    }
    rc.validate().map_err(|e| CliError::input(e.to_string()))?;
    let start = parse_start(&args.x0)?;
    let json = args
        .output
        .as_ref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (body, outcome) = with_manifold!(kind, |m| rollout_on(m, &file, &path, &params, &rc, &start, json))?;
    emit(args.output.as_ref(), &body)?;
    Ok(outcome)
}

fn rollout_on<M: Manifold>(
    m: M,
    file: &CurveFile,
    path: &Path,
    params: &DsParams,
    rc: &RolloutConfig,
    start: &Start,
    json: bool,
) -> CliResult<(Vec<u8>, Outcome)> {
    let ds = CurveDs::new(curve_on(m, file, path)?, params.clone())?;
    let x0 = start_point(ds.curve(), start)?;
    let (traj, outcome) = match rollout(&ds, &x0, rc) {
        Ok(t) => (t, Outcome::Done),
        Err(e) => {
            eprintln!("warning: {e}; writing the partial trajectory");
            (*e.partial, Outcome::Partial)
        }
    };
    Ok((encode(&ds, &traj, json)?, outcome))
}

fn encode<M: Manifold>(ds: &CurveDs<M>, traj: &Trajectory<M>, json: bool) -> CliResult<Vec<u8>> {
    if json {
        return Ok(to_json_string(&traj.to_file(ds.manifold()))?.into_bytes());
    }
    let mut buf = Vec::new();
    traj.write_csv(ds.manifold(), &mut buf)?;
    Ok(buf)
}
