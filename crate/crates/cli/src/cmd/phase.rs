use std::path::{Path, PathBuf};

use clap::Args;
use dsmp::curve::CurveFile;
use dsmp::geom::{Manifold, MetricParams};
use dsmp::io::to_json_string;
use dsmp::phase::{optimize_phase, PhaseCurveFile, PhaseOptions, PhaseReport};
use dsmp::with_manifold;

use super::Table;
use crate::config::{pick_path, CliConfig};
use crate::error::{CliError, CliResult};
use crate::input::{curve_on, emit, read_curve_file};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct PhaseArgs {
    pub curve: Option<PathBuf>,
    /// Speed limit along the curve.
    #[arg(long)]
    pub speed: f64,
    /// Phase-curve segments.
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub max_evaluations: Option<usize>,
    /// Phase-curve file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// CSV of `t, s, ds_dt, speed` on a uniform time grid.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub allow_partial: bool,
}

pub fn run(args: PhaseArgs, cfg: &CliConfig) -> CliResult<Outcome> {
    let path = pick_path(args.curve.clone(), &cfg.io.curve, "curve file")?;
    let (file, kind) = read_curve_file(&path)?;
    if !(args.speed > 0.0) {
        return Err(CliError::input(format!("--speed must be positive, got {}", args.speed)));
    }
    if args.samples < 2 {
        return Err(CliError::input("--samples must be at least 2"));
    }
    let mut opts = cfg.phase.clone();
    opts.segments = args.segments.unwrap_or(opts.segments);
    opts.max_evaluations = args.max_evaluations.unwrap_or(opts.max_evaluations);
    let (pc, report, table) = with_manifold!(kind, |m| phase_on(m, &file, &path, &args, &opts))?;
    emit(args.output.as_ref(), to_json_string(&pc)?.as_bytes())?;
    if let Some(p) = &args.report {
        emit(Some(p), to_json_string(&report)?.as_bytes())?;
    }
    if let Some(p) = &args.table {
        emit(Some(p), &table)?;
    }
    if !report.converged {
        eprintln!("warning: phase optimization did not converge");
        if !args.allow_partial {
            return Ok(Outcome::Partial);
        }
    }
    Ok(Outcome::Done)
}

fn phase_on<M: Manifold>(
    m: M,
    file: &CurveFile,
    path: &Path,
    args: &PhaseArgs,
    opts: &PhaseOptions,
) -> CliResult<(PhaseCurveFile, PhaseReport, Vec<u8>)> {
    let curve = curve_on(m, file, path)?;
    let (pc, report) = optimize_phase(&curve, args.speed, opts)?;
    let metric = MetricParams::default();
    let mut table = Table::new(&["t", "s", "ds_dt", "speed"].map(String::from))?;
    for i in 0..args.samples {
        let t = pc.duration() * i as f64 / (args.samples - 1) as f64;
        let s = pc.eval(t);
        let rate = pc.derivative(t);
        let x = curve.eval(s)?;
        let speed = curve.manifold().norm(&x, &curve.derivative(s)?, &metric) * rate;
        table.row([t, s, rate, speed])?;
    }
    Ok((pc.to_file(), report, table.into_bytes()?))
}
