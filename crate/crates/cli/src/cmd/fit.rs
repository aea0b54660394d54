use std::path::{Path, PathBuf};

use clap::Args;
use dsmp::curve::{fit_curve, FitOptions, FitReport};
use dsmp::geom::Manifold;
use dsmp::io::to_json_string;
use dsmp::with_manifold;

use crate::config::{pick_path, CliConfig};
use crate::error::CliResult;
use crate::input::{demos_on, emit, read_demos};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Demonstrations (CSV, or JSON by extension).
    pub demos: Option<PathBuf>,
    /// Curve file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Fit report; defaults to `<output>.report.json` next to the curve.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub manifold: Option<String>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub cost_tolerance: Option<f64>,
    /// Amplitude of the initial-guess perturbation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Exit 0 even when the optimizer stops before converging.
    #[arg(long)]
    pub allow_partial: bool,
}

impl FitArgs {
    fn options(&self, cfg: &CliConfig) -> FitOptions {
        let mut o = cfg.fit.clone();
        o.segments = self.segments.unwrap_or(o.segments);
        o.seed = self.seed.unwrap_or(o.seed);
        o.max_iterations = self.max_iterations.unwrap_or(o.max_iterations);
        o.cost_tolerance = self.cost_tolerance.unwrap_or(o.cost_tolerance);
        o.noise = self.noise.unwrap_or(o.noise);
        o
    }
}

pub fn run(args: FitArgs, cfg: &CliConfig) -> CliResult<Outcome> {
    let path = pick_path(args.demos.clone(), &cfg.io.demos, "demonstration file")?;
    let kind = cfg.manifold(args.manifold.as_deref())?;
    let raw = read_demos(&path)?;
    let opts = args.options(cfg);
    let (curve_json, report) = with_manifold!(kind, |m| fit_on(&m, &path, &raw, &opts, cfg.radius_scale))?;
    emit(args.output.as_ref(), curve_json.as_bytes())?;
    let report_path = args
        .report
        .clone()
        .or_else(|| args.output.as_ref().map(|o| o.with_extension("report.json")));
    if let Some(p) = report_path {
        emit(Some(&p), to_json_string(&report)?.as_bytes())?;
    }
    log::info!(
        "fit rms {:e} after {} iterations ({:?})",
        report.rms_residual,
        report.iterations,
        report.stop_reason
    );
    if !report.converged {
        eprintln!("warning: fit did not converge ({:?})", report.stop_reason);
        if !args.allow_partial {
            return Ok(Outcome::Partial);
        }
    }
    Ok(Outcome::Done)
}

fn fit_on<M: Manifold>(
    m: &M,
    path: &Path,
    raw: &dsmp::bench::RawDemoSet,
    opts: &FitOptions,
    radius_scale: f64,
) -> CliResult<(String, FitReport)> {
    let demos = demos_on(m, raw, radius_scale, path)?;
    let (curve, report) = fit_curve(m, &demos, opts)?;
    Ok((to_json_string(&curve.to_file())?, report))
}
