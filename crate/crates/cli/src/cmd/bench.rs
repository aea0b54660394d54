use std::path::{Path, PathBuf};

use clap::Args;
use dsmp::bench::{run_benchmark, synthetic_corpus, RawDemoSet, ShapeRun, SyntheticOptions, SHAPES};
use dsmp::geom::Manifold;
use dsmp::io::to_json_string;
use dsmp::rollout::Execution;

use super::{GainArgs, Table};
use crate::config::CliConfig;
use crate::error::{require_exists, CliError, CliResult};
use crate::input::{emit, read_demos};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of per-shape demonstration files (`<Shape>.csv` or
    /// `.json`). The built-in synthetic corpus is used when omitted.
    pub corpus: Option<PathBuf>,
    /// Output directory for `report.json` and per-shape files.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Comma-separated shape names to run.
    #[arg(long, value_delimiter = ',')]
    pub shapes: Vec<String>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub segments: Option<usize>,
    /// Run rollout batches on the thread pool.
    #[arg(long)]
    pub parallel: bool,
    #[command(flatten)]
    pub gains: GainArgs,
}

pub fn run(args: BenchArgs, cfg: &CliConfig) -> CliResult<Outcome> {
    let mut protocol = cfg.bench.clone();
    protocol.batch = args.batch.unwrap_or(protocol.batch);
    protocol.steps = args.steps.unwrap_or(protocol.steps);
    protocol.dt = args.dt.unwrap_or(protocol.dt);
    protocol.seed = args.seed.unwrap_or(protocol.seed);
    protocol.segments = args.segments.unwrap_or(protocol.segments);
    protocol.ds = args.gains.resolve(&protocol.ds)?;
    if args.parallel {
        protocol.execution = Execution::Parallel;
    }
    protocol.validate().map_err(|e| CliError::input(e.to_string()))?;
    let out_dir = args
        .output
        .clone()
        .or_else(|| cfg.io.output.clone())
        .unwrap_or_else(|| PathBuf::from("bench-out"));

    let corpus = match args.corpus.as_ref().or(cfg.io.corpus.as_ref()) {
        Some(dir) => load_corpus(dir, &args.shapes)?,
        None => {
            let opts = SyntheticOptions {
                seed: protocol.seed,
                ..SyntheticOptions::default()
            };
            check_shape_names(&args.shapes, SHAPES.iter().copied(), "built-in corpus")?;
            synthetic_corpus(&args.shapes, &opts)?
        }
    };

    let (report, runs) = run_benchmark(&corpus, &protocol);
    emit(Some(&out_dir.join("report.json")), to_json_string(&report)?.as_bytes())?;
    for run in &runs {
        write_shape(&out_dir, run)?;
    }
    if corpus.is_empty() {
        return Err(CliError::input("corpus contains no demonstration files"));
    }
    Ok(if report.any_failed() {
        Outcome::Partial
    } else {
        Outcome::Done
    })
}

fn check_shape_names<'a>(wanted: &[String], known: impl Iterator<Item = &'a str> + Clone, source: &str) -> CliResult<()> {
    for w in wanted {
        if !known.clone().any(|k| k == w) {
            return Err(CliError::input(format!("shape {w:?} not found in {source}")));
        }
    }
    Ok(())
}

/// Every `*.csv` / `*.json` file in `dir`, named by file stem, sorted.
fn load_corpus(dir: &Path, filter: &[String]) -> CliResult<Vec<(String, RawDemoSet)>> {
    require_exists(dir)?;
    if !dir.is_dir() {
        return Err(CliError::input(format!("{}: not a directory", dir.display())));
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("json"))
        })
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
        .collect();
    files.sort();
    check_shape_names(filter, files.iter().map(|(n, _)| n.as_str()), &dir.display().to_string())?;
    files
        .into_iter()
        .filter(|(n, _)| filter.is_empty() || filter.contains(n))
        .map(|(n, p)| Ok((n, read_demos(&p)?)))
        .collect()
}

/// `<name>.csv` with every rollout and `<name>_curve.json` with the fit.
fn write_shape(dir: &Path, run: &ShapeRun) -> CliResult<()> {
    let name = &run.report.name;
    let Some(curve) = &run.curve else {
        return Ok(());
    };
    let m = curve.manifold();
    let mut table = Table::new(&["traj", "t", "x0", "x1", "x2", "phase"].map(String::from))?;
    for (k, traj) in run.trajectories.iter().enumerate() {
        for (n, x) in traj.points.iter().enumerate() {
            let c = m.point_to_coords(x);
            table.labelled_row(k, [n as f64 * traj.dt, c[0], c[1], c[2], traj.phases[n]])?;
        }
    }
    emit(Some(&dir.join(format!("{name}.csv"))), &table.into_bytes()?)?;
    emit(
        Some(&dir.join(format!("{name}_curve.json"))),
        to_json_string(&curve.to_file())?.as_bytes(),
    )
}
