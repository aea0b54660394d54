//! Benchmark protocol for planar demonstrations placed on the sphere.

mod data;
mod synthetic;

use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{fit_curve, normalize_phases, CompositeBezierCurve, FitOptions};
use crate::ds::{CurveDs, DsParams};
use crate::error::{Error, Result};
use crate::geom::{Manifold, MetricParams, Sphere2};
use crate::rollout::{batch_rollout, Execution, RolloutConfig, Trajectory};

pub use data::{load_demos, map_to_sphere, read_demos_csv, write_demos_csv, RawDemo, RawDemoSet, SPHERE_RADIUS_SCALE};
pub use synthetic::{shape_path, synthetic_corpus, synthetic_shape, SyntheticOptions, SHAPES};

/// Version of the report layout.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct BenchProtocol {
    pub steps: usize,
    pub dt: f64,
    pub success_radius: f64,
    /// Leading samples compared by the trajectory distance.
    pub trajectory_steps: usize,
    /// Randomized initial conditions per shape.
    pub batch: usize,
    pub seed: u64,
    pub segments: usize,
    pub ds: DsParams,
    pub radius_scale: f64,
    /// Single DS evaluations timed per shape.
    pub query_samples: usize,
    pub execution: Execution,
}

impl Default for BenchProtocol {
    fn default() -> Self {
        Self {
            steps: 200,
            dt: 0.01,
            success_radius: 0.2,
            trajectory_steps: 100,
            batch: 7,
            seed: 0,
            segments: 6,
            ds: DsParams::default(),
            radius_scale: SPHERE_RADIUS_SCALE,
            query_samples: 200,
            execution: Execution::Sequential,
        }
    }
}

impl BenchProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.trajectory_steps == 0 || self.batch == 0 || self.segments == 0 {
            return Err(Error::invalid("protocol counts must be positive"));
        }
        if !(self.dt > 0.0) || !(self.success_radius > 0.0) {
            return Err(Error::invalid("protocol dt and success radius must be positive"));
        }
        self.ds.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Population mean and standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

fn dist(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    Sphere2.distance(a, b, &MetricParams::default())
}

/// `x₀ = exp_g(log_g(x₀ⁱ) + 2(r − 1))` with `r ~ U[0, 1)` drawn per local
/// coordinate at `goal`; starts are used round-robin.
pub fn sample_initial_conditions<M: Manifold>(
    m: &M,
    starts: &[M::Point],
    goal: &M::Point,
    count: usize,
    seed: u64,
) -> Result<Vec<M::Point>> {
    if starts.is_empty() {
        return Err(Error::invalid("no demonstration starts to sample around"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let base = m.log(goal, &starts[i % starts.len()])?;
            let mut c = m.to_local(goal, &base);
            for x in &mut c {
                let r: f64 = rng.random();
                *x += 2.0 * (r - 1.0);
            }
            m.exp(goal, &m.from_local(goal, &c))
        })
        .collect()
}

/// Mean index-aligned distance over the first `steps` samples, against the
/// closest demonstration. The flag is set when a demo was shorter than
/// `steps` and the comparison was truncated.
pub fn trajectory_distance(
    traj: &[Vector3<f64>],
    demos: &[Vec<Vector3<f64>>],
    steps: usize,
) -> (f64, bool) {
    let mut truncated = false;
    let best = demos
        .iter()
        .filter_map(|d| {
            let n = steps.min(traj.len()).min(d.len());
            truncated |= n < steps.min(traj.len().max(d.len()));
            (n > 0).then(|| (0..n).map(|i| dist(&traj[i], &d[i])).sum::<f64>() / n as f64)
        })
        .fold(f64::INFINITY, f64::min);
    (best, truncated)
}

/// Mean over trajectory points of the distance to the nearest demo sample.
pub fn path_distance(traj: &[Vector3<f64>], demos: &[Vec<Vector3<f64>>]) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let total: f64 = traj
        .iter()
        .map(|x| {
            demos
                .iter()
                .flatten()
                .map(|p| dist(x, p))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / traj.len() as f64
}

/// Fraction of final states within `radius` of the goal.
pub fn success_rate(finals: &[Vector3<f64>], goal: &Vector3<f64>, radius: f64) -> f64 {
    if finals.is_empty() {
        return 0.0;
    }
    finals.iter().filter(|x| dist(x, goal) <= radius).count() as f64 / finals.len() as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeReport {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub demos: usize,
    pub trajectory_distance: Stat,
    /// Some demos were shorter than the compared window.
    pub trajectory_truncated: bool,
    pub path_distance: Stat,
    pub success_rate: f64,
    pub fit_rms: f64,
    pub fit_converged: bool,
    pub fit_time_s: f64,
    /// Wall time of the randomized batch.
    pub rollout_time_s: f64,
    /// Mean wall time of one DS evaluation.
    pub query_time_s: f64,
}

impl ShapeReport {
    fn failed(name: &str, demos: usize, e: &Error) -> Self {
        Self {
            name: name.to_string(),
            ok: false,
            error: Some(e.to_string()),
            demos,
            trajectory_distance: Stat::default(),
            trajectory_truncated: false,
            path_distance: Stat::default(),
            success_rate: 0.0,
            fit_rms: f64::NAN,
            fit_converged: false,
            fit_time_s: 0.0,
            rollout_time_s: 0.0,
            query_time_s: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchSummary {
    pub shapes_ok: usize,
    pub shapes_failed: usize,
    pub trajectory_distance: Stat,
    pub path_distance: Stat,
    pub success_rate: f64,
    pub fit_time_s: Stat,
    pub rollout_time_s: Stat,
    pub query_time_s: Stat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub protocol: BenchProtocol,
    pub shapes: Vec<ShapeReport>,
    pub summary: BenchSummary,
}

impl BenchReport {
    pub fn any_failed(&self) -> bool {
        self.shapes.iter().any(|s| !s.ok)
    }
}

/// Everything produced for one shape.
#[derive(Clone, Debug)]
pub struct ShapeRun {
    pub report: ShapeReport,
    pub curve: Option<CompositeBezierCurve<Sphere2>>,
    /// Randomized-start rollouts.
    pub trajectories: Vec<Trajectory<Sphere2>>,
}

pub fn run_shape(name: &str, raw: &RawDemoSet, protocol: &BenchProtocol) -> ShapeRun {
    match run_shape_inner(name, raw, protocol) {
        Ok(run) => run,
        Err(e) => {
            log::warn!("shape {name} failed: {e}");
            ShapeRun {
                report: ShapeReport::failed(name, raw.len(), &e),
                curve: None,
                trajectories: Vec::new(),
            }
        }
    }
}

fn run_shape_inner(name: &str, raw: &RawDemoSet, protocol: &BenchProtocol) -> Result<ShapeRun> {
    protocol.validate()?;
    let timed = map_to_sphere(raw, protocol.radius_scale)?;
    let demos = normalize_phases(&timed)?;
    let goal = Vector3::z();
    let opts = FitOptions {
        segments: protocol.segments,
        seed: protocol.seed,
        ..FitOptions::default()
    };
    let clock = Instant::now();
    let (curve, fit) = fit_curve(&Sphere2, &demos, &opts)?;
    let fit_time_s = clock.elapsed().as_secs_f64();
    let ds = CurveDs::new(curve.clone(), protocol.ds.clone())?;

    // trajectory distance: start at each demo start with that demo's
    // normalized sampling step
    let demo_points: Vec<Vec<Vector3<f64>>> = timed.iter().map(|d| d.points.clone()).collect();
    let mut traj_d = Vec::with_capacity(demo_points.len());
    let mut truncated = false;
    for d in &demo_points {
        let cfg = RolloutConfig {
            dt: 1.0 / (d.len().max(2) - 1) as f64,
            steps: protocol.trajectory_steps.min(d.len()).max(2) - 1,
            ..RolloutConfig::default()
        };
        let traj = crate::rollout::rollout(&ds, &d[0], &cfg).map_err(|e| e.source)?;
        let (v, t) = trajectory_distance(&traj.points, &demo_points, protocol.trajectory_steps);
        traj_d.push(v);
        truncated |= t;
    }

    let starts: Vec<Vector3<f64>> = demo_points.iter().map(|d| d[0]).collect();
    let x0s = sample_initial_conditions(&Sphere2, &starts, &goal, protocol.batch, protocol.seed)?;
    let cfg = RolloutConfig {
        dt: protocol.dt,
        steps: protocol.steps,
        ..RolloutConfig::default()
    };
    let clock = Instant::now();
    let runs = batch_rollout(&ds, &x0s, &cfg, protocol.execution);
    let rollout_time_s = clock.elapsed().as_secs_f64();
    let trajectories = runs
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.source.context(format!("randomized rollout {i}"))))
        .collect::<Result<Vec<_>>>()?;
    let path_d: Vec<f64> = trajectories
        .iter()
        .map(|t| path_distance(&t.points, &demo_points))
        .collect();
    let finals: Vec<Vector3<f64>> = trajectories.iter().map(|t| *t.last()).collect();

    let queries: Vec<Vector3<f64>> = trajectories
        .iter()
        .flat_map(|t| t.points.iter().copied())
        .step_by(((protocol.batch * (protocol.steps + 1)) / protocol.query_samples.max(1)).max(1))
        .take(protocol.query_samples.max(1))
        .collect();
    let clock = Instant::now();
    for q in &queries {
        std::hint::black_box(ds.eval(q)?);
    }
    let query_time_s = clock.elapsed().as_secs_f64() / queries.len() as f64;

    Ok(ShapeRun {
        report: ShapeReport {
            name: name.to_string(),
            ok: true,
            error: None,
            demos: raw.len(),
            trajectory_distance: Stat::of(&traj_d),
            trajectory_truncated: truncated,
            path_distance: Stat::of(&path_d),
            success_rate: success_rate(&finals, &goal, protocol.success_radius),
            fit_rms: fit.rms_residual,
            fit_converged: fit.converged,
            fit_time_s,
            rollout_time_s,
            query_time_s,
        },
        curve: Some(curve),
        trajectories,
    })
}

/// Runs every shape; failures are recorded and the run continues.
pub fn run_benchmark(corpus: &[(String, RawDemoSet)], protocol: &BenchProtocol) -> (BenchReport, Vec<ShapeRun>) {
    let runs: Vec<ShapeRun> = corpus
        .iter()
        .map(|(name, raw)| {
            log::info!("benchmarking {name}");
            run_shape(name, raw, protocol)
        })
        .collect();
    let ok: Vec<&ShapeReport> = runs.iter().map(|r| &r.report).filter(|r| r.ok).collect();
    let col = |f: fn(&ShapeReport) -> f64| Stat::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    let summary = BenchSummary {
        shapes_ok: ok.len(),
        shapes_failed: runs.len() - ok.len(),
        trajectory_distance: col(|r| r.trajectory_distance.mean),
        path_distance: col(|r| r.path_distance.mean),
        success_rate: col(|r| r.success_rate).mean,
        fit_time_s: col(|r| r.fit_time_s),
        rollout_time_s: col(|r| r.rollout_time_s),
        query_time_s: col(|r| r.query_time_s),
    };
    let report = BenchReport {
        schema: REPORT_SCHEMA,
        protocol: protocol.clone(),
        shapes: runs.iter().map(|r| r.report.clone()).collect(),
        summary,
    };
    (report, runs)
}
