//! Forward integration of the curve DS with geodesic Euler steps.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ds::{CurveDs, ScanCache};
use crate::error::{Error, Result};
use crate::geom::{Manifold, TangentVec};
use crate::io::fmt_f64;

/// State jump `x ← exp(x, v)` applied before step `step`, with `v` given in
/// the manifold's intrinsic local coordinates at `x`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Perturbation {
    pub step: usize,
    pub offset: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RolloutConfig {
    pub dt: f64,
    pub steps: usize,
    pub record_lyapunov: bool,
    pub perturbations: Vec<Perturbation>,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            steps: 200,
            record_lyapunov: false,
            perturbations: Vec::new(),
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("rollout needs at least one step"));
        }
        Ok(())
    }
}

/// `points[n]` is the state the DS was evaluated at in step `n` (after any
/// perturbation); `twists`, `phases` and `lyapunov` hold the DS output there.
/// The final entry of each is evaluated at the end state.
#[derive(Clone, Debug)]
pub struct Trajectory<M: Manifold> {
    pub dt: f64,
    pub points: Vec<M::Point>,
    pub twists: Vec<M::Tangent>,
    pub phases: Vec<f64>,
    pub lyapunov: Option<Vec<f64>>,
}

impl<M: Manifold> Trajectory<M> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> &M::Point {
        self.points.last().expect("trajectory holds at least x0")
    }

    pub fn write_csv(&self, m: &M, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let kind = m.kind();
        let mut header = vec!["t".to_string()];
        header.extend((0..kind.point_len()).map(|i| format!("x{i}")));
        header.extend((0..kind.tangent_len()).map(|i| format!("v{i}")));
        header.push("phase".into());
        if self.lyapunov.is_some() {
            header.push("V".into());
        }
        out.write_record(&header)?;
        for (n, x) in self.points.iter().enumerate() {
            let mut row = vec![fmt_f64(n as f64 * self.dt)];
            row.extend(m.point_to_coords(x).into_iter().map(fmt_f64));
            row.extend(self.twists[n].coords().into_iter().map(fmt_f64));
            row.push(fmt_f64(self.phases[n]));
            if let Some(v) = &self.lyapunov {
                row.push(fmt_f64(v[n]));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_file(&self, m: &M) -> TrajectoryFile {
        TrajectoryFile {
            manifold: m.kind().to_string(),
            dt: self.dt,
            points: self.points.iter().map(|p| m.point_to_coords(p)).collect(),
            twists: self.twists.iter().map(TangentVec::coords).collect(),
            phases: self.phases.clone(),
            lyapunov: self.lyapunov.clone(),
        }
    }

    pub fn write_json(&self, m: &M, path: &Path) -> Result<()> {
        crate::io::write_json(path, &self.to_file(m))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryFile {
    pub manifold: String,
    pub dt: f64,
    pub points: Vec<Vec<f64>>,
    pub twists: Vec<Vec<f64>>,
    pub phases: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lyapunov: Option<Vec<f64>>,
}

/// A rollout aborted by a kernel error, with everything computed before it.
#[derive(Debug, thiserror::Error)]
#[error("rollout failed at step {step}: {source}")]
pub struct RolloutError<M: Manifold> {
    pub step: usize,
    pub partial: Box<Trajectory<M>>,
    #[source]
    pub source: Error,
}

/// One geodesic Euler step `exp(x, dt·f(x))`.
pub fn step<M: Manifold>(ds: &CurveDs<M>, x: &M::Point, dt: f64) -> Result<M::Point> {
    if dt == 0.0 {
        return Ok(x.clone());
    }
    let out = ds.eval(x)?;
    ds.manifold().exp(x, &out.velocity.scaled(dt))
}

pub fn rollout<M: Manifold>(
    ds: &CurveDs<M>,
    x0: &M::Point,
    cfg: &RolloutConfig,
) -> std::result::Result<Trajectory<M>, RolloutError<M>> {
    let m = ds.manifold();
    let n = cfg.steps;
    let mut traj = Trajectory {
        dt: cfg.dt,
        points: Vec::with_capacity(n + 1),
        twists: Vec::with_capacity(n + 1),
        phases: Vec::with_capacity(n + 1),
        lyapunov: cfg.record_lyapunov.then(|| Vec::with_capacity(n + 1)),
    };
    let fail = |traj: Trajectory<M>, step: usize, e: Error| RolloutError {
        step,
        partial: Box::new(traj),
        source: e,
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(traj, 0, e));
    }
    let mut x = x0.clone();
    let mut cache = ScanCache::default();
    for k in 0..=n {
        for p in cfg.perturbations.iter().filter(|p| p.step == k) {
            if p.offset.len() != m.dim() {
                let e = Error::invalid(format!(
                    "perturbation at step {k} has {} coordinates, expected {}",
                    p.offset.len(),
                    m.dim()
                ));
                return Err(fail(traj, k, e));
            }
            match m.exp(&x, &m.from_local(&x, &p.offset)) {
                Ok(y) => x = y,
                Err(e) => return Err(fail(traj, k, e)),
            }
        }
        let out = match ds.eval_cached(&x, &mut cache) {
            Ok(o) => o,
            Err(e) => return Err(fail(traj, k, e)),
        };
        if let Some(v) = traj.lyapunov.as_mut() {
            v.push(ds.lyapunov_from(&out.projection));
        }
        traj.phases.push(out.projection.s_tilde);
        let next = if k < n {
            match m.exp(&x, &out.velocity.scaled(cfg.dt)) {
                Ok(y) => Some(y),
                Err(e) => return Err(fail(traj, k, e)),
            }
        } else {
            None
        };
        traj.twists.push(out.velocity);
        traj.points.push(std::mem::replace(&mut x, next.unwrap_or_else(|| x0.clone())));
    }
    Ok(traj)
}

/// How a batch of rollouts is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Data-parallel over initial conditions. Falls back to sequential when
    /// the crate is built without the `parallel` feature.
    #[default]
    Parallel,
}

/// Caps the worker threads used by [`Execution::Parallel`]. Only the first
/// call before any parallel work takes effect.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Without the `parallel` feature every batch already runs on one thread.
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) -> Result<()> {
    Ok(())
}

/// Independent rollouts from each initial condition, in input order.
pub fn batch_rollout<M: Manifold>(
    ds: &CurveDs<M>,
    x0s: &[M::Point],
    cfg: &RolloutConfig,
    exec: Execution,
) -> Vec<std::result::Result<Trajectory<M>, RolloutError<M>>> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            x0s.par_iter().map(|x0| rollout(ds, x0, cfg)).collect()
        }
        _ => x0s.iter().map(|x0| rollout(ds, x0, cfg)).collect(),
    }
}

/// Fraction of consecutive pairs with `V[n+1] ≤ V[n] + slack`.
pub fn nonincreasing_fraction(values: &[f64], slack: f64) -> f64 {
    if values.len() < 2 {
        return 1.0;
    }
    let ok = values.windows(2).filter(|w| w[1] <= w[0] + slack).count();
    ok as f64 / (values.len() - 1) as f64
}
