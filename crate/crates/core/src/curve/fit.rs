use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{initial_guess, CompositeBezierCurve, DemoSet, FreeParams};
use crate::error::{Error, Result};
use crate::geom::{Manifold, MetricParams};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FitOptions {
    pub segments: usize,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this
    /// fraction of its previous value.
    pub cost_tolerance: f64,
    pub gradient_tolerance: f64,
    /// Amplitude of the uniform noise added to the initial guess.
    pub noise: f64,
    pub seed: u64,
    pub metric: MetricParams,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            segments: 6,
            max_iterations: 500,
            cost_tolerance: 1e-10,
            gradient_tolerance: 1e-8,
            noise: 1e-4,
            seed: 0,
            metric: MetricParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CostDecrease,
    SmallGradient,
    ZeroResidual,
    /// No step could lower the objective any further.
    Stalled,
    MaxIterations,
    DegenerateData,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub rms_residual: f64,
    pub initial_rms_residual: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Sum of squared geodesic residuals after each accepted iteration,
    /// starting with the initial guess.
    pub cost_history: Vec<f64>,
}

const JACOBIAN_STEP: f64 = 1e-6;
const ZERO_COST: f64 = 1e-26;

/// Local chart around the current iterate. Parameters are the intrinsic
/// coordinates of a start-point offset, of `w2_1` and of every `w3_j`, each
/// expressed at the iterate's own base points and transported to wherever
/// the chain ends up.
struct Chart<'a, M: Manifold> {
    m: &'a M,
    anchor: FreeParams<M>,
    bases: Vec<M::Point>,
}

impl<'a, M: Manifold> Chart<'a, M> {
    fn new(m: &'a M, curve: &CompositeBezierCurve<M>) -> Self {
        Self {
            m,
            anchor: curve.free_params(),
            bases: curve.segments().iter().map(|s| s.base.clone()).collect(),
        }
    }

    fn num_params(&self) -> usize {
        self.m.dim() * (self.bases.len() + 2)
    }

    fn origin(&self) -> DVector<f64> {
        let dim = self.m.dim();
        let mut theta = DVector::zeros(self.num_params());
        let mut put = |slot: usize, c: Vec<f64>| {
            theta.rows_mut(slot * dim, dim).copy_from_slice(&c);
        };
        put(1, self.m.to_local(&self.bases[0], &self.anchor.first_w2));
        for (j, w) in self.anchor.w3.iter().enumerate() {
            put(2 + j, self.m.to_local(&self.bases[j], w));
        }
        theta
    }

    fn realize(&self, theta: &DVector<f64>) -> Result<CompositeBezierCurve<M>> {
        let m = self.m;
        let dim = m.dim();
        let slot = |k: usize| theta.rows(k * dim, dim).iter().copied().collect::<Vec<f64>>();
        let a0 = &self.bases[0];
        let start = m.exp(a0, &m.from_local(a0, &slot(0)))?;
        let first_w2 = m.transport(a0, &start, &m.from_local(a0, &slot(1)))?;
        let mut w3 = Vec::with_capacity(self.bases.len());
        let mut base = start.clone();
        for (j, anchor) in self.bases.iter().enumerate() {
            let w = m.transport(anchor, &base, &m.from_local(anchor, &slot(2 + j)))?;
            if j + 1 < self.bases.len() {
                base = m.exp(&base, &w)?;
            }
            w3.push(w);
        }
        CompositeBezierCurve::from_free_params(
            m.clone(),
            &FreeParams {
                start,
                first_w2,
                w3,
            },
        )
    }
}

fn residuals<M: Manifold>(
    curve: &CompositeBezierCurve<M>,
    demos: &DemoSet<M::Point>,
    metric: &MetricParams,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    let m = curve.manifold();
    for (s, x) in demos.samples() {
        m.residual(&curve.eval(s)?, x, metric, out)?;
    }
    Ok(())
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Fits a composite Bézier curve to the demos by minimizing the sum of
/// squared geodesic distances with Levenberg–Marquardt over the
/// constraint-free parameters. The returned curve satisfies `C⁰`/`C¹` by
/// construction.
pub fn fit_curve<M: Manifold>(
    m: &M,
    demos: &DemoSet<M::Point>,
    opts: &FitOptions,
) -> Result<(CompositeBezierCurve<M>, FitReport)> {
    let clock = Instant::now();
    let j_count = opts.segments;
    if j_count == 0 {
        return Err(Error::invalid("segment count must be at least 1"));
    }
    let n_points = demos.total_points();
    if n_points < 3 * j_count {
        return Err(Error::invalid(format!(
            "{n_points} demo points cannot determine {j_count} segments (need at least {})",
            3 * j_count
        )));
    }
    let metric = &opts.metric;
    let first = &demos.demos()[0].points[0];
    if demos.samples().all(|(_, x)| m.distance(first, x, metric) <= 1e-12) {
        let curve = CompositeBezierCurve::constant(m.clone(), first.clone(), j_count)?;
        let report = FitReport {
            rms_residual: 0.0,
            initial_rms_residual: 0.0,
            iterations: 0,
            wall_time_s: clock.elapsed().as_secs_f64(),
            converged: true,
            stop_reason: StopReason::DegenerateData,
            cost_history: vec![0.0],
        };
        return Ok((curve, report));
    }

    let guess = initial_guess(m, demos, j_count, opts.noise, opts.seed)?;
    let mut curve = CompositeBezierCurve::from_free_params(m.clone(), &guess)?;
    let mut r = Vec::new();
    residuals(&curve, demos, metric, &mut r)?;
    let mut cost = sum_sq(&r);
    let initial_cost = cost;
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    let mut r_plus = Vec::new();
    let mut r_minus = Vec::new();

    while iterations < opts.max_iterations {
        if cost <= ZERO_COST {
            stop = StopReason::ZeroResidual;
            break;
        }
        iterations += 1;
        let chart = Chart::new(m, &curve);
        let theta0 = chart.origin();
        let np = theta0.len();
        let rv = DVector::from_column_slice(&r);
        let mut jac = DMatrix::zeros(r.len(), np);
        for k in 0..np {
            let mut tp = theta0.clone();
            tp[k] += JACOBIAN_STEP;
            let mut tm = theta0.clone();
            tm[k] -= JACOBIAN_STEP;
            let plus = chart
                .realize(&tp)
                .and_then(|c| residuals(&c, demos, metric, &mut r_plus));
            let minus = chart
                .realize(&tm)
                .and_then(|c| residuals(&c, demos, metric, &mut r_minus));
            let mut col = jac.column_mut(k);
            match (plus, minus) {
                (Ok(()), Ok(())) => {
                    for i in 0..r.len() {
                        col[i] = (r_plus[i] - r_minus[i]) / (2.0 * JACOBIAN_STEP);
                    }
                }
                (Ok(()), Err(_)) => {
                    for i in 0..r.len() {
                        col[i] = (r_plus[i] - r[i]) / JACOBIAN_STEP;
                    }
                }
                (Err(_), Ok(())) => {
                    for i in 0..r.len() {
                        col[i] = (r[i] - r_minus[i]) / JACOBIAN_STEP;
                    }
                }
                (Err(e), Err(_)) => return Err(e.context("fit jacobian")),
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &rv;
        // gradient of Σ r² is 2 Jᵀr
        if 2.0 * grad.norm() < opts.gradient_tolerance {
            stop = StopReason::SmallGradient;
            break;
        }
        let diag_floor = 1e-9 * jtj.diagonal().max().max(1e-300);
        let mut accepted = None;
        for _ in 0..40 {
            let mut lhs = jtj.clone();
            for k in 0..np {
                lhs[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
            }
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 4.0;
                    continue;
                }
            };
            let trial = chart
                .realize(&(&theta0 + &step))
                .and_then(|c| residuals(&c, demos, metric, &mut r_plus).map(|_| c));
            match trial {
                Ok(c) if sum_sq(&r_plus) < cost => {
                    accepted = Some(c);
                    break;
                }
                _ => lambda *= 4.0,
            }
            if lambda > 1e16 {
                break;
            }
        }
        let Some(next) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        let new_cost = sum_sq(&r_plus);
        let decrease = cost - new_cost;
        curve = next;
        std::mem::swap(&mut r, &mut r_plus);
        let old = cost;
        cost = new_cost;
        history.push(cost);
        lambda = (lambda / 3.0).max(1e-12);
        if decrease < opts.cost_tolerance * old {
            stop = StopReason::CostDecrease;
            break;
        }
    }

    let rms = |c: f64| (c / n_points as f64).sqrt();
    let report = FitReport {
        rms_residual: rms(cost),
        initial_rms_residual: rms(initial_cost),
        iterations,
        wall_time_s: clock.elapsed().as_secs_f64(),
        converged: stop != StopReason::MaxIterations,
        stop_reason: stop,
        cost_history: history,
    };
    if !report.converged {
        log::warn!(
            "curve fit hit {} iterations, rms residual {:.3e}",
            opts.max_iterations,
            report.rms_residual
        );
    }
    Ok((curve, report))
}
