//! Time profiles `s = σ(t)` for a fitted curve.
//!
//! A phase curve is a `C¹` composite quadratic Bézier on the real line over
//! `[0, T]`, stored segment by segment as `(p_j, w2_j, w3_j)` exactly like
//! the manifold curves with the flat metric. Its Bernstein control values
//! are `p_j`, `p_j + w2_j`, `p_j + w3_j`; the profile is monotone whenever
//! that control sequence increases.
//!
//! Internally the profile is described by the `J + 1` control-value
//! increments `d_0, …, d_J`, where segment `j` climbs by `d_j` then
//! `d_{j+1}`. Continuity of the derivative at joints is then automatic, and
//! `σ(T) = 1` becomes `d_0 + 2d_1 + … + 2d_{J−1} + d_J = 1`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::curve::CompositeBezierCurve;
use crate::error::{Error, Result};
use crate::geom::{Manifold, TangentVec};

/// Samples of `[0, T]` on which the speed limit is enforced.
pub const SPEED_GRID: usize = 200;
/// Smallest admissible `dσ/dt` on the monotonicity grid.
pub const MIN_PHASE_RATE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCurve {
    duration: f64,
    increments: Vec<f64>,
}

/// On-disk layout: `w` holds `(p_j, w2_j, w3_j)` for every segment.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhaseCurveFile {
    #[serde(rename = "T")]
    pub duration: f64,
    #[serde(rename = "J_s")]
    pub segments: usize,
    pub w: Vec<f64>,
}

impl PhaseCurve {
    /// Builds a profile from positive increments; they are rescaled so the
    /// profile ends at 1.
    pub fn from_increments(duration: f64, increments: &[f64]) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid(format!("duration must be positive, got {duration}")));
        }
        if increments.len() < 2 {
            return Err(Error::invalid("a phase curve needs at least one segment"));
        }
        if increments.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("phase increments must be positive"));
        }
        let total = weighted_total(increments);
        Ok(Self {
            duration,
            increments: increments.iter().map(|d| d / total).collect(),
        })
    }

    /// `σ(t) = t / T`.
    pub fn identity(duration: f64, segments: usize) -> Result<Self> {
        Self::from_increments(duration, &vec![1.0; segments.max(1) + 1])
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn segments(&self) -> usize {
        self.increments.len() - 1
    }

    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        Self::from_increments(duration, &self.increments)
    }

    /// `(p_j, w2_j, w3_j)` of segment `j`.
    fn segment(&self, j: usize) -> (f64, f64, f64) {
        let d = &self.increments;
        let p: f64 = (0..j).map(|k| d[k] + d[k + 1]).sum();
        (p, d[j], d[j] + d[j + 1])
    }

    fn locate(&self, t: f64) -> (usize, f64, bool) {
        let clamped = !(0.0..=self.duration).contains(&t);
        let tau = (t / self.duration).clamp(0.0, 1.0);
        let j_count = self.segments();
        let scaled = tau * j_count as f64;
        let j = (scaled.floor() as usize).min(j_count - 1);
        (j, scaled - j as f64, clamped)
    }

    /// `σ(t)` and whether `t` had to be clamped to `[0, T]`.
    pub fn eval_flagged(&self, t: f64) -> (f64, bool) {
        let (j, u, clamped) = self.locate(t);
        if j == self.segments() - 1 && u == 1.0 {
            return (1.0, clamped);
        }
        let (p, w2, w3) = self.segment(j);
        // the normalized increments may sum to one ulp above 1
        ((p + 2.0 * (1.0 - u) * u * w2 + u * u * w3).min(1.0), clamped)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_flagged(t).0
    }

    /// `dσ/dt` in 1/s.
    pub fn derivative(&self, t: f64) -> f64 {
        let (j, u, _) = self.locate(t);
        let (_, w2, w3) = self.segment(j);
        let per_tau = 2.0 * (1.0 - 2.0 * u) * w2 + 2.0 * u * w3;
        per_tau * self.segments() as f64 / self.duration
    }

    /// Checks boundary values, range and positivity of `dσ/dt` on a grid of
    /// `10·J + 1` times.
    pub fn validate(&self) -> Result<()> {
        let n = 10 * self.segments() + 1;
        if self.eval(0.0) != 0.0 || self.eval(self.duration) != 1.0 {
            return Err(Error::invalid("phase curve must run from 0 to 1"));
        }
        for i in 0..n {
            let t = self.duration * i as f64 / (n - 1) as f64;
            let s = self.eval(t);
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(format!("phase {s} at t = {t} outside [0, 1]")));
            }
            if self.derivative(t) <= 0.0 {
                return Err(Error::invalid(format!("phase curve not increasing at t = {t}")));
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> PhaseCurveFile {
        let w = (0..self.segments())
            .flat_map(|j| {
                let (p, w2, w3) = self.segment(j);
                [p, w2, w3]
            })
            .collect();
        PhaseCurveFile {
            duration: self.duration,
            segments: self.segments(),
            w,
        }
    }

    pub fn from_file(file: &PhaseCurveFile) -> Result<Self> {
        let j_count = file.segments;
        if j_count == 0 || file.w.len() != 3 * j_count {
            return Err(Error::invalid(format!(
                "phase curve with J_s = {j_count} needs {} control values, got {}",
                3 * j_count,
                file.w.len()
            )));
        }
        let mut inc = Vec::with_capacity(j_count + 1);
        for j in 0..j_count {
            let (p, w2, w3) = (file.w[3 * j], file.w[3 * j + 1], file.w[3 * j + 2]);
            if j == 0 && p != 0.0 {
                return Err(Error::invalid("phase curve must start at 0"));
            }
            if j > 0 {
                let (pp, pw2, pw3) = (file.w[3 * j - 3], file.w[3 * j - 2], file.w[3 * j - 1]);
                let prev_b = pw3 - pw2;
                if (pp + pw3 - p).abs() > 1e-12 || (prev_b - w2).abs() > 1e-12 {
                    return Err(Error::invalid(format!("phase curve not C¹ at joint {j}")));
                }
            }
            inc.push(w2);
            if j + 1 == j_count {
                inc.push(w3 - w2);
            }
        }
        let end = file.w[3 * j_count - 3] + file.w[3 * j_count - 1];
        if (end - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("phase curve must end at 1, ends at {end}")));
        }
        Self::from_increments(file.duration, &inc)
    }
}

fn weighted_total(d: &[f64]) -> f64 {
    let n = d.len();
    d[0] + d[n - 1] + 2.0 * d[1..n - 1].iter().sum::<f64>()
}

/// Curve velocity with respect to time: `γ′(σ(t)) · σ′(t)`. The curve
/// derivative is taken with respect to the global phase in `[0, 1]`, so the
/// result is in curve units per second.
pub fn modulated_derivative<M: Manifold>(
    curve: &CompositeBezierCurve<M>,
    pc: &PhaseCurve,
    t: f64,
) -> Result<M::Tangent> {
    let v = curve.derivative(pc.eval(t))?;
    Ok(v.scaled(pc.derivative(t)))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PhaseOptions {
    pub segments: usize,
    /// Lower bound on the returned duration.
    pub min_duration: f64,
    pub max_evaluations: usize,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            segments: 10,
            min_duration: 1e-2,
            max_evaluations: 20_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseReport {
    pub duration: f64,
    /// Largest speed over the enforcement grid.
    pub max_speed: f64,
    /// Arc length divided by the speed limit; no profile can be faster.
    pub lower_bound: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Number of samples in the speed table used during optimization.
const TABLE: usize = 2001;

/// Speed of the curve with respect to phase, tabulated on a uniform grid.
struct SpeedTable(Vec<f64>);

impl SpeedTable {
    fn at(&self, s: f64) -> f64 {
        let n = self.0.len() - 1;
        let x = s.clamp(0.0, 1.0) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let f = x - i as f64;
        self.0[i] * (1.0 - f) + self.0[i + 1] * f
    }

    /// Trapezoidal arc length.
    fn length(&self) -> f64 {
        let n = self.0.len() - 1;
        let h = 1.0 / n as f64;
        h * (self.0.iter().sum::<f64>() - 0.5 * (self.0[0] + self.0[n]))
    }
}

fn grid_times(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| i as f64 / (n - 1) as f64)
}

/// Duration needed for a unit-duration profile to respect `v_bar` given a
/// speed function of phase.
fn required_duration(pc: &PhaseCurve, speed: impl Fn(f64) -> Result<f64>, v_bar: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for tau in grid_times(SPEED_GRID) {
        let t = tau * pc.duration;
        worst = worst.max(speed(pc.eval(t))? * pc.derivative(t) * pc.duration);
    }
    Ok(worst / v_bar)
}

/// Minimum-time phase profile under the speed limit `v_bar`.
///
/// For a fixed profile shape the smallest admissible duration is the largest
/// grid speed at unit duration divided by `v_bar`; the shape is chosen by
/// Nelder–Mead on log-increments, minimizing a smoothed maximum first and the
/// maximum itself last. Starts from an arc-length-like profile.
pub fn optimize_phase<M: Manifold>(
    curve: &CompositeBezierCurve<M>,
    v_bar: f64,
    opts: &PhaseOptions,
) -> Result<(PhaseCurve, PhaseReport)> {
    let clock = Instant::now();
    if !(v_bar > 0.0) || v_bar.is_nan() {
        return Err(Error::invalid(format!("speed limit must be positive, got {v_bar}")));
    }
    if opts.segments == 0 {
        return Err(Error::invalid("phase curve needs at least one segment"));
    }
    let m = curve.manifold();
    let speed_exact = |s: f64| -> Result<f64> {
        let x = curve.eval(s)?;
        let v = curve.derivative(s)?;
        let metric = crate::geom::MetricParams::default();
        Ok(m.norm(&x, &v, &metric))
    };
    let table = SpeedTable(
        grid_times(TABLE)
            .map(&speed_exact)
            .collect::<Result<Vec<_>>>()?,
    );
    let length = table.length();
    let j_count = opts.segments;

    // arc-length start: σ′ ∝ 1 / speed at the knots
    let cumulative: Vec<f64> = {
        let mut acc = vec![0.0; TABLE];
        for i in 1..TABLE {
            acc[i] = acc[i - 1] + 0.5 * (table.0[i - 1] + table.0[i]) / (TABLE - 1) as f64;
        }
        acc
    };
    let inverse_arclength = |frac: f64| -> f64 {
        if length <= 0.0 {
            return frac;
        }
        let target = frac * length;
        let i = cumulative.partition_point(|&c| c < target).clamp(1, TABLE - 1);
        let (c0, c1) = (cumulative[i - 1], cumulative[i]);
        let f = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        ((i - 1) as f64 + f) / (TABLE - 1) as f64
    };
    let floor = 1e-3 * table.0.iter().copied().fold(0.0, f64::max).max(1e-300);
    let z0: Vec<f64> = (0..=j_count)
        .map(|i| -table.at(inverse_arclength(i as f64 / j_count as f64)).max(floor).ln())
        .collect();

    let profile = |z: &[f64]| -> PhaseCurve {
        let d: Vec<f64> = z.iter().map(|v| v.clamp(-30.0, 30.0).exp()).collect();
        PhaseCurve::from_increments(1.0, &d).expect("exp keeps increments positive")
    };
    let mut evaluations = 0;
    let mut z = z0;
    let budget = opts.max_evaluations / 4;
    let mut converged = true;
    for p in [8.0, 32.0, 128.0, f64::INFINITY] {
        let objective = |z: &[f64]| -> f64 {
            let pc = profile(z);
            let g: Vec<f64> = grid_times(SPEED_GRID)
                .map(|t| table.at(pc.eval(t)) * pc.derivative(t))
                .collect();
            let top = g.iter().copied().fold(0.0, f64::max);
            if top <= 0.0 || p.is_infinite() {
                return top;
            }
            let mean = g.iter().map(|v| (v / top).powf(p)).sum::<f64>() / g.len() as f64;
            top * mean.powf(1.0 / p)
        };
        let res = nelder_mead(objective, &z, 0.3, budget, 1e-12);
        evaluations += res.evaluations;
        converged &= res.converged;
        z = res.x;
    }

    let shape = profile(&z);
    let t_needed = required_duration(&shape, speed_exact, v_bar)?;
    let duration = t_needed.max(opts.min_duration);
    let pc = shape.with_duration(duration)?;
    let mut max_speed = 0.0f64;
    for tau in grid_times(SPEED_GRID) {
        let t = tau * duration;
        max_speed = max_speed.max(speed_exact(pc.eval(t))? * pc.derivative(t));
    }
    let pc = enforce_min_rate(pc)?;
    pc.validate()?;
    Ok((
        pc.clone(),
        PhaseReport {
            duration: pc.duration(),
            max_speed,
            lower_bound: length / v_bar,
            evaluations,
            converged,
            wall_time_s: clock.elapsed().as_secs_f64(),
        },
    ))
}

/// Lifts increments so that `dσ/dt ≥ MIN_PHASE_RATE` everywhere.
fn enforce_min_rate(pc: PhaseCurve) -> Result<PhaseCurve> {
    let j = pc.segments() as f64;
    // segment derivative is a convex blend of 2J·d_j/T and 2J·d_{j+1}/T
    let min_inc = MIN_PHASE_RATE * pc.duration / (2.0 * j);
    if pc.increments.iter().all(|&d| d >= min_inc) {
        return Ok(pc);
    }
    let lifted: Vec<f64> = pc.increments.iter().map(|&d| d.max(2.0 * min_inc)).collect();
    PhaseCurve::from_increments(pc.duration, &lifted)
}

pub(crate) struct NelderMeadResult {
    pub x: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search with standard coefficients.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> NelderMeadResult {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n + 1;
    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= ftol * (best.abs() + worst.abs()) + 1e-300 {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v.0[k]).sum::<f64>() / n as f64)
            .collect();
        let towards = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = towards(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = towards(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let x = towards(-0.5);
            let fx = f(&x);
            (x, fx)
        } else {
            let x = towards(0.5);
            let fx = f(&x);
            (x, fx)
        };
        evals += 1;
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best_x = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            for (xi, bi) in v.0.iter_mut().zip(&best_x) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            v.1 = f(&v.0);
        }
        evals += n;
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMeadResult {
        x: simplex.swap_remove(0).0,
        evaluations: evals,
        converged,
    }
}
