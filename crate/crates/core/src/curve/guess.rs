use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CompositeBezierCurve, DemoSet, FreeParams};
use crate::error::{Error, Result};
use crate::geom::{Manifold, TangentVec};

/// Starting point for curve fitting.
///
/// All demo points are pulled into the tangent space at the first demo
/// point, where the Euclidean composite Bézier problem is linear and solved
/// by least squares. The result is pushed back onto the manifold and every
/// free coordinate gets uniform noise in `[−noise, noise]`. If any point is
/// outside the anchor's safe radius the guess falls back to a piecewise
/// geodesic through the mean demo.
pub fn initial_guess<M: Manifold>(
    m: &M,
    demos: &DemoSet<M::Point>,
    segments: usize,
    noise: f64,
    seed: u64,
) -> Result<FreeParams<M>> {
    if segments == 0 {
        return Err(Error::invalid("segment count must be at least 1"));
    }
    let anchor = demos.demos()[0].points[0].clone();
    let clean = match tangent_space_fit(m, demos, segments, &anchor) {
        Ok(free) => free,
        Err(e) => {
            log::debug!("tangent-space guess unavailable ({e}), using mean demo");
            mean_demo_guess(m, demos, segments)?
        }
    };
    let noisy = if noise > 0.0 {
        perturb(m, &clean, noise, seed)?
    } else {
        clean.clone()
    };
    match CompositeBezierCurve::from_free_params(m.clone(), &noisy) {
        Ok(_) => Ok(noisy),
        Err(_) => mean_demo_guess(m, demos, segments),
    }
}

/// Coefficients of `P_j` and `W2_j` in terms of
/// `θ = [P_1, W2_1, W3_1, …, W3_J]` for the Euclidean chain
/// `P_{j+1} = P_j + W3_j`, `W2_{j+1} = W3_j − W2_j`.
fn chain_coefficients(segments: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let cols = segments + 2;
    let mut base = vec![0.0; cols];
    base[0] = 1.0;
    let mut mid = vec![0.0; cols];
    mid[1] = 1.0;
    let mut out = Vec::with_capacity(segments);
    for j in 0..segments {
        out.push((base.clone(), mid.clone()));
        base[2 + j] += 1.0;
        for c in mid.iter_mut() {
            *c = -*c;
        }
        mid[2 + j] += 1.0;
    }
    out
}

fn tangent_space_fit<M: Manifold>(
    m: &M,
    demos: &DemoSet<M::Point>,
    segments: usize,
    anchor: &M::Point,
) -> Result<FreeParams<M>> {
    let dim = m.dim();
    let rows = demos.total_points();
    let cols = segments + 2;
    let coeffs = chain_coefficients(segments);
    let mut a = DMatrix::zeros(rows, cols);
    let mut y = DMatrix::zeros(rows, dim);
    for (i, (s, x)) in demos.samples().enumerate() {
        let v = m.log(anchor, x)?;
        if !m.within_safe_radius(anchor, &v) {
            return Err(Error::FitInfeasible("demo point beyond the anchor's safe radius".into()));
        }
        for (k, c) in m.to_local(anchor, &v).into_iter().enumerate() {
            y[(i, k)] = c;
        }
        let scaled = s * segments as f64;
        let j = (scaled.floor() as usize).min(segments - 1);
        let t = scaled - j as f64;
        let (b1, b2) = (2.0 * (1.0 - t) * t, t * t);
        let (base, mid) = &coeffs[j];
        for c in 0..cols {
            a[(i, c)] = base[c] + b1 * mid[c];
        }
        a[(i, 2 + j)] += b2;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let theta = svd
        .solve(&y, smax * 1e-12)
        .map_err(|e| Error::FitInfeasible(format!("least squares: {e}")))?;
    let block = |c: usize| -> Vec<f64> { theta.row(c).iter().copied().collect() };
    let at_anchor = |c: Vec<f64>| -> Result<M::Point> { m.exp(anchor, &m.from_local(anchor, &c)) };
    let add = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(a, b)| a + b).collect() };

    let p1 = block(0);
    let start = at_anchor(p1.clone())?;
    let first_w2 = m.log(&start, &at_anchor(add(&p1, &block(1)))?)?;
    let mut w3 = Vec::with_capacity(segments);
    let mut base = start.clone();
    let mut base_coords = p1;
    for j in 0..segments {
        let end_coords = add(&base_coords, &block(2 + j));
        let end = at_anchor(end_coords.clone())?;
        let w = m.log(&base, &end)?;
        base = m.exp(&base, &w)?;
        w3.push(w);
        base_coords = end_coords;
    }
    Ok(FreeParams {
        start,
        first_w2,
        w3,
    })
}

/// Fréchet mean by fixed-point iteration on the log map.
fn mean_point<M: Manifold>(m: &M, points: &[M::Point]) -> M::Point {
    let mut mu = points[0].clone();
    for _ in 0..20 {
        let logs: Vec<M::Tangent> = points.iter().filter_map(|x| m.log(&mu, x).ok()).collect();
        if logs.is_empty() {
            break;
        }
        let step = logs
            .iter()
            .skip(1)
            .fold(logs[0].clone(), |acc, v| acc.plus(v))
            .scaled(1.0 / logs.len() as f64);
        if step.coord_norm() < 1e-12 {
            break;
        }
        match m.exp(&mu, &step) {
            Ok(next) => mu = next,
            Err(_) => break,
        }
    }
    mu
}

fn mean_demo_guess<M: Manifold>(
    m: &M,
    demos: &DemoSet<M::Point>,
    segments: usize,
) -> Result<FreeParams<M>> {
    let knots = (0..=segments)
        .map(|j| {
            let s = j as f64 / segments as f64;
            let pts = demos
                .demos()
                .iter()
                .map(|d| d.point_at(m, s))
                .collect::<Result<Vec<_>>>()?;
            Ok(mean_point(m, &pts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w3 = Vec::with_capacity(segments);
    let mut base = knots[0].clone();
    for knot in &knots[1..] {
        let w = m.log(&base, knot).unwrap_or_else(|_| m.zero(&base));
        let w = if m.within_safe_radius(&base, &w) { w } else { m.zero(&base) };
        base = m.exp(&base, &w)?;
        w3.push(w);
    }
    Ok(FreeParams {
        start: knots[0].clone(),
        first_w2: w3[0].scaled(0.5),
        w3,
    })
}

fn perturb<M: Manifold>(
    m: &M,
    free: &FreeParams<M>,
    noise: f64,
    seed: u64,
) -> Result<FreeParams<M>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = m.dim();
    let mut jitter = |p: &M::Point| -> M::Tangent {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-noise..=noise)).collect();
        m.from_local(p, &c)
    };
    let start = m.exp(&free.start, &jitter(&free.start))?;
    // controls keep their coordinates relative to the moved base
    let carry = |v: &M::Tangent| m.transport(&free.start, &start, v);
    let first_w2 = carry(&free.first_w2)?.plus(&jitter(&start));
    let mut w3 = Vec::with_capacity(free.w3.len());
    let mut base = start.clone();
    let mut old_base = free.start.clone();
    for w in &free.w3 {
        let moved = m.transport(&old_base, &base, w)?.plus(&jitter(&base));
        old_base = m.exp(&old_base, w)?;
        base = m.exp(&base, &moved)?;
        w3.push(moved);
    }
    Ok(FreeParams {
        start,
        first_w2,
        w3,
    })
}
