#![allow(dead_code)]

use dsmp::curve::{fit_curve, CompositeBezierCurve, Demo, DemoSet, FitOptions};
use dsmp::geom::{Manifold, Pose, Se3, So3, Spd, SpdPoint, Sphere2};
use nalgebra::{DMatrix, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample of the unit ball in `n` dimensions.
pub fn unit_ball(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

pub fn s2_base() -> Vector3<f64> {
    Vector3::new(0.3, -0.5, 0.8).normalize()
}

pub fn so3_base() -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(0.2, -0.4, 0.7)
}

pub fn se3_base() -> Pose {
    Pose::new(so3_base(), Vector3::new(0.4, -0.2, 0.5))
}

pub fn spd3() -> Spd {
    Spd::new(3).unwrap()
}

pub fn spd3_base() -> SpdPoint {
    SpdPoint::new_unchecked(DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]))
}

/// Smooth nominal path in local coordinates at the base point.
fn nominal(k: usize, s: f64, scale: f64) -> f64 {
    let kf = k as f64 + 1.0;
    scale * (0.9 * s * (1.0 + 0.15 * kf) + 0.25 * (std::f64::consts::PI * s * (1.0 + 0.5 * kf)).sin())
        / (1.0 + 0.1 * kf)
}

/// Demonstrations around a smooth path through `base`, each with its own
/// start offset that fades out and a small timing warp.
pub fn demo_set<M: Manifold>(
    m: &M,
    base: &M::Point,
    demos: usize,
    samples: usize,
    scale: f64,
    seed: u64,
) -> DemoSet<M::Point> {
    let mut r = rng(seed);
    let dim = m.dim();
    let set = (0..demos)
        .map(|_| {
            let off: Vec<f64> = unit_ball(&mut r, dim).iter().map(|x| 0.05 * scale * x).collect();
            let beta = r.random_range(-0.05..0.05);
            let phases: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
            let points = phases
                .iter()
                .map(|&t| {
                    let s = t + beta * t * (1.0 - t);
                    let c: Vec<f64> = (0..dim)
                        .map(|k| nominal(k, s, scale) + (1.0 - s).powi(2) * off[k])
                        .collect();
                    m.exp(base, &m.from_local(base, &c)).unwrap()
                })
                .collect();
            Demo::new(phases, points).unwrap()
        })
        .collect();
    DemoSet::new(set).unwrap()
}

pub fn fitted<M: Manifold>(m: &M, base: &M::Point, scale: f64, seed: u64) -> CompositeBezierCurve<M> {
    let demos = demo_set(m, base, 5, 60, scale, seed);
    let opts = FitOptions {
        segments: 6,
        seed,
        ..FitOptions::default()
    };
    fit_curve(m, &demos, &opts).unwrap().0
}

pub fn s2_curve() -> CompositeBezierCurve<Sphere2> {
    fitted(&Sphere2, &s2_base(), 0.8, 1)
}

pub fn so3_curve() -> CompositeBezierCurve<So3> {
    fitted(&So3, &so3_base(), 0.8, 2)
}

pub fn se3_curve() -> CompositeBezierCurve<Se3> {
    fitted(&Se3, &se3_base(), 0.8, 3)
}

pub fn spd3_curve() -> CompositeBezierCurve<Spd> {
    fitted(&spd3(), &spd3_base(), 0.6, 4)
}

/// A point at local offset of length at most `radius` from a random curve
/// point.
pub fn near_curve<M: Manifold>(
    c: &CompositeBezierCurve<M>,
    rng: &mut ChaCha8Rng,
    radius: f64,
) -> M::Point {
    let m = c.manifold();
    let s: f64 = rng.random();
    let p = c.eval(s).unwrap();
    let v: Vec<f64> = unit_ball(rng, m.dim()).iter().map(|x| radius * x).collect();
    m.exp(&p, &m.from_local(&p, &v)).unwrap()
}
