//! Handwriting-style planar shapes with seven demonstrations each.
//!
//! Every shape is a smooth path ending at the origin. Demonstrations differ
//! by a start offset that fades along the path, a small lateral bulge and a
//! monotone time warp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::{RawDemo, RawDemoSet};
use crate::error::{Error, Result};

pub const SHAPES: &[&str] = &[
    "Angle", "CShape", "JShape", "LShape", "NShape", "Sine", "Spiral", "Worm",
];

#[derive(Clone, Debug)]
pub struct SyntheticOptions {
    pub demos: usize,
    pub samples: usize,
    /// Start offset radius relative to the shape extent.
    pub start_spread: f64,
    /// Largest lateral bulge relative to the extent.
    pub bulge: f64,
    /// Largest time warp coefficient `β` in `u = τ + β·τ(1 − τ)`.
    pub warp: f64,
    pub seed: u64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            demos: 7,
            samples: 1000,
            start_spread: 0.05,
            bulge: 0.02,
            warp: 0.05,
            seed: 0,
        }
    }
}

fn quad(p: [[f64; 2]; 3], u: f64) -> [f64; 2] {
    let (a, b, c) = ((1.0 - u) * (1.0 - u), 2.0 * (1.0 - u) * u, u * u);
    [a * p[0][0] + b * p[1][0] + c * p[2][0], a * p[0][1] + b * p[1][1] + c * p[2][1]]
}

fn cubic(p: [[f64; 2]; 4], u: f64) -> [f64; 2] {
    let v = 1.0 - u;
    let w = [v * v * v, 3.0 * v * v * u, 3.0 * v * u * u, u * u * u];
    [
        (0..4).map(|i| w[i] * p[i][0]).sum(),
        (0..4).map(|i| w[i] * p[i][1]).sum(),
    ]
}

/// Nominal path of a shape at `u ∈ [0, 1]`, in millimetre-like units.
pub fn shape_path(name: &str, u: f64) -> Result<[f64; 2]> {
    use std::f64::consts::PI;
    let v = 1.0 - u;
    Ok(match name {
        "Angle" => quad([[-40.0, -5.0], [-10.0, 40.0], [0.0, 0.0]], u),
        "CShape" => {
            let th = PI / 2.0 + PI * u;
            [15.0 * th.cos(), 15.0 + 15.0 * th.sin()]
        }
        "JShape" => cubic([[15.0, 40.0], [15.0, -12.0], [-15.0, -12.0], [0.0, 0.0]], u),
        "LShape" => quad([[-30.0, 40.0], [-30.0, 0.0], [0.0, 0.0]], u),
        "NShape" => cubic([[-30.0, -20.0], [-30.0, 60.0], [0.0, -60.0], [0.0, 0.0]], u),
        "Sine" => [-40.0 * v, 10.0 * (3.0 * PI * u).sin() * v],
        "Spiral" => {
            let th = 3.0 * PI * u;
            [-30.0 * v * th.cos(), 30.0 * v * th.sin()]
        }
        "Worm" => [-40.0 * v, 8.0 * (4.0 * PI * u).sin() * v.sqrt()],
        other => {
            return Err(Error::invalid(format!(
                "unknown synthetic shape `{other}`; known: {}",
                SHAPES.join(", ")
            )))
        }
    })
}

pub fn synthetic_shape(name: &str, opts: &SyntheticOptions) -> Result<RawDemoSet> {
    if opts.demos == 0 || opts.samples < 2 {
        return Err(Error::invalid("synthetic shapes need at least one demo and two samples"));
    }
    let tag = SHAPES.iter().position(|s| *s == name).unwrap_or(SHAPES.len()) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e37_79b9).wrapping_add(tag));
    let extent = (0..=200)
        .map(|i| shape_path(name, i as f64 / 200.0).map(|p| p[0].hypot(p[1])))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let normal = |u: f64| -> Result<[f64; 2]> {
        let h = 1e-4;
        let (a, b) = (
            shape_path(name, (u - h).max(0.0))?,
            shape_path(name, (u + h).min(1.0))?,
        );
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let n = dx.hypot(dy).max(1e-12);
        Ok([-dy / n, dx / n])
    };
    let demos = (0..opts.demos)
        .map(|k| {
            let ang = rng.random_range(0.0..std::f64::consts::TAU);
            let rad = opts.start_spread * extent * rng.random::<f64>().sqrt();
            let offset = [rad * ang.cos(), rad * ang.sin()];
            let bulge = opts.bulge * extent * rng.random_range(-1.0..1.0);
            let beta = opts.warp * rng.random_range(-1.0..1.0);
            let duration = rng.random_range(2.5..4.0);
            let mut times = Vec::with_capacity(opts.samples);
            let mut points = Vec::with_capacity(opts.samples);
            for i in 0..opts.samples {
                let tau = i as f64 / (opts.samples - 1) as f64;
                let u = tau + beta * tau * (1.0 - tau);
                let p = shape_path(name, u)?;
                let n = normal(u)?;
                let fade = (1.0 - u).powi(2);
                let b = bulge * (std::f64::consts::PI * u).sin();
                times.push(tau * duration);
                points.push(vec![p[0] + fade * offset[0] + b * n[0], p[1] + fade * offset[1] + b * n[1]]);
            }
            Ok(RawDemo {
                id: k.to_string(),
                times,
                points,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawDemoSet { dim: 2, demos })
}

/// All requested shapes, or every known shape for an empty filter.
pub fn synthetic_corpus(filter: &[String], opts: &SyntheticOptions) -> Result<Vec<(String, RawDemoSet)>> {
    let names: Vec<&str> = if filter.is_empty() {
        SHAPES.to_vec()
    } else {
        filter.iter().map(String::as_str).collect()
    };
    names
        .into_iter()
        .map(|n| Ok((n.to_string(), synthetic_shape(n, opts)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_end_at_origin() {
        for s in SHAPES {
            let e = shape_path(s, 1.0).unwrap();
            assert!(e[0].hypot(e[1]) < 1e-9, "{s}: {e:?}");
        }
        assert!(shape_path("Blob", 0.5).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let opts = SyntheticOptions::default();
        let a = synthetic_shape("Sine", &opts).unwrap();
        let b = synthetic_shape("Sine", &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.demos.len(), 7);
        assert_eq!(a.demos[0].points.len(), 1000);
        let c = synthetic_shape("Sine", &SyntheticOptions { seed: 1, ..opts }).unwrap();
        assert_ne!(a, c);
        for d in &a.demos {
            let e = d.points.last().unwrap();
            assert!(e[0].hypot(e[1]) < 1e-9);
        }
    }
}
