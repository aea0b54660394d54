//! Composite quadratic Bézier curves on a manifold.
//!
//! Segment `j` lives in the tangent space at its base point `p_j`:
//! `γ_j(t) = exp(p_j, 2(1−t)t·w2_j + t²·w3_j)` for local phase `t ∈ [0, 1]`.
//! The global phase `s ∈ [0, 1]` is split into `J` equal pieces.

mod demo;
mod fit;
mod guess;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Manifold, ManifoldKind, MetricParams, TangentVec};

pub use demo::{normalize_phases, Demo, DemoSet, TimedDemo};
pub use fit::{fit_curve, FitOptions, FitReport, StopReason};
pub use guess::initial_guess;

/// Step used by the finite-difference curve derivative.
pub const DERIVATIVE_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct BezierSegment<M: Manifold> {
    pub base: M::Point,
    pub w2: M::Tangent,
    pub w3: M::Tangent,
}

impl<M: Manifold> BezierSegment<M> {
    /// Tangent-space polynomial `2(1−t)t·w2 + t²·w3`.
    pub fn control_polygon(&self, t: f64) -> M::Tangent {
        self.w2.lincomb(2.0 * (1.0 - t) * t, &self.w3, t * t)
    }

    pub fn eval(&self, m: &M, t: f64) -> Result<M::Point> {
        if t == 0.0 {
            return Ok(self.base.clone());
        }
        m.exp(&self.base, &self.control_polygon(t))
    }

    pub fn end(&self, m: &M) -> Result<M::Point> {
        m.exp(&self.base, &self.w3)
    }
}

/// Result of mapping a global phase to a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentLocation {
    pub index: usize,
    pub local: f64,
    /// The requested phase was outside `[0, 1]` and got clamped.
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct CompositeBezierCurve<M: Manifold> {
    manifold: M,
    segments: Vec<BezierSegment<M>>,
}

/// Constraint-eliminated parameters: the first base point, the first
/// segment's middle control and every end control.
#[derive(Clone, Debug)]
pub struct FreeParams<M: Manifold> {
    pub start: M::Point,
    pub first_w2: M::Tangent,
    pub w3: Vec<M::Tangent>,
}

/// Continuity defects at one joint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointGap {
    /// Distance between the end of segment `j` and the base of `j+1`.
    pub position: f64,
    /// Coordinate norm of `transport(w3_j − w2_j) − w2_{j+1}`.
    pub tangent: f64,
}

impl<M: Manifold> CompositeBezierCurve<M> {
    pub fn new(manifold: M, segments: Vec<BezierSegment<M>>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("a curve needs at least one segment"));
        }
        for (j, seg) in segments.iter().enumerate() {
            if !seg.w2.is_finite() || !seg.w3.is_finite() {
                return Err(Error::invalid(format!("segment {j} has non-finite controls")));
            }
        }
        Ok(Self { manifold, segments })
    }

    /// Curve that stays at `p` for all phases.
    pub fn constant(manifold: M, p: M::Point, segments: usize) -> Result<Self> {
        let zero = manifold.zero(&p);
        let segs = (0..segments.max(1))
            .map(|_| BezierSegment {
                base: p.clone(),
                w2: zero.clone(),
                w3: zero.clone(),
            })
            .collect();
        Self::new(manifold, segs)
    }

    /// Chains the segments so that `C⁰` and `C¹` hold by construction:
    /// `p_{j+1} = exp(p_j, w3_j)` and
    /// `w2_{j+1} = transport(p_j → p_{j+1}, w3_j − w2_j)`.
    pub fn from_free_params(manifold: M, free: &FreeParams<M>) -> Result<Self> {
        if free.w3.is_empty() {
            return Err(Error::invalid("free parameters need at least one segment"));
        }
        let mut segments = Vec::with_capacity(free.w3.len());
        let mut base = free.start.clone();
        let mut w2 = free.first_w2.clone();
        for (j, w3) in free.w3.iter().enumerate() {
            if !manifold.within_safe_radius(&base, w3) || !manifold.within_safe_radius(&base, &w2)
            {
                return Err(Error::FitInfeasible(format!(
                    "control vector of segment {j} exceeds the safe injectivity radius"
                )));
            }
            let next_w2 = if j + 1 < free.w3.len() {
                let next = manifold.exp(&base, w3)?;
                let carried = manifold
                    .transport(&base, &next, &w3.minus(&w2))
                    .map_err(|e| Error::FitInfeasible(format!("joint {j}: {e}")))?;
                Some((next, carried))
            } else {
                None
            };
            segments.push(BezierSegment {
                base: base.clone(),
                w2: w2.clone(),
                w3: w3.clone(),
            });
            if let Some((next, carried)) = next_w2 {
                base = next;
                w2 = carried;
            }
        }
        Self::new(manifold, segments)
    }

    pub fn free_params(&self) -> FreeParams<M> {
        FreeParams {
            start: self.segments[0].base.clone(),
            first_w2: self.segments[0].w2.clone(),
            w3: self.segments.iter().map(|s| s.w3.clone()).collect(),
        }
    }

    pub fn manifold(&self) -> &M {
        &self.manifold
    }

    pub fn segments(&self) -> &[BezierSegment<M>] {
        &self.segments
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Segment index `min(⌊sJ⌋, J−1)` and local phase `sJ − index`.
    pub fn locate(&self, s: f64) -> SegmentLocation {
        let clamped = !(0.0..=1.0).contains(&s);
        let s = if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) };
        let j_count = self.segments.len();
        let scaled = s * j_count as f64;
        let index = (scaled.floor() as usize).min(j_count - 1);
        SegmentLocation {
            index,
            local: (scaled - index as f64).clamp(0.0, 1.0),
            clamped,
        }
    }

    pub fn eval(&self, s: f64) -> Result<M::Point> {
        let loc = self.locate(s);
        if loc.clamped {
            log::debug!("curve phase {s} clamped to [0, 1]");
        }
        self.segments[loc.index].eval(&self.manifold, loc.local)
    }

    /// Like [`CompositeBezierCurve::eval`] but also reports whether `s` was
    /// clamped.
    pub fn eval_flagged(&self, s: f64) -> Result<(M::Point, bool)> {
        let loc = self.locate(s);
        Ok((self.segments[loc.index].eval(&self.manifold, loc.local)?, loc.clamped))
    }

    pub fn start(&self) -> &M::Point {
        &self.segments[0].base
    }

    pub fn end(&self) -> Result<M::Point> {
        self.segments[self.segments.len() - 1].end(&self.manifold)
    }

    /// Velocity with respect to the global phase, at `γ(s)`.
    pub fn derivative(&self, s: f64) -> Result<M::Tangent> {
        self.derivative_with_step(s, DERIVATIVE_STEP)
    }

    /// Central difference of logs at `γ(s)`; within `h` of either end a
    /// second-order one-sided stencil is used instead.
    pub fn derivative_with_step(&self, s: f64, h: f64) -> Result<M::Tangent> {
        let m = &self.manifold;
        let s = s.clamp(0.0, 1.0);
        let x = self.eval(s)?;
        let log_at = |t: f64| -> Result<M::Tangent> { m.log(&x, &self.eval(t)?) };
        if s - h < 0.0 {
            let a = log_at(s + h)?;
            let b = log_at(s + 2.0 * h)?;
            Ok(a.lincomb(4.0 / (2.0 * h), &b, -1.0 / (2.0 * h)))
        } else if s + h > 1.0 {
            let a = log_at(s - h)?;
            let b = log_at(s - 2.0 * h)?;
            Ok(a.lincomb(-4.0 / (2.0 * h), &b, 1.0 / (2.0 * h)))
        } else {
            let fwd = log_at(s + h)?;
            let back = log_at(s - h)?;
            Ok(fwd.minus(&back).scaled(1.0 / (2.0 * h)))
        }
    }

    /// `C⁰`/`C¹` defects at each of the `J − 1` joints.
    pub fn joint_gaps(&self, metric: &MetricParams) -> Result<Vec<JointGap>> {
        let m = &self.manifold;
        self.segments
            .windows(2)
            .map(|w| {
                let end = w[0].end(m)?;
                let carried = m.transport(&w[0].base, &w[1].base, &w[0].w3.minus(&w[0].w2))?;
                Ok(JointGap {
                    position: m.distance(&end, &w[1].base, metric),
                    tangent: carried.minus(&w[1].w2).coord_norm(),
                })
            })
            .collect()
    }

    /// `n` uniformly spaced phases and the curve points at them.
    pub fn sample(&self, n: usize) -> Result<(Vec<f64>, Vec<M::Point>)> {
        let n = n.max(2);
        let phases: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let points = phases.iter().map(|&s| self.eval(s)).collect::<Result<_>>()?;
        Ok((phases, points))
    }

    pub fn to_file(&self) -> CurveFile {
        let m = &self.manifold;
        CurveFile {
            manifold: m.kind().to_string(),
            segment_count: self.segments.len(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentFile {
                    p: m.point_to_coords(&s.base),
                    w2: s.w2.coords(),
                    w3: s.w3.coords(),
                })
                .collect(),
        }
    }

    pub fn from_file(manifold: M, file: &CurveFile) -> Result<Self> {
        let kind: ManifoldKind = file.manifold.parse()?;
        if kind != manifold.kind() {
            return Err(Error::invalid(format!(
                "curve file is for {kind}, expected {}",
                manifold.kind()
            )));
        }
        if file.segment_count != file.segments.len() {
            return Err(Error::invalid(format!(
                "curve file declares J = {} but lists {} segments",
                file.segment_count,
                file.segments.len()
            )));
        }
        let segments = file
            .segments
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let base = manifold
                    .point_from_coords(&s.p)
                    .map_err(|e| e.context(format!("segment {j} base")))?;
                let w2 = manifold
                    .tangent_from_coords(&base, &s.w2)
                    .map_err(|e| e.context(format!("segment {j} w2")))?;
                let w3 = manifold
                    .tangent_from_coords(&base, &s.w3)
                    .map_err(|e| e.context(format!("segment {j} w3")))?;
                Ok(BezierSegment { base, w2, w3 })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifold, segments)
    }
}

/// On-disk curve layout.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CurveFile {
    pub manifold: String,
    #[serde(rename = "J")]
    pub segment_count: usize,
    pub segments: Vec<SegmentFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentFile {
    pub p: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
}

impl CurveFile {
    pub fn kind(&self) -> Result<ManifoldKind> {
        self.manifold.parse()
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}
