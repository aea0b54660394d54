//! Manifold kernels.
//!
//! Every manifold implements [`Manifold`]: exponential and logarithmic maps,
//! geodesic distance, parallel transport and the metric inner product. Points
//! and tangent vectors serialize to flat real arrays:
//!
//! | manifold | point | tangent |
//! |---|---|---|
//! | `s2` | unit 3-vector | ambient 3-vector orthogonal to the base |
//! | `so3` | unit quaternion `(w, x, y, z)`, `w >= 0` | body angular velocity `ω` |
//! | `se3` | `(w, x, y, z, tx, ty, tz)` | body twist `(ω, v)` |
//! | `spd<n>` | symmetric `n×n`, row-major | symmetric `n×n`, row-major |
//! | `r<n>` | `n` reals | `n` reals |
//!
//! Lie groups use body-frame (left-translated) tangents, so `exp(p, ξ)` is
//! `p · Exp(ξ)` and parallel transport is the identity on coordinates.

mod euclidean;
pub mod lie;
mod se3;
mod so3;
mod spd;
mod sphere;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use euclidean::Euclidean;
pub use se3::{Pose, Se3};
pub use so3::So3;
pub use spd::{Spd, SpdPoint};
pub use sphere::Sphere2;

/// Largest control-vector length (rotation angle on the groups) accepted on
/// `S²` and `SO(3)`.
pub const SAFE_RADIUS: f64 = std::f64::consts::PI - 0.1;

/// Characteristic length used to weight rotations against translations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub characteristic_length: f64,
}

impl MetricParams {
    /// `L_c` used for general distance computations.
    pub const DEFAULT_LENGTH: f64 = 0.1;
    /// `L_c` used inside closest-point projection.
    pub const PROJECTION_LENGTH: f64 = 0.01;

    pub fn new(characteristic_length: f64) -> Result<Self> {
        if !(characteristic_length > 0.0) || !characteristic_length.is_finite() {
            return Err(Error::invalid(format!(
                "characteristic length must be positive, got {characteristic_length}"
            )));
        }
        Ok(Self {
            characteristic_length,
        })
    }

    pub fn projection() -> Self {
        Self {
            characteristic_length: Self::PROJECTION_LENGTH,
        }
    }

    /// Rotational weight `η = L_c²`.
    pub fn eta(&self) -> f64 {
        self.characteristic_length * self.characteristic_length
    }
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            characteristic_length: Self::DEFAULT_LENGTH,
        }
    }
}

/// Linear structure of a tangent-space representation.
pub trait TangentVec: Clone + fmt::Debug + Send + Sync {
    fn scaled(&self, a: f64) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    /// Flat coordinates in the documented layout.
    fn coords(&self) -> Vec<f64>;
    fn is_finite(&self) -> bool;

    /// Plain Euclidean norm of the coordinates (not the Riemannian norm).
    fn coord_norm(&self) -> f64 {
        self.coords().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `a·self + b·other`
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.scaled(a).plus(&other.scaled(b))
    }
}

macro_rules! impl_tangent_vec {
    ($t:ty) => {
        impl TangentVec for $t {
            fn scaled(&self, a: f64) -> Self {
                self * a
            }
            fn plus(&self, other: &Self) -> Self {
                self + other
            }
            fn minus(&self, other: &Self) -> Self {
                self - other
            }
            fn coords(&self) -> Vec<f64> {
                self.iter().copied().collect()
            }
            fn is_finite(&self) -> bool {
                self.iter().all(|c| c.is_finite())
            }
            fn coord_norm(&self) -> f64 {
                self.norm()
            }
        }
    };
}

impl_tangent_vec!(Vector3<f64>);
impl_tangent_vec!(Vector6<f64>);
impl_tangent_vec!(DVector<f64>);

impl TangentVec for DMatrix<f64> {
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn coords(&self) -> Vec<f64> {
        // row-major
        self.transpose().iter().copied().collect()
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|c| c.is_finite())
    }
    fn coord_norm(&self) -> f64 {
        self.norm()
    }
}

/// Uniform interface over the supported manifolds.
pub trait Manifold: Clone + fmt::Debug + Send + Sync + 'static {
    type Point: Clone + fmt::Debug + Send + Sync;
    type Tangent: TangentVec;

    fn kind(&self) -> ManifoldKind;

    /// Intrinsic dimension, i.e. the size of a local tangent basis.
    fn dim(&self) -> usize;

    fn exp(&self, p: &Self::Point, v: &Self::Tangent) -> Result<Self::Point>;

    /// Local inverse of [`Manifold::exp`]. Fails with [`Error::Singularity`]
    /// when `q` lies on (or numerically at) the cut locus of `p`.
    fn log(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Tangent>;

    /// Geodesic distance. Defined everywhere, including the cut locus.
    fn distance(&self, p: &Self::Point, q: &Self::Point, metric: &MetricParams) -> f64;

    fn transport(
        &self,
        p: &Self::Point,
        q: &Self::Point,
        v: &Self::Tangent,
    ) -> Result<Self::Tangent>;

    fn inner(
        &self,
        p: &Self::Point,
        u: &Self::Tangent,
        v: &Self::Tangent,
        metric: &MetricParams,
    ) -> f64;

    fn norm(&self, p: &Self::Point, v: &Self::Tangent, metric: &MetricParams) -> f64 {
        self.inner(p, v, v, metric).max(0.0).sqrt()
    }

    fn zero(&self, p: &Self::Point) -> Self::Tangent;

    /// Distances from `x` to every point in `points`, written into `out`.
    /// Implementations may trade the last few digits for speed; the result
    /// is only used to rank candidates before an exact refinement.
    fn scan_distances(
        &self,
        x: &Self::Point,
        points: &[Self::Point],
        metric: &MetricParams,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        out.extend(points.iter().map(|q| self.distance(x, q, metric)));
    }

    /// Whether `distance` satisfies the triangle inequality.
    fn distance_is_metric(&self, _metric: &MetricParams) -> bool {
        true
    }

    /// Writes a vector whose Euclidean norm equals `distance(p, q)`. Used as
    /// the least-squares residual when fitting curves.
    fn residual(
        &self,
        p: &Self::Point,
        q: &Self::Point,
        metric: &MetricParams,
        out: &mut Vec<f64>,
    ) -> Result<()>;

    /// Coordinates of `v` in a fixed basis of the tangent space at `p`.
    fn to_local(&self, p: &Self::Point, v: &Self::Tangent) -> Vec<f64>;

    /// Inverse of [`Manifold::to_local`].
    fn from_local(&self, p: &Self::Point, c: &[f64]) -> Self::Tangent;

    fn point_to_coords(&self, p: &Self::Point) -> Vec<f64>;

    /// Parses and validates a point from its flat layout.
    fn point_from_coords(&self, c: &[f64]) -> Result<Self::Point>;

    fn tangent_from_coords(&self, p: &Self::Point, c: &[f64]) -> Result<Self::Tangent>;

    /// Whether `v` is short enough to be used as a Bézier control vector at
    /// `p` without approaching the cut locus.
    fn within_safe_radius(&self, _p: &Self::Point, _v: &Self::Tangent) -> bool {
        true
    }

    fn geodesic(&self, p: &Self::Point, q: &Self::Point, t: f64) -> Result<Self::Point> {
        if t == 0.0 {
            return Ok(p.clone());
        }
        if t == 1.0 {
            return Ok(q.clone());
        }
        let v = self.log(p, q)?;
        self.exp(p, &v.scaled(t))
    }
}

/// A tangent vector together with its base point.
#[derive(Clone, Debug)]
pub struct TangentVector<M: Manifold> {
    pub base: M::Point,
    pub vector: M::Tangent,
}

/// Inner product of two based tangent vectors, checking that both live in
/// the tangent space at `p`.
pub fn inner_checked<M: Manifold>(
    m: &M,
    p: &M::Point,
    u: &TangentVector<M>,
    v: &TangentVector<M>,
    metric: &MetricParams,
) -> Result<f64> {
    let pc = m.point_to_coords(p);
    for t in [u, v] {
        let bc = m.point_to_coords(&t.base);
        let gap = pc
            .iter()
            .zip(&bc)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > 1e-9 {
            return Err(Error::invalid(format!(
                "tangent vector based at {bc:?}, expected {pc:?}"
            )));
        }
    }
    Ok(m.inner(p, &u.vector, &v.vector, metric))
}

pub(crate) fn check_finite(what: &str, c: impl IntoIterator<Item = f64>) -> Result<()> {
    if c.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite coordinates")))
    }
}

pub(crate) fn check_len(what: &str, c: &[f64], n: usize) -> Result<()> {
    if c.len() != n {
        return Err(Error::invalid(format!(
            "{what} expects {n} coordinates, got {}",
            c.len()
        )));
    }
    check_finite(what, c.iter().copied())
}

/// Runtime manifold identifier used by file formats and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    S2,
    So3,
    Se3,
    Spd(usize),
    Euclidean(usize),
}

impl ManifoldKind {
    /// Number of reals in a point's flat layout.
    pub fn point_len(&self) -> usize {
        match self {
            ManifoldKind::S2 => 3,
            ManifoldKind::So3 => 4,
            ManifoldKind::Se3 => 7,
            ManifoldKind::Spd(n) => n * n,
            ManifoldKind::Euclidean(n) => *n,
        }
    }

    /// Number of reals in a tangent vector's flat layout.
    pub fn tangent_len(&self) -> usize {
        match self {
            ManifoldKind::S2 | ManifoldKind::So3 => 3,
            ManifoldKind::Se3 => 6,
            ManifoldKind::Spd(n) => n * n,
            ManifoldKind::Euclidean(n) => *n,
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldKind::S2 => write!(f, "s2"),
            ManifoldKind::So3 => write!(f, "so3"),
            ManifoldKind::Se3 => write!(f, "se3"),
            ManifoldKind::Spd(n) => write!(f, "spd{n}"),
            ManifoldKind::Euclidean(n) => write!(f, "r{n}"),
        }
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parse_dim = |rest: &str, max: usize| -> Result<usize> {
            let n: usize = rest
                .parse()
                .map_err(|_| Error::invalid(format!("bad manifold dimension in {s:?}")))?;
            if n == 0 || n > max {
                return Err(Error::invalid(format!(
                    "manifold dimension must be in 1..={max}, got {n}"
                )));
            }
            Ok(n)
        };
        match lower.as_str() {
            "s2" => Ok(ManifoldKind::S2),
            "so3" => Ok(ManifoldKind::So3),
            "se3" => Ok(ManifoldKind::Se3),
            _ => {
                if let Some(rest) = lower.strip_prefix("spd") {
                    Ok(ManifoldKind::Spd(parse_dim(rest, Spd::MAX_DIM)?))
                } else if let Some(rest) = lower.strip_prefix('r') {
                    Ok(ManifoldKind::Euclidean(parse_dim(rest, 64)?))
                } else {
                    Err(Error::invalid(format!("unknown manifold {s:?}")))
                }
            }
        }
    }
}

/// Runs `$body` with `$m` bound to the concrete manifold named by `$kind`.
#[macro_export]
macro_rules! with_manifold {
    ($kind:expr, |$m:ident| $body:expr) => {
        match $kind {
            $crate::geom::ManifoldKind::S2 => {
                let $m = $crate::geom::Sphere2;
                $body
            }
            $crate::geom::ManifoldKind::So3 => {
                let $m = $crate::geom::So3;
                $body
            }
            $crate::geom::ManifoldKind::Se3 => {
                let $m = $crate::geom::Se3;
                $body
            }
            $crate::geom::ManifoldKind::Spd(n) => {
                let $m = $crate::geom::Spd::new(n).expect("dimension validated by ManifoldKind");
                $body
            }
            $crate::geom::ManifoldKind::Euclidean(n) => {
                let $m = $crate::geom::Euclidean::new(n);
                $body
            }
        }
    };
}

/// Orthonormal frame of the tangent plane at `p` used for 2-coordinate views
/// of `S²` tangents.
pub fn sphere_frame(p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    sphere::local_frame(p)
}
