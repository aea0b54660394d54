use nalgebra::{UnitQuaternion, Vector3, Vector6};

use super::lie::{
    canonical, left_jacobian, left_jacobian_inv_apply, renormalize, rotation_angle, so3_exp, so3_log,
};
use super::so3::{quat_coords, quat_from_coords, MAX_LOG_ANGLE};
use super::{check_finite, check_len, Manifold, ManifoldKind, MetricParams, TangentVec};
use crate::error::{Error, Result};

/// Rigid-body pose: unit quaternion (canonical hemisphere) and a global
/// translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: renormalize((self.rotation * other.rotation).into_inner()),
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation.inverse();
        Pose {
            rotation: canonical(r),
            translation: -(r * self.translation),
        }
    }

    /// Group exponential of a body twist `(ω, v)`: `(Exp(ω), V(ω) v)`.
    pub fn exp(xi: &Vector6<f64>) -> Pose {
        let w = xi.fixed_rows::<3>(0).into_owned();
        let v = xi.fixed_rows::<3>(3).into_owned();
        Pose {
            rotation: so3_exp(&w),
            translation: left_jacobian(&w) * v,
        }
    }

    /// Group logarithm `(ω, V⁻¹(ω) t)`.
    pub fn log(&self) -> Vector6<f64> {
        let w = so3_log(&self.rotation);
        let v = left_jacobian_inv_apply(&w, &self.translation);
        Vector6::new(w.x, w.y, w.z, v.x, v.y, v.z)
    }
}

/// Screw norm `sqrt(η‖ω‖² + ‖v‖²)`.
pub(crate) fn screw_norm(xi: &Vector6<f64>, metric: &MetricParams) -> f64 {
    let w2 = xi.fixed_rows::<3>(0).norm_squared();
    let v2 = xi.fixed_rows::<3>(3).norm_squared();
    (metric.eta() * w2 + v2).sqrt()
}

/// Rigid motions via the double cover `S³ ⋉ ℝ³` with body twists as tangents
/// and the log-Euclidean screw metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Se3;

impl Manifold for Se3 {
    type Point = Pose;
    type Tangent = Vector6<f64>;

    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Se3
    }

    fn dim(&self) -> usize {
        6
    }

    fn exp(&self, p: &Pose, v: &Vector6<f64>) -> Result<Pose> {
        check_finite("se3 exp input", v.iter().copied())?;
        if v.iter().all(|&c| c == 0.0) {
            return Ok(*p);
        }
        Ok(p.compose(&Pose::exp(v)))
    }

    fn log(&self, p: &Pose, q: &Pose) -> Result<Vector6<f64>> {
        let rel = p.inverse().compose(q);
        if rotation_angle(&rel.rotation) > MAX_LOG_ANGLE {
            return Err(Error::Singularity {
                p: self.point_to_coords(p),
                q: self.point_to_coords(q),
            });
        }
        Ok(rel.log())
    }

    fn distance(&self, p: &Pose, q: &Pose, metric: &MetricParams) -> f64 {
        screw_norm(&p.inverse().compose(q).log(), metric)
    }

    /// The screw distance is left-invariant but not a Riemannian distance
    /// and can violate the triangle inequality.
    fn distance_is_metric(&self, _metric: &MetricParams) -> bool {
        false
    }

    fn scan_distances(&self, x: &Pose, points: &[Pose], metric: &MetricParams, out: &mut Vec<f64>) {
        out.clear();
        let inv = x.inverse();
        let eta = metric.eta();
        out.extend(points.iter().map(|q| {
            let r = inv.rotation * q.rotation;
            let t = inv.translation + inv.rotation * q.translation;
            let w = so3_log(&r);
            (eta * w.norm_squared() + left_jacobian_inv_apply(&w, &t).norm_squared()).sqrt()
        }));
    }

    fn transport(&self, _p: &Pose, _q: &Pose, v: &Vector6<f64>) -> Result<Vector6<f64>> {
        Ok(*v)
    }

    fn inner(
        &self,
        _p: &Pose,
        u: &Vector6<f64>,
        v: &Vector6<f64>,
        metric: &MetricParams,
    ) -> f64 {
        let rot = u.fixed_rows::<3>(0).dot(&v.fixed_rows::<3>(0));
        let lin = u.fixed_rows::<3>(3).dot(&v.fixed_rows::<3>(3));
        metric.eta() * rot + lin
    }

    fn zero(&self, _p: &Pose) -> Vector6<f64> {
        Vector6::zeros()
    }

    fn residual(
        &self,
        p: &Pose,
        q: &Pose,
        metric: &MetricParams,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let xi = self.log(p, q)?;
        let s = metric.characteristic_length;
        out.extend_from_slice(&[s * xi[0], s * xi[1], s * xi[2], xi[3], xi[4], xi[5]]);
        Ok(())
    }

    fn to_local(&self, _p: &Pose, v: &Vector6<f64>) -> Vec<f64> {
        v.coords()
    }

    fn from_local(&self, _p: &Pose, c: &[f64]) -> Vector6<f64> {
        Vector6::from_column_slice(&c[..6])
    }

    fn within_safe_radius(&self, _p: &Pose, v: &Vector6<f64>) -> bool {
        v.fixed_rows::<3>(0).norm() < super::SAFE_RADIUS
    }

    fn point_to_coords(&self, p: &Pose) -> Vec<f64> {
        let mut c = quat_coords(&p.rotation).to_vec();
        c.extend_from_slice(p.translation.as_slice());
        c
    }

    fn point_from_coords(&self, c: &[f64]) -> Result<Pose> {
        check_len("se3 point", c, 7)?;
        Ok(Pose {
            rotation: quat_from_coords(&c[..4])?,
            translation: Vector3::new(c[4], c[5], c[6]),
        })
    }

    fn tangent_from_coords(&self, _p: &Pose, c: &[f64]) -> Result<Vector6<f64>> {
        check_len("se3 tangent", c, 6)?;
        Ok(Vector6::from_column_slice(c))
    }
}
