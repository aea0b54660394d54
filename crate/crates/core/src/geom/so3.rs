use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use std::f64::consts::PI;

use super::lie::{canonical, renormalize, rotation_angle, so3_exp, so3_log};
use super::{check_finite, check_len, Manifold, ManifoldKind, MetricParams, TangentVec};
use crate::error::{Error, Result};

/// Rotation group `SO(3)` as unit quaternions on the `w >= 0` hemisphere,
/// with body-frame angular velocities as tangents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct So3;

/// Largest relative rotation angle accepted by `log`.
pub(crate) const MAX_LOG_ANGLE: f64 = PI - 1e-6;

pub(crate) fn quat_coords(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub(crate) fn quat_from_coords(c: &[f64]) -> Result<UnitQuaternion<f64>> {
    let q = Quaternion::new(c[0], c[1], c[2], c[3]);
    if (q.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "quaternion must have unit norm, got {}",
            q.norm()
        )));
    }
    Ok(renormalize(q))
}

impl Manifold for So3 {
    type Point = UnitQuaternion<f64>;
    type Tangent = Vector3<f64>;

    fn kind(&self) -> ManifoldKind {
        ManifoldKind::So3
    }

    fn dim(&self) -> usize {
        3
    }

    fn exp(&self, p: &UnitQuaternion<f64>, v: &Vector3<f64>) -> Result<UnitQuaternion<f64>> {
        check_finite("so3 exp input", v.iter().copied())?;
        if v.iter().all(|&c| c == 0.0) {
            return Ok(*p);
        }
        Ok(renormalize((p * so3_exp(v)).into_inner()))
    }

    fn log(&self, p: &UnitQuaternion<f64>, q: &UnitQuaternion<f64>) -> Result<Vector3<f64>> {
        let rel = canonical(p.inverse() * q);
        if rotation_angle(&rel) > MAX_LOG_ANGLE {
            return Err(Error::Singularity {
                p: quat_coords(p).to_vec(),
                q: quat_coords(q).to_vec(),
            });
        }
        Ok(so3_log(&rel))
    }

    fn distance(
        &self,
        p: &UnitQuaternion<f64>,
        q: &UnitQuaternion<f64>,
        _metric: &MetricParams,
    ) -> f64 {
        rotation_angle(&(p.inverse() * q))
    }

    fn transport(
        &self,
        _p: &UnitQuaternion<f64>,
        _q: &UnitQuaternion<f64>,
        v: &Vector3<f64>,
    ) -> Result<Vector3<f64>> {
        Ok(*v)
    }

    fn inner(
        &self,
        _p: &UnitQuaternion<f64>,
        u: &Vector3<f64>,
        v: &Vector3<f64>,
        _metric: &MetricParams,
    ) -> f64 {
        u.dot(v)
    }

    fn zero(&self, _p: &UnitQuaternion<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn residual(
        &self,
        p: &UnitQuaternion<f64>,
        q: &UnitQuaternion<f64>,
        _metric: &MetricParams,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let w = self.log(p, q)?;
        out.extend_from_slice(w.as_slice());
        Ok(())
    }

    fn to_local(&self, _p: &UnitQuaternion<f64>, v: &Vector3<f64>) -> Vec<f64> {
        v.coords()
    }

    fn from_local(&self, _p: &UnitQuaternion<f64>, c: &[f64]) -> Vector3<f64> {
        Vector3::new(c[0], c[1], c[2])
    }

    fn within_safe_radius(&self, _p: &UnitQuaternion<f64>, v: &Vector3<f64>) -> bool {
        v.norm() < super::SAFE_RADIUS
    }

    fn point_to_coords(&self, p: &UnitQuaternion<f64>) -> Vec<f64> {
        quat_coords(p).to_vec()
    }

    fn point_from_coords(&self, c: &[f64]) -> Result<UnitQuaternion<f64>> {
        check_len("so3 point", c, 4)?;
        quat_from_coords(c)
    }

    fn tangent_from_coords(&self, _p: &UnitQuaternion<f64>, c: &[f64]) -> Result<Vector3<f64>> {
        check_len("so3 tangent", c, 3)?;
        Ok(Vector3::new(c[0], c[1], c[2]))
    }
}
