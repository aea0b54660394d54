use nalgebra::Vector3;

use super::{check_finite, check_len, Manifold, ManifoldKind, MetricParams, TangentVec};
use crate::error::{Error, Result};

/// The unit sphere `S²` with the round metric. Tangents are ambient
/// 3-vectors orthogonal to the base point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sphere2;

const ANTIPODAL_TOL: f64 = 1e-9;

fn sinc(t: f64) -> f64 {
    if t < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sin() / t
    }
}

fn antipodal(p: &Vector3<f64>, q: &Vector3<f64>) -> bool {
    (p + q).norm() <= ANTIPODAL_TOL
}

fn singular(p: &Vector3<f64>, q: &Vector3<f64>) -> Error {
    Error::Singularity {
        p: p.coords(),
        q: q.coords(),
    }
}

/// Parallel transport along the minimizing great circle:
/// `v − ⟨q, v⟩ / (1 + ⟨p, q⟩) · (p + q)`.
fn transport_raw(p: &Vector3<f64>, q: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let denom = 1.0 + p.dot(q);
    v - (p + q) * (q.dot(v) / denom)
}

/// Orthonormal frame at `p` obtained by transporting `(e_x, e_y)` from the
/// nearer pole. Smooth on each hemisphere-cap chart; the north chart covers
/// `z > −0.5`.
pub(crate) fn local_frame(p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let (pole, ex, ey) = if p.z > -0.5 {
        (Vector3::z(), Vector3::x(), Vector3::y())
    } else {
        (-Vector3::z(), Vector3::x(), -Vector3::y())
    };
    let e1 = transport_raw(&pole, p, &ex);
    let e2 = transport_raw(&pole, p, &ey);
    (e1, e2)
}

impl Manifold for Sphere2 {
    type Point = Vector3<f64>;
    type Tangent = Vector3<f64>;

    fn kind(&self) -> ManifoldKind {
        ManifoldKind::S2
    }

    fn dim(&self) -> usize {
        2
    }

    fn exp(&self, p: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vector3<f64>> {
        check_finite("s2 exp input", p.iter().chain(v.iter()).copied())?;
        let v = v - p * p.dot(v);
        let theta = v.norm();
        if theta == 0.0 {
            return Ok(*p);
        }
        Ok((p * theta.cos() + v * sinc(theta)).normalize())
    }

    fn log(&self, p: &Vector3<f64>, q: &Vector3<f64>) -> Result<Vector3<f64>> {
        check_finite("s2 log input", p.iter().chain(q.iter()).copied())?;
        if antipodal(p, q) {
            return Err(singular(p, q));
        }
        let c = p.dot(q);
        let w = q - p * c;
        let s = w.norm();
        if s == 0.0 {
            return Ok(Vector3::zeros());
        }
        let theta = p.cross(q).norm().atan2(c);
        Ok(w * (theta / s))
    }

    fn distance(&self, p: &Vector3<f64>, q: &Vector3<f64>, _metric: &MetricParams) -> f64 {
        p.cross(q).norm().atan2(p.dot(q))
    }

    fn transport(
        &self,
        p: &Vector3<f64>,
        q: &Vector3<f64>,
        v: &Vector3<f64>,
    ) -> Result<Vector3<f64>> {
        if antipodal(p, q) {
            return Err(singular(p, q));
        }
        Ok(transport_raw(p, q, v))
    }

    fn inner(
        &self,
        _p: &Vector3<f64>,
        u: &Vector3<f64>,
        v: &Vector3<f64>,
        _metric: &MetricParams,
    ) -> f64 {
        u.dot(v)
    }

    fn zero(&self, _p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn residual(
        &self,
        p: &Vector3<f64>,
        q: &Vector3<f64>,
        _metric: &MetricParams,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let v = self.log(p, q)?;
        out.extend_from_slice(v.as_slice());
        Ok(())
    }

    fn to_local(&self, p: &Vector3<f64>, v: &Vector3<f64>) -> Vec<f64> {
        let (e1, e2) = local_frame(p);
        vec![e1.dot(v), e2.dot(v)]
    }

    fn from_local(&self, p: &Vector3<f64>, c: &[f64]) -> Vector3<f64> {
        let (e1, e2) = local_frame(p);
        e1 * c[0] + e2 * c[1]
    }

    fn within_safe_radius(&self, _p: &Vector3<f64>, v: &Vector3<f64>) -> bool {
        v.norm() < super::SAFE_RADIUS
    }

    fn point_to_coords(&self, p: &Vector3<f64>) -> Vec<f64> {
        p.coords()
    }

    fn point_from_coords(&self, c: &[f64]) -> Result<Vector3<f64>> {
        check_len("s2 point", c, 3)?;
        let p = Vector3::new(c[0], c[1], c[2]);
        if (p.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "s2 point must have unit norm, got {}",
                p.norm()
            )));
        }
        Ok(p)
    }

    fn tangent_from_coords(&self, p: &Vector3<f64>, c: &[f64]) -> Result<Vector3<f64>> {
        check_len("s2 tangent", c, 3)?;
        let v = Vector3::new(c[0], c[1], c[2]);
        if v.dot(p).abs() > 1e-9 {
            return Err(Error::invalid("s2 tangent must be orthogonal to its base"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    const M: MetricParams = MetricParams {
        characteristic_length: 0.1,
    };

    #[test]
    fn exp_of_zero_is_identity() {
        let p = Vector3::z();
        assert_eq!(Sphere2.exp(&p, &Vector3::zeros()).unwrap(), p);
    }

    #[test]
    fn log_quarter_great_circle() {
        let v = Sphere2.log(&Vector3::z(), &Vector3::x()).unwrap();
        assert_relative_eq!(v, Vector3::new(FRAC_PI_2, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(Sphere2.log(&Vector3::z(), &Vector3::z()).unwrap(), Vector3::zeros());
    }

    #[test]
    fn antipodal_log_is_singular() {
        let err = Sphere2.log(&Vector3::z(), &-Vector3::z()).unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }));
        assert!(Sphere2
            .transport(&Vector3::z(), &-Vector3::z(), &Vector3::x())
            .is_err());
        // distance stays defined
        assert_relative_eq!(
            Sphere2.distance(&Vector3::z(), &-Vector3::z(), &M),
            std::f64::consts::PI
        );
    }

    #[test]
    fn transport_pole_to_equator() {
        let v = Sphere2
            .transport(&Vector3::z(), &Vector3::x(), &Vector3::x())
            .unwrap();
        assert_relative_eq!(v, -Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn frame_is_orthonormal_and_tangent() {
        for p in [
            Vector3::new(0.3, -0.4, 0.8).normalize(),
            Vector3::new(0.1, 0.2, -0.9).normalize(),
            Vector3::x(),
        ] {
            let (e1, e2) = local_frame(&p);
            assert_relative_eq!(e1.norm(), 1.0, epsilon = 1e-14);
            assert_relative_eq!(e2.norm(), 1.0, epsilon = 1e-14);
            assert!(e1.dot(&e2).abs() < 1e-14);
            assert!(e1.dot(&p).abs() < 1e-14 && e2.dot(&p).abs() < 1e-14);
            let v = e1 * 0.3 - e2 * 0.7;
            let c = Sphere2.to_local(&p, &v);
            assert_relative_eq!(Sphere2.from_local(&p, &c), v, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_points() {
        assert!(Sphere2.point_from_coords(&[1.0, 1.0, 0.0]).is_err());
        assert!(Sphere2.point_from_coords(&[f64::NAN, 0.0, 1.0]).is_err());
        assert!(Sphere2.point_from_coords(&[0.0, 1.0]).is_err());
        assert!(Sphere2
            .tangent_from_coords(&Vector3::z(), &[0.0, 0.0, 1.0])
            .is_err());
    }
}
