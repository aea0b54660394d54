//! Closed-form `SO(3)` helpers shared by the rotation and pose groups.
//!
//! Below `SMALL_ANGLE` the trigonometric ratios switch to 4th-order Taylor
//! series; the closed forms divide by the rotation angle.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

pub const SMALL_ANGLE: f64 = 1e-4;

/// Skew-symmetric matrix `[ω]×`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Flips the quaternion onto the hemisphere with nonnegative scalar part.
pub fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Renormalizes and canonicalizes.
pub fn renormalize(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    canonical(UnitQuaternion::new_normalize(q))
}

/// `Exp: so(3) → S³`, `q = cos(θ/2) + (ω/θ) sin(θ/2)`.
pub fn so3_exp(w: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (c, k) = if theta < SMALL_ANGLE {
        (
            1.0 - theta2 / 8.0 + theta2 * theta2 / 384.0,
            0.5 - theta2 / 48.0 + theta2 * theta2 / 3840.0,
        )
    } else {
        let half = 0.5 * theta;
        (half.cos(), half.sin() / theta)
    };
    renormalize(Quaternion::new(c, k * w.x, k * w.y, k * w.z))
}

/// `Log: S³ → so(3)` on the canonical hemisphere; returns `ω` with
/// `‖ω‖ ∈ [0, π]`.
pub fn so3_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = canonical(*q);
    let v = q.imag();
    let n2 = v.norm_squared();
    let n = n2.sqrt();
    let w = q.w;
    // θ ≈ 2n
    let factor = if 2.0 * n < SMALL_ANGLE {
        let x2 = n2 / (w * w);
        (2.0 / w) * (1.0 - x2 / 3.0 + x2 * x2 / 5.0)
    } else {
        2.0 * n.atan2(w) / n
    };
    v * factor
}

/// Rotation angle of a unit quaternion in `[0, π]`.
pub fn rotation_angle(q: &UnitQuaternion<f64>) -> f64 {
    let q = canonical(*q);
    2.0 * q.imag().norm().atan2(q.w)
}

fn left_coeffs(theta: f64) -> (f64, f64) {
    let t2 = theta * theta;
    if theta < SMALL_ANGLE {
        (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        let s = (0.5 * theta).sin();
        (2.0 * s * s / t2, (theta - theta.sin()) / (t2 * theta))
    }
}

/// Left Jacobian of `SO(3)`:
/// `V(ω) = I + (1−cos θ)/θ² [ω]× + (θ−sin θ)/θ³ [ω]×²`.
pub fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b) = left_coeffs(w.norm());
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

fn inv_coeff(theta: f64) -> f64 {
    let t2 = theta * theta;
    if theta < SMALL_ANGLE {
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let half = 0.5 * theta;
        // θ sin θ / (2(1−cos θ)) = (θ/2) cot(θ/2)
        (1.0 - half * half.cos() / half.sin()) / t2
    }
}

/// `V⁻¹(ω) t` without forming the matrix.
pub fn left_jacobian_inv_apply(w: &Vector3<f64>, t: &Vector3<f64>) -> Vector3<f64> {
    let wt = w.cross(t);
    t - wt * 0.5 + w.cross(&wt) * inv_coeff(w.norm())
}

/// Inverse left Jacobian:
/// `V⁻¹(ω) = I − ½[ω]× + (1/θ²)(1 − θ sin θ / (2(1−cos θ))) [ω]×²`.
pub fn left_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(w);
    Matrix3::identity() - k * 0.5 + k * k * inv_coeff(w.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn exp_log_quarter_turn_about_z() {
        let q = so3_exp(&Vector3::new(0.0, 0.0, PI / 2.0));
        let w = so3_log(&q);
        assert_relative_eq!(w, Vector3::new(0.0, 0.0, PI / 2.0), epsilon = 1e-15);
    }

    #[test]
    fn inverse_jacobian_apply_matches_matrix() {
        for w in [Vector3::new(1e-6, 0.0, 2e-6), Vector3::new(0.3, -1.2, 0.5), Vector3::new(0.0, 3.0, 0.0)] {
            let t = Vector3::new(0.7, -0.1, 2.0);
            assert_relative_eq!(left_jacobian_inv_apply(&w, &t), left_jacobian_inv(&w) * t, epsilon = 1e-13);
        }
    }

    #[test]
    fn series_branch_matches_closed_form_at_threshold() {
        let w = Vector3::new(0.3, -0.2, 0.9).normalize();
        let below = w * (SMALL_ANGLE * (1.0 - 1e-9));
        let above = w * (SMALL_ANGLE * (1.0 + 1e-9));
        assert_relative_eq!(left_jacobian(&below), left_jacobian(&above), epsilon = 1e-12);
        assert_relative_eq!(
            left_jacobian_inv(&below),
            left_jacobian_inv(&above),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            so3_exp(&below).into_inner().coords,
            so3_exp(&above).into_inner().coords,
            epsilon = 1e-12
        );
    }

    #[test]
    fn jacobian_inverse_small_and_large_angles() {
        for &theta in &[1e-8, 1e-6, 1e-4, 1e-2, 0.5, 2.0, PI - 0.1] {
            let w = Vector3::new(1.0, 2.0, -0.5).normalize() * theta;
            let prod = left_jacobian(&w) * left_jacobian_inv(&w);
            assert!((prod - Matrix3::identity()).abs().max() <= 1e-9, "θ={theta}");
        }
    }

    #[test]
    fn canonical_hemisphere() {
        let q = so3_exp(&Vector3::new(0.0, 0.0, 1.5 * PI));
        assert!(q.w >= 0.0);
        assert_relative_eq!(rotation_angle(&q), 0.5 * PI, epsilon = 1e-12);
    }
}
