mod common;

use approx::assert_relative_eq;
use dsmp::geom::{Manifold, MetricParams, Pose, Se3, So3, Spd, SpdPoint, Sphere2};
use nalgebra::{DMatrix, Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3, Vector6};
use proptest::prelude::*;

fn unit(x: f64, y: f64, z: f64) -> Option<Vector3<f64>> {
    let v = Vector3::new(x, y, z);
    (v.norm() > 0.1).then(|| v.normalize())
}

fn arb_unit() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter_map("near zero", |(x, y, z)| unit(x, y, z))
}

fn arb_rotation() -> impl Strategy<Value = UnitQuaternion<f64>> {
    (arb_unit(), 0.0..3.0f64).prop_map(|(a, t)| UnitQuaternion::from_scaled_axis(a * t))
}

fn arb_pose() -> impl Strategy<Value = Pose> {
    (arb_rotation(), -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)
        .prop_map(|(r, x, y, z)| Pose::new(r, Vector3::new(x, y, z)))
}

fn arb_spd3() -> impl Strategy<Value = SpdPoint> {
    proptest::collection::vec(-1.0..1.0f64, 9).prop_map(|c| {
        let a = DMatrix::from_row_slice(3, 3, &c);
        SpdPoint::new_unchecked(&a * a.transpose() + DMatrix::identity(3, 3) * 0.2)
    })
}

/// Local tangent coordinates of norm at most `r`.
fn arb_local(dim: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, dim).prop_map(move |c| {
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        c.iter().map(|x| r * x / n).collect()
    })
}

fn roundtrip<M: Manifold>(m: &M, p: &M::Point, c: &[f64]) -> f64 {
    let v = m.from_local(p, c);
    let q = m.exp(p, &v).unwrap();
    let back = m.to_local(p, &m.log(p, &q).unwrap());
    back.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn isometry_defect<M: Manifold>(m: &M, p: &M::Point, q: &M::Point, a: &[f64], b: &[f64]) -> f64 {
    let metric = MetricParams::default();
    let (u, v) = (m.from_local(p, a), m.from_local(p, b));
    let (tu, tv) = (m.transport(p, q, &u).unwrap(), m.transport(p, q, &v).unwrap());
    (m.inner(q, &tu, &tv, &metric) - m.inner(p, &u, &v, &metric)).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sphere_exp_log_and_transport(p in arb_unit(), c in arb_local(2, 2.5), a in arb_local(2, 1.0), b in arb_local(2, 1.0)) {
        prop_assert!(roundtrip(&Sphere2, &p, &c) < 1e-8);
        let q = Sphere2.exp(&p, &Sphere2.from_local(&p, &c)).unwrap();
        prop_assert!(isometry_defect(&Sphere2, &p, &q, &a, &b) < 1e-9);
        let metric = MetricParams::default();
        let d = Sphere2.distance(&p, &q, &metric);
        prop_assert!((d - c.iter().map(|x| x * x).sum::<f64>().sqrt()).abs() < 1e-10);
        prop_assert!((d - Sphere2.distance(&q, &p, &metric)).abs() < 1e-12);
    }

    #[test]
    fn so3_exp_log_and_transport(p in arb_rotation(), c in arb_local(3, 2.5), a in arb_local(3, 1.0), b in arb_local(3, 1.0)) {
        prop_assert!(roundtrip(&So3, &p, &c) < 1e-8);
        let q = So3.exp(&p, &So3.from_local(&p, &c)).unwrap();
        prop_assert!(isometry_defect(&So3, &p, &q, &a, &b) < 1e-9);
    }

    #[test]
    fn se3_exp_log_and_transport(p in arb_pose(), c in arb_local(6, 2.5), a in arb_local(6, 1.0), b in arb_local(6, 1.0)) {
        prop_assert!(roundtrip(&Se3, &p, &c) < 1e-8);
        let q = Se3.exp(&p, &Se3.from_local(&p, &c)).unwrap();
        prop_assert!(isometry_defect(&Se3, &p, &q, &a, &b) < 1e-9);
    }

    #[test]
    fn spd_exp_log_and_transport(p in arb_spd3(), c in arb_local(6, 1.5), a in arb_local(6, 1.0), b in arb_local(6, 1.0)) {
        let m = Spd::new(3).unwrap();
        prop_assert!(roundtrip(&m, &p, &c) < 1e-8);
        let q = m.exp(&p, &m.from_local(&p, &c)).unwrap();
        prop_assert!(isometry_defect(&m, &p, &q, &a, &b) < 1e-9);
        let d = m.distance(&p, &q, &MetricParams::default());
        prop_assert!((d - m.distance_cholesky(&p, &q).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn metric_distances_obey_triangle_inequality(p in arb_unit(), q in arb_unit(), r in arb_unit(), a in arb_spd3(), b in arb_spd3(), c in arb_spd3()) {
        let metric = MetricParams::default();
        prop_assert!(Sphere2.distance(&p, &r, &metric) <= Sphere2.distance(&p, &q, &metric) + Sphere2.distance(&q, &r, &metric) + 1e-12);
        let m = Spd::new(3).unwrap();
        prop_assert!(m.distance(&a, &c, &metric) <= m.distance(&a, &b, &metric) + m.distance(&b, &c, &metric) + 1e-9);
    }

    #[test]
    fn lie_distances_are_left_invariant(g in arb_rotation(), p in arb_rotation(), q in arb_rotation(), h in arb_pose(), x in arb_pose(), y in arb_pose()) {
        let metric = MetricParams::default();
        let d = So3.distance(&p, &q, &metric);
        prop_assert!((So3.distance(&(g * p), &(g * q), &metric) - d).abs() < 1e-9);
        let d = Se3.distance(&x, &y, &metric);
        prop_assert!((Se3.distance(&h.compose(&x), &h.compose(&y), &metric) - d).abs() < 1e-8 * (1.0 + d));
    }
}

/// Transports `v` along the minimizing great circle by integrating
/// `v′ = −⟨v, γ′⟩ γ` with classical Runge–Kutta.
fn sphere_transport_rk4(p: Vector3<f64>, q: Vector3<f64>, v: Vector3<f64>, steps: usize) -> Vector3<f64> {
    let theta = p.dot(&q).clamp(-1.0, 1.0).acos();
    let u = (q - p * p.dot(&q)).normalize();
    let gamma = |t: f64| p * (t * theta).cos() + u * (t * theta).sin();
    let dgamma = |t: f64| (-p * (t * theta).sin() + u * (t * theta).cos()) * theta;
    let f = |t: f64, v: Vector3<f64>| -gamma(t) * v.dot(&dgamma(t));
    let h = 1.0 / steps as f64;
    let mut x = v;
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = f(t, x);
        let k2 = f(t + h / 2.0, x + k1 * (h / 2.0));
        let k3 = f(t + h / 2.0, x + k2 * (h / 2.0));
        let k4 = f(t + h, x + k3 * h);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

#[test]
fn sphere_transport_matches_ode() {
    let (p, q) = (Vector3::z(), Vector3::x());
    let out = Sphere2.transport(&p, &q, &Vector3::x()).unwrap();
    assert_relative_eq!(out, -Vector3::z(), epsilon = 1e-12);
    assert_relative_eq!(sphere_transport_rk4(p, q, Vector3::x(), 200), -Vector3::z(), epsilon = 1e-10);

    let mut rng = common::rng(11);
    for _ in 0..200 {
        let p = Vector3::from_vec(common::unit_ball(&mut rng, 3)).normalize();
        let c: Vec<f64> = common::unit_ball(&mut rng, 2).iter().map(|x| 2.8 * x).collect();
        let q = Sphere2.exp(&p, &Sphere2.from_local(&p, &c)).unwrap();
        let v = Sphere2.from_local(&p, &common::unit_ball(&mut rng, 2));
        let oracle = sphere_transport_rk4(p, q, v, 400);
        assert_relative_eq!(Sphere2.transport(&p, &q, &v).unwrap(), oracle, epsilon = 1e-9);
    }
}

/// Axis-angle of a rotation matrix from its trace and skew part.
fn rotation_vector(r: &Matrix3<f64>) -> Vector3<f64> {
    let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    axis * (angle / (2.0 * angle.sin()))
}

#[test]
fn so3_log_is_body_rotation_vector() {
    let mut rng = common::rng(12);
    for _ in 0..200 {
        let p = UnitQuaternion::from_scaled_axis(Vector3::from_vec(common::unit_ball(&mut rng, 3)) * 3.0);
        let q = UnitQuaternion::from_scaled_axis(Vector3::from_vec(common::unit_ball(&mut rng, 3)) * 3.0);
        let rel = p.to_rotation_matrix().matrix().transpose() * q.to_rotation_matrix().matrix();
        if rotation_vector(&rel).norm() > 3.0 {
            continue;
        }
        assert_relative_eq!(So3.log(&p, &q).unwrap(), rotation_vector(&rel), epsilon = 1e-9);
        // body twists are unchanged by transport
        let w = Vector3::new(0.3, -0.1, 0.2);
        assert_eq!(So3.transport(&p, &q, &w).unwrap(), w);
    }
}

fn twist_matrix(xi: &Vector6<f64>) -> Matrix4<f64> {
    Matrix4::new(
        0.0, -xi[2], xi[1], xi[3], //
        xi[2], 0.0, -xi[0], xi[4], //
        -xi[1], xi[0], 0.0, xi[5], //
        0.0, 0.0, 0.0, 0.0,
    )
}

fn pose_matrix(p: &Pose) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(p.rotation.to_rotation_matrix().matrix());
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p.translation);
    m
}

#[test]
fn se3_exp_is_right_multiplied_matrix_exponential() {
    let mut rng = common::rng(13);
    for _ in 0..200 {
        let p = Pose::new(
            UnitQuaternion::from_scaled_axis(Vector3::from_vec(common::unit_ball(&mut rng, 3)) * 2.0),
            Vector3::from_vec(common::unit_ball(&mut rng, 3)),
        );
        let xi = Vector6::from_vec(common::unit_ball(&mut rng, 6)) * 2.5;
        let oracle = pose_matrix(&p) * twist_matrix(&xi).exp();
        let q = Se3.exp(&p, &xi).unwrap();
        assert_relative_eq!(pose_matrix(&q), oracle, epsilon = 1e-9);
        let r = Rotation3::from_matrix_unchecked(oracle.fixed_view::<3, 3>(0, 0).into_owned());
        let back = Se3.log(&p, &Pose::new(UnitQuaternion::from_rotation_matrix(&r), q.translation)).unwrap();
        assert_relative_eq!(back, xi, epsilon = 1e-8);
    }
}
