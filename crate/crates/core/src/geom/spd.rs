use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SymmetricEigen};

use super::{check_len, Manifold, ManifoldKind, MetricParams, TangentVec};
use crate::error::{Error, Result};

/// Eigenvalue floor applied when the matrix exponential underflows.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// `P^{1/2}` and `P^{-1/2}`.
#[derive(Clone, Debug)]
struct SqrtPair {
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

/// A symmetric positive definite matrix with its square roots computed on
/// first use.
#[derive(Clone, Debug)]
pub struct SpdPoint {
    mat: DMatrix<f64>,
    roots: OnceLock<SqrtPair>,
}

impl SpdPoint {
    /// Wraps a matrix the caller guarantees to be SPD. The symmetric part is
    /// kept.
    pub fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self {
            mat: symmetrize(m),
            roots: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new_unchecked(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    fn roots(&self) -> &SqrtPair {
        self.roots.get_or_init(|| {
            let (vals, vecs) = sym_eig(&self.mat);
            SqrtPair {
                sqrt: spectral(&vecs, &vals.map(|l| l.max(0.0).sqrt())),
                inv_sqrt: spectral(&vecs, &vals.map(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt())),
            }
        })
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.roots().sqrt
    }

    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.roots().inv_sqrt
    }

    /// `P^{-1/2} Q P^{-1/2}`, the whitened version of `q` as seen from `self`.
    fn whiten(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let si = self.inv_sqrt();
        symmetrize(si * q * si)
    }
}

impl PartialEq for SpdPoint {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Symmetric eigendecomposition `(λ, V)` with `m = V diag(λ) Vᵀ`.
pub(crate) fn sym_eig(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    // stack-allocated paths for the common small sizes
    macro_rules! fixed {
        ($n:literal) => {{
            let e = SymmetricEigen::new(m.fixed_view::<$n, $n>(0, 0).into_owned());
            (
                DVector::from_column_slice(e.eigenvalues.as_slice()),
                DMatrix::from_column_slice($n, $n, e.eigenvectors.as_slice()),
            )
        }};
    }
    match m.nrows() {
        2 => fixed!(2),
        3 => fixed!(3),
        _ => {
            let e = SymmetricEigen::new(m.clone());
            (e.eigenvalues, e.eigenvectors)
        }
    }
}

/// `V diag(d) Vᵀ`
pub(crate) fn spectral(vecs: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    symmetrize(scaled * vecs.transpose())
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eig(m);
    spectral(&vecs, &vals.map(f))
}

/// Closed-form eigenvalues of a symmetric 2×2 matrix (lower triangle read).
fn sym2_eigenvalues(m: &Matrix2<f64>) -> [f64; 2] {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let r = half.hypot(m[(1, 0)]);
    [(mean - r).max(f64::MIN_POSITIVE), (mean + r).max(f64::MIN_POSITIVE)]
}

/// Trigonometric closed form for symmetric 3×3 eigenvalues. Loses a few
/// digits when two eigenvalues nearly coincide.
fn sym3_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let off = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let floor = |x: f64| x.max(f64::MIN_POSITIVE);
    if off == 0.0 {
        return [floor(m[(0, 0)]), floor(m[(1, 1)]), floor(m[(2, 2)])];
    }
    let q = m.trace() / 3.0;
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    let b = (m - Matrix3::identity() * q) / p;
    let r = (0.5 * b.determinant()).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    [floor(e1), floor(3.0 * q - e1 - e3), floor(e3)]
}

/// Manifold of `n×n` symmetric positive definite matrices with the
/// affine-invariant metric. Tangents are symmetric matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Spd {
    n: usize,
}

impl Spd {
    pub const MAX_DIM: usize = 6;

    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > Self::MAX_DIM {
            return Err(Error::invalid(format!(
                "SPD dimension must be in 1..={}, got {n}",
                Self::MAX_DIM
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Exponential map that also reports whether the eigenvalue floor was
    /// needed to keep the result positive definite.
    pub fn exp_flagged(&self, p: &SpdPoint, v: &DMatrix<f64>) -> Result<(SpdPoint, bool)> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("spd exp input has non-finite coordinates"));
        }
        if v.iter().all(|&c| c == 0.0) {
            return Ok((p.clone(), false));
        }
        let mut floored = false;
        let mut half = |l: f64| {
            let e = l.exp();
            if e < EIGEN_FLOOR || !e.is_finite() {
                floored = true;
                EIGEN_FLOOR.sqrt()
            } else {
                e.sqrt()
            }
        };
        // P^{1/2} U diag(e^{λ/2}) times its transpose: PSD by construction
        macro_rules! fixed {
            ($n:literal) => {{
                let si = p.inv_sqrt().fixed_view::<$n, $n>(0, 0).into_owned();
                let m = si * v.fixed_view::<$n, $n>(0, 0).into_owned() * si;
                let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
                let mut b = p.sqrt().fixed_view::<$n, $n>(0, 0).into_owned() * e.eigenvectors;
                for j in 0..$n {
                    let h = half(e.eigenvalues[j]);
                    b.column_mut(j).scale_mut(h);
                }
                let out = b * b.transpose();
                SpdPoint::new_unchecked(DMatrix::from_column_slice($n, $n, out.as_slice()))
            }};
        }
        let out = match self.n {
            2 => fixed!(2),
            3 => fixed!(3),
            _ => {
                let m = p.whiten(v);
                let (vals, vecs) = sym_eig(&m);
                let h = vals.map(&mut half);
                let mut b = p.sqrt() * vecs;
                for (j, mut col) in b.column_iter_mut().enumerate() {
                    col *= h[j];
                }
                SpdPoint::new_unchecked(&b * b.transpose())
            }
        };
        if floored {
            log::warn!("spd exp: eigenvalue floor {EIGEN_FLOOR} applied");
        }
        Ok((out, floored))
    }

    /// Geodesic distance computed from the eigenvalues of `P⁻¹Q` through a
    /// Cholesky similarity transform, independent of the square-root route.
    pub fn distance_cholesky(&self, p: &SpdPoint, q: &SpdPoint) -> Result<f64> {
        let chol = nalgebra::Cholesky::new(p.mat.clone())
            .ok_or_else(|| Error::invalid("matrix is not positive definite"))?;
        let l = chol.l();
        let li = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular Cholesky factor"))?;
        let m = symmetrize(&li * &q.mat * li.transpose());
        let vals = m.symmetric_eigenvalues();
        Ok(vals.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
    }

    fn basis_index(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i..self.n).map(move |j| (i, j)))
    }
}

impl Manifold for Spd {
    type Point = SpdPoint;
    type Tangent = DMatrix<f64>;

    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Spd(self.n)
    }

    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn exp(&self, p: &SpdPoint, v: &DMatrix<f64>) -> Result<SpdPoint> {
        Ok(self.exp_flagged(p, v)?.0)
    }

    fn log(&self, p: &SpdPoint, q: &SpdPoint) -> Result<DMatrix<f64>> {
        let m = p.whiten(&q.mat);
        let l = sym_fn(&m, |x| x.max(f64::MIN_POSITIVE).ln());
        let s = p.sqrt();
        Ok(symmetrize(s * l * s))
    }

    fn distance(&self, p: &SpdPoint, q: &SpdPoint, _metric: &MetricParams) -> f64 {
        macro_rules! fixed {
            ($n:literal) => {{
                let si = p.inv_sqrt().fixed_view::<$n, $n>(0, 0).into_owned();
                let m = si * q.mat.fixed_view::<$n, $n>(0, 0).into_owned() * si;
                DVector::from_column_slice(((m + m.transpose()) * 0.5).symmetric_eigenvalues().as_slice())
            }};
        }
        let vals = match self.n {
            2 => fixed!(2),
            3 => fixed!(3),
            _ => p.whiten(&q.mat).symmetric_eigenvalues(),
        };
        vals.iter()
            .map(|l| l.max(f64::MIN_POSITIVE).ln().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `A V Aᵀ` with `A = (Q P⁻¹)^{1/2} = P^{1/2} (P^{-1/2} Q P^{-1/2})^{1/2} P^{-1/2}`.
    fn transport(
        &self,
        p: &SpdPoint,
        q: &SpdPoint,
        v: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let m = p.whiten(&q.mat);
        let root = sym_fn(&m, |x| x.max(0.0).sqrt());
        let a = p.sqrt() * root * p.inv_sqrt();
        Ok(symmetrize(&a * v * a.transpose()))
    }

    fn inner(
        &self,
        p: &SpdPoint,
        u: &DMatrix<f64>,
        v: &DMatrix<f64>,
        _metric: &MetricParams,
    ) -> f64 {
        let si = p.inv_sqrt();
        let a = si * u * si;
        let b = si * v * si;
        a.dot(&b)
    }

    fn zero(&self, _p: &SpdPoint) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.n)
    }

    fn scan_distances(
        &self,
        x: &SpdPoint,
        points: &[SpdPoint],
        metric: &MetricParams,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        match self.n {
            2 => {
                let si: Matrix2<f64> = x.inv_sqrt().fixed_view::<2, 2>(0, 0).into_owned();
                out.extend(points.iter().map(|q| {
                    let m = si * q.mat.fixed_view::<2, 2>(0, 0).into_owned() * si;
                    sym2_eigenvalues(&m).iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
                }));
            }
            3 => {
                let si: Matrix3<f64> = x.inv_sqrt().fixed_view::<3, 3>(0, 0).into_owned();
                out.extend(points.iter().map(|q| {
                    let m = si * q.mat.fixed_view::<3, 3>(0, 0).into_owned() * si;
                    sym3_eigenvalues(&m).iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
                }));
            }
            _ => out.extend(points.iter().map(|q| self.distance(x, q, metric))),
        }
    }

    fn residual(
        &self,
        p: &SpdPoint,
        q: &SpdPoint,
        _metric: &MetricParams,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let m = p.whiten(&q.mat);
        let l = sym_fn(&m, |x| x.max(f64::MIN_POSITIVE).ln());
        out.extend(l.iter().copied());
        Ok(())
    }

    /// Coordinates in the basis `P^{1/2} B_k P^{1/2}`, with `B_k` the
    /// Frobenius-orthonormal basis of symmetric matrices. The basis is
    /// orthonormal under the affine-invariant metric at `P`.
    fn to_local(&self, p: &SpdPoint, v: &DMatrix<f64>) -> Vec<f64> {
        let w = p.whiten(v);
        self.basis_index()
            .map(|(i, j)| {
                if i == j {
                    w[(i, i)]
                } else {
                    std::f64::consts::SQRT_2 * w[(i, j)]
                }
            })
            .collect()
    }

    fn from_local(&self, p: &SpdPoint, c: &[f64]) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for ((i, j), &x) in self.basis_index().zip(c) {
            if i == j {
                w[(i, i)] = x;
            } else {
                let h = x / std::f64::consts::SQRT_2;
                w[(i, j)] = h;
                w[(j, i)] = h;
            }
        }
        let s = p.sqrt();
        symmetrize(s * w * s)
    }

    fn point_to_coords(&self, p: &SpdPoint) -> Vec<f64> {
        p.mat.coords()
    }

    fn point_from_coords(&self, c: &[f64]) -> Result<SpdPoint> {
        check_len("spd point", c, self.n * self.n)?;
        let m = DMatrix::from_row_slice(self.n, self.n, c);
        let defect = (&m - m.transpose()).norm();
        if defect > 1e-9 {
            return Err(Error::invalid(format!(
                "spd point is not symmetric (defect {defect:e})"
            )));
        }
        let p = SpdPoint::new_unchecked(m);
        let min = p.mat.symmetric_eigenvalues().min();
        if !(min > 0.0) {
            return Err(Error::invalid(format!(
                "spd point is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
        Ok(p)
    }

    fn tangent_from_coords(&self, _p: &SpdPoint, c: &[f64]) -> Result<DMatrix<f64>> {
        check_len("spd tangent", c, self.n * self.n)?;
        let m = DMatrix::from_row_slice(self.n, self.n, c);
        if (&m - m.transpose()).norm() > 1e-9 {
            return Err(Error::invalid("spd tangent must be symmetric"));
        }
        Ok(symmetrize(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(d))
    }

    #[test]
    fn exp_at_identity_diagonal() {
        let m = Spd::new(2).unwrap();
        let p = SpdPoint::identity(2);
        let q = m.exp(&p, &diag(&[2f64.ln(), 3f64.ln()])).unwrap();
        assert_relative_eq!(q.matrix().clone(), diag(&[2.0, 3.0]), epsilon = 1e-14);
    }

    #[test]
    fn distance_to_scaled_identity() {
        let m = Spd::new(2).unwrap();
        let q = SpdPoint::new_unchecked(diag(&[std::f64::consts::E.powi(2), 1.0]));
        let d = m.distance(&SpdPoint::identity(2), &q, &MetricParams::default());
        assert_relative_eq!(d, 2.0, epsilon = 1e-14);
        assert_relative_eq!(
            m.distance_cholesky(&SpdPoint::identity(2), &q).unwrap(),
            2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn frobenius_inner_at_identity() {
        let m = Spd::new(2).unwrap();
        let i = DMatrix::identity(2, 2);
        assert_relative_eq!(
            m.inner(&SpdPoint::identity(2), &i, &i, &MetricParams::default()),
            2.0
        );
    }

    #[test]
    fn floor_flag_on_underflow() {
        let m = Spd::new(2).unwrap();
        let (q, flagged) = m
            .exp_flagged(&SpdPoint::identity(2), &diag(&[-800.0, 0.0]))
            .unwrap();
        assert!(flagged);
        assert!(q.matrix().symmetric_eigenvalues().min() > 0.0);
        let (_, ok) = m
            .exp_flagged(&SpdPoint::identity(2), &diag(&[-1.0, 0.5]))
            .unwrap();
        assert!(!ok);
    }

    #[test]
    fn scan_distances_match_exact() {
        for n in [2, 3, 4] {
            let m = Spd::new(n).unwrap();
            let x = m
                .exp(&SpdPoint::identity(n), &DMatrix::from_fn(n, n, |i, j| 0.1 * (i + j) as f64 - 0.2))
                .unwrap();
            let pts: Vec<SpdPoint> = (0..5)
                .map(|k| {
                    let v = DMatrix::from_fn(n, n, |i, j| ((i * 3 + j * 3 + k) as f64).sin() * 0.4);
                    m.exp(&SpdPoint::identity(n), &symmetrize(v)).unwrap()
                })
                .collect();
            let mut out = Vec::new();
            m.scan_distances(&x, &pts, &MetricParams::default(), &mut out);
            for (q, d) in pts.iter().zip(&out) {
                assert_relative_eq!(*d, m.distance(&x, q, &MetricParams::default()), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn rejects_non_spd() {
        let m = Spd::new(2).unwrap();
        assert!(m.point_from_coords(&[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(m.point_from_coords(&[1.0, 0.5, 0.0, 1.0]).is_err());
        assert!(m.point_from_coords(&[1.0, 0.0, 0.0]).is_err());
        assert!(Spd::new(7).is_err());
    }

    #[test]
    fn local_coords_roundtrip() {
        let m = Spd::new(3).unwrap();
        let p = m
            .point_from_coords(&[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.7])
            .unwrap();
        let c = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        let v = m.from_local(&p, &c);
        let back = m.to_local(&p, &v);
        for (a, b) in c.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        // orthonormal under the metric
        assert_relative_eq!(
            m.norm(&p, &v, &MetricParams::default()),
            c.iter().map(|x| x * x).sum::<f64>().sqrt(),
            epsilon = 1e-12
        );
    }
}
