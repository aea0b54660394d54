use nalgebra::DVector;

use super::{check_finite, check_len, Manifold, ManifoldKind, MetricParams};
use crate::error::Result;

/// Flat `ℝⁿ`. Used for planar demonstrations and scalar profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Euclidean {
    n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl Manifold for Euclidean {
    type Point = DVector<f64>;
    type Tangent = DVector<f64>;

    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Euclidean(self.n)
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn exp(&self, p: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_finite("euclidean exp input", v.iter().copied())?;
        Ok(p + v)
    }

    fn log(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(q - p)
    }

    fn distance(&self, p: &DVector<f64>, q: &DVector<f64>, _metric: &MetricParams) -> f64 {
        (q - p).norm()
    }

    fn transport(
        &self,
        _p: &DVector<f64>,
        _q: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(v.clone())
    }

    fn inner(
        &self,
        _p: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        _metric: &MetricParams,
    ) -> f64 {
        u.dot(v)
    }

    fn zero(&self, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.n)
    }

    fn residual(
        &self,
        p: &DVector<f64>,
        q: &DVector<f64>,
        _metric: &MetricParams,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        out.extend(q.iter().zip(p.iter()).map(|(a, b)| a - b));
        Ok(())
    }

    fn to_local(&self, _p: &DVector<f64>, v: &DVector<f64>) -> Vec<f64> {
        v.iter().copied().collect()
    }

    fn from_local(&self, _p: &DVector<f64>, c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&c[..self.n])
    }

    fn point_to_coords(&self, p: &DVector<f64>) -> Vec<f64> {
        p.iter().copied().collect()
    }

    fn point_from_coords(&self, c: &[f64]) -> Result<DVector<f64>> {
        check_len("euclidean point", c, self.n)?;
        Ok(DVector::from_column_slice(c))
    }

    fn tangent_from_coords(&self, _p: &DVector<f64>, c: &[f64]) -> Result<DVector<f64>> {
        check_len("euclidean tangent", c, self.n)?;
        Ok(DVector::from_column_slice(c))
    }
}
