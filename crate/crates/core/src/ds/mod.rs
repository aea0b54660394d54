//! Curve-following dynamical system.
//!
//! `f(x) = k_TC·ζ(s̃)·P_{π(x)→x} γ′(s̃) + k_NC·log_x π(x)`, where `π(x)` is
//! the closest curve point, `s̃` its phase and `ζ(s̃) = 1 − s̃^{k_g}` brings
//! the flow to rest at the curve end.

mod projection;

use serde::{Deserialize, Serialize};

use crate::curve::CompositeBezierCurve;
use crate::error::{Error, Result};
use crate::geom::{Manifold, MetricParams, TangentVec};

pub use projection::{Projection, ProjectionOptions, Projector, ScanCache};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DsParams {
    /// Tangential gain constant. Zero turns the system into pure attraction.
    pub k_tc: f64,
    /// Normal (attraction) gain.
    pub k_nc: f64,
    /// Goal exponent; integer values keep `ζ` smooth at the origin.
    pub k_g: f64,
}

impl Default for DsParams {
    fn default() -> Self {
        Self {
            k_tc: 1.0,
            k_nc: 3.0,
            k_g: 8.0,
        }
    }
}

impl DsParams {
    pub fn validate(&self) -> Result<()> {
        // zero disables propagation and leaves pure attraction
        if !(self.k_tc >= 0.0 && self.k_tc.is_finite()) {
            return Err(Error::invalid(format!("k_tc must be non-negative, got {}", self.k_tc)));
        }
        if !(self.k_nc > 0.0 && self.k_nc.is_finite()) {
            return Err(Error::invalid(format!("k_nc must be positive, got {}", self.k_nc)));
        }
        if !(self.k_g > 1.0 && self.k_g.is_finite()) {
            return Err(Error::invalid(format!("k_g must exceed 1, got {}", self.k_g)));
        }
        Ok(())
    }
}

/// `k_TC · (1 − s̃^{k_g})`
pub fn goal_gain(s_tilde: f64, params: &DsParams) -> f64 {
    let s = s_tilde.clamp(0.0, 1.0);
    params.k_tc * (1.0 - s.powf(params.k_g))
}

/// DS velocity together with the projection it was computed from.
#[derive(Clone, Debug)]
pub struct DsOutput<M: Manifold> {
    pub velocity: M::Tangent,
    pub projection: Projection<M::Point>,
}

/// The dynamical system induced by a fitted curve.
#[derive(Clone, Debug)]
pub struct CurveDs<M: Manifold> {
    projector: Projector<M>,
    params: DsParams,
}

impl<M: Manifold> CurveDs<M> {
    pub fn new(curve: CompositeBezierCurve<M>, params: DsParams) -> Result<Self> {
        Self::with_projection(curve, params, ProjectionOptions::default())
    }

    pub fn with_projection(
        curve: CompositeBezierCurve<M>,
        params: DsParams,
        opts: ProjectionOptions,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            projector: Projector::new(curve, opts)?,
            params,
        })
    }

    pub fn curve(&self) -> &CompositeBezierCurve<M> {
        self.projector.curve()
    }

    pub fn manifold(&self) -> &M {
        self.projector.curve().manifold()
    }

    pub fn params(&self) -> &DsParams {
        &self.params
    }

    pub fn projector(&self) -> &Projector<M> {
        &self.projector
    }

    /// Metric used for projection distances and Lyapunov values.
    pub fn metric(&self) -> &MetricParams {
        self.projector.metric()
    }

    pub fn project(&self, x: &M::Point) -> Result<Projection<M::Point>> {
        self.projector.project(x)
    }

    /// `log_x π(x)`: points from `x` to its projection.
    pub fn normal_term(&self, x: &M::Point, proj: &Projection<M::Point>) -> Result<M::Tangent> {
        self.manifold().log(x, &proj.point)
    }

    /// Curve velocity at `s̃` carried to `x`. On the Lie groups transport is
    /// the identity on body coordinates.
    pub fn tangential_term(
        &self,
        x: &M::Point,
        proj: &Projection<M::Point>,
    ) -> Result<M::Tangent> {
        let v = self.curve().derivative(proj.s_tilde)?;
        self.manifold().transport(&proj.point, x, &v)
    }

    pub fn eval_with(&self, x: &M::Point, proj: Projection<M::Point>) -> Result<DsOutput<M>> {
        let ctx = |e: Error| {
            e.context(format!(
                "ds at {:?} (s~ = {})",
                self.manifold().point_to_coords(x),
                proj.s_tilde
            ))
        };
        let gain = goal_gain(proj.s_tilde, &self.params);
        let normal = self.normal_term(x, &proj).map_err(ctx)?;
        let velocity = if gain == 0.0 {
            normal.scaled(self.params.k_nc)
        } else {
            let tangential = self.tangential_term(x, &proj).map_err(ctx)?;
            tangential.lincomb(gain, &normal, self.params.k_nc)
        };
        Ok(DsOutput {
            velocity,
            projection: proj,
        })
    }

    pub fn eval(&self, x: &M::Point) -> Result<DsOutput<M>> {
        let proj = self.project(x)?;
        self.eval_with(x, proj)
    }

    /// [`CurveDs::eval`] for successive states of one trajectory.
    pub fn eval_cached(&self, x: &M::Point, cache: &mut ScanCache<M::Point>) -> Result<DsOutput<M>> {
        let proj = self.projector.project_cached(x, cache)?;
        self.eval_with(x, proj)
    }

    /// `k_NC·½·d² + k_TC·½·(1 − s̃)²`
    pub fn lyapunov_from(&self, proj: &Projection<M::Point>) -> f64 {
        let p = &self.params;
        0.5 * p.k_nc * proj.dist * proj.dist + 0.5 * p.k_tc * (1.0 - proj.s_tilde).powi(2)
    }

    pub fn lyapunov(&self, x: &M::Point) -> Result<f64> {
        Ok(self.lyapunov_from(&self.project(x)?))
    }
}
