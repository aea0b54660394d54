//! Phase-indexed damping matrices from demonstration spread.
//!
//! Demonstrations are resampled at common phases, expressed in the tangent
//! space of the nominal curve, and their covariance `Σ_s` is inverted into
//! `D_s = V diag(1/(λ_i + d)) Vᵀ`. The sequence is fitted by a curve on
//! `SPD(n)` and queried by the phase of the current projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curve::{fit_curve, CompositeBezierCurve, CurveFile, Demo, DemoSet, FitOptions, FitReport};
use crate::ds::Projection;
use crate::error::{Error, Result};
use crate::geom::{Manifold, Spd, SpdPoint};

/// Demonstrations re-indexed to shared phases: `points[i][k]` is demo `k`
/// at `phases[i]`.
#[derive(Clone, Debug)]
pub struct Resampled<P> {
    pub phases: Vec<f64>,
    pub points: Vec<Vec<P>>,
}

/// Linear phase alignment: every demo is read at `count` equally spaced
/// phases by geodesic interpolation.
pub fn align_resample<M: Manifold>(
    m: &M,
    demos: &DemoSet<M::Point>,
    count: usize,
) -> Result<Resampled<M::Point>> {
    if demos.len() < 2 {
        return Err(Error::invalid(format!(
            "covariance needs at least 2 demonstrations, got {}",
            demos.len()
        )));
    }
    if count < 2 {
        return Err(Error::invalid("resampling needs at least 2 phases"));
    }
    let phases: Vec<f64> = (0..count).map(|i| i as f64 / (count - 1) as f64).collect();
    let points = phases
        .iter()
        .map(|&s| demos.demos().iter().map(|d| d.point_at(m, s)).collect())
        .collect::<Result<_>>()?;
    Ok(Resampled { phases, points })
}

/// Mean and population covariance of demo offsets at one curve phase, in
/// local coordinates of the tangent space at `γ(s)`.
#[derive(Clone, Debug)]
pub struct FrameStats {
    pub phase: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

pub fn moving_frame_stats<M: Manifold>(
    resampled: &Resampled<M::Point>,
    curve: &CompositeBezierCurve<M>,
) -> Result<Vec<FrameStats>> {
    let m = curve.manifold();
    resampled
        .phases
        .iter()
        .zip(&resampled.points)
        .map(|(&s, pts)| {
            let base = curve.eval(s)?;
            let offsets = pts
                .iter()
                .map(|x| {
                    let v = m.log(&base, x)?;
                    Ok(DVector::from_vec(m.to_local(&base, &v)))
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e: Error| e.context(format!("moving frame at s = {s}")))?;
            let k = offsets.len() as f64;
            let n = m.dim();
            let mean = offsets.iter().fold(DVector::zeros(n), |a, o| a + o) / k;
            let mut cov = DMatrix::zeros(n, n);
            for o in &offsets {
                let c = o - &mean;
                cov += &c * c.transpose();
            }
            cov /= k;
            Ok(FrameStats {
                phase: s,
                mean,
                covariance: clamp_psd(cov),
            })
        })
        .collect()
}

/// Symmetrizes and clamps negative eigenvalues to zero.
fn clamp_psd(c: DMatrix<f64>) -> DMatrix<f64> {
    let c = (&c + c.transpose()) * 0.5;
    let e = c.clone().symmetric_eigen();
    if e.eigenvalues.iter().all(|&l| l >= 0.0) {
        return c;
    }
    let vals = e.eigenvalues.map(|l| l.max(0.0));
    let r = &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose();
    (&r + r.transpose()) * 0.5
}

/// `V diag(1/(λ_i + d)) Vᵀ` for `Σ = V diag(λ) Vᵀ`.
pub fn covariance_to_damping(cov: &DMatrix<f64>, gain: f64) -> Result<SpdPoint> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::invalid(format!("damping gain must be positive, got {gain}")));
    }
    let e = cov.clone().symmetric_eigen();
    let vals = e.eigenvalues.map(|l| 1.0 / (l.max(0.0) + gain));
    let d = &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose();
    Ok(SpdPoint::new_unchecked(d))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DampingOptions {
    /// Number of shared phases after resampling.
    pub samples: usize,
    pub gain: f64,
    /// Distance from the curve beyond which the full matrix applies.
    pub threshold: f64,
    /// Drop off-diagonal covariance terms.
    pub diagonal: bool,
    pub fit: FitOptions,
}

impl Default for DampingOptions {
    fn default() -> Self {
        Self {
            samples: 50,
            gain: 1.0,
            threshold: 0.05,
            diagonal: false,
            fit: FitOptions::default(),
        }
    }
}

/// Fits a curve on `SPD(n)` through phase-stamped matrices.
pub fn fit_damping_curve(
    phases: &[f64],
    matrices: &[SpdPoint],
    opts: &FitOptions,
) -> Result<(CompositeBezierCurve<Spd>, FitReport)> {
    let n = matrices
        .first()
        .ok_or_else(|| Error::invalid("no damping matrices to fit"))?
        .n();
    let demo = Demo::new(phases.to_vec(), matrices.to_vec())?;
    fit_curve(&Spd::new(n)?, &DemoSet::new(vec![demo])?, opts)
}

#[derive(Clone, Debug)]
pub struct DampingProfile {
    curve: CompositeBezierCurve<Spd>,
    gain: f64,
    threshold: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DampingProfileFile {
    pub spd_curve: CurveFile,
    pub d: f64,
    pub threshold: f64,
}

/// Damping matrices `D_s` together with the curve fitted through them.
#[derive(Clone, Debug)]
pub struct DampingBuild {
    pub profile: DampingProfile,
    pub stats: Vec<FrameStats>,
    pub matrices: Vec<SpdPoint>,
    pub fit: FitReport,
}

impl DampingProfile {
    pub fn new(curve: CompositeBezierCurve<Spd>, gain: f64, threshold: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::invalid(format!("damping gain must be positive, got {gain}")));
        }
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(Error::invalid(format!("threshold must be non-negative, got {threshold}")));
        }
        Ok(Self {
            curve,
            gain,
            threshold,
        })
    }

    /// Full pipeline from demonstrations around `curve`.
    pub fn build<M: Manifold>(
        demos: &DemoSet<M::Point>,
        curve: &CompositeBezierCurve<M>,
        opts: &DampingOptions,
    ) -> Result<DampingBuild> {
        let resampled = align_resample(curve.manifold(), demos, opts.samples)?;
        let mut stats = moving_frame_stats(&resampled, curve)?;
        if opts.diagonal {
            for st in &mut stats {
                st.covariance = DMatrix::from_diagonal(&st.covariance.diagonal());
            }
        }
        let matrices = stats
            .iter()
            .map(|st| covariance_to_damping(&st.covariance, opts.gain))
            .collect::<Result<Vec<_>>>()?;
        let (spd_curve, fit) = fit_damping_curve(&resampled.phases, &matrices, &opts.fit)?;
        Ok(DampingBuild {
            profile: Self::new(spd_curve, opts.gain, opts.threshold)?,
            stats,
            matrices,
            fit,
        })
    }

    pub fn curve(&self) -> &CompositeBezierCurve<Spd> {
        &self.curve
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn n(&self) -> usize {
        self.curve.manifold().n()
    }

    /// `D(s̃)` away from the curve; `D^{dist/threshold}` inside the threshold
    /// band, reaching the identity on the curve.
    pub fn query<P>(&self, proj: &Projection<P>) -> Result<SpdPoint> {
        self.query_at(proj.s_tilde, proj.dist)
    }

    pub fn query_at(&self, s_tilde: f64, dist: f64) -> Result<SpdPoint> {
        if !(dist >= 0.0) {
            return Err(Error::invalid(format!("distance must be non-negative, got {dist}")));
        }
        let d = self.curve.eval(s_tilde)?;
        if dist >= self.threshold {
            return Ok(d);
        }
        Ok(spd_power(&d, dist / self.threshold))
    }

    pub fn to_file(&self) -> DampingProfileFile {
        DampingProfileFile {
            spd_curve: self.curve.to_file(),
            d: self.gain,
            threshold: self.threshold,
        }
    }

    pub fn from_file(file: &DampingProfileFile) -> Result<Self> {
        let spd = match file.spd_curve.kind()? {
            crate::geom::ManifoldKind::Spd(n) => Spd::new(n)?,
            other => {
                return Err(Error::invalid(format!(
                    "damping curve must live on SPD(n), got {other}"
                )))
            }
        };
        let curve = CompositeBezierCurve::from_file(spd, &file.spd_curve)?;
        Self::new(curve, file.d, file.threshold)
    }
}

/// Geodesic from the identity: `D^t`.
pub fn spd_power(d: &SpdPoint, t: f64) -> SpdPoint {
    if t == 1.0 {
        return d.clone();
    }
    let e = d.matrix().clone().symmetric_eigen();
    let vals = e.eigenvalues.map(|l| l.max(f64::MIN_POSITIVE).powf(t));
    SpdPoint::new_unchecked(&e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose())
}

/// Multiplies the local coordinates of `twist` at `base` by `D`.
pub fn apply_damping<M: Manifold>(
    m: &M,
    base: &M::Point,
    d: &SpdPoint,
    twist: &M::Tangent,
) -> Result<M::Tangent> {
    let c = m.to_local(base, twist);
    if c.len() != d.n() {
        return Err(Error::invalid(format!(
            "damping matrix is {0}×{0} but the twist has {1} coordinates",
            d.n(),
            c.len()
        )));
    }
    let out = d.matrix() * DVector::from_vec(c);
    Ok(m.from_local(base, out.as_slice()))
}
