use serde::{Deserialize, Serialize};

use crate::curve::CompositeBezierCurve;
use crate::error::{Error, Result};
use crate::geom::{Manifold, MetricParams};

/// Closest point on the curve.
#[derive(Clone, Debug)]
pub struct Projection<P> {
    pub s_tilde: f64,
    pub point: P,
    pub dist: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ProjectionOptions {
    /// Coarse grid size; `None` means `max(50·J, 200)`.
    pub grid: Option<usize>,
    pub phase_tolerance: f64,
    /// Refined minima this close in distance count as ties, broken towards
    /// the larger phase.
    pub tie_tolerance: f64,
    pub metric: MetricParams,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            grid: None,
            phase_tolerance: 1e-10,
            tie_tolerance: 1e-9,
            metric: MetricParams::projection(),
        }
    }
}

/// Most grid minima refined per query.
const MAX_CANDIDATES: usize = 8;

/// Added to each cached bound per query to absorb the rounding of fast
/// distance scans.
const SCAN_MARGIN: f64 = 1e-6;

/// Grid distances carried between consecutive projections.
#[derive(Clone, Debug)]
pub struct ScanCache<P> {
    last: Option<P>,
    dist: Vec<f64>,
    /// Growth of the triangle-inequality bound since `dist[i]` was exact.
    slack: Vec<f64>,
}

impl<P> Default for ScanCache<P> {
    fn default() -> Self {
        Self {
            last: None,
            dist: Vec::new(),
            slack: Vec::new(),
        }
    }
}

/// Closest-point projection with a cached coarse grid.
#[derive(Clone, Debug)]
pub struct Projector<M: Manifold> {
    curve: CompositeBezierCurve<M>,
    opts: ProjectionOptions,
    phases: Vec<f64>,
    points: Vec<M::Point>,
    /// Longest distance between neighbouring grid points.
    cell: f64,
}

impl<M: Manifold> Projector<M> {
    pub fn new(curve: CompositeBezierCurve<M>, opts: ProjectionOptions) -> Result<Self> {
        let g = opts
            .grid
            .unwrap_or_else(|| (50 * curve.num_segments()).max(200));
        if g < 2 {
            return Err(Error::invalid("projection grid needs at least 2 points"));
        }
        let (phases, points) = curve.sample(g)?;
        let m = curve.manifold();
        let cell = points
            .windows(2)
            .map(|w| m.distance(&w[0], &w[1], &opts.metric))
            .fold(0.0, f64::max);
        Ok(Self {
            curve,
            opts,
            phases,
            points,
            cell,
        })
    }

    pub fn curve(&self) -> &CompositeBezierCurve<M> {
        &self.curve
    }

    pub fn options(&self) -> &ProjectionOptions {
        &self.opts
    }

    pub fn metric(&self) -> &MetricParams {
        &self.opts.metric
    }

    fn dist_at(&self, x: &M::Point, s: f64) -> Result<(M::Point, f64)> {
        let p = self.curve.eval(s)?;
        let d = self.curve.manifold().distance(x, &p, &self.opts.metric);
        Ok((p, d))
    }

    /// Global projection: scan the whole grid, refine the promising minima
    /// and return the closest, preferring the largest phase among ties.
    pub fn project(&self, x: &M::Point) -> Result<Projection<M::Point>> {
        self.project_range(x, 0, self.phases.len() - 1)
    }

    /// Projection restricted to grid cells within `half_width` of `hint`.
    /// Cheaper, but only finds the global minimizer when it lies nearby.
    pub fn project_near(
        &self,
        x: &M::Point,
        hint: f64,
        half_width: f64,
    ) -> Result<Projection<M::Point>> {
        let last = self.phases.len() - 1;
        let lo = self.phases.partition_point(|&s| s < hint - half_width);
        let hi = self.phases.partition_point(|&s| s <= hint + half_width);
        let lo = lo.min(last);
        let hi = hi.saturating_sub(1).clamp(lo, last);
        self.project_range(x, lo, hi)
    }

    fn project_range(&self, x: &M::Point, lo: usize, hi: usize) -> Result<Projection<M::Point>> {
        let mut d = Vec::with_capacity(hi - lo + 1);
        self.curve
            .manifold()
            .scan_distances(x, &self.points[lo..=hi], &self.opts.metric, &mut d);
        self.refine(x, &d, lo, hi)
    }

    /// Same result as [`Projector::project`], reusing grid distances from
    /// the previous query in `cache`. Distances that cannot reach the
    /// candidate set by the triangle inequality are not recomputed, which
    /// pays off along trajectories with small steps.
    pub fn project_cached(
        &self,
        x: &M::Point,
        cache: &mut ScanCache<M::Point>,
    ) -> Result<Projection<M::Point>> {
        let m = self.curve.manifold();
        let metric = &self.opts.metric;
        let n = self.points.len();
        match cache.last.as_ref() {
            Some(last) if m.distance_is_metric(metric) && cache.dist.len() == n => {
                let step = m.distance(last, x, metric) + SCAN_MARGIN;
                for s in &mut cache.slack {
                    *s += step;
                }
                let reach = cache
                    .dist
                    .iter()
                    .zip(&cache.slack)
                    .map(|(d, s)| d + s)
                    .fold(f64::INFINITY, f64::min)
                    + self.cell;
                let stale = |i: usize, c: &ScanCache<M::Point>| c.slack[i] > 0.0 && c.dist[i] - c.slack[i] <= reach;
                let mut buf = Vec::new();
                let mut i = 0;
                while i < n {
                    if !stale(i, cache) {
                        i += 1;
                        continue;
                    }
                    let mut j = i + 1;
                    while j < n && stale(j, cache) {
                        j += 1;
                    }
                    m.scan_distances(x, &self.points[i..j], metric, &mut buf);
                    cache.dist[i..j].copy_from_slice(&buf);
                    cache.slack[i..j].fill(0.0);
                    i = j;
                }
            }
            _ => {
                m.scan_distances(x, &self.points, metric, &mut cache.dist);
                cache.slack.clear();
                cache.slack.resize(n, 0.0);
            }
        }
        cache.last = Some(x.clone());
        // lower bounds stand in for stale entries; none of them can be a
        // candidate or beat a candidate's neighbour test
        let d: Vec<f64> = cache.dist.iter().zip(&cache.slack).map(|(d, s)| d - s).collect();
        self.refine(x, &d, 0, n - 1)
    }

    fn refine(&self, x: &M::Point, d: &[f64], lo: usize, hi: usize) -> Result<Projection<M::Point>> {
        let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
        if !dmin.is_finite() {
            return Err(Error::invalid("projection distances are not finite"));
        }
        let n = d.len();
        let mut minima: Vec<usize> = (0..n)
            .filter(|&i| (i == 0 || d[i] <= d[i - 1]) && (i + 1 == n || d[i] <= d[i + 1]))
            .filter(|&i| d[i] <= dmin + self.cell)
            .collect();
        minima.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        minima.truncate(MAX_CANDIDATES);

        // one refined point per basin; ties only arbitrate between basins
        let mut best: Vec<(f64, f64, M::Point)> = Vec::with_capacity(minima.len());
        for i in minima {
            let g = lo + i;
            let a = self.phases[g.saturating_sub(1).max(lo)];
            let b = self.phases[(g + 1).min(hi)];
            let mut cand = {
                let (p, dist) = self.dist_at(x, self.phases[g])?;
                (self.phases[g], dist, p)
            };
            if b > a {
                let s = brent_min(|s| self.dist_at(x, s).map(|r| r.1), a, b, self.opts.phase_tolerance)?;
                let (p, dist) = self.dist_at(x, s)?;
                if dist < cand.1 {
                    cand = (s, dist, p);
                }
            }
            best.push(cand);
        }
        let dstar = best.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let (s_tilde, dist, point) = best
            .into_iter()
            .filter(|c| c.1 <= dstar + self.opts.tie_tolerance)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("at least one candidate");
        Ok(Projection {
            s_tilde,
            point,
            dist,
        })
    }
}

/// Brent's minimization on `[a, b]` to absolute tolerance `tol`.
pub(crate) fn brent_min(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let tol1 = tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // parabola through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok(x)
}
