use crate::error::{Error, Result};
use crate::geom::Manifold;

/// One demonstration with timestamps, before phase normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedDemo<P> {
    pub times: Vec<f64>,
    pub points: Vec<P>,
}

/// One demonstration indexed by phase in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Demo<P> {
    pub phases: Vec<f64>,
    pub points: Vec<P>,
}

impl<P> Demo<P> {
    pub fn new(phases: Vec<f64>, points: Vec<P>) -> Result<Self> {
        if phases.len() != points.len() {
            return Err(Error::invalid(format!(
                "demo has {} phases but {} points",
                phases.len(),
                points.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::invalid("demo has no samples"));
        }
        if phases.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::invalid("demo phases must lie in [0, 1]"));
        }
        if phases.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("demo phases must be strictly increasing"));
        }
        Ok(Self { phases, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl<P: Clone> Demo<P> {
    /// Point at phase `s` by geodesic interpolation between the two
    /// bracketing samples; phases outside the sampled range clamp to the
    /// nearest end.
    pub fn point_at<M: Manifold<Point = P>>(&self, m: &M, s: f64) -> Result<P> {
        let n = self.phases.len();
        if n == 1 || s <= self.phases[0] {
            return Ok(self.points[0].clone());
        }
        if s >= self.phases[n - 1] {
            return Ok(self.points[n - 1].clone());
        }
        let hi = self.phases.partition_point(|&p| p <= s);
        let lo = hi - 1;
        let t = (s - self.phases[lo]) / (self.phases[hi] - self.phases[lo]);
        m.geodesic(&self.points[lo], &self.points[hi], t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoSet<P> {
    demos: Vec<Demo<P>>,
}

impl<P> DemoSet<P> {
    pub fn new(demos: Vec<Demo<P>>) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::invalid("demo set is empty"));
        }
        Ok(Self { demos })
    }

    pub fn demos(&self) -> &[Demo<P>] {
        &self.demos
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn total_points(&self) -> usize {
        self.demos.iter().map(Demo::len).sum()
    }

    /// All `(phase, point)` pairs, demo by demo.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &P)> {
        self.demos
            .iter()
            .flat_map(|d| d.phases.iter().copied().zip(d.points.iter()))
    }

    pub fn map_points<Q>(&self, mut f: impl FnMut(&P) -> Result<Q>) -> Result<DemoSet<Q>> {
        let demos = self
            .demos
            .iter()
            .map(|d| {
                Ok(Demo {
                    phases: d.phases.clone(),
                    points: d.points.iter().map(&mut f).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(DemoSet { demos })
    }
}

/// `s_i = (t_i − t_1) / (t_I − t_1)` per demo. A single-sample demo gets
/// phase 0.
pub fn normalize_phases<P: Clone>(raw: &[TimedDemo<P>]) -> Result<DemoSet<P>> {
    let demos = raw
        .iter()
        .enumerate()
        .map(|(k, d)| {
            if d.times.len() != d.points.len() {
                return Err(Error::invalid(format!(
                    "demo {k}: {} timestamps for {} points",
                    d.times.len(),
                    d.points.len()
                )));
            }
            if d.times.iter().any(|t| !t.is_finite()) {
                return Err(Error::invalid(format!("demo {k}: non-finite timestamp")));
            }
            if let Some(i) = d.times.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::invalid(format!(
                    "demo {k}: timestamps not strictly increasing at sample {}",
                    i + 1
                )));
            }
            let phases = match d.times.as_slice() {
                [] => return Err(Error::invalid(format!("demo {k} is empty"))),
                [_] => vec![0.0],
                [first, .., last] => {
                    let span = last - first;
                    let n = d.times.len();
                    d.times
                        .iter()
                        .enumerate()
                        .map(|(i, t)| match i {
                            0 => 0.0,
                            i if i == n - 1 => 1.0,
                            _ => (t - first) / span,
                        })
                        .collect()
                }
            };
            Demo::new(phases, d.points.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    DemoSet::new(demos)
}
