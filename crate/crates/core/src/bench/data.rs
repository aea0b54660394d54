//! Demonstration files.
//!
//! CSV: header `demo_id,t,c1,c2[,c3...]`, one row per sample. Rows of one
//! demo keep their file order; demos are numbered by first appearance.
//!
//! JSON: `{"dim": n, "demos": [{"id": "...", "t": [...], "points": [[...], ...]}]}`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::curve::TimedDemo;
use crate::error::{Error, Result};
use crate::geom::{Manifold, Sphere2};
use crate::io::fmt_f64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawDemo {
    pub id: String,
    #[serde(rename = "t")]
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawDemoSet {
    pub dim: usize,
    pub demos: Vec<RawDemo>,
}

impl RawDemoSet {
    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn timed(&self) -> Vec<TimedDemo<Vec<f64>>> {
        self.demos
            .iter()
            .map(|d| TimedDemo {
                times: d.times.clone(),
                points: d.points.clone(),
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.demos.is_empty() {
            return Err(Error::invalid("demo file contains no demonstrations"));
        }
        for d in &self.demos {
            if d.times.len() != d.points.len() || d.times.is_empty() {
                return Err(Error::invalid(format!(
                    "demo {}: {} timestamps for {} points",
                    d.id,
                    d.times.len(),
                    d.points.len()
                )));
            }
            if let Some(p) = d.points.iter().find(|p| p.len() != self.dim) {
                return Err(Error::invalid(format!(
                    "demo {}: point with {} coordinates, expected {}",
                    d.id,
                    p.len(),
                    self.dim
                )));
            }
            if let Some(i) = d.times.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::invalid(format!(
                    "demo {}: timestamps not increasing at sample {}",
                    d.id,
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Reads CSV or, for a `.json` extension, JSON demonstrations.
pub fn load_demos(path: &Path) -> Result<RawDemoSet> {
    let ctx = |e: Error| e.context(format!("reading {}", path.display()));
    let file = File::open(path).map_err(|e| ctx(e.into()))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let set: RawDemoSet = serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| ctx(e.into()))?;
        set.validate().map_err(ctx)?;
        Ok(set)
    } else {
        read_demos_csv(file).map_err(ctx)
    }
}

pub fn read_demos_csv(r: impl Read) -> Result<RawDemoSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        });
    }
    let dim = headers.len().saturating_sub(2);
    let expected: Vec<String> = ["demo_id".to_string(), "t".to_string()]
        .into_iter()
        .chain((1..=dim).map(|i| format!("c{i}")))
        .collect();
    if dim == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "header must be `demo_id,t,c1[,c2...]`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut demos: Vec<RawDemo> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| Error::Parse { line, msg };
        let num = |i: usize| -> Result<f64> {
            let f = &rec[i];
            let v: f64 = f
                .parse()
                .map_err(|_| bad(format!("column {} is not a number: `{f}`", expected[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("column {} is not finite", expected[i])))
            }
        };
        let id = rec[0].to_string();
        let t = num(1)?;
        let point = (2..2 + dim).map(num).collect::<Result<Vec<_>>>()?;
        let demo = match demos.iter_mut().position(|d| d.id == id) {
            Some(k) => &mut demos[k],
            None => {
                demos.push(RawDemo {
                    id,
                    times: Vec::new(),
                    points: Vec::new(),
                });
                demos.last_mut().expect("just pushed")
            }
        };
        if demo.times.last().is_some_and(|&prev| t <= prev) {
            return Err(bad(format!("timestamp {t} does not increase in demo {}", demo.id)));
        }
        demo.times.push(t);
        demo.points.push(point);
    }
    if demos.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(RawDemoSet { dim, demos })
}

pub fn write_demos_csv(set: &RawDemoSet, mut w: impl Write) -> Result<()> {
    let cols: Vec<String> = (1..=set.dim).map(|i| format!("c{i}")).collect();
    writeln!(w, "demo_id,t,{}", cols.join(","))?;
    for d in &set.demos {
        for (t, p) in d.times.iter().zip(&d.points) {
            let coords: Vec<String> = p.iter().map(|&c| fmt_f64(c)).collect();
            writeln!(w, "{},{},{}", d.id, fmt_f64(*t), coords.join(","))?;
        }
    }
    Ok(())
}

/// Default disc radius in the goal tangent plane.
pub const SPHERE_RADIUS_SCALE: f64 = 0.9 * std::f64::consts::FRAC_PI_2;

/// Planar demonstrations placed on the unit sphere: the common goal (mean
/// of the end points) goes to the north pole, the data is scaled uniformly
/// into a tangent disc of radius `radius_scale` and wrapped with `exp`.
pub fn map_to_sphere(set: &RawDemoSet, radius_scale: f64) -> Result<Vec<TimedDemo<Vector3<f64>>>> {
    if set.dim != 2 {
        return Err(Error::invalid(format!(
            "sphere mapping needs planar demos, got dimension {}",
            set.dim
        )));
    }
    if !(radius_scale > 0.0 && radius_scale < std::f64::consts::PI) {
        return Err(Error::invalid(format!("radius scale must be in (0, π), got {radius_scale}")));
    }
    set.validate()?;
    let k = set.demos.len() as f64;
    let goal = set.demos.iter().fold([0.0, 0.0], |g, d| {
        let e = d.points.last().expect("validated");
        [g[0] + e[0] / k, g[1] + e[1] / k]
    });
    let extent = set
        .demos
        .iter()
        .flat_map(|d| &d.points)
        .map(|p| (p[0] - goal[0]).hypot(p[1] - goal[1]))
        .fold(0.0, f64::max);
    if !(extent > 1e-12) {
        return Err(Error::invalid("demonstrations have zero extent"));
    }
    let scale = radius_scale / extent;
    let pole = Vector3::z();
    set.demos
        .iter()
        .map(|d| {
            let points = d
                .points
                .iter()
                .map(|p| {
                    let v = Vector3::new((p[0] - goal[0]) * scale, (p[1] - goal[1]) * scale, 0.0);
                    Sphere2.exp(&pole, &v)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TimedDemo {
                times: d.times.clone(),
                points,
            })
        })
        .collect()
}
