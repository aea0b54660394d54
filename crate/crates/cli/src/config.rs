//! TOML experiment manifest. Every key is optional and command-line flags
//! take precedence.
//!
//! ```toml
//! manifold = "s2"
//! seed = 42
//!
//! [ds]
//! k_tc = 1.0
//! k_nc = 3.0
//! k_g = 8.0
//!
//! [fit]
//! segments = 6
//! cost_tolerance = 1e-10
//!
//! [rollout]
//! dt = 0.01
//! steps = 200
//!
//! [io]
//! demos = "demos.csv"
//! output = "out"
//! ```

use std::path::{Path, PathBuf};

use dsmp::bench::{BenchProtocol, SPHERE_RADIUS_SCALE};
use dsmp::curve::FitOptions;
use dsmp::damping::DampingOptions;
use dsmp::ds::DsParams;
use dsmp::geom::ManifoldKind;
use dsmp::phase::PhaseOptions;
use dsmp::rollout::RolloutConfig;
use serde::Deserialize;

use crate::error::{require_exists, CliError, CliResult};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoPaths {
    pub demos: Option<PathBuf>,
    pub curve: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub manifold: Option<String>,
    pub seed: Option<u64>,
    /// Planar demos are mapped onto `S²` with this largest radius.
    pub radius_scale: f64,
    pub ds: DsParams,
    pub fit: FitOptions,
    pub rollout: RolloutConfig,
    pub phase: PhaseOptions,
    pub damping: DampingOptions,
    pub bench: BenchProtocol,
    pub io: IoPaths,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            manifold: None,
            seed: None,
            radius_scale: SPHERE_RADIUS_SCALE,
            ds: DsParams::default(),
            fit: FitOptions::default(),
            rollout: RolloutConfig::default(),
            phase: PhaseOptions::default(),
            damping: DampingOptions::default(),
            bench: BenchProtocol::default(),
            io: IoPaths::default(),
        }
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        require_exists(path)?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| CliError::input(e.to_string()))?;
        if let Some(seed) = cfg.seed {
            cfg.fit.seed = seed;
            cfg.bench.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |e: dsmp::Error| CliError::input(e.to_string());
        if let Some(m) = &self.manifold {
            m.parse::<ManifoldKind>().map_err(bad)?;
        }
        self.ds.validate().map_err(bad)?;
        self.rollout.validate().map_err(bad)?;
        self.bench.validate().map_err(bad)?;
        if !(self.radius_scale > 0.0) {
            return Err(CliError::input("radius_scale must be positive"));
        }
        for p in [&self.io.demos, &self.io.curve, &self.io.corpus].into_iter().flatten() {
            require_exists(p)?;
        }
        Ok(())
    }

    pub fn manifold(&self, flag: Option<&str>) -> CliResult<ManifoldKind> {
        flag.or(self.manifold.as_deref())
            .ok_or_else(|| CliError::input("no manifold given (use --manifold or the config file)"))?
            .parse()
            .map_err(|e: dsmp::Error| CliError::input(e.to_string()))
    }
}

/// First of the flag value and the config entry, or an input error naming
/// what is missing.
pub fn pick_path(flag: Option<PathBuf>, config: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| CliError::input(format!("no {what} given")))
}
