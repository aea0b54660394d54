pub mod bench;
pub mod damping;
pub mod export;
pub mod fit;
pub mod phase;
pub mod query;
pub mod rollout;

use clap::Args;
use dsmp::ds::DsParams;
use dsmp::io::fmt_f64;

use crate::error::{CliError, CliResult};

/// Dynamical-system gains.
#[derive(Debug, Default, Args)]
pub struct GainArgs {
    /// Tangential gain.
    #[arg(long = "ktc")]
    pub k_tc: Option<f64>,
    /// Normal attraction gain.
    #[arg(long = "knc")]
    pub k_nc: Option<f64>,
    /// Goal exponent.
    #[arg(long = "kg")]
    pub k_g: Option<f64>,
}

impl GainArgs {
    pub fn resolve(&self, base: &DsParams) -> CliResult<DsParams> {
        let p = DsParams {
            k_tc: self.k_tc.unwrap_or(base.k_tc),
            k_nc: self.k_nc.unwrap_or(base.k_nc),
            k_g: self.k_g.unwrap_or(base.k_g),
        };
        p.validate().map_err(|e| CliError::input(e.to_string()))?;
        Ok(p)
    }
}

/// Builds CSV text with every float at full precision.
pub struct Table {
    out: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[String]) -> CliResult<Self> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(header).map_err(dsmp::Error::from)?;
        Ok(Self { out })
    }

    pub fn row(&mut self, values: impl IntoIterator<Item = f64>) -> CliResult<()> {
        let cells: Vec<String> = values.into_iter().map(fmt_f64).collect();
        self.out.write_record(&cells).map_err(dsmp::Error::from)?;
        Ok(())
    }

    /// Row whose first cell is an integer label.
    pub fn labelled_row(&mut self, label: usize, values: impl IntoIterator<Item = f64>) -> CliResult<()> {
        let cells: Vec<String> = std::iter::once(label.to_string())
            .chain(values.into_iter().map(fmt_f64))
            .collect();
        self.out.write_record(&cells).map_err(dsmp::Error::from)?;
        Ok(())
    }

    pub fn into_bytes(self) -> CliResult<Vec<u8>> {
        self.out
            .into_inner()
            .map_err(|e| CliError::Run(dsmp::Error::from(e.into_error())))
    }
}

pub fn columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}
