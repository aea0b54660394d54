pub mod bench;
pub mod curve;
pub mod damping;
pub mod ds;
pub mod error;
pub mod geom;
pub mod io;
pub mod phase;
pub mod rollout;

pub use error::{Error, Result};
