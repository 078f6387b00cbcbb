pub mod complex;
pub mod error;
pub mod extract;
pub mod field;
pub mod metrics;
pub mod geom;
pub mod persistence;
pub mod pipeline;
pub mod pointcloud;
pub mod synth;
pub mod topo_opt;

pub use error::{Error, Result};
