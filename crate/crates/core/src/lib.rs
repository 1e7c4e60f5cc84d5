//! Dense semantic occupancy ground truth from posed, labeled LiDAR sequences,
//! plus voxel-space feature kernels and occupancy metrics.

pub mod aggregate;
pub mod cloud;
pub mod error;
pub mod grid;
pub mod io;
pub mod label;
pub mod metrics;
pub mod offmath;
pub mod pipeline;
pub mod pose;
pub mod recon;
pub mod spatial;
pub mod synth;

pub type Point3 = nalgebra::Point3<f64>;

pub use error::{OccError, Result};
