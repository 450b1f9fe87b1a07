//! Pericardium contour tracing on class-labeled fat images.
//!
//! A rotated ellipse is fitted to the boundary between epicardial (red) and
//! mediastinal (green) fat by a steady-state genetic algorithm that maximizes
//! a weighted count of the labeled pixels strictly inside the ellipse.
//!
//! - [`geometry`]: ellipse membership and scanline interior enumeration
//! - [`scoring`]: objective function and PR/PG/PC/PB/GF indices
//! - [`evolve`]: the genetic algorithm
//! - [`imaging`]: palette decoding, class-map cache and overlays
//! - [`synthesis`]: phantoms and the brute-force grid oracle
//! - [`experiment`]: run records, CSV and aggregate tables

pub mod error;
pub mod evolve;
pub mod experiment;
pub mod geometry;
pub mod imaging;
pub mod scoring;
pub mod synthesis;

pub use error::{Error, Result};
pub use evolve::{run_ga, FitResult, GaConfig, Individual, Interval, ParameterRanges};
pub use geometry::{EllipseParams, PixelPoint, RowSpan};
pub use scoring::{
    compute_metrics, fitness, fitness_naive, ClassWeights, LabeledImage, Metrics, PixelClass,
};
