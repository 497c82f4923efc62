//! Multimodal point-cloud anomaly detection for infrastructure inspection.
//!
//! The pipeline fuses a customized FPFH geometric descriptor with a local
//! intensity-difference histogram, scores test scans against a greedy k-center
//! coreset of a reference scan, and reports per-point anomaly scores together
//! with classification metrics and score-distribution statistics.
//!
//! Built for desk-scale experiments: a procedural scene generator produces
//! labelled reference/test pairs with injected cracks and water patches, so
//! the whole chain can be exercised without any external data.

pub mod cloud;
pub mod error;
pub mod eval;
pub mod features;
pub mod index;
pub mod io;
pub mod normals;
pub mod parallel;
pub mod patchcore;
pub mod pipeline;
pub mod synthgen;

pub use cloud::{Label, PointCloud};
pub use error::{Error, Result};
pub use features::{FeatureLayout, FeatureMatrix};
pub use index::SpatialIndex;
pub use normals::NormalField;
pub use patchcore::{AnomalyResult, MemoryBank};
