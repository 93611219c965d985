//! Data preparation, evaluation and representation-learning primitives for
//! chest X-ray detection and classification pipelines.

pub mod error;
pub mod barlow;
pub mod fsutil;
pub mod geometry;
pub mod ingest;
pub mod lineval;
pub mod metrics;
pub mod rng;
pub mod stratify;
pub mod wbf;

pub use error::{Error, Result};
pub use geometry::{clip_box, iou, BBox, RawBox};
pub use ingest::{DatasetManifest, ImageRecord, Provenance, Source};
