//! Zero-shot hardhat detection toolkit.
//!
//! Builds the benchmark manifests from VOC annotations ([`dataset`]), runs the
//! direct, nested and cascaded detection strategies ([`pipelines`]) over a
//! pluggable detector ([`backend`]), and scores them with IoU matching and
//! threshold-swept precision/recall ([`metrics`]).

pub mod backend;
pub mod dataset;
pub mod geometry;
pub mod metrics;
pub mod pipelines;
pub mod report;
pub mod synthetic;

pub use backend::{Detection, DetectionQuery, DetectorBackend};
pub use dataset::{AnnotatedImage, ClassLabel, DatasetManifest, ObjectInstance, RemapMode};
pub use geometry::{iou, BBox, ImageDims};
pub use metrics::{average_precision, match_predictions, sweep, EvalReport, PRPoint};
pub use pipelines::{PipelineConfig, Prediction, Strategy};
