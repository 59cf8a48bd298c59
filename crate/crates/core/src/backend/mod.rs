//! Text-conditioned zero-shot detector backends.
//!
//! Every backend answers a [`DetectionQuery`] (image, optional crop region,
//! prompt, confidence threshold) with boxes in the pixel frame of the queried
//! region. Three implementations ship here:
//!
//! * [`OracleBackend`] synthesizes detections from ground truth with seeded
//!   misses, false positives and jitter,
//! * [`FixtureBackend`] replays recorded responses,
//! * [`RemoteBackend`] calls the HTTP inference service.

mod fixture;
mod oracle;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

pub use fixture::{
    record_fixture, Fixture, FixtureBackend, FixtureDetection, FixtureRecord, RecordingBackend,
};
pub use oracle::{
    default_prompt_targets, OracleBackend, OracleConfig, PromptOverride, ScoreDist, ScoreModel,
};
pub use remote::{
    ImageStore, RemoteBackend, RemoteConfig, WireDetectRequest, WireDetectResponse, WireDetection,
};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable at {endpoint} after {retries} retries: {message}")]
    BackendUnavailable {
        endpoint: String,
        retries: u32,
        message: String,
    },
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("unknown image or unrecorded query: {0}")]
    UnknownImage(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionQuery {
    pub image_id: String,
    /// Crop window in original-image pixels; `None` queries the whole image.
    pub region: Option<BBox>,
    pub prompt: String,
    pub threshold: f64,
}

impl DetectionQuery {
    pub fn new(
        image_id: impl Into<String>,
        region: Option<BBox>,
        prompt: impl Into<String>,
        threshold: f64,
    ) -> Result<Self, BackendError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(BackendError::InvalidQuery(format!(
                "threshold {threshold} outside [0, 1]"
            )));
        }
        Ok(Self {
            image_id: image_id.into(),
            region,
            prompt: prompt.into(),
            threshold,
        })
    }

    pub fn key(&self) -> QueryKey {
        QueryKey {
            image_id: self.image_id.clone(),
            region: self.region.map(canonical_region),
            prompt: self.prompt.clone(),
        }
    }
}

/// One detector response item. `bbox` is in the queried region's pixel frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    pub prompt: String,
}

pub trait DetectorBackend: Send + Sync {
    fn detect(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError>;

    /// Short human-readable identity recorded in reports.
    fn descriptor(&self) -> String;
}

impl<T: DetectorBackend + ?Sized> DetectorBackend for &T {
    fn detect(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
        (**self).detect(query)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

impl<T: DetectorBackend + ?Sized> DetectorBackend for Box<T> {
    fn detect(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
        (**self).detect(query)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

/// Threshold-independent identity of a query: image, region rounded to 1e-3 px,
/// prompt.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryKey {
    pub image_id: String,
    pub region: Option<[i64; 4]>,
    pub prompt: String,
}

pub fn canonical_region(region: BBox) -> [i64; 4] {
    region.to_array().map(|v| (v * 1000.0).round() as i64)
}

/// Thresholds compared at 1e-9 resolution so accumulated grid steps such as
/// `0.15000000000000002` hit the recorded `0.15`.
pub(crate) fn threshold_key(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

/// Deterministic order for a detection list: score descending, then box corners.
pub(crate) fn sort_detections(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.bbox.lexicographic_cmp(&b.bbox))
    });
}
