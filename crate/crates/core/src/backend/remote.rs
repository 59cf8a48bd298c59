//! HTTP client for the zero-shot inference service.
//!
//! The client crops the queried region out of the image itself and submits the
//! crop as a standalone PNG, so the service never sees crop coordinates:
//!
//! ```text
//! POST {endpoint}/detect
//! {"image": "<base64 PNG>", "prompts": ["helmet"], "threshold": 0.1}
//! -> {"detections": [{"box": [x0, y0, x1, y1], "score": 0.83, "prompt": "helmet"}]}
//! ```

use std::collections::HashMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::Engine;
use image::{DynamicImage, GenericImageView, ImageFormat};
use serde::{Deserialize, Serialize};

use super::{sort_detections, BackendError, Detection, DetectionQuery, DetectorBackend};
use crate::dataset::AnnotatedImage;
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetectRequest {
    pub image: String,
    pub prompts: Vec<String>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default)]
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetectResponse {
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff: Duration::from_millis(250),
            max_in_flight: 4,
        }
    }

    fn detect_url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/detect") {
            base.to_string()
        } else {
            format!("{base}/detect")
        }
    }
}

enum ImageEntry {
    File(PathBuf),
    Pixels(DynamicImage),
}

/// Maps image ids to pixels, either on disk or in memory.
#[derive(Default)]
pub struct ImageStore {
    entries: HashMap<String, ImageEntry>,
}

impl ImageStore {
    /// Locates each image under the given roots, trying the annotation's file
    /// name first and then the image id with common extensions. Images that
    /// cannot be found are left out and fail at query time.
    pub fn resolve(images: &[AnnotatedImage], roots: &[PathBuf]) -> Self {
        let mut store = ImageStore::default();
        for img in images {
            let base_id = img.image_id.rsplit('/').next().unwrap_or(&img.image_id);
            let mut names: Vec<String> = img.file_name.iter().cloned().collect();
            names.extend(["jpg", "jpeg", "png", "JPG", "PNG"].map(|e| format!("{base_id}.{e}")));
            let found = roots
                .iter()
                .flat_map(|r| names.iter().map(move |n| r.join(n)))
                .find(|p| p.is_file());
            if let Some(path) = found {
                store.insert_path(&img.image_id, path);
            }
        }
        store
    }

    pub fn insert_path(&mut self, image_id: &str, path: impl AsRef<Path>) {
        self.entries.insert(
            image_id.to_string(),
            ImageEntry::File(path.as_ref().to_path_buf()),
        );
    }

    pub fn insert_pixels(&mut self, image_id: &str, pixels: DynamicImage) {
        self.entries
            .insert(image_id.to_string(), ImageEntry::Pixels(pixels));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn load(&self, image_id: &str) -> Result<DynamicImage, BackendError> {
        match self.entries.get(image_id) {
            Some(ImageEntry::Pixels(p)) => Ok(p.clone()),
            Some(ImageEntry::File(path)) => image::open(path).map_err(|e| {
                BackendError::Io(std::io::Error::other(format!("{}: {e}", path.display())))
            }),
            None => Err(BackendError::UnknownImage(image_id.to_string())),
        }
    }
}

struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Retryable(String),
    Fatal(BackendError),
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    images: ImageStore,
    limiter: Limiter,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig, images: ImageStore) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::InvalidConfig(e.to_string()))?;
        let limiter = Limiter::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            images,
            limiter,
        })
    }

    /// Crops the region (rounded outward to whole pixels) and encodes it as PNG.
    /// Returns the encoded crop and the integer crop origin.
    fn encode_region(
        &self,
        image: &DynamicImage,
        region: &BBox,
    ) -> Result<(Vec<u8>, f64, f64), BackendError> {
        let (w, h) = image.dimensions();
        let x0 = region.xmin().floor().max(0.0) as u32;
        let y0 = region.ymin().floor().max(0.0) as u32;
        let x1 = (region.xmax().ceil() as u32).min(w);
        let y1 = (region.ymax().ceil() as u32).min(h);
        if x1 <= x0 || y1 <= y0 {
            return Err(BackendError::InvalidQuery(format!(
                "region {region:?} outside {w}x{h} image"
            )));
        }
        let crop = image.crop_imm(x0, y0, x1 - x0, y1 - y0);
        let mut buf = Cursor::new(Vec::new());
        crop.write_to(&mut buf, ImageFormat::Png)
            .map_err(|e| BackendError::InvalidQuery(format!("PNG encoding failed: {e}")))?;
        Ok((buf.into_inner(), f64::from(x0), f64::from(y0)))
    }

    fn post_once(&self, body: &WireDetectRequest) -> Result<WireDetectResponse, Attempt> {
        let _permit = self.limiter.acquire();
        let resp = self
            .client
            .post(self.config.detect_url())
            .json(body)
            .send()
            .map_err(|e| Attempt::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Attempt::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Attempt::Fatal(BackendError::ProtocolError(format!(
                "HTTP {status}: {text}"
            ))));
        }
        let bytes = resp
            .bytes()
            .map_err(|e| Attempt::Retryable(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| {
            Attempt::Fatal(BackendError::ProtocolError(format!(
                "malformed response body: {e}"
            )))
        })
    }

    fn post(&self, body: &WireDetectRequest) -> Result<WireDetectResponse, BackendError> {
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                log::warn!(
                    "retrying {} in {:?} (attempt {attempt}): {last}",
                    self.config.endpoint,
                    delay
                );
                thread::sleep(delay);
                delay *= 2;
            }
            match self.post_once(body) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(msg)) => last = msg,
            }
        }
        Err(BackendError::BackendUnavailable {
            endpoint: self.config.endpoint.clone(),
            retries: self.config.retries,
            message: last,
        })
    }
}

impl DetectorBackend for RemoteBackend {
    fn detect(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
        let image = self.images.load(&query.image_id)?;
        let (w, h) = image.dimensions();
        let full = BBox::new(0.0, 0.0, f64::from(w), f64::from(h))
            .map_err(|e| BackendError::InvalidQuery(e.to_string()))?;
        let region = query.region.unwrap_or(full);
        let (png, ox, oy) = self.encode_region(&image, &region)?;

        let body = WireDetectRequest {
            image: base64::engine::general_purpose::STANDARD.encode(png),
            prompts: vec![query.prompt.clone()],
            threshold: query.threshold,
        };
        let resp = self.post(&body)?;

        // crop pixels -> region frame; the crop origin may sit up to a pixel
        // before the fractional region corner
        let (dx, dy) = (ox - region.xmin(), oy - region.ymin());
        let local_region =
            BBox::new(0.0, 0.0, region.width(), region.height()).expect("region has positive area");
        let mut out = Vec::new();
        for d in resp.detections {
            if !(0.0..=1.0).contains(&d.score) {
                return Err(BackendError::ProtocolError(format!(
                    "score {} outside [0, 1]",
                    d.score
                )));
            }
            if d.prompt.as_deref().is_some_and(|p| p != query.prompt) {
                continue;
            }
            if d.score < query.threshold {
                continue;
            }
            let [x0, y0, x1, y1] = d.bbox;
            let Ok(raw) = BBox::new(x0 + dx, y0 + dy, x1 + dx, y1 + dy) else {
                return Err(BackendError::ProtocolError(format!(
                    "invalid box {:?}",
                    d.bbox
                )));
            };
            if let Some(bbox) = raw.intersection(&local_region) {
                out.push(Detection {
                    bbox,
                    score: d.score,
                    prompt: query.prompt.clone(),
                });
            }
        }
        sort_detections(&mut out);
        Ok(out)
    }

    fn descriptor(&self) -> String {
        format!("remote({})", self.config.endpoint)
    }
}
