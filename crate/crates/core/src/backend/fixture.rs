//! Recording and replay of detector responses.
//!
//! A fixture file is line-delimited JSON, one record per query:
//! `{"image_id", "region": [x0,y0,x1,y1] | null, "prompt", "threshold",
//! "detections": [{"box": [...], "score"}]}`. Records are written in key order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    sort_detections, threshold_key, BackendError, Detection, DetectionQuery, DetectorBackend,
    QueryKey,
};
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureDetection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub image_id: String,
    pub region: Option<BBox>,
    pub prompt: String,
    pub threshold: f64,
    pub detections: Vec<FixtureDetection>,
}

/// Recorded responses indexed by query key, then by threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fixture {
    entries: BTreeMap<QueryKey, BTreeMap<i64, FixtureRecord>>,
}

impl Fixture {
    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds a record. A second record for the same key and threshold must agree
    /// with the first.
    pub fn insert(&mut self, record: FixtureRecord) -> Result<(), BackendError> {
        let query = DetectionQuery::new(
            record.image_id.clone(),
            record.region,
            record.prompt.clone(),
            record.threshold,
        )?;
        if let Some(bad) = record
            .detections
            .iter()
            .find(|d| d.score < record.threshold)
        {
            return Err(BackendError::ProtocolError(format!(
                "recorded score {} below threshold {}",
                bad.score, record.threshold
            )));
        }
        let slot = self
            .entries
            .entry(query.key())
            .or_default()
            .entry(threshold_key(record.threshold));
        match slot {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(record);
            }
            std::collections::btree_map::Entry::Occupied(o) => {
                if o.get().detections != record.detections {
                    return Err(BackendError::ProtocolError(format!(
                        "conflicting recordings for image {} prompt {:?}",
                        record.image_id, record.prompt
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn records(&self) -> impl Iterator<Item = &FixtureRecord> {
        self.entries.values().flat_map(|m| m.values())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), BackendError> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let file = fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = fs::File::open(path)?;
        let mut fixture = Fixture::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                BackendError::ProtocolError(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            fixture.insert(rec)?;
        }
        Ok(fixture)
    }

    /// Looks up a query. An exact threshold match is returned as recorded;
    /// otherwise the recording with the highest threshold not above the query's
    /// is filtered down, which is exact because it holds every detection scoring
    /// at least the query threshold.
    pub fn lookup(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
        let unknown = || {
            BackendError::UnknownImage(format!(
                "{} region={:?} prompt={:?} threshold={}",
                query.image_id, query.region, query.prompt, query.threshold
            ))
        };
        let by_threshold = self.entries.get(&query.key()).ok_or_else(unknown)?;
        let (_, rec) = by_threshold
            .range(..=threshold_key(query.threshold))
            .next_back()
            .ok_or_else(unknown)?;
        let mut dets: Vec<Detection> = rec
            .detections
            .iter()
            .filter(|d| d.score >= query.threshold)
            .map(|d| Detection {
                bbox: d.bbox,
                score: d.score,
                prompt: query.prompt.clone(),
            })
            .collect();
        if threshold_key(rec.threshold) != threshold_key(query.threshold) {
            sort_detections(&mut dets);
        }
        Ok(dets)
    }
}

/// Replays a [`Fixture`]. Unrecorded queries fail with `UnknownImage`.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    fixture: Fixture,
    name: String,
}

impl FixtureBackend {
    pub fn new(fixture: Fixture, name: impl Into<String>) -> Self {
        Self {
            fixture,
            name: name.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::new(Fixture::load(path)?, name))
    }
}

impl DetectorBackend for FixtureBackend {
    fn detect(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
        self.fixture.lookup(query)
    }

    fn descriptor(&self) -> String {
        format!("fixture({})", self.name)
    }
}

/// Pass-through backend that records every successful query.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Fixture>,
}

impl<B: DetectorBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            recorded: Mutex::new(Fixture::default()),
        }
    }

    pub fn into_fixture(self) -> Fixture {
        self.recorded
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
    }
}

impl<B: DetectorBackend> DetectorBackend for RecordingBackend<B> {
    fn detect(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
        let dets = self.inner.detect(query)?;
        let record = FixtureRecord {
            image_id: query.image_id.clone(),
            region: query.region,
            prompt: query.prompt.clone(),
            threshold: query.threshold,
            detections: dets
                .iter()
                .map(|d| FixtureDetection {
                    bbox: d.bbox,
                    score: d.score,
                })
                .collect(),
        };
        self.recorded
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(record)?;
        Ok(dets)
    }

    fn descriptor(&self) -> String {
        format!("recording({})", self.inner.descriptor())
    }
}

/// Runs every query against `backend` and returns the recordings. Any backend
/// error aborts the whole recording; no partial fixture is produced.
pub fn record_fixture<B: DetectorBackend>(
    queries: &[DetectionQuery],
    backend: B,
) -> Result<Fixture, BackendError> {
    let recorder = RecordingBackend::new(backend);
    for q in queries {
        recorder.detect(q)?;
    }
    Ok(recorder.into_fixture())
}
