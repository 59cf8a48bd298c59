//! Ground-truth driven detector for tests and controlled experiments.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    canonical_region, sort_detections, BackendError, Detection, DetectionQuery, DetectorBackend,
};
use crate::dataset::{AnnotatedImage, ClassLabel};
use crate::geometry::{BBox, ImageDims};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDist {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl ScoreDist {
    fn sample(&self, u: f64) -> f64 {
        match *self {
            ScoreDist::Fixed { value } => value,
            ScoreDist::Uniform { low, high } => low + (high - low) * u,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            ScoreDist::Fixed { value } => (0.0..=1.0).contains(&value),
            ScoreDist::Uniform { low, high } => {
                (0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high) && low <= high
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("score distribution {self:?} must lie in [0, 1]"))
        }
    }
}

/// Scores assigned to detections derived from ground truth (`tp`) and to
/// synthetic clutter (`fp`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub tp: ScoreDist,
    pub fp: ScoreDist,
}

impl Default for ScoreModel {
    fn default() -> Self {
        Self {
            tp: ScoreDist::Fixed { value: 1.0 },
            fp: ScoreDist::Uniform {
                low: 0.0,
                high: 0.5,
            },
        }
    }
}

/// Per-prompt replacement of the global miss rate or true-positive score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptOverride {
    #[serde(default)]
    pub miss_rate: Option<f64>,
    #[serde(default)]
    pub tp_score: Option<ScoreDist>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Probability that a visible ground-truth instance is not reported.
    pub miss_rate: f64,
    /// Poisson mean of false positives per query.
    pub fp_rate: f64,
    /// Maximum per-side box perturbation as a fraction of width/height.
    pub jitter: f64,
    pub score_model: ScoreModel,
    pub seed: u64,
    /// Fraction of an instance's area that must fall inside the queried region
    /// for it to be reportable.
    pub visibility: f64,
    pub prompt_overrides: BTreeMap<String, PromptOverride>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            miss_rate: 0.0,
            fp_rate: 0.0,
            jitter: 0.0,
            score_model: ScoreModel::default(),
            seed: 0,
            visibility: 0.5,
            prompt_overrides: BTreeMap::new(),
        }
    }
}

impl OracleConfig {
    pub fn perfect() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return bad(format!("miss_rate {} outside [0, 1]", self.miss_rate));
        }
        if !(self.fp_rate.is_finite() && self.fp_rate >= 0.0) {
            return bad(format!(
                "fp_rate {} must be a non-negative mean",
                self.fp_rate
            ));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return bad(format!("jitter {} outside [0, 0.5)", self.jitter));
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return bad(format!("visibility {} outside (0, 1]", self.visibility));
        }
        self.score_model.tp.validate().or_else(bad)?;
        self.score_model.fp.validate().or_else(bad)?;
        for (prompt, o) in &self.prompt_overrides {
            if let Some(m) = o.miss_rate {
                if !(0.0..=1.0).contains(&m) {
                    return bad(format!("miss_rate override for {prompt:?} outside [0, 1]"));
                }
            }
            if let Some(s) = o.tp_score {
                s.validate().or_else(bad)?;
            }
        }
        Ok(())
    }
}

/// Ground-truth classes an oracle reports for a prompt.
pub fn default_prompt_targets(prompt: &str) -> &'static [ClassLabel] {
    match prompt.trim().to_ascii_lowercase().as_str() {
        "person" | "people" | "worker" => &[ClassLabel::Person],
        "head" => &[ClassLabel::Head, ClassLabel::HeadWithHelmet],
        "helmet" | "hardhat" | "hard hat" => &[ClassLabel::Helmet, ClassLabel::HeadWithHelmet],
        _ => &[],
    }
}

/// Detector that answers from the ground truth of the images it was built with.
///
/// Randomness is drawn from a stream keyed by (seed, image, region, prompt) and
/// never by threshold, so raising the threshold only removes detections.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    config: OracleConfig,
    images: HashMap<String, AnnotatedImage>,
}

impl OracleBackend {
    pub fn new<'a>(
        config: OracleConfig,
        images: impl IntoIterator<Item = &'a AnnotatedImage>,
    ) -> Result<Self, BackendError> {
        config.validate()?;
        Ok(Self {
            config,
            images: images
                .into_iter()
                .map(|img| (img.image_id.clone(), img.clone()))
                .collect(),
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    fn rng_for(&self, query: &DetectionQuery) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.config.seed.to_le_bytes());
        h.update(query.image_id.as_bytes());
        h.update([0u8]);
        match query.region {
            Some(r) => {
                for v in canonical_region(r) {
                    h.update(v.to_le_bytes());
                }
            }
            None => h.update(b"whole"),
        }
        h.update(query.prompt.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }

    fn sample_clutter(rng: &mut ChaCha8Rng, region: &BBox) -> Option<BBox> {
        let region_area = region.area();
        let area = region_area * rng.random_range(0.01..=0.25);
        let aspect = (rng.random_range(-1.0f64..=1.0) * std::f64::consts::LN_2).exp();
        let w = (area * aspect).sqrt().min(region.width());
        let h = (area / w).min(region.height());
        let x = rng.random::<f64>() * (region.width() - w);
        let y = rng.random::<f64>() * (region.height() - h);
        BBox::new(x, y, x + w, y + h).ok()
    }
}

fn region_within(region: &BBox, dims: ImageDims) -> bool {
    BBox::full(dims).contains(region, 1e-6)
}

impl DetectorBackend for OracleBackend {
    fn detect(&self, query: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
        let image = self
            .images
            .get(&query.image_id)
            .ok_or_else(|| BackendError::UnknownImage(query.image_id.clone()))?;
        let region = query.region.unwrap_or_else(|| BBox::full(image.dims));
        if !region_within(&region, image.dims) {
            return Err(BackendError::InvalidQuery(format!(
                "region {region:?} outside image {}",
                query.image_id
            )));
        }

        let cfg = &self.config;
        let overrides = cfg.prompt_overrides.get(&query.prompt);
        let miss_rate = overrides.and_then(|o| o.miss_rate).unwrap_or(cfg.miss_rate);
        let tp_score = overrides
            .and_then(|o| o.tp_score)
            .unwrap_or(cfg.score_model.tp);
        let targets = default_prompt_targets(&query.prompt);
        let mut rng = self.rng_for(query);
        let mut out = Vec::new();

        for inst in image
            .instances
            .iter()
            .filter(|i| targets.contains(&i.label))
        {
            // fixed number of draws per instance keeps streams aligned across configs
            let u_miss: f64 = rng.random();
            let u_jit: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
            let u_score: f64 = rng.random();

            let gt = inst.bbox;
            if region.intersection_area(&gt) < cfg.visibility * gt.area() {
                continue;
            }
            if u_miss < miss_rate {
                continue;
            }
            let (w, h) = (gt.width(), gt.height());
            let d = |u: f64, extent: f64| (2.0 * u - 1.0) * cfg.jitter * extent;
            let Ok(jittered) = BBox::new(
                gt.xmin() + d(u_jit[0], w),
                gt.ymin() + d(u_jit[1], h),
                gt.xmax() + d(u_jit[2], w),
                gt.ymax() + d(u_jit[3], h),
            ) else {
                continue;
            };
            let Some(clipped) = jittered.intersection(&region) else {
                continue;
            };
            let Ok(local) = clipped.translate(-region.xmin(), -region.ymin()) else {
                continue;
            };
            out.push(Detection {
                bbox: local,
                score: tp_score.sample(u_score),
                prompt: query.prompt.clone(),
            });
        }

        if cfg.fp_rate > 0.0 {
            let n = Poisson::new(cfg.fp_rate)
                .map_err(|e| BackendError::InvalidConfig(e.to_string()))?
                .sample(&mut rng) as usize;
            let local_region = BBox::new(0.0, 0.0, region.width(), region.height())
                .expect("region has positive area");
            for _ in 0..n {
                let u_score: f64 = rng.random();
                if let Some(b) = Self::sample_clutter(&mut rng, &local_region) {
                    out.push(Detection {
                        bbox: b,
                        score: cfg.score_model.fp.sample(u_score),
                        prompt: query.prompt.clone(),
                    });
                }
            }
        }

        out.retain(|d| d.score >= query.threshold);
        sort_detections(&mut out);
        Ok(out)
    }

    fn descriptor(&self) -> String {
        let c = &self.config;
        format!(
            "oracle(miss={}, fp={}, jitter={}, seed={})",
            c.miss_rate, c.fp_rate, c.jitter, c.seed
        )
    }
}
