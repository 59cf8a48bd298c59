//! Direct, nested and cascaded hardhat detection strategies.
//!
//! * Direct: one whole-image `helmet` query.
//! * Nested: whole-image `person` query, then a `helmet` query inside each
//!   person crop.
//! * Cascaded: `person`, then `head` inside each person crop, then a `helmet`
//!   query on each head crop (taken from the original image). The last stage
//!   only decides whether the head wears a helmet; it contributes no box.
//!
//! All emitted boxes are in original-image pixels.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, DetectionQuery, DetectorBackend};
use crate::dataset::{AnnotatedImage, ClassLabel, RemapMode};
use crate::geometry::{self, BBox, ImageDims};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("image {image_id}: {source}")]
    Backend {
        image_id: String,
        #[source]
        source: BackendError,
    },
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
}

impl PipelineError {
    pub fn is_backend_failure(&self) -> bool {
        matches!(self, PipelineError::Backend { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Direct,
    Nested,
    Cascaded,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Direct, Strategy::Nested, Strategy::Cascaded];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Direct => "direct",
            Strategy::Nested => "nested",
            Strategy::Cascaded => "cascaded",
        }
    }

    /// Manifest class selection this strategy is scored against.
    pub fn manifest_mode(&self) -> RemapMode {
        match self {
            Strategy::Direct | Strategy::Nested => RemapMode::DirectNested,
            Strategy::Cascaded => RemapMode::Cascaded,
        }
    }

    /// Classes the strategy emits predictions for.
    pub fn evaluated_classes(&self) -> &'static [ClassLabel] {
        match self {
            Strategy::Direct => &[ClassLabel::Helmet],
            Strategy::Nested => &[ClassLabel::Person, ClassLabel::Helmet],
            Strategy::Cascaded => &[
                ClassLabel::Person,
                ClassLabel::Head,
                ClassLabel::HeadWithHelmet,
            ],
        }
    }

    /// The class that carries the strategy's hardhat result.
    pub fn hardhat_class(&self) -> ClassLabel {
        match self {
            Strategy::Direct | Strategy::Nested => ClassLabel::Helmet,
            Strategy::Cascaded => ClassLabel::HeadWithHelmet,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Strategy::Direct),
            "nested" => Ok(Strategy::Nested),
            "cascaded" | "multistage" => Ok(Strategy::Cascaded),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagePrompts {
    pub person: String,
    pub head: String,
    pub helmet: String,
}

impl Default for StagePrompts {
    fn default() -> Self {
        Self {
            person: "person".into(),
            head: "head".into(),
            helmet: "helmet".into(),
        }
    }
}

/// Fixed per-stage thresholds. Unset stages follow the global threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageThresholds {
    pub person: Option<f64>,
    pub head: Option<f64>,
    pub helmet: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    /// Global confidence threshold, applied at every stage without an override.
    pub threshold: f64,
    #[serde(default)]
    pub stage_thresholds: StageThresholds,
    #[serde(default)]
    pub prompts: StagePrompts,
    /// Margin added around parent boxes before cropping, as a fraction of the
    /// parent's width and height per side.
    #[serde(default)]
    pub crop_padding: f64,
}

impl PipelineConfig {
    pub fn new(strategy: Strategy, threshold: f64) -> Self {
        Self {
            strategy,
            threshold,
            stage_thresholds: StageThresholds::default(),
            prompts: StagePrompts::default(),
            crop_padding: 0.0,
        }
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self {
            threshold,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let in_unit = |t: f64| (0.0..=1.0).contains(&t);
        let st = &self.stage_thresholds;
        let all = [Some(self.threshold), st.person, st.head, st.helmet];
        if !all.into_iter().flatten().all(in_unit) {
            return Err(PipelineError::InvalidConfig(
                "thresholds must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.crop_padding) {
            return Err(PipelineError::InvalidConfig(format!(
                "crop_padding {} outside [0, 0.5]",
                self.crop_padding
            )));
        }
        Ok(())
    }

    pub fn person_threshold(&self) -> f64 {
        self.stage_thresholds.person.unwrap_or(self.threshold)
    }

    pub fn head_threshold(&self) -> f64 {
        self.stage_thresholds.head.unwrap_or(self.threshold)
    }

    pub fn helmet_threshold(&self) -> f64 {
        self.stage_thresholds.helmet.unwrap_or(self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: ClassLabel,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    /// Boxes of the stages that produced this prediction, outermost first and
    /// ending with the prediction's own box.
    pub provenance: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub person_box: BBox,
    pub head_box: Option<BBox>,
    pub helmet_worn: bool,
    /// Highest helmet score found in the examined crop, 0 when none.
    pub helmet_evidence_score: f64,
}

/// Output of one strategy on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRun {
    pub image_id: String,
    pub strategy: Strategy,
    pub predictions: Vec<Prediction>,
    pub associations: Vec<AssociationRecord>,
}

struct Ctx<'a, B: ?Sized> {
    image: &'a AnnotatedImage,
    backend: &'a B,
}

impl<B: DetectorBackend + ?Sized> Ctx<'_, B> {
    /// Queries `region` and returns (original-frame box, score) pairs.
    fn query(
        &self,
        region: Option<BBox>,
        prompt: &str,
        threshold: f64,
    ) -> Result<Vec<(BBox, f64)>, PipelineError> {
        let wrap = |source| PipelineError::Backend {
            image_id: self.image.image_id.clone(),
            source,
        };
        let query = DetectionQuery::new(self.image.image_id.clone(), region, prompt, threshold)
            .map_err(wrap)?;
        let dets = self.backend.detect(&query).map_err(wrap)?;
        let frame = region.unwrap_or_else(|| BBox::full(self.image.dims));
        let mut out = Vec::with_capacity(dets.len());
        for d in dets {
            if d.score < threshold {
                continue;
            }
            match geometry::crop_to_original(&frame, &d.bbox, Some(self.image.dims)) {
                Ok(b) => out.push((b, d.score)),
                Err(e) => log::warn!(
                    "image {}: dropping {prompt:?} detection {:?}: {e}",
                    self.image.image_id,
                    d.bbox
                ),
            }
        }
        Ok(out)
    }
}

fn crop_region(parent: &BBox, padding: f64, dims: ImageDims) -> Option<BBox> {
    parent
        .expand(padding)
        .and_then(|b| geometry::clamp(&b, dims))
        .ok()
}

fn require(config: &PipelineConfig, strategy: Strategy) -> Result<(), PipelineError> {
    config.validate()?;
    if config.strategy != strategy {
        return Err(PipelineError::InvalidConfig(format!(
            "config is for the {} strategy, not {strategy}",
            config.strategy
        )));
    }
    Ok(())
}

pub fn run_direct<B: DetectorBackend + ?Sized>(
    image: &AnnotatedImage,
    backend: &B,
    config: &PipelineConfig,
) -> Result<Vec<Prediction>, PipelineError> {
    require(config, Strategy::Direct)?;
    let ctx = Ctx { image, backend };
    let helmets = ctx.query(None, &config.prompts.helmet, config.helmet_threshold())?;
    Ok(helmets
        .into_iter()
        .map(|(bbox, score)| Prediction {
            label: ClassLabel::Helmet,
            bbox,
            score,
            provenance: vec![bbox],
        })
        .collect())
}

pub fn run_nested<B: DetectorBackend + ?Sized>(
    image: &AnnotatedImage,
    backend: &B,
    config: &PipelineConfig,
) -> Result<(Vec<Prediction>, Vec<AssociationRecord>), PipelineError> {
    require(config, Strategy::Nested)?;
    let ctx = Ctx { image, backend };
    let persons = ctx.query(None, &config.prompts.person, config.person_threshold())?;
    let mut predictions = Vec::new();
    let mut associations = Vec::new();

    for (person_box, person_score) in persons {
        predictions.push(Prediction {
            label: ClassLabel::Person,
            bbox: person_box,
            score: person_score,
            provenance: vec![person_box],
        });
        let Some(region) = crop_region(&person_box, config.crop_padding, image.dims) else {
            log::warn!("image {}: skipping zero-area person crop", image.image_id);
            continue;
        };
        let helmets = ctx.query(
            Some(region),
            &config.prompts.helmet,
            config.helmet_threshold(),
        )?;
        let evidence = helmets.iter().map(|h| h.1).fold(0.0, f64::max);
        associations.push(AssociationRecord {
            person_box,
            head_box: None,
            helmet_worn: !helmets.is_empty(),
            helmet_evidence_score: evidence,
        });
        for (bbox, score) in helmets {
            predictions.push(Prediction {
                label: ClassLabel::Helmet,
                bbox,
                score,
                provenance: vec![person_box, bbox],
            });
        }
    }
    Ok((predictions, associations))
}

pub fn run_cascaded<B: DetectorBackend + ?Sized>(
    image: &AnnotatedImage,
    backend: &B,
    config: &PipelineConfig,
) -> Result<(Vec<Prediction>, Vec<AssociationRecord>), PipelineError> {
    require(config, Strategy::Cascaded)?;
    let ctx = Ctx { image, backend };
    let persons = ctx.query(None, &config.prompts.person, config.person_threshold())?;
    let mut predictions = Vec::new();
    let mut associations = Vec::new();

    for (person_box, person_score) in persons {
        predictions.push(Prediction {
            label: ClassLabel::Person,
            bbox: person_box,
            score: person_score,
            provenance: vec![person_box],
        });
        let Some(person_region) = crop_region(&person_box, config.crop_padding, image.dims) else {
            log::warn!("image {}: skipping zero-area person crop", image.image_id);
            continue;
        };
        let heads = ctx.query(
            Some(person_region),
            &config.prompts.head,
            config.head_threshold(),
        )?;
        if heads.is_empty() {
            associations.push(AssociationRecord {
                person_box,
                head_box: None,
                helmet_worn: false,
                helmet_evidence_score: 0.0,
            });
            continue;
        }
        // every head in the crop is kept, bystanders included
        for (head_box, head_score) in heads {
            let (worn, evidence) = match crop_region(&head_box, config.crop_padding, image.dims) {
                Some(head_region) => {
                    let helmets = ctx.query(
                        Some(head_region),
                        &config.prompts.helmet,
                        config.helmet_threshold(),
                    )?;
                    let evidence = helmets.iter().map(|h| h.1).fold(0.0, f64::max);
                    (!helmets.is_empty(), evidence)
                }
                None => {
                    log::warn!("image {}: skipping zero-area head crop", image.image_id);
                    (false, 0.0)
                }
            };
            predictions.push(Prediction {
                label: if worn {
                    ClassLabel::HeadWithHelmet
                } else {
                    ClassLabel::Head
                },
                bbox: head_box,
                score: head_score,
                provenance: vec![person_box, head_box],
            });
            associations.push(AssociationRecord {
                person_box,
                head_box: Some(head_box),
                helmet_worn: worn,
                helmet_evidence_score: evidence,
            });
        }
    }
    Ok((predictions, associations))
}

/// Runs the configured strategy on one image.
pub fn run_image<B: DetectorBackend + ?Sized>(
    image: &AnnotatedImage,
    backend: &B,
    config: &PipelineConfig,
) -> Result<ImageRun, PipelineError> {
    let (predictions, associations) = match config.strategy {
        Strategy::Direct => (run_direct(image, backend, config)?, Vec::new()),
        Strategy::Nested => run_nested(image, backend, config)?,
        Strategy::Cascaded => run_cascaded(image, backend, config)?,
    };
    Ok(ImageRun {
        image_id: image.image_id.clone(),
        strategy: config.strategy,
        predictions,
        associations,
    })
}

/// Runs the strategy over many images on `workers` threads. Output is ordered
/// by image id regardless of scheduling.
pub fn run_all<B: DetectorBackend + ?Sized>(
    images: &[AnnotatedImage],
    backend: &B,
    config: &PipelineConfig,
    workers: usize,
) -> Result<Vec<ImageRun>, PipelineError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let mut runs = pool.install(|| {
        images
            .par_iter()
            .map(|img| run_image(img, backend, config))
            .collect::<Result<Vec<_>, _>>()
    })?;
    runs.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{
        Detection, FixtureBackend, OracleBackend, OracleConfig, PromptOverride, ScoreDist,
    };
    use crate::backend::{Fixture, FixtureDetection, FixtureRecord};
    use crate::dataset::{ObjectInstance, Source};

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn image(instances: Vec<(ClassLabel, BBox)>) -> AnnotatedImage {
        AnnotatedImage {
            image_id: "img".into(),
            source: Source::Shel5k,
            file_name: None,
            dims: ImageDims::new(400, 300).unwrap(),
            instances: instances
                .into_iter()
                .map(|(label, bbox)| ObjectInstance { label, bbox })
                .collect(),
        }
    }

    fn oracle(img: &AnnotatedImage, cfg: OracleConfig) -> OracleBackend {
        OracleBackend::new(cfg, [img]).unwrap()
    }

    fn count(preds: &[Prediction], label: ClassLabel) -> usize {
        preds.iter().filter(|p| p.label == label).count()
    }

    #[test]
    fn direct_finds_every_helmet_including_ground() {
        use ClassLabel::*;
        let img = image(vec![
            (Person, b(10., 10., 90., 290.)),
            (Helmet, b(30., 12., 60., 35.)),
            (Person, b(150., 10., 230., 290.)),
            (Helmet, b(170., 12., 200., 35.)),
            (Helmet, b(320., 260., 360., 290.)),
        ]);
        let o = oracle(&img, OracleConfig::perfect());
        let cfg = PipelineConfig::new(Strategy::Direct, 0.1);
        let preds = run_direct(&img, &o, &cfg).unwrap();
        assert_eq!(preds.len(), 3);
        assert!(preds
            .iter()
            .all(|p| p.label == Helmet && p.provenance.len() == 1));

        let none = oracle(
            &img,
            OracleConfig {
                miss_rate: 1.0,
                ..Default::default()
            },
        );
        assert!(run_direct(&img, &none, &cfg).unwrap().is_empty());
    }

    #[test]
    fn direct_passes_fixture_boxes_through() {
        let img = image(vec![]);
        let mut fixture = Fixture::default();
        fixture
            .insert(FixtureRecord {
                image_id: "img".into(),
                region: None,
                prompt: "helmet".into(),
                threshold: 0.1,
                detections: vec![
                    FixtureDetection {
                        bbox: b(5.5, 6.25, 20., 30.),
                        score: 0.9,
                    },
                    FixtureDetection {
                        bbox: b(100., 100., 130., 125.),
                        score: 0.4,
                    },
                ],
            })
            .unwrap();
        let fb = FixtureBackend::new(fixture, "mem");
        let preds = run_direct(&img, &fb, &PipelineConfig::new(Strategy::Direct, 0.1)).unwrap();
        let boxes: Vec<_> = preds.iter().map(|p| p.bbox).collect();
        assert_eq!(
            boxes,
            vec![b(5.5, 6.25, 20., 30.), b(100., 100., 130., 125.)]
        );
    }

    #[test]
    fn nested_associates_worn_helmet_and_misses_ground_helmet() {
        use ClassLabel::*;
        let img = image(vec![
            (Person, b(10., 10., 90., 290.)),
            (Helmet, b(30., 12., 60., 35.)),
            (Helmet, b(320., 260., 360., 290.)),
        ]);
        let o = oracle(&img, OracleConfig::perfect());
        let (preds, assoc) =
            run_nested(&img, &o, &PipelineConfig::new(Strategy::Nested, 0.1)).unwrap();
        assert_eq!(count(&preds, Person), 1);
        assert_eq!(count(&preds, Helmet), 1);
        let helmet = preds.iter().find(|p| p.label == Helmet).unwrap();
        assert_eq!(helmet.bbox, b(30., 12., 60., 35.));
        assert_eq!(helmet.provenance.len(), 2);
        assert_eq!(assoc.len(), 1);
        assert!(assoc[0].helmet_worn);
        assert_eq!(assoc[0].helmet_evidence_score, 1.0);
    }

    #[test]
    fn nested_person_without_helmet_detection() {
        use ClassLabel::*;
        let img = image(vec![
            (Person, b(10., 10., 90., 290.)),
            (Helmet, b(30., 12., 60., 35.)),
        ]);
        let mut cfg = OracleConfig::perfect();
        cfg.prompt_overrides.insert(
            "helmet".into(),
            PromptOverride {
                miss_rate: None,
                tp_score: Some(ScoreDist::Fixed { value: 0.05 }),
            },
        );
        let o = oracle(&img, cfg);
        let (preds, assoc) =
            run_nested(&img, &o, &PipelineConfig::new(Strategy::Nested, 0.1)).unwrap();
        assert_eq!(count(&preds, Helmet), 0);
        assert_eq!(assoc.len(), 1);
        assert!(!assoc[0].helmet_worn);
        assert_eq!(assoc[0].helmet_evidence_score, 0.0);
    }

    fn helmeted_person() -> AnnotatedImage {
        use ClassLabel::*;
        image(vec![
            (Person, b(10., 10., 90., 290.)),
            (HeadWithHelmet, b(30., 12., 60., 45.)),
            (Person, b(150., 10., 230., 290.)),
            (Head, b(170., 14., 200., 44.)),
        ])
    }

    #[test]
    fn cascaded_labels_heads_by_helmet_presence() {
        use ClassLabel::*;
        let img = helmeted_person();
        let o = oracle(&img, OracleConfig::perfect());
        let (preds, assoc) =
            run_cascaded(&img, &o, &PipelineConfig::new(Strategy::Cascaded, 0.1)).unwrap();
        assert_eq!(count(&preds, Person), 2);
        assert_eq!(count(&preds, HeadWithHelmet), 1);
        assert_eq!(count(&preds, Head), 1);
        let worn: Vec<_> = assoc.iter().filter(|a| a.helmet_worn).collect();
        assert_eq!(worn.len(), 1);
        assert_eq!(worn[0].head_box, Some(b(30., 12., 60., 45.)));
        assert_eq!(worn[0].person_box, b(10., 10., 90., 290.));
        for p in preds.iter().filter(|p| p.label != Person) {
            assert_eq!(p.provenance.len(), 2);
            assert!(p.provenance[0].contains(&p.bbox, 0.5));
        }
    }

    #[test]
    fn cascaded_without_heads_cannot_find_helmets() {
        use ClassLabel::*;
        let img = helmeted_person();
        let mut cfg = OracleConfig::perfect();
        cfg.prompt_overrides.insert(
            "head".into(),
            PromptOverride {
                miss_rate: Some(1.0),
                tp_score: None,
            },
        );
        let o = oracle(&img, cfg);
        let (preds, assoc) =
            run_cascaded(&img, &o, &PipelineConfig::new(Strategy::Cascaded, 0.1)).unwrap();
        assert_eq!(count(&preds, Person), 2);
        assert_eq!(preds.len(), 2);
        assert_eq!(assoc.len(), 2);
        assert!(assoc.iter().all(|a| a.head_box.is_none() && !a.helmet_worn));
    }

    #[test]
    fn cascaded_stage_thresholds() {
        use ClassLabel::*;
        let img = helmeted_person();
        let mut ocfg = OracleConfig::perfect();
        ocfg.prompt_overrides.insert(
            "helmet".into(),
            PromptOverride {
                miss_rate: None,
                tp_score: Some(ScoreDist::Fixed { value: 0.2 }),
            },
        );
        let o = oracle(&img, ocfg);
        let mut cfg = PipelineConfig::new(Strategy::Cascaded, 0.1);
        // helmet evidence 0.2 clears a 0.1 stage threshold ...
        let (preds, _) = run_cascaded(&img, &o, &cfg).unwrap();
        assert_eq!(count(&preds, HeadWithHelmet), 1);
        // ... but not a 0.3 one: thresholds (0.1, 0.1, 0.3)
        cfg.stage_thresholds.helmet = Some(0.3);
        let (preds, assoc) = run_cascaded(&img, &o, &cfg).unwrap();
        assert_eq!(count(&preds, HeadWithHelmet), 0);
        assert_eq!(count(&preds, Head), 2);
        assert!(assoc.iter().all(|a| !a.helmet_worn));
    }

    #[test]
    fn strategy_mismatch_and_validation() {
        let img = helmeted_person();
        let o = oracle(&img, OracleConfig::perfect());
        assert!(matches!(
            run_direct(&img, &o, &PipelineConfig::new(Strategy::Nested, 0.1)),
            Err(PipelineError::InvalidConfig(_))
        ));
        let mut cfg = PipelineConfig::new(Strategy::Direct, 0.1);
        cfg.crop_padding = 0.6;
        assert!(cfg.validate().is_err());
        assert!(PipelineConfig::new(Strategy::Direct, 1.1)
            .validate()
            .is_err());
    }

    #[test]
    fn backend_errors_carry_image_context() {
        let img = helmeted_person();
        let o = OracleBackend::new(OracleConfig::perfect(), std::iter::empty()).unwrap();
        let err = run_direct(&img, &o, &PipelineConfig::new(Strategy::Direct, 0.1)).unwrap_err();
        assert!(err.is_backend_failure());
        assert!(err.to_string().contains("img"));
    }

    #[test]
    fn out_of_frame_detections_are_clamped() {
        struct Wide;
        impl DetectorBackend for Wide {
            fn detect(&self, q: &DetectionQuery) -> Result<Vec<Detection>, BackendError> {
                Ok(vec![Detection {
                    bbox: BBox::new(-20., -20., 500., 40.).unwrap(),
                    score: 0.9,
                    prompt: q.prompt.clone(),
                }])
            }
            fn descriptor(&self) -> String {
                "wide".into()
            }
        }
        let img = image(vec![]);
        let preds = run_direct(&img, &Wide, &PipelineConfig::new(Strategy::Direct, 0.1)).unwrap();
        assert_eq!(preds[0].bbox, b(0., 0., 400., 40.));
    }

    #[test]
    fn padding_expands_crops() {
        use ClassLabel::*;
        // helmet pokes out above the person box
        let img = image(vec![
            (Person, b(10., 40., 90., 290.)),
            (Helmet, b(30., 20., 60., 50.)),
        ]);
        let o = oracle(
            &img,
            OracleConfig {
                visibility: 1.0,
                ..Default::default()
            },
        );
        let mut cfg = PipelineConfig::new(Strategy::Nested, 0.1);
        let (preds, _) = run_nested(&img, &o, &cfg).unwrap();
        assert_eq!(count(&preds, Helmet), 0);
        cfg.crop_padding = 0.1;
        let (preds, _) = run_nested(&img, &o, &cfg).unwrap();
        assert_eq!(count(&preds, Helmet), 1);
    }
}
