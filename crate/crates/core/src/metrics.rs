//! Detection scoring: IoU matching, threshold sweeps, PR points and AP.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::DetectorBackend;
use crate::dataset::{AnnotatedImage, ClassLabel, DatasetManifest, ObjectInstance, RemapMode};
use crate::geometry::iou;
use crate::pipelines::{run_all, ImageRun, PipelineConfig, PipelineError, Prediction, Strategy};

pub const DEFAULT_IOU_CUT: f64 = 0.5;

/// Description of the AP integration rule, stored with every report.
pub const AP_CONVENTION: &str = "trapezoid over observed PR points sorted by recall, \
plus a rectangle from recall 0 to the lowest observed recall at that point's precision; \
no interpolation";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("manifest mode {found} does not match the {strategy} strategy (needs {expected})")]
    ModeMismatch {
        strategy: Strategy,
        expected: &'static str,
        found: &'static str,
    },
    #[error("no images in manifest")]
    NoImages,
    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// True/false positive and false negative counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl Counts {
    /// TP / (TP + FP), or 1 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        let denom = self.tp + self.fp;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }

    /// TP / (TP + FN), or 0 when there is no ground truth.
    pub fn recall(&self) -> f64 {
        let denom = self.tp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            self.tp as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEntry {
    /// Index into the prediction slice passed to [`match_predictions`].
    pub prediction: usize,
    pub score: f64,
    /// Index into the ground-truth slice, `None` for a false positive.
    pub gt: Option<usize>,
    /// Best IoU against any same-class ground truth box.
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMatch {
    pub entries: Vec<MatchEntry>,
    pub counts: Counts,
    pub unmatched_gt: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub per_class: BTreeMap<ClassLabel, ClassMatch>,
}

impl MatchResult {
    pub fn counts(&self, label: ClassLabel) -> Counts {
        self.per_class
            .get(&label)
            .map(|c| c.counts)
            .unwrap_or_default()
    }

    pub fn total(&self) -> Counts {
        self.per_class
            .values()
            .fold(Counts::default(), |acc, c| acc + c.counts)
    }
}

/// Greedy matching within each class.
///
/// Predictions are visited by descending score (ties: box corners, then input
/// position). Each takes the unmatched same-class ground truth with the highest
/// IoU if that IoU is at least `iou_cut`; otherwise it is a false positive.
/// Ground truth left unmatched counts as false negatives.
pub fn match_predictions(
    predictions: &[Prediction],
    gt: &[ObjectInstance],
    iou_cut: f64,
) -> MatchResult {
    let mut result = MatchResult::default();
    let mut labels: Vec<ClassLabel> = predictions
        .iter()
        .map(|p| p.label)
        .chain(gt.iter().map(|g| g.label))
        .collect();
    labels.sort();
    labels.dedup();

    for label in labels {
        let mut order: Vec<usize> = (0..predictions.len())
            .filter(|&i| predictions[i].label == label)
            .collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (&predictions[a], &predictions[b]);
            pb.score
                .total_cmp(&pa.score)
                .then_with(|| pa.bbox.lexicographic_cmp(&pb.bbox))
                .then(a.cmp(&b))
        });
        let gt_idx: Vec<usize> = (0..gt.len()).filter(|&i| gt[i].label == label).collect();
        let mut taken = vec![false; gt_idx.len()];
        let mut class = ClassMatch::default();

        for pi in order {
            let p = &predictions[pi];
            let mut best_any = 0.0f64;
            let mut best: Option<(usize, f64)> = None;
            for (slot, &gi) in gt_idx.iter().enumerate() {
                let v = iou(&p.bbox, &gt[gi].bbox);
                best_any = best_any.max(v);
                if taken[slot] || v < iou_cut {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bs, bv)) => {
                        v > bv
                            || (v == bv
                                && gt[gi].bbox.lexicographic_cmp(&gt[gt_idx[bs]].bbox).is_lt())
                    }
                };
                if better {
                    best = Some((slot, v));
                }
            }
            match best {
                Some((slot, v)) => {
                    taken[slot] = true;
                    class.counts.tp += 1;
                    class.entries.push(MatchEntry {
                        prediction: pi,
                        score: p.score,
                        gt: Some(gt_idx[slot]),
                        iou: v,
                    });
                }
                None => {
                    class.counts.fp += 1;
                    class.entries.push(MatchEntry {
                        prediction: pi,
                        score: p.score,
                        gt: None,
                        iou: best_any,
                    });
                }
            }
        }
        class.unmatched_gt = gt_idx
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(&g, _)| g)
            .collect();
        class.counts.fn_ = class.unmatched_gt.len() as u64;
        result.per_class.insert(label, class);
    }
    result
}

/// Ground truth a strategy is scored against for `class`.
///
/// Persons: every person. Heads: every head without a helmet. Helmets (direct
/// and nested): every helmet box, including helmets not worn by anyone.
/// Helmeted heads (cascaded): every head-with-helmet box. Classes a strategy
/// does not predict yield an empty view.
pub fn ground_truth_view(
    image: &AnnotatedImage,
    strategy: Strategy,
    class: ClassLabel,
) -> Vec<ObjectInstance> {
    if !strategy.evaluated_classes().contains(&class) {
        return Vec::new();
    }
    image.instances_of(class).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

impl PRPoint {
    pub fn from_counts(threshold: f64, counts: Counts) -> Self {
        Self {
            threshold,
            precision: counts.precision(),
            recall: counts.recall(),
        }
    }
}

/// Points in integration order: recall ascending, ties by threshold descending,
/// then precision descending.
pub fn sorted_for_integration(points: &[PRPoint]) -> Vec<PRPoint> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| {
        a.recall
            .total_cmp(&b.recall)
            .then(b.threshold.total_cmp(&a.threshold))
            .then(b.precision.total_cmp(&a.precision))
    });
    pts
}

/// Area under the PR polyline. See [`AP_CONVENTION`].
pub fn average_precision(points: &[PRPoint]) -> f64 {
    let pts = sorted_for_integration(points);
    let Some(first) = pts.first() else {
        return 0.0;
    };
    let mut area = first.recall * first.precision;
    for w in pts.windows(2) {
        area += (w[1].recall - w[0].recall) * (w[0].precision + w[1].precision) / 2.0;
    }
    area.clamp(0.0, 1.0)
}

/// Strictly increasing confidence thresholds in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdGrid(Vec<f64>);

impl ThresholdGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::InvalidGrid("empty grid".into()));
        }
        if !values.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(MetricsError::InvalidGrid(
                "thresholds must lie in [0, 1]".into(),
            ));
        }
        if !values.windows(2).all(|w| w[0] < w[1]) {
            return Err(MetricsError::InvalidGrid(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(Self(values))
    }

    /// `start, start + step, ...` up to and including `stop`, each value rounded
    /// to 1e-9.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self, MetricsError> {
        let valid = step > 0.0 && stop >= start;
        if !valid {
            return Err(MetricsError::InvalidGrid(format!(
                "need step > 0 and stop >= start, got {start}:{stop}:{step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        let values = (0..=n)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for ThresholdGrid {
    /// 0.05 to 0.5 in steps of 0.05.
    fn default() -> Self {
        Self::range(0.05, 0.5, 0.05).expect("default grid is valid")
    }
}

impl TryFrom<Vec<f64>> for ThresholdGrid {
    type Error = MetricsError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ThresholdGrid> for Vec<f64> {
    fn from(g: ThresholdGrid) -> Self {
        g.0
    }
}

impl FromStr for ThresholdGrid {
    type Err = MetricsError;

    /// `start:stop:step` or a comma-separated list.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |_| MetricsError::InvalidGrid(format!("cannot parse {s:?}"));
        if s.contains(':') {
            let parts: Vec<f64> = s
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(bad)?;
            match parts.as_slice() {
                [start, stop, step] => Self::range(*start, *stop, *step),
                _ => Err(MetricsError::InvalidGrid(format!(
                    "expected start:stop:step, got {s:?}"
                ))),
            }
        } else {
            let values = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(bad)?;
            Self::new(values)
        }
    }
}

/// Counts per class for a set of runs scored against `manifest`.
pub fn score_runs(
    manifest: &DatasetManifest,
    runs: &[ImageRun],
    strategy: Strategy,
    iou_cut: f64,
) -> BTreeMap<ClassLabel, Counts> {
    let classes = strategy.evaluated_classes();
    runs.par_iter()
        .filter_map(|run| manifest.image(&run.image_id).map(|img| (run, img)))
        .map(|(run, img)| {
            let mut counts = BTreeMap::new();
            for &class in classes {
                let gt = ground_truth_view(img, strategy, class);
                let preds: Vec<Prediction> = run
                    .predictions
                    .iter()
                    .filter(|p| p.label == class)
                    .cloned()
                    .collect();
                counts.insert(class, match_predictions(&preds, &gt, iou_cut).counts(class));
            }
            counts
        })
        .reduce(
            || classes.iter().map(|&c| (c, Counts::default())).collect(),
            |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                a
            },
        )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCurve {
    pub points: Vec<PRPoint>,
    pub counts: Vec<Counts>,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strategy: Strategy,
    pub manifest_mode: RemapMode,
    pub backend: String,
    pub grid: Vec<f64>,
    pub iou_cut: f64,
    pub ap_convention: String,
    pub images: usize,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub classes: BTreeMap<ClassLabel, ClassCurve>,
}

impl EvalReport {
    pub fn ap(&self, class: ClassLabel) -> Option<f64> {
        self.classes.get(&class).map(|c| c.ap)
    }

    /// Checks that every stored AP matches its points.
    pub fn consistent(&self) -> bool {
        self.classes.values().all(|c| {
            (0.0..=1.0).contains(&c.ap) && (average_precision(&c.points) - c.ap).abs() < 1e-12
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid: ThresholdGrid,
    pub iou_cut: f64,
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            grid: ThresholdGrid::default(),
            iou_cut: DEFAULT_IOU_CUT,
            workers: 1,
        }
    }
}

/// Runs the strategy at every grid threshold and aggregates counts over all
/// images. A backend failure stops the sweep; points computed so far are kept
/// and the report is marked incomplete.
pub fn sweep<B: DetectorBackend + ?Sized>(
    manifest: &DatasetManifest,
    backend: &B,
    config: &PipelineConfig,
    options: &SweepOptions,
) -> Result<EvalReport, MetricsError> {
    let strategy = config.strategy;
    if manifest.mode != strategy.manifest_mode() {
        return Err(MetricsError::ModeMismatch {
            strategy,
            expected: strategy.manifest_mode().as_str(),
            found: manifest.mode.as_str(),
        });
    }
    if manifest.images.is_empty() {
        return Err(MetricsError::NoImages);
    }
    config.validate()?;

    let mut classes: BTreeMap<ClassLabel, ClassCurve> = strategy
        .evaluated_classes()
        .iter()
        .map(|&c| {
            (
                c,
                ClassCurve {
                    points: Vec::new(),
                    counts: Vec::new(),
                    ap: 0.0,
                },
            )
        })
        .collect();
    let mut complete = true;
    let mut error = None;

    for &t in options.grid.values() {
        let cfg = config.with_threshold(t);
        let runs = match run_all(&manifest.images, backend, &cfg, options.workers) {
            Ok(runs) => runs,
            Err(e) if e.is_backend_failure() => {
                log::error!("sweep aborted at threshold {t}: {e}");
                complete = false;
                error = Some(format!("threshold {t}: {e}"));
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let counts = score_runs(manifest, &runs, strategy, options.iou_cut);
        for (class, curve) in classes.iter_mut() {
            let c = counts.get(class).copied().unwrap_or_default();
            curve.counts.push(c);
            curve.points.push(PRPoint::from_counts(t, c));
        }
    }
    for curve in classes.values_mut() {
        curve.ap = if curve.points.is_empty() {
            0.0
        } else {
            average_precision(&curve.points)
        };
    }

    Ok(EvalReport {
        strategy,
        manifest_mode: manifest.mode,
        backend: backend.descriptor(),
        grid: options.grid.values().to_vec(),
        iou_cut: options.iou_cut,
        ap_convention: AP_CONVENTION.to_string(),
        images: manifest.images.len(),
        complete,
        error,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use proptest::strategy::Strategy as _;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn pred(label: ClassLabel, bbox: BBox, score: f64) -> Prediction {
        Prediction {
            label,
            bbox,
            score,
            provenance: vec![bbox],
        }
    }

    fn gt(label: ClassLabel, bbox: BBox) -> ObjectInstance {
        ObjectInstance { label, bbox }
    }

    const H: ClassLabel = ClassLabel::Helmet;

    #[test]
    fn exact_prediction_is_tp() {
        let r = match_predictions(
            &[pred(H, b(0., 0., 10., 10.), 0.9)],
            &[gt(H, b(0., 0., 10., 10.))],
            0.5,
        );
        assert_eq!(
            r.counts(H),
            Counts {
                tp: 1,
                fp: 0,
                fn_: 0
            }
        );
    }

    #[test]
    fn duplicate_prediction_is_fp() {
        let g = b(0., 0., 10., 10.);
        let dup = b(0., 0., 10., 9.); // IoU 0.9
        assert!((iou(&g, &dup) - 0.9).abs() < 1e-12);
        let r = match_predictions(&[pred(H, dup, 0.8), pred(H, g, 0.9)], &[gt(H, g)], 0.5);
        assert_eq!(
            r.counts(H),
            Counts {
                tp: 1,
                fp: 1,
                fn_: 0
            }
        );
        let entry = r.per_class[&H]
            .entries
            .iter()
            .find(|e| e.gt.is_some())
            .unwrap();
        assert_eq!(entry.prediction, 1);
    }

    #[test]
    fn low_overlap_is_fp_and_fn() {
        let g = b(0., 0., 10., 10.);
        let p = b(0., 0., 10., 4.); // IoU 0.4
        let r = match_predictions(&[pred(H, p, 0.9)], &[gt(H, g)], 0.5);
        assert_eq!(
            r.counts(H),
            Counts {
                tp: 0,
                fp: 1,
                fn_: 1
            }
        );
        assert!((r.per_class[&H].entries[0].iou - 0.4).abs() < 1e-12);
    }

    #[test]
    fn iou_exactly_at_cut_counts() {
        let r = match_predictions(
            &[pred(H, b(0., 0., 10., 5.), 0.9)],
            &[gt(H, b(0., 0., 10., 10.))],
            0.5,
        );
        assert_eq!(r.counts(H).tp, 1);
    }

    #[test]
    fn classes_never_cross_match() {
        let g = b(0., 0., 10., 10.);
        let r = match_predictions(
            &[pred(ClassLabel::Helmet, g, 0.9)],
            &[gt(ClassLabel::HeadWithHelmet, g)],
            0.5,
        );
        assert_eq!(
            r.counts(ClassLabel::Helmet),
            Counts {
                tp: 0,
                fp: 1,
                fn_: 0
            }
        );
        assert_eq!(
            r.counts(ClassLabel::HeadWithHelmet),
            Counts {
                tp: 0,
                fp: 0,
                fn_: 1
            }
        );
    }

    #[test]
    fn ap_examples() {
        let full: Vec<PRPoint> = (1..=10)
            .map(|i| PRPoint {
                threshold: 1.0 - i as f64 / 10.0,
                precision: 1.0,
                recall: i as f64 / 10.0,
            })
            .collect();
        assert_eq!(average_precision(&full), 1.0);
        let single = [PRPoint {
            threshold: 0.3,
            precision: 0.5,
            recall: 0.5,
        }];
        assert_eq!(average_precision(&single), 0.25);
        let perfect = [PRPoint {
            threshold: 0.1,
            precision: 1.0,
            recall: 1.0,
        }];
        assert_eq!(average_precision(&perfect), 1.0);
        let empty = [
            PRPoint {
                threshold: 0.1,
                precision: 1.0,
                recall: 0.0,
            },
            PRPoint {
                threshold: 0.2,
                precision: 1.0,
                recall: 0.0,
            },
        ];
        assert_eq!(average_precision(&empty), 0.0);
        // hand integration: rect 0.2*1.0 + trap (0.6-0.2)*(1.0+0.5)/2 = 0.2 + 0.3
        let two = [
            PRPoint {
                threshold: 0.1,
                precision: 0.5,
                recall: 0.6,
            },
            PRPoint {
                threshold: 0.4,
                precision: 1.0,
                recall: 0.2,
            },
        ];
        assert!((average_precision(&two) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn counts_edge_cases() {
        assert_eq!(Counts::default().precision(), 1.0);
        assert_eq!(Counts::default().recall(), 0.0);
        let c = Counts {
            tp: 3,
            fp: 1,
            fn_: 1,
        };
        assert_eq!(c.precision(), 0.75);
        assert_eq!(c.recall(), 0.75);
    }

    #[test]
    fn grid_parsing() {
        let g: ThresholdGrid = "0.05:0.5:0.05".parse().unwrap();
        assert_eq!(g.values().len(), 10);
        assert_eq!(g.values()[2], 0.15);
        assert_eq!(*g.values().last().unwrap(), 0.5);
        assert_eq!(g, ThresholdGrid::default());
        let l: ThresholdGrid = "0.1, 0.2,0.4".parse().unwrap();
        assert_eq!(l.values(), &[0.1, 0.2, 0.4]);
        assert!("0.2,0.1".parse::<ThresholdGrid>().is_err());
        assert!("0.1:1.5:0.5".parse::<ThresholdGrid>().is_err());
        assert!("0.1:0.5:0".parse::<ThresholdGrid>().is_err());
        assert!("a:b:c".parse::<ThresholdGrid>().is_err());
    }

    #[test]
    fn ground_truth_views() {
        use ClassLabel::*;
        let img = AnnotatedImage {
            image_id: "i".into(),
            source: crate::dataset::Source::Shel5k,
            file_name: None,
            dims: crate::geometry::ImageDims::new(100, 100).unwrap(),
            instances: vec![
                gt(Head, b(0., 0., 5., 5.)),
                gt(Head, b(10., 0., 15., 5.)),
                gt(HeadWithHelmet, b(20., 0., 25., 5.)),
                gt(HeadWithHelmet, b(30., 0., 35., 5.)),
                gt(HeadWithHelmet, b(40., 0., 45., 5.)),
                gt(Person, b(0., 0., 50., 90.)),
            ],
        };
        assert_eq!(ground_truth_view(&img, Strategy::Cascaded, Head).len(), 2);
        assert_eq!(
            ground_truth_view(&img, Strategy::Cascaded, HeadWithHelmet).len(),
            3
        );
        assert_eq!(
            ground_truth_view(&img, Strategy::Cascaded, Person),
            ground_truth_view(&img, Strategy::Nested, Person)
        );
        assert!(ground_truth_view(&img, Strategy::Direct, Person).is_empty());
    }

    fn arb_pred() -> impl proptest::strategy::Strategy<Value = Prediction> {
        (0u8..6, 0u8..6, 1u8..5, 1u8..5, 0u8..4).prop_map(|(x, y, w, h, s)| {
            let (x, y) = (f64::from(x), f64::from(y));
            pred(
                H,
                b(x, y, x + f64::from(w), y + f64::from(h)),
                f64::from(s) / 4.0,
            )
        })
    }

    proptest! {
        #[test]
        fn match_invariant_under_input_order(
            preds in proptest::collection::vec(arb_pred(), 0..6),
            gts in proptest::collection::vec(arb_pred(), 0..5),
            rot in 0usize..6,
        ) {
            let gts: Vec<ObjectInstance> = gts.into_iter().map(|p| gt(H, p.bbox)).collect();
            let a = match_predictions(&preds, &gts, 0.5);
            let mut rotated = preds.clone();
            if !rotated.is_empty() {
                let k = rot % rotated.len();
                rotated.rotate_left(k);
            }
            rotated.reverse();
            let b2 = match_predictions(&rotated, &gts, 0.5);
            prop_assert_eq!(a.counts(H), b2.counts(H));
            let c = a.counts(H);
            prop_assert_eq!(c.tp + c.fn_, gts.len() as u64);
            prop_assert_eq!(c.tp + c.fp, preds.len() as u64);
            // each ground truth matched at most once
            let mut seen: Vec<usize> = a.per_class.get(&H).map(|m| m.entries.iter().filter_map(|e| e.gt).collect()).unwrap_or_default();
            let n = seen.len();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
        }

        #[test]
        fn recall_non_increasing_in_threshold(
            preds in proptest::collection::vec(arb_pred(), 0..8),
            gts in proptest::collection::vec(arb_pred(), 1..5),
        ) {
            let gts: Vec<ObjectInstance> = gts.into_iter().map(|p| gt(H, p.bbox)).collect();
            let mut last = f64::INFINITY;
            for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let kept: Vec<Prediction> = preds.iter().filter(|p| p.score >= t).cloned().collect();
                let r = match_predictions(&kept, &gts, 0.5).counts(H).recall();
                prop_assert!(r <= last + 1e-15);
                last = r;
            }
        }

        #[test]
        fn ap_bounded(points in proptest::collection::vec((0.0..1.0f64, 0.0..=1.0f64, 0.0..=1.0f64), 1..12)) {
            let pts: Vec<PRPoint> = points.into_iter().map(|(t, p, r)| PRPoint { threshold: t, precision: p, recall: r }).collect();
            let ap = average_precision(&pts);
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }
}
