//! Box overlays for eyeballing matches and misses.
//!
//! Colors: matched ground truth green, missed ground truth yellow, true
//! positives blue, false positives red.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hardhat_core::metrics::{ground_truth_view, match_predictions};
use hardhat_core::pipelines::ImageRun;
use hardhat_core::{AnnotatedImage, BBox, DatasetManifest, Strategy};
use image::{Rgb, RgbImage};

const GT_MATCHED: Rgb<u8> = Rgb([40, 200, 60]);
const GT_MISSED: Rgb<u8> = Rgb([250, 210, 0]);
const TRUE_POSITIVE: Rgb<u8> = Rgb([40, 120, 255]);
const FALSE_POSITIVE: Rgb<u8> = Rgb([230, 30, 30]);
const BACKGROUND: Rgb<u8> = Rgb([90, 90, 90]);

fn draw_box(img: &mut RgbImage, b: &BBox, color: Rgb<u8>, thickness: u32) {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return;
    }
    let clampx = |v: f64| (v.max(0.0) as u32).min(w - 1);
    let clampy = |v: f64| (v.max(0.0) as u32).min(h - 1);
    let (x0, y0) = (clampx(b.xmin()), clampy(b.ymin()));
    let (x1, y1) = (clampx(b.xmax() - 1.0), clampy(b.ymax() - 1.0));
    for t in 0..thickness {
        for x in x0..=x1 {
            img.put_pixel(x, (y0 + t).min(y1), color);
            img.put_pixel(x, y1.saturating_sub(t).max(y0), color);
        }
        for y in y0..=y1 {
            img.put_pixel((x0 + t).min(x1), y, color);
            img.put_pixel(x1.saturating_sub(t).max(x0), y, color);
        }
    }
}

fn base_image(image: &AnnotatedImage, roots: &[PathBuf]) -> RgbImage {
    let base_id = image.image_id.rsplit('/').next().unwrap_or(&image.image_id);
    let mut names: Vec<String> = image.file_name.iter().cloned().collect();
    names.extend(["jpg", "jpeg", "png"].map(|e| format!("{base_id}.{e}")));
    for root in roots {
        for name in &names {
            let path = root.join(name);
            if path.is_file() {
                match image::open(&path) {
                    Ok(img) => return img.to_rgb8(),
                    Err(e) => log::warn!("{}: {e}", path.display()),
                }
            }
        }
    }
    RgbImage::from_pixel(image.dims.width, image.dims.height, BACKGROUND)
}

/// Draws every run onto its image and writes `<image id>.png` into `dir`.
/// Returns the number of files written.
pub fn write_overlays(
    manifest: &DatasetManifest,
    runs: &[ImageRun],
    strategy: Strategy,
    iou_cut: f64,
    roots: &[PathBuf],
    dir: &Path,
    only_mismatches: bool,
) -> Result<usize> {
    let mut written = 0;
    for run in runs {
        let Some(image) = manifest.image(&run.image_id) else {
            continue;
        };
        let mut mismatched = false;
        let mut draws: Vec<(BBox, Rgb<u8>)> = Vec::new();
        for &class in strategy.evaluated_classes() {
            let gt = ground_truth_view(image, strategy, class);
            let preds: Vec<_> = run
                .predictions
                .iter()
                .filter(|p| p.label == class)
                .cloned()
                .collect();
            let result = match_predictions(&preds, &gt, iou_cut);
            let Some(m) = result.per_class.get(&class) else {
                continue;
            };
            mismatched |= m.counts.fp > 0 || m.counts.fn_ > 0;
            for (i, g) in gt.iter().enumerate() {
                let color = if m.unmatched_gt.contains(&i) {
                    GT_MISSED
                } else {
                    GT_MATCHED
                };
                draws.push((g.bbox, color));
            }
            for e in &m.entries {
                let color = if e.gt.is_some() {
                    TRUE_POSITIVE
                } else {
                    FALSE_POSITIVE
                };
                draws.push((preds[e.prediction].bbox, color));
            }
        }
        if only_mismatches && !mismatched {
            continue;
        }
        let mut img = base_image(image, roots);
        for (b, color) in &draws {
            draw_box(&mut img, b, *color, 2);
        }
        let name = format!("{}.png", run.image_id.replace('/', "_"));
        let path = dir.join(name);
        img.save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        written += 1;
    }
    Ok(written)
}
