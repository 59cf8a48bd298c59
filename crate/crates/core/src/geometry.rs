//! Axis-aligned box arithmetic in pixel space.
//!
//! Frame convention: origin at the top-left corner, x grows rightward, y grows
//! downward. Boxes are half-open, so `area = (xmax - xmin) * (ymax - ymin)` and
//! two boxes that only share an edge do not overlap.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box coordinates must be finite: ({0}, {1}, {2}, {3})")]
    NonFinite(f64, f64, f64, f64),
    #[error("box has non-positive area: ({0}, {1}, {2}, {3})")]
    Degenerate(f64, f64, f64, f64),
    #[error("box has zero area after clamping to {width}x{height}")]
    ZeroAreaAfterClamp { width: u32, height: u32 },
    #[error("box does not intersect the crop region")]
    OutsideRegion,
    #[error("image dimensions must be positive, got {0}x{1}")]
    InvalidDims(u32, u32),
}

/// Axis-aligned rectangle `[xmin, xmax) x [ymin, ymax)`.
///
/// Construction enforces finite coordinates and strictly positive area, so every
/// `BBox` in circulation is valid. Serialized as `[xmin, ymin, xmax, ymax]`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

impl BBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self, GeometryError> {
        if !(xmin.is_finite() && ymin.is_finite() && xmax.is_finite() && ymax.is_finite()) {
            return Err(GeometryError::NonFinite(xmin, ymin, xmax, ymax));
        }
        if xmin >= xmax || ymin >= ymax {
            return Err(GeometryError::Degenerate(xmin, ymin, xmax, ymax));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// Whole-image box `[0, width) x [0, height)`.
    pub fn full(dims: ImageDims) -> Self {
        Self {
            xmin: 0.0,
            ymin: 0.0,
            xmax: f64::from(dims.width),
            ymax: f64::from(dims.height),
        }
    }

    #[inline]
    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    #[inline]
    pub fn ymin(&self) -> f64 {
        self.ymin
    }

    #[inline]
    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    #[inline]
    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.xmin, self.ymin, self.xmax, self.ymax]
    }

    /// Overlap region, or `None` when the boxes are disjoint or only touch.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let xmin = self.xmin.max(other.xmin);
        let ymin = self.ymin.max(other.ymin);
        let xmax = self.xmax.min(other.xmax);
        let ymax = self.ymax.min(other.ymax);
        BBox::new(xmin, ymin, xmax, ymax).ok()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.xmax.min(other.xmax) - self.xmin.max(other.xmin);
        let h = self.ymax.min(other.ymax) - self.ymin.max(other.ymin);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<BBox, GeometryError> {
        BBox::new(
            self.xmin + dx,
            self.ymin + dy,
            self.xmax + dx,
            self.ymax + dy,
        )
    }

    pub fn scale(&self, s: f64) -> Result<BBox, GeometryError> {
        BBox::new(self.xmin * s, self.ymin * s, self.xmax * s, self.ymax * s)
    }

    /// Grows the box by `fraction` of its width and height on every side.
    pub fn expand(&self, fraction: f64) -> Result<BBox, GeometryError> {
        let dx = self.width() * fraction;
        let dy = self.height() * fraction;
        BBox::new(
            self.xmin - dx,
            self.ymin - dy,
            self.xmax + dx,
            self.ymax + dy,
        )
    }

    /// True when `other` lies inside `self`, allowing `tol` pixels of slack.
    pub fn contains(&self, other: &BBox, tol: f64) -> bool {
        other.xmin >= self.xmin - tol
            && other.ymin >= self.ymin - tol
            && other.xmax <= self.xmax + tol
            && other.ymax <= self.ymax + tol
    }

    /// Total order on the corner coordinates, used for deterministic tie-breaks.
    pub fn lexicographic_cmp(&self, other: &BBox) -> std::cmp::Ordering {
        self.xmin
            .total_cmp(&other.xmin)
            .then(self.ymin.total_cmp(&other.ymin))
            .then(self.xmax.total_cmp(&other.xmax))
            .then(self.ymax.total_cmp(&other.ymax))
    }
}

impl fmt::Debug for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BBox({}, {}, {}, {})",
            self.xmin, self.ymin, self.xmax, self.ymax
        )
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawDims {
    width: u32,
    height: u32,
}

impl TryFrom<RawDims> for ImageDims {
    type Error = GeometryError;

    fn try_from(raw: RawDims) -> Result<Self, Self::Error> {
        ImageDims::new(raw.width, raw.height)
    }
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidDims(width, height));
        }
        Ok(Self { width, height })
    }
}

/// Intersection over union. Zero for disjoint or edge-touching boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Limits a box to `[0, width] x [0, height]`.
pub fn clamp(bbox: &BBox, dims: ImageDims) -> Result<BBox, GeometryError> {
    let w = f64::from(dims.width);
    let h = f64::from(dims.height);
    BBox::new(
        bbox.xmin.clamp(0.0, w),
        bbox.ymin.clamp(0.0, h),
        bbox.xmax.clamp(0.0, w),
        bbox.ymax.clamp(0.0, h),
    )
    .map_err(|_| GeometryError::ZeroAreaAfterClamp {
        width: dims.width,
        height: dims.height,
    })
}

/// Maps a box expressed in the pixel frame of `crop_region` back to the frame of
/// the image the crop was taken from. Crops share the original pixel scale, so
/// this is a translation by the crop's top-left corner, followed by clamping when
/// `dims` is supplied.
pub fn crop_to_original(
    crop_region: &BBox,
    local: &BBox,
    dims: Option<ImageDims>,
) -> Result<BBox, GeometryError> {
    let global = local.translate(crop_region.xmin, crop_region.ymin)?;
    match dims {
        Some(d) => clamp(&global, d),
        None => Ok(global),
    }
}

/// Inverse of [`crop_to_original`]: clips `global` to the crop window and
/// expresses the remainder in the crop's frame.
pub fn original_to_crop(crop_region: &BBox, global: &BBox) -> Result<BBox, GeometryError> {
    let inside = crop_region
        .intersection(global)
        .ok_or(GeometryError::OutsideRegion)?;
    inside.translate(-crop_region.xmin, -crop_region.ymin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    /// Counts sub-pixel cells of side `1/sub` covered by each box.
    fn grid_iou(a: &BBox, bb: &BBox, sub: u32) -> f64 {
        let xs = a.xmin.min(bb.xmin);
        let ys = a.ymin.min(bb.ymin);
        let xe = a.xmax.max(bb.xmax);
        let ye = a.ymax.max(bb.ymax);
        let step = 1.0 / f64::from(sub);
        let nx = ((xe - xs) / step).ceil() as usize;
        let ny = ((ye - ys) / step).ceil() as usize;
        let (mut inter, mut union) = (0u64, 0u64);
        for i in 0..nx {
            let cx = xs + (i as f64 + 0.5) * step;
            for j in 0..ny {
                let cy = ys + (j as f64 + 0.5) * step;
                let in_a = cx >= a.xmin && cx < a.xmax && cy >= a.ymin && cy < a.ymax;
                let in_b = cx >= bb.xmin && cx < bb.xmax && cy >= bb.ymin && cy < bb.ymax;
                inter += u64::from(in_a && in_b);
                union += u64::from(in_a || in_b);
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(0., 0., 10., 10.), &b(0., 0., 10., 10.)), 1.0);
        assert_eq!(iou(&b(0., 0., 10., 10.), &b(20., 20., 30., 30.)), 0.0);
        let v = iou(&b(0., 0., 2., 2.), &b(1., 1., 3., 3.));
        assert_abs_diff_eq!(v, 1.0 / 7.0, epsilon = 1e-15);
        // grid oracle at 8x subdivision agrees exactly for integer corners
        assert_abs_diff_eq!(
            grid_iou(&b(0., 0., 2., 2.), &b(1., 1., 3., 3.), 8),
            1.0 / 7.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fractional_boxes_match_fine_grid() {
        let a = b(0.25, 0.5, 3.75, 2.5);
        let c = b(1.5, 0.25, 4.25, 3.0);
        assert_abs_diff_eq!(iou(&a, &c), grid_iou(&a, &c, 16), epsilon = 1e-12);
    }

    #[test]
    fn touching_boxes_have_zero_iou() {
        assert_eq!(iou(&b(0., 0., 5., 5.), &b(5., 0., 10., 5.)), 0.0);
        assert!(b(0., 0., 5., 5.)
            .intersection(&b(5., 0., 10., 5.))
            .is_none());
    }

    #[test]
    fn construction_rejects_bad_boxes() {
        assert!(matches!(
            BBox::new(5., 0., 5., 3.),
            Err(GeometryError::Degenerate(..))
        ));
        assert!(matches!(
            BBox::new(f64::NAN, 0., 5., 3.),
            Err(GeometryError::NonFinite(..))
        ));
        assert!(ImageDims::new(0, 10).is_err());
    }

    #[test]
    fn crop_to_original_examples() {
        let out =
            crop_to_original(&b(100., 50., 300., 250.), &b(10., 20., 60., 80.), None).unwrap();
        assert_eq!(out, b(110., 70., 160., 130.));

        let dims = ImageDims::new(640, 480).unwrap();
        let local = b(12.5, 3.0, 40.0, 90.0);
        assert_eq!(
            crop_to_original(&BBox::full(dims), &local, Some(dims)).unwrap(),
            local
        );

        let dims = ImageDims::new(20, 20).unwrap();
        let out = crop_to_original(&b(5., 5., 15., 15.), &b(-2., -2., 4., 4.), Some(dims)).unwrap();
        assert_eq!(out, b(3., 3., 9., 9.));
    }

    #[test]
    fn crop_to_original_clamps_and_rejects_offscreen() {
        let dims = ImageDims::new(20, 20).unwrap();
        let out =
            crop_to_original(&b(10., 10., 20., 20.), &b(5., 5., 15., 15.), Some(dims)).unwrap();
        assert_eq!(out, b(15., 15., 20., 20.));
        assert!(matches!(
            crop_to_original(&b(10., 10., 20., 20.), &b(12., 12., 15., 15.), Some(dims)),
            Err(GeometryError::ZeroAreaAfterClamp { .. })
        ));
    }

    #[test]
    fn original_to_crop_inverts_examples() {
        assert_eq!(
            original_to_crop(&b(100., 50., 300., 250.), &b(110., 70., 160., 130.)).unwrap(),
            b(10., 20., 60., 80.)
        );
        // the clamped example comes back clipped to the crop window
        assert_eq!(
            original_to_crop(&b(5., 5., 15., 15.), &b(3., 3., 9., 9.)).unwrap(),
            b(0., 0., 4., 4.)
        );
    }

    #[test]
    fn original_to_crop_clips_partial_overlap() {
        let crop = b(10., 10., 30., 40.);
        let global = b(0., 25., 20., 60.);
        // interval oracle: x [max(10,0), min(30,20)) = [10,20), y [max(10,25), min(40,60)) = [25,40)
        let ox = (10f64.max(0.), 30f64.min(20.));
        let oy = (10f64.max(25.), 40f64.min(60.));
        let expected = b(ox.0 - 10., oy.0 - 10., ox.1 - 10., oy.1 - 10.);
        assert_eq!(original_to_crop(&crop, &global).unwrap(), expected);
        assert_eq!(
            original_to_crop(&crop, &b(50., 50., 60., 60.)),
            Err(GeometryError::OutsideRegion)
        );
    }

    #[test]
    fn clamp_examples() {
        let d = ImageDims::new(100, 100).unwrap();
        assert_eq!(
            clamp(&b(-5., -5., 10., 10.), d).unwrap(),
            b(0., 0., 10., 10.)
        );
        assert_eq!(
            clamp(&b(90., 90., 120., 120.), d).unwrap(),
            b(90., 90., 100., 100.)
        );
        assert_eq!(
            clamp(&b(150., 150., 200., 200.), d),
            Err(GeometryError::ZeroAreaAfterClamp {
                width: 100,
                height: 100
            })
        );
    }

    #[test]
    fn serde_uses_corner_array() {
        let s = serde_json::to_string(&b(1., 2., 3., 4.5)).unwrap();
        assert_eq!(s, "[1.0,2.0,3.0,4.5]");
        assert!(serde_json::from_str::<BBox>("[3.0,2.0,1.0,4.0]").is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (
            -500.0..500.0f64,
            -500.0..500.0f64,
            0.5..300.0f64,
            0.5..300.0f64,
        )
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let v = iou(&a, &c);
            prop_assert_eq!(v, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn iou_translation_and_scale_invariant(
            a in arb_box(), c in arb_box(),
            tx in -100.0..100.0f64, ty in -100.0..100.0f64, s in 0.1..10.0f64,
        ) {
            let v = iou(&a, &c);
            let at = a.translate(tx, ty).unwrap();
            let ct = c.translate(tx, ty).unwrap();
            prop_assert!((iou(&at, &ct) - v).abs() < 1e-9);
            let as_ = a.scale(s).unwrap();
            let cs = c.scale(s).unwrap();
            prop_assert!((iou(&as_, &cs) - v).abs() < 1e-12);
        }

        #[test]
        fn crop_round_trip(
            x in -200.0..200.0f64, y in -200.0..200.0f64, w in 1.0..400.0f64, h in 1.0..400.0f64,
            fx in 0.0..0.9f64, fy in 0.0..0.9f64, fw in 0.05..1.0f64, fh in 0.05..1.0f64,
        ) {
            let region = BBox::new(x, y, x + w, y + h).unwrap();
            let ix0 = x + fx * w;
            let iy0 = y + fy * h;
            let inner = BBox::new(ix0, iy0, ix0 + fw * (x + w - ix0), iy0 + fh * (y + h - iy0)).unwrap();
            let local = original_to_crop(&region, &inner).unwrap();
            let back = crop_to_original(&region, &local, None).unwrap();
            for (p, q) in back.to_array().iter().zip(inner.to_array()) {
                prop_assert!((p - q).abs() <= 0.5);
            }
        }
    }
}
