//! Seeded synthetic construction-site scenes for controlled experiments.
//!
//! Each scene lays persons out in non-overlapping columns. Every person wears a
//! helmet, annotated the way the SHEL5k source does it: a `person with helmet`
//! box, a `head with helmet` box and a `helmet` box on top of the head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Source, SourceClass, SourceImage, SourceInstance};
use crate::geometry::{BBox, ImageDims};

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub images: usize,
    pub persons_per_image: usize,
    /// Number of images that additionally get one helmet lying on the ground,
    /// away from every person.
    pub ground_helmets: usize,
    pub seed: u64,
}

fn instance(class: SourceClass, bbox: BBox) -> SourceInstance {
    SourceInstance {
        class,
        bbox,
        difficult: false,
        truncated: false,
    }
}

pub fn worn_helmet_scenes(spec: &SceneSpec) -> Vec<SourceImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per = spec.persons_per_image.max(1);
    let column = 120.0;
    let width = column * per as f64;
    let height = 480.0;
    let dims = ImageDims::new(width as u32, height as u32).expect("positive dims");

    (0..spec.images)
        .map(|i| {
            let mut instances = Vec::new();
            for p in 0..per {
                let x0 = p as f64 * column + rng.random_range(5.0..20.0);
                let pw = rng.random_range(60.0..90.0);
                let y0 = rng.random_range(20.0..60.0);
                let ph = rng.random_range(250.0..330.0);
                let person = BBox::new(x0, y0, x0 + pw, y0 + ph).expect("valid person");
                let hw = pw * rng.random_range(0.35..0.5);
                let hx = x0 + (pw - hw) * rng.random_range(0.3..0.7);
                let hy = y0 + rng.random_range(2.0..8.0);
                let hh = hw * rng.random_range(1.0..1.3);
                let head = BBox::new(hx, hy, hx + hw, hy + hh).expect("valid head");
                let helmet = BBox::new(hx - 2.0, hy - 1.0, hx + hw + 2.0, hy + hh * 0.5)
                    .expect("valid helmet");
                instances.push(instance(SourceClass::PersonWithHelmet, person));
                instances.push(instance(SourceClass::HeadWithHelmet, head));
                instances.push(instance(SourceClass::Helmet, helmet));
            }
            if i < spec.ground_helmets {
                // bottom strip below every person box
                let gx = rng.random_range(10.0..width - 50.0);
                let ground = BBox::new(gx, height - 40.0, gx + 36.0, height - 12.0)
                    .expect("valid ground helmet");
                instances.push(instance(SourceClass::Helmet, ground));
            }
            SourceImage {
                image_id: format!("synthetic_{i:06}"),
                source: Source::Shel5k,
                file_name: None,
                dims,
                instances,
            }
        })
        .collect()
}
