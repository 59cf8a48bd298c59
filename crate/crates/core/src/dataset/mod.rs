//! Benchmark dataset construction from the two VOC-annotated source datasets.
//!
//! Raw annotations are parsed into [`SourceImage`]s carrying the source dataset's
//! own class vocabulary ([`SourceClass`]). [`remap_classes`] is the only way to
//! obtain an [`AnnotatedImage`], so canonical [`ClassLabel`]s never mix with raw
//! class names.

mod manifest;
mod voc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, ImageDims};

pub use manifest::{
    assemble_manifest, build_manifest, load_sources, read_manifest, table1_expectations,
    table1_view, verify_stats, write_manifest, ClassCheck, DatasetManifest, DatasetSources,
    ExpectedCounts, ManifestStats, SourceStats, VerifyReport, MANIFEST_SCHEMA_VERSION,
};
pub use voc::{parse_voc_xml, parse_voc_xml_with_id};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unknown class name {0:?}")]
    UnknownClass(String),
    #[error("object {0} has a degenerate box")]
    DegenerateBox(usize),
    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<DatasetError>,
    },
    #[error("duplicate image id {0:?} within one source")]
    DuplicateImageId(String),
    #[error("source directory {0} does not exist")]
    MissingSource(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Canonical benchmark classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Person,
    Head,
    HeadWithHelmet,
    Helmet,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [
        ClassLabel::Person,
        ClassLabel::Head,
        ClassLabel::HeadWithHelmet,
        ClassLabel::Helmet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::Person => "person",
            ClassLabel::Head => "head",
            ClassLabel::HeadWithHelmet => "head_with_helmet",
            ClassLabel::Helmet => "helmet",
        }
    }

    /// Row title used in statistics tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            ClassLabel::Person => "Persons",
            ClassLabel::Head => "Heads",
            ClassLabel::HeadWithHelmet => "Head with Helmets",
            ClassLabel::Helmet => "Helmets",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Class vocabulary of the two source datasets.
///
/// Hard Hat Workers uses `helmet`, `head`, `person`; SHEL5k uses `helmet`,
/// `head_with_helmet`, `person_with_helmet`, `head`, `person_no_helmet` and
/// `face`. Separators (`_`, `-`, space) and case are normalized before lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceClass {
    Helmet,
    Head,
    Person,
    HeadWithHelmet,
    PersonWithHelmet,
    PersonWithoutHelmet,
    Face,
}

impl FromStr for SourceClass {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .split(|c: char| c == '_' || c == '-' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        Ok(match norm.as_str() {
            "helmet" | "hardhat" | "hard hat" => SourceClass::Helmet,
            "head" | "head without helmet" => SourceClass::Head,
            "person" => SourceClass::Person,
            "head with helmet" => SourceClass::HeadWithHelmet,
            "person with helmet" => SourceClass::PersonWithHelmet,
            "person without helmet" | "person no helmet" => SourceClass::PersonWithoutHelmet,
            "face" => SourceClass::Face,
            _ => return Err(DatasetError::UnknownClass(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    HardHatWorkers,
    Shel5k,
}

impl Source {
    pub fn id_prefix(&self) -> &'static str {
        match self {
            Source::HardHatWorkers => "hhw",
            Source::Shel5k => "shel5k",
        }
    }
}

/// Which class selection a manifest is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemapMode {
    /// Persons, bare heads, helmeted heads. Isolated helmet boxes are dropped.
    Cascaded,
    /// Persons and every helmet box, including helmets not worn by anyone.
    DirectNested,
}

impl RemapMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RemapMode::Cascaded => "cascaded",
            RemapMode::DirectNested => "direct_nested",
        }
    }
}

impl FromStr for RemapMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cascaded" => Ok(RemapMode::Cascaded),
            "direct_nested" | "direct-nested" => Ok(RemapMode::DirectNested),
            other => Err(format!("unknown manifest mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInstance {
    pub class: SourceClass,
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// VOC `difficult` flag. Parsed for completeness, not used in scoring.
    #[serde(default)]
    pub difficult: bool,
    #[serde(default)]
    pub truncated: bool,
}

/// One parsed annotation file, still in the source dataset's vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceImage {
    pub image_id: String,
    pub source: Source,
    pub file_name: Option<String>,
    pub dims: ImageDims,
    pub instances: Vec<SourceInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub label: ClassLabel,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub image_id: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
    pub dims: ImageDims,
    pub instances: Vec<ObjectInstance>,
}

impl AnnotatedImage {
    pub fn instances_of(&self, label: ClassLabel) -> impl Iterator<Item = &ObjectInstance> {
        self.instances.iter().filter(move |i| i.label == label)
    }
}

/// Keeps the images that carry at least one `person` annotation.
///
/// Meant for the Hard Hat Workers source, where most images lack person boxes
/// even though people are visible.
pub fn filter_person_annotated(images: Vec<SourceImage>) -> Vec<SourceImage> {
    images
        .into_iter()
        .filter(|img| img.instances.iter().any(|i| i.class == SourceClass::Person))
        .collect()
}

/// Canonical label for a source class under `mode`, `None` when dropped.
pub fn remap_class(class: SourceClass, mode: RemapMode) -> Option<ClassLabel> {
    use SourceClass::*;
    match (class, mode) {
        (Person | PersonWithHelmet | PersonWithoutHelmet, _) => Some(ClassLabel::Person),
        (Face, _) => None,
        (HeadWithHelmet, RemapMode::Cascaded) => Some(ClassLabel::HeadWithHelmet),
        (Head, RemapMode::Cascaded) => Some(ClassLabel::Head),
        (Helmet, RemapMode::Cascaded) => None,
        (Helmet, RemapMode::DirectNested) => Some(ClassLabel::Helmet),
        (Head | HeadWithHelmet, RemapMode::DirectNested) => None,
    }
}

/// Converts source labels to canonical ones. Boxes are copied unchanged.
pub fn remap_classes(image: &SourceImage, mode: RemapMode) -> AnnotatedImage {
    AnnotatedImage {
        image_id: image.image_id.clone(),
        source: image.source,
        file_name: image.file_name.clone(),
        dims: image.dims,
        instances: image
            .instances
            .iter()
            .filter_map(|inst| {
                remap_class(inst.class, mode).map(|label| ObjectInstance {
                    label,
                    bbox: inst.bbox,
                })
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(class: SourceClass, x: f64) -> SourceInstance {
        SourceInstance {
            class,
            bbox: BBox::new(x, 0.0, x + 10.0, 10.0).unwrap(),
            difficult: false,
            truncated: false,
        }
    }

    fn image(id: &str, classes: &[SourceClass]) -> SourceImage {
        SourceImage {
            image_id: id.into(),
            source: Source::HardHatWorkers,
            file_name: None,
            dims: ImageDims::new(100, 100).unwrap(),
            instances: classes
                .iter()
                .enumerate()
                .map(|(i, c)| inst(*c, i as f64 * 10.0))
                .collect(),
        }
    }

    #[test]
    fn source_class_names() {
        let cases = [
            ("helmet", SourceClass::Helmet),
            ("head", SourceClass::Head),
            ("person", SourceClass::Person),
            ("head with helmet", SourceClass::HeadWithHelmet),
            ("head_with_helmet", SourceClass::HeadWithHelmet),
            ("Person With Helmet", SourceClass::PersonWithHelmet),
            ("person without helmet", SourceClass::PersonWithoutHelmet),
            ("person_no_helmet", SourceClass::PersonWithoutHelmet),
            ("face", SourceClass::Face),
        ];
        for (s, c) in cases {
            assert_eq!(s.parse::<SourceClass>().unwrap(), c, "{s}");
        }
        assert!(matches!(
            "vest".parse::<SourceClass>(),
            Err(DatasetError::UnknownClass(n)) if n == "vest"
        ));
    }

    #[test]
    fn filter_keeps_person_images_only() {
        use SourceClass::*;
        let out = filter_person_annotated(vec![
            image("a", &[Helmet, Head]),
            image("b", &[Person, Helmet]),
            image("c", &[]),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].image_id, "b");
        assert!(filter_person_annotated(Vec::new()).is_empty());
        // idempotent
        assert_eq!(filter_person_annotated(out.clone()), out);
    }

    #[test]
    fn cascaded_remap() {
        use SourceClass::*;
        let img = image(
            "x",
            &[
                PersonWithHelmet,
                PersonWithoutHelmet,
                Person,
                HeadWithHelmet,
                Head,
                Helmet,
                Face,
            ],
        );
        let out = remap_classes(&img, RemapMode::Cascaded);
        let labels: Vec<_> = out.instances.iter().map(|i| i.label).collect();
        assert_eq!(
            labels,
            vec![
                ClassLabel::Person,
                ClassLabel::Person,
                ClassLabel::Person,
                ClassLabel::HeadWithHelmet,
                ClassLabel::Head
            ]
        );
    }

    #[test]
    fn direct_nested_remap_keeps_every_helmet() {
        use SourceClass::*;
        let img = image(
            "x",
            &[PersonWithHelmet, Helmet, Helmet, Face, HeadWithHelmet],
        );
        let out = remap_classes(&img, RemapMode::DirectNested);
        let labels: Vec<_> = out.instances.iter().map(|i| i.label).collect();
        assert_eq!(
            labels,
            vec![ClassLabel::Person, ClassLabel::Helmet, ClassLabel::Helmet]
        );
    }

    #[test]
    fn remap_preserves_boxes() {
        use SourceClass::*;
        let img = image("x", &[Person, Helmet, Head, HeadWithHelmet, Face]);
        for mode in [RemapMode::Cascaded, RemapMode::DirectNested] {
            let out = remap_classes(&img, mode);
            for o in &out.instances {
                assert!(img.instances.iter().any(|s| s.bbox == o.bbox));
            }
        }
    }
}
