//! Manifest assembly, persistence and statistics checks.
//!
//! On disk a manifest is line-delimited JSON: a header record
//! `{"schema_version", "mode", "stats"}` followed by one [`AnnotatedImage`] per
//! line, ordered by image id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{
    filter_person_annotated, parse_voc_xml_with_id, remap_classes, AnnotatedImage, ClassLabel,
    DatasetError, RemapMode, Source, SourceImage,
};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Annotation directories of the two source datasets. Each directory is
/// searched recursively for `*.xml` files.
#[derive(Debug, Clone, Default)]
pub struct DatasetSources {
    pub hard_hat_workers: Option<PathBuf>,
    pub shel5k: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub images: u64,
    pub per_class: BTreeMap<ClassLabel, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub images: u64,
    pub per_class: BTreeMap<ClassLabel, u64>,
    pub total: u64,
    /// Same counts split by source dataset.
    pub per_source: BTreeMap<Source, SourceStats>,
}

impl ManifestStats {
    pub fn compute(images: &[AnnotatedImage]) -> Self {
        let mut stats = ManifestStats::default();
        for img in images {
            stats.images += 1;
            let src = stats.per_source.entry(img.source).or_default();
            src.images += 1;
            for inst in &img.instances {
                *stats.per_class.entry(inst.label).or_default() += 1;
                *src.per_class.entry(inst.label).or_default() += 1;
                stats.total += 1;
            }
        }
        stats
    }

    pub fn count(&self, label: ClassLabel) -> u64 {
        self.per_class.get(&label).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub mode: RemapMode,
    pub images: Vec<AnnotatedImage>,
    pub stats: ManifestStats,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    mode: RemapMode,
    stats: ManifestStats,
}

impl DatasetManifest {
    /// Sorts images by id and computes statistics.
    pub fn from_images(mode: RemapMode, mut images: Vec<AnnotatedImage>) -> Self {
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        let stats = ManifestStats::compute(&images);
        Self {
            mode,
            images,
            stats,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let recomputed = ManifestStats::compute(&self.images);
        if recomputed != self.stats {
            return Err(DatasetError::InvalidManifest(
                "stored stats do not match the image records".into(),
            ));
        }
        let mut seen = HashSet::new();
        for img in &self.images {
            if !seen.insert(img.image_id.as_str()) {
                return Err(DatasetError::InvalidManifest(format!(
                    "duplicate image id {:?}",
                    img.image_id
                )));
            }
            let full = crate::geometry::BBox::full(img.dims);
            if let Some(bad) = img.instances.iter().find(|i| !full.contains(&i.bbox, 0.0)) {
                return Err(DatasetError::InvalidManifest(format!(
                    "image {:?}: box {:?} exceeds image bounds",
                    img.image_id, bad.bbox
                )));
            }
        }
        Ok(())
    }

    pub fn image(&self, image_id: &str) -> Option<&AnnotatedImage> {
        self.images
            .binary_search_by(|img| img.image_id.as_str().cmp(image_id))
            .ok()
            .map(|i| &self.images[i])
    }
}

fn xml_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    if !dir.is_dir() {
        return Err(DatasetError::MissingSource(dir.display().to_string()));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir) {
        let entry = entry.map_err(|e| DatasetError::Io(e.into()))?;
        let path = entry.path();
        if entry.file_type().is_file()
            && path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("xml"))
        {
            files.push(path.to_path_buf());
        }
    }
    files.sort();
    Ok(files)
}

fn load_source(dir: &Path, source: Source) -> Result<Vec<SourceImage>, DatasetError> {
    let files = xml_files(dir)?;
    let images = files
        .par_iter()
        .map(|path| {
            let wrap = |e: DatasetError| DatasetError::InFile {
                path: path.display().to_string(),
                source: Box::new(e),
            };
            let xml = fs::read_to_string(path).map_err(|e| wrap(e.into()))?;
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default();
            parse_voc_xml_with_id(&xml, source, stem).map_err(wrap)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut seen = HashSet::new();
    for img in &images {
        if !seen.insert(img.image_id.clone()) {
            return Err(DatasetError::DuplicateImageId(img.image_id.clone()));
        }
    }
    Ok(match source {
        Source::HardHatWorkers => filter_person_annotated(images),
        Source::Shel5k => images,
    })
}

/// Parses both sources, drops person-free Hard Hat Workers images and resolves
/// id collisions between the sources by prefixing the source name.
pub fn load_sources(sources: &DatasetSources) -> Result<Vec<SourceImage>, DatasetError> {
    let mut all = Vec::new();
    if let Some(dir) = &sources.hard_hat_workers {
        all.extend(load_source(dir, Source::HardHatWorkers)?);
    }
    if let Some(dir) = &sources.shel5k {
        all.extend(load_source(dir, Source::Shel5k)?);
    }

    let mut owners: HashMap<String, HashSet<Source>> = HashMap::new();
    for img in &all {
        owners
            .entry(img.image_id.clone())
            .or_default()
            .insert(img.source);
    }
    for img in &mut all {
        if owners[&img.image_id].len() > 1 {
            img.image_id = format!("{}/{}", img.source.id_prefix(), img.image_id);
        }
    }
    Ok(all)
}

pub fn build_manifest(
    sources: &DatasetSources,
    mode: RemapMode,
) -> Result<DatasetManifest, DatasetError> {
    let images = load_sources(sources)?;
    Ok(assemble_manifest(&images, mode))
}

/// Remaps already-loaded source images into a manifest for `mode`.
pub fn assemble_manifest(images: &[SourceImage], mode: RemapMode) -> DatasetManifest {
    DatasetManifest::from_images(
        mode,
        images.iter().map(|i| remap_classes(i, mode)).collect(),
    )
}

pub fn write_manifest<W: Write>(
    manifest: &DatasetManifest,
    mut out: W,
) -> Result<(), DatasetError> {
    let header = Header {
        schema_version: MANIFEST_SCHEMA_VERSION,
        mode: manifest.mode,
        stats: manifest.stats.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for img in &manifest.images {
        serde_json::to_writer(&mut out, img)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header: Header = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(DatasetError::InvalidManifest("empty manifest file".into())),
    };
    if header.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(DatasetError::InvalidManifest(format!(
            "unsupported schema version {}",
            header.schema_version
        )));
    }
    let mut images = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        images.push(serde_json::from_str::<AnnotatedImage>(&line)?);
    }
    let sorted = images.windows(2).all(|w| w[0].image_id < w[1].image_id);
    if !sorted {
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    }
    let manifest = DatasetManifest {
        mode: header.mode,
        images,
        stats: header.stats,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Expected instance counts; absent entries are not checked.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    #[serde(default)]
    pub per_class: BTreeMap<ClassLabel, u64>,
    #[serde(default)]
    pub total: Option<u64>,
    #[serde(default)]
    pub images: Option<u64>,
}

/// Published ground-truth statistics of the combined benchmark.
pub fn table1_expectations() -> ExpectedCounts {
    ExpectedCounts {
        per_class: BTreeMap::from([
            (ClassLabel::HeadWithHelmet, 16_652),
            (ClassLabel::Helmet, 19_856),
            (ClassLabel::Head, 6_158),
            (ClassLabel::Person, 20_631),
        ]),
        total: Some(63_297),
        images: Some(5_210),
    }
}

/// Combines the two manifests' statistics the way the published table does:
/// persons, heads and helmeted heads from the cascaded manifest, helmets from
/// the direct/nested one.
pub fn table1_view(cascaded: &ManifestStats, direct_nested: &ManifestStats) -> ManifestStats {
    let mut view = ManifestStats {
        images: cascaded.images,
        ..Default::default()
    };
    for label in ClassLabel::ALL {
        let from = if label == ClassLabel::Helmet {
            direct_nested
        } else {
            cascaded
        };
        let n = from.count(label);
        view.per_class.insert(label, n);
        view.total += n;
    }
    let sources: std::collections::BTreeSet<Source> = cascaded
        .per_source
        .keys()
        .chain(direct_nested.per_source.keys())
        .copied()
        .collect();
    for source in sources {
        let c = cascaded
            .per_source
            .get(&source)
            .cloned()
            .unwrap_or_default();
        let d = direct_nested
            .per_source
            .get(&source)
            .cloned()
            .unwrap_or_default();
        let mut s = SourceStats {
            images: c.images,
            per_class: BTreeMap::new(),
        };
        for label in ClassLabel::ALL {
            let from = if label == ClassLabel::Helmet { &d } else { &c };
            s.per_class
                .insert(label, from.per_class.get(&label).copied().unwrap_or(0));
        }
        view.per_source.insert(source, s);
    }
    view
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCheck {
    pub key: String,
    pub observed: u64,
    pub expected: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<ClassCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out =
            String::from("| Class | Observed | Expected | Result |\n|---|---:|---:|---|\n");
        for c in &self.checks {
            let diff = c.observed as i64 - c.expected as i64;
            let status = if c.pass {
                "ok".to_string()
            } else {
                format!("MISMATCH ({diff:+})")
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                c.key, c.observed, c.expected, status
            ));
            if let Some(note) = &c.note {
                out.push_str(&format!("|   {note} | | | |\n"));
            }
        }
        out
    }
}

/// Compares observed counts against expectations, one line per expected entry.
pub fn verify_stats(stats: &ManifestStats, expected: &ExpectedCounts) -> VerifyReport {
    let mut checks = Vec::new();
    for (label, &exp) in &expected.per_class {
        let observed = stats.count(*label);
        let note = (*label == ClassLabel::Helmet).then(|| {
            let by_source: Vec<String> = stats
                .per_source
                .iter()
                .map(|(src, s)| {
                    format!(
                        "{}: {}",
                        src.id_prefix(),
                        s.per_class.get(&ClassLabel::Helmet).copied().unwrap_or(0)
                    )
                })
                .collect();
            format!("helmets by source: {}", by_source.join(", "))
        });
        checks.push(ClassCheck {
            key: label.display_name().to_string(),
            observed,
            expected: exp,
            pass: observed == exp,
            note,
        });
    }
    if let Some(exp) = expected.total {
        checks.push(ClassCheck {
            key: "Total".into(),
            observed: stats.total,
            expected: exp,
            pass: stats.total == exp,
            note: None,
        });
    }
    if let Some(exp) = expected.images {
        checks.push(ClassCheck {
            key: "Images".into(),
            observed: stats.images,
            expected: exp,
            pass: stats.images == exp,
            note: None,
        });
    }
    VerifyReport { checks }
}
