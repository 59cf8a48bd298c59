//! PASCAL-VOC annotation parsing.

use std::path::Path;

use roxmltree::{Document, Node};

use super::{DatasetError, Source, SourceClass, SourceImage, SourceInstance};
use crate::geometry::{self, BBox, ImageDims};

/// Parses one VOC annotation. The image id is the stem of `<filename>`.
pub fn parse_voc_xml(xml: &str, source: Source) -> Result<SourceImage, DatasetError> {
    parse(xml, source, None)
}

/// Like [`parse_voc_xml`] but with an explicit image id, for annotation files
/// whose `<filename>` is missing or unreliable.
pub fn parse_voc_xml_with_id(
    xml: &str,
    source: Source,
    image_id: &str,
) -> Result<SourceImage, DatasetError> {
    parse(xml, source, Some(image_id))
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn number(node: Node<'_, '_>, name: &str) -> Result<f64, DatasetError> {
    let text = child_text(node, name)
        .ok_or_else(|| DatasetError::MalformedXml(format!("missing <{name}>")))?;
    text.parse::<f64>()
        .map_err(|_| DatasetError::MalformedXml(format!("<{name}> is not a number: {text:?}")))
}

fn flag(node: Node<'_, '_>, name: &str) -> bool {
    matches!(child_text(node, name), Some("1") | Some("true"))
}

fn parse(xml: &str, source: Source, id: Option<&str>) -> Result<SourceImage, DatasetError> {
    let doc = Document::parse(xml).map_err(|e| DatasetError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("annotation") {
        return Err(DatasetError::MalformedXml(format!(
            "root element is <{}>, expected <annotation>",
            root.tag_name().name()
        )));
    }

    let file_name = child_text(root, "filename").map(str::to_string);
    let image_id = match (id, &file_name) {
        (Some(id), _) => id.to_string(),
        (None, Some(f)) => Path::new(f)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(f)
            .to_string(),
        (None, None) => return Err(DatasetError::MalformedXml("missing <filename>".into())),
    };

    let size =
        child(root, "size").ok_or_else(|| DatasetError::MalformedXml("missing <size>".into()))?;
    let width = number(size, "width")?;
    let height = number(size, "height")?;
    if !(width >= 1.0
        && height >= 1.0
        && width <= f64::from(u32::MAX)
        && height <= f64::from(u32::MAX))
    {
        return Err(DatasetError::MalformedXml(format!(
            "invalid image size {width}x{height}"
        )));
    }
    let dims = ImageDims::new(width as u32, height as u32)
        .map_err(|e| DatasetError::MalformedXml(e.to_string()))?;

    let mut instances = Vec::new();
    for (index, obj) in root
        .children()
        .filter(|c| c.has_tag_name("object"))
        .enumerate()
    {
        let name = child_text(obj, "name")
            .ok_or_else(|| DatasetError::MalformedXml(format!("object {index} has no <name>")))?;
        let class: SourceClass = name.parse()?;
        let bndbox = child(obj, "bndbox")
            .ok_or_else(|| DatasetError::MalformedXml(format!("object {index} has no <bndbox>")))?;
        let (x0, y0, x1, y1) = (
            number(bndbox, "xmin")?,
            number(bndbox, "ymin")?,
            number(bndbox, "xmax")?,
            number(bndbox, "ymax")?,
        );
        if !(x1 > x0 && y1 > y0) {
            return Err(DatasetError::DegenerateBox(index));
        }
        // VOC corners are 1-based and inclusive; shift the top-left corner to get
        // a 0-based half-open box of the same pixels.
        let bbox = BBox::new(x0 - 1.0, y0 - 1.0, x1, y1)
            .and_then(|b| geometry::clamp(&b, dims))
            .map_err(|_| DatasetError::DegenerateBox(index))?;
        instances.push(SourceInstance {
            class,
            bbox,
            difficult: flag(obj, "difficult"),
            truncated: flag(obj, "truncated"),
        });
    }

    Ok(SourceImage {
        image_id,
        source,
        file_name,
        dims,
        instances,
    })
}
