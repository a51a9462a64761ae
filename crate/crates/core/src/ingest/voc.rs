use super::IngestError;
use crate::bbox::BBox;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write};
use std::str::FromStr;

/// The two annotated classes. The set is closed: class weights in the
/// calibrated mAP are defined per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    TreeApple,
    GroundApple,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::TreeApple, ClassLabel::GroundApple];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::TreeApple => "tree_apple",
            ClassLabel::GroundApple => "ground_apple",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "tree_apple" => Ok(ClassLabel::TreeApple),
            "ground_apple" => Ok(ClassLabel::GroundApple),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image_name: String,
    pub label: ClassLabel,
    pub bbox: BBox,
}

/// One annotation file as written by labelImg.
#[derive(Debug, Clone, PartialEq)]
pub struct VocDocument {
    pub filename: String,
    pub size: Option<(u32, u32)>,
    pub objects: Vec<GroundTruthBox>,
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn child_text<'a>(node: roxmltree::Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|n| n.text()).map(str::trim)
}

fn xml_err(msg: impl Into<String>) -> IngestError {
    IngestError::MalformedXml(msg.into())
}

pub fn parse_voc_document(xml: &str) -> Result<VocDocument, IngestError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| xml_err(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("annotation") {
        return Err(xml_err(format!(
            "root element is <{}>, expected <annotation>",
            root.tag_name().name()
        )));
    }
    let filename = child_text(root, "filename").unwrap_or_default().to_string();

    let size = match child(root, "size") {
        Some(node) => {
            let dim = |name: &str| -> Result<u32, IngestError> {
                let text = child_text(node, name)
                    .ok_or_else(|| xml_err(format!("<size> lacks <{name}>")))?;
                text.parse::<f64>()
                    .ok()
                    .filter(|v| *v >= 0.0 && v.fract() == 0.0)
                    .map(|v| v as u32)
                    .ok_or_else(|| xml_err(format!("<size><{name}> `{text}` is not a pixel count")))
            };
            match (dim("width")?, dim("height")?) {
                (0, _) | (_, 0) => None,
                wh => Some(wh),
            }
        }
        None => None,
    };

    let mut objects = Vec::new();
    for (object, node) in root
        .children()
        .filter(|n| n.has_tag_name("object"))
        .enumerate()
    {
        let name = child_text(node, "name")
            .ok_or_else(|| xml_err(format!("object {object} has no <name>")))?;
        let label = name.parse::<ClassLabel>().map_err(|label| IngestError::UnknownClass {
            label,
            object,
        })?;
        let bnd = child(node, "bndbox")
            .ok_or_else(|| xml_err(format!("object {object} has no <bndbox>")))?;
        let coord = |tag: &str| -> Result<f64, IngestError> {
            let text = child_text(bnd, tag)
                .ok_or_else(|| xml_err(format!("object {object} <bndbox> lacks <{tag}>")))?;
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| xml_err(format!("object {object} <{tag}> `{text}` is not a number")))
        };
        let bbox = BBox::new(coord("xmin")?, coord("ymin")?, coord("xmax")?, coord("ymax")?);
        if !bbox.is_valid() {
            return Err(IngestError::DegenerateBox {
                object,
                xmin: bbox.xmin,
                ymin: bbox.ymin,
                xmax: bbox.xmax,
                ymax: bbox.ymax,
            });
        }
        objects.push(GroundTruthBox {
            image_name: filename.clone(),
            label,
            bbox,
        });
    }
    Ok(VocDocument {
        filename,
        size,
        objects,
    })
}

/// One box per `<object>`; an annotation without objects yields an empty list.
pub fn parse_voc_annotations(xml: &str) -> Result<Vec<GroundTruthBox>, IngestError> {
    parse_voc_document(xml).map(|d| d.objects)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn write_voc_document(doc: &VocDocument) -> String {
    let mut out = String::from("<annotation>\n");
    writeln!(out, "\t<filename>{}</filename>", escape(&doc.filename)).unwrap();
    if let Some((w, h)) = doc.size {
        writeln!(
            out,
            "\t<size>\n\t\t<width>{w}</width>\n\t\t<height>{h}</height>\n\t\t<depth>3</depth>\n\t</size>"
        )
        .unwrap();
    }
    for obj in &doc.objects {
        let b = obj.bbox;
        writeln!(
            out,
            "\t<object>\n\t\t<name>{}</name>\n\t\t<bndbox>\n\t\t\t<xmin>{}</xmin>\n\t\t\t<ymin>{}</ymin>\n\t\t\t<xmax>{}</xmax>\n\t\t\t<ymax>{}</ymax>\n\t\t</bndbox>\n\t</object>",
            obj.label, b.xmin, b.ymin, b.xmax, b.ymax
        )
        .unwrap();
    }
    out.push_str("</annotation>\n");
    out
}
