//! `augment`: rewrite every annotation once per configured transform.

use super::load_annotations;
use crate::config::{require, PipelineConfig};
use crate::error::{CliError, Result};
use crate::fsutil::{file_stem, write_atomic};
use crate::AugmentArgs;
use orchard_core::augment::{apply_to_box, AugmentSpec, BoxOutcome};
use orchard_core::bbox::BBox;
use orchard_core::ingest::{write_voc_document, GroundTruthBox, VocDocument};
use std::fmt::Write;

/// `mirror_h`, `rotate:<deg>` or `pixel:<name>`.
pub fn parse_op(text: &str) -> Result<AugmentSpec> {
    let bad = || CliError::invalid(format!("unknown augmentation `{text}`; use mirror_h, rotate:<deg> or pixel:<name>"));
    let spec = match text.split_once(':') {
        None if text == "mirror_h" => AugmentSpec::MirrorH,
        Some(("rotate", deg)) => AugmentSpec::Rotate { degrees: deg.trim().parse().map_err(|_| bad())? },
        Some(("pixel", name)) if !name.is_empty() => AugmentSpec::PixelOnly { name: name.to_string() },
        _ => return Err(bad()),
    };
    spec.validate().map_err(|e| CliError::invalid(e.to_string()))?;
    Ok(spec)
}

/// Whole-pixel box containing `b`, kept inside the image.
fn round_outward(b: BBox, w: f64, h: f64) -> BBox {
    BBox::new(b.xmin.floor().max(0.0), b.ymin.floor().max(0.0), b.xmax.ceil().min(w), b.ymax.ceil().min(h))
}

fn renamed(filename: &str, tag: &str) -> String {
    match filename.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}__{tag}.{ext}"),
        None => format!("{filename}__{tag}"),
    }
}

pub fn run(mut cfg: PipelineConfig, a: &AugmentArgs) -> Result<()> {
    if a.annotations.is_some() {
        cfg.paths.annotations.clone_from(&a.annotations);
    }
    if !a.ops.is_empty() {
        cfg.augment.ops = a.ops.iter().map(|s| parse_op(s)).collect::<Result<_>>()?;
    }
    if let Some(m) = a.min_visible {
        cfg.augment.min_visible = m;
    }
    cfg.validate()?;
    let docs = load_annotations(require(&cfg.paths.annotations, "annotations")?)?;
    let dir = cfg.output_dir().join("augmented");

    let mut log_csv = String::from("source,output,op,object,label,status,visible_fraction,xmin,ymin,xmax,ymax\n");
    let mut written = 0;
    for (path, doc) in &docs {
        let (w, h) = doc.size.unwrap_or((cfg.camera.image_width, cfg.camera.image_height));
        let (wf, hf) = (w as f64, h as f64);
        for op in &cfg.augment.ops {
            let tag = op.tag();
            let out_name = renamed(&doc.filename, &tag);
            let mut objects = Vec::new();
            for (i, o) in doc.objects.iter().enumerate() {
                let outcome = apply_to_box(op, o.bbox, wf, hf, cfg.augment.min_visible)
                    .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
                match outcome {
                    BoxOutcome::Kept(b) => {
                        let b = match op {
                            AugmentSpec::Rotate { .. } => round_outward(b, wf, hf),
                            _ => b,
                        };
                        writeln!(
                            log_csv,
                            "{},{out_name},{tag},{i},{},kept,,{},{},{},{}",
                            doc.filename, o.label, b.xmin, b.ymin, b.xmax, b.ymax
                        )
                        .unwrap();
                        objects.push(GroundTruthBox { image_name: out_name.clone(), label: o.label, bbox: b });
                    }
                    BoxOutcome::Dropped { visible_fraction } => {
                        writeln!(
                            log_csv,
                            "{},{out_name},{tag},{i},{},dropped,{visible_fraction:.4},,,,",
                            doc.filename, o.label
                        )
                        .unwrap();
                    }
                }
            }
            let out_doc = VocDocument { filename: out_name, size: Some((w, h)), objects };
            let xml_path = dir.join(format!("{}__{tag}.xml", file_stem(path)));
            write_atomic(&xml_path, write_voc_document(&out_doc).as_bytes())?;
            written += 1;
        }
    }
    write_atomic(&dir.join("augment_log.csv"), log_csv.as_bytes())?;
    println!("wrote {written} augmented annotations");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_parsing() {
        assert_eq!(parse_op("mirror_h").unwrap(), AugmentSpec::MirrorH);
        assert_eq!(parse_op("rotate:-45").unwrap(), AugmentSpec::Rotate { degrees: -45.0 });
        assert_eq!(parse_op("pixel:blur").unwrap(), AugmentSpec::PixelOnly { name: "blur".into() });
        assert!(parse_op("rotate:90").is_err());
        assert!(parse_op("shear:5").is_err());
        assert!(parse_op("rotate:abc").is_err());
    }

    #[test]
    fn names() {
        assert_eq!(renamed("a.jpg", "rot+30"), "a__rot+30.jpg");
        assert_eq!(renamed("plain", "mirror_h"), "plain__mirror_h");
        assert_eq!(round_outward(BBox::new(1.2, 2.7, 9.1, 9.9), 9.0, 20.0), BBox::new(1.0, 2.0, 9.0, 10.0));
    }
}
