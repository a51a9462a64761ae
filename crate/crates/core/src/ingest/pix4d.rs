use super::{malformed, IngestError};
use crate::geometry::{ProjectionMatrix, WorldPoint};
use std::fmt::Write;

/// One line of `pmatrix.txt`: an image and its 3×4 projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePose {
    pub image_name: String,
    pub pmatrix: ProjectionMatrix,
}

/// Shift between project-local and global coordinates: `global = local + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldOffset {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldOffset {
    pub fn to_local(&self, p: WorldPoint) -> WorldPoint {
        WorldPoint::new(p.x - self.x, p.y - self.y, p.z - self.z)
    }

    pub fn to_global(&self, p: WorldPoint) -> WorldPoint {
        WorldPoint::new(p.x + self.x, p.y + self.y, p.z + self.z)
    }
}

fn parse_float(tok: &str, line: usize) -> Result<f64, IngestError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| malformed(line, format!("`{tok}` is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(malformed(line, format!("`{tok}` is not finite")))
    }
}

/// `<image_name> <12 floats>` per line, row-major. Blank lines are ignored.
pub fn parse_pmatrix(text: &str) -> Result<Vec<ImagePose>, IngestError> {
    let mut poses = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 13 {
            return Err(malformed(
                line,
                format!("expected 13 tokens, found {}", tokens.len()),
            ));
        }
        let mut values = [0.0; 12];
        for (slot, tok) in values.iter_mut().zip(&tokens[1..]) {
            *slot = parse_float(tok, line)?;
        }
        poses.push(ImagePose {
            image_name: tokens[0].to_string(),
            pmatrix: ProjectionMatrix::from_row_slice(&values),
        });
    }
    Ok(poses)
}

pub fn write_pmatrix(poses: &[ImagePose]) -> String {
    let mut out = String::new();
    for pose in poses {
        out.push_str(&pose.image_name);
        for v in pose.pmatrix.to_row_array() {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Exactly one non-blank line holding three floats.
pub fn parse_offset(text: &str) -> Result<WorldOffset, IngestError> {
    let mut found: Option<WorldOffset> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if found.is_some() {
            return Err(malformed(line, "offset file must contain a single line"));
        }
        if tokens.len() != 3 {
            return Err(malformed(
                line,
                format!("expected 3 values, found {}", tokens.len()),
            ));
        }
        found = Some(WorldOffset {
            x: parse_float(tokens[0], line)?,
            y: parse_float(tokens[1], line)?,
            z: parse_float(tokens[2], line)?,
        });
    }
    found.ok_or_else(|| malformed(1, "offset file is empty"))
}

pub fn write_offset(offset: &WorldOffset) -> String {
    format!("{} {} {}\n", offset.x, offset.y, offset.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_line() {
        let poses = parse_pmatrix("img1.jpg 1 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        assert_eq!(poses.len(), 1);
        assert_eq!(poses[0].image_name, "img1.jpg");
        assert_eq!(
            poses[0].pmatrix.to_row_array(),
            [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn short_line_is_rejected_with_location() {
        let text = "a.jpg 1 0 0 0 0 1 0 0 0 0 1 0\n\nb.jpg 1 0 0 0 0 1 0 0 0 0 1\n";
        assert!(matches!(
            parse_pmatrix(text),
            Err(IngestError::MalformedLine { line: 3, .. })
        ));
        assert!(matches!(
            parse_pmatrix("a.jpg 1 0 0 0 0 1 0 0 0 0 x 0"),
            Err(IngestError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn order_is_preserved() {
        let text = "z.jpg 1 0 0 0 0 1 0 0 0 0 1 0\n\n  \na.jpg 2 0 0 0 0 2 0 0 0 0 1 0\n";
        let names: Vec<_> = parse_pmatrix(text)
            .unwrap()
            .into_iter()
            .map(|p| p.image_name)
            .collect();
        assert_eq!(names, ["z.jpg", "a.jpg"]);
    }

    #[test]
    fn offsets() {
        let o = parse_offset("345000.0 5621000.0 0.0\n").unwrap();
        assert_eq!((o.x, o.y, o.z), (345000.0, 5621000.0, 0.0));
        assert_eq!(parse_offset("0 0 0").unwrap(), WorldOffset::default());
        assert!(matches!(
            parse_offset("1 2 3\n4 5 6\n"),
            Err(IngestError::MalformedLine { line: 2, .. })
        ));
        assert!(parse_offset("1 2").is_err());
        assert!(parse_offset("").is_err());
    }

    #[test]
    fn global_is_local_plus_offset() {
        let o = WorldOffset { x: 10.0, y: 20.0, z: 1.0 };
        let g = o.to_global(WorldPoint::new(1.0, 2.0, 3.0));
        assert_eq!(g, WorldPoint::new(11.0, 22.0, 4.0));
        assert_eq!(o.to_local(g), WorldPoint::new(1.0, 2.0, 3.0));
    }

    proptest! {
        #[test]
        fn pmatrix_round_trip(values in proptest::array::uniform12(-1e7..1e7f64), name in "[a-zA-Z0-9_]{1,12}\\.jpg") {
            let poses = vec![ImagePose { image_name: name, pmatrix: ProjectionMatrix::from_row_slice(&values) }];
            prop_assert_eq!(parse_pmatrix(&write_pmatrix(&poses)).unwrap(), poses);
        }
    }
}
