use super::{malformed, IngestError};
use crate::terrain::TerrainGrid;
use std::fmt::Write;

#[derive(Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll_corner: Option<f64>,
    yll_corner: Option<f64>,
    xll_center: Option<f64>,
    yll_center: Option<f64>,
    cellsize: Option<f64>,
    nodata: Option<f64>,
}

/// ESRI ASCII grid: six header lines (NODATA optional), then rows from north to south.
pub fn parse_ascii_grid(text: &str) -> Result<TerrainGrid, IngestError> {
    let mut header = Header::default();
    let mut values = Vec::new();
    let mut in_header = true;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut tokens = raw.split_whitespace().peekable();
        let Some(first) = tokens.peek().copied() else {
            continue;
        };
        if in_header && first.starts_with(|c: char| c.is_ascii_alphabetic()) {
            let key = first.to_ascii_lowercase();
            tokens.next();
            let value = tokens
                .next()
                .ok_or_else(|| malformed(line, format!("header `{first}` has no value")))?;
            if tokens.next().is_some() {
                return Err(malformed(line, "trailing tokens after header value"));
            }
            let num = |v: &str| -> Result<f64, IngestError> {
                v.parse::<f64>()
                    .map_err(|_| malformed(line, format!("`{v}` is not a number")))
            };
            let count = |v: &str| -> Result<usize, IngestError> {
                v.parse::<usize>()
                    .map_err(|_| malformed(line, format!("`{v}` is not a count")))
            };
            match key.as_str() {
                "ncols" => header.ncols = Some(count(value)?),
                "nrows" => header.nrows = Some(count(value)?),
                "xllcorner" => header.xll_corner = Some(num(value)?),
                "yllcorner" => header.yll_corner = Some(num(value)?),
                "xllcenter" => header.xll_center = Some(num(value)?),
                "yllcenter" => header.yll_center = Some(num(value)?),
                "cellsize" => header.cellsize = Some(num(value)?),
                "nodata_value" => header.nodata = Some(num(value)?),
                _ => return Err(malformed(line, format!("unknown header `{first}`"))),
            }
            continue;
        }
        in_header = false;
        for tok in tokens {
            let v: f64 = tok
                .parse()
                .map_err(|_| malformed(line, format!("`{tok}` is not a number")))?;
            values.push(v);
        }
    }

    let ncols = header.ncols.ok_or(IngestError::HeaderMissing("ncols"))?;
    let nrows = header.nrows.ok_or(IngestError::HeaderMissing("nrows"))?;
    let cellsize = header.cellsize.ok_or(IngestError::HeaderMissing("cellsize"))?;
    let xll = match (header.xll_corner, header.xll_center) {
        (Some(c), _) => c,
        (None, Some(c)) => c - cellsize / 2.0,
        _ => return Err(IngestError::HeaderMissing("xllcorner")),
    };
    let yll = match (header.yll_corner, header.yll_center) {
        (Some(c), _) => c,
        (None, Some(c)) => c - cellsize / 2.0,
        _ => return Err(IngestError::HeaderMissing("yllcorner")),
    };
    if ncols == 0 || nrows == 0 {
        return Err(malformed(1, "grid must have at least one row and column"));
    }
    if !(cellsize > 0.0) {
        return Err(malformed(1, "cellsize must be positive"));
    }
    let expected = ncols * nrows;
    if values.len() != expected {
        return Err(IngestError::DimensionMismatch {
            expected,
            found: values.len(),
        });
    }
    Ok(TerrainGrid {
        ncols,
        nrows,
        xll,
        yll,
        cellsize,
        nodata: header.nodata,
        values,
    })
}

pub fn write_ascii_grid(grid: &TerrainGrid) -> String {
    let mut out = String::new();
    writeln!(out, "ncols {}", grid.ncols).unwrap();
    writeln!(out, "nrows {}", grid.nrows).unwrap();
    writeln!(out, "xllcorner {}", grid.xll).unwrap();
    writeln!(out, "yllcorner {}", grid.yll).unwrap();
    writeln!(out, "cellsize {}", grid.cellsize).unwrap();
    if let Some(nd) = grid.nodata {
        writeln!(out, "NODATA_value {nd}").unwrap();
    }
    for row in grid.values.chunks(grid.ncols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::sample_terrain;

    #[test]
    fn single_cell() {
        let g = parse_ascii_grid(
            "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n7\n",
        )
        .unwrap();
        assert_eq!(g.values, vec![7.0]);
        assert_eq!(g.nodata, Some(-9999.0));
    }

    #[test]
    fn value_count_must_match() {
        let err = parse_ascii_grid("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n")
            .unwrap_err();
        assert_eq!(err, IngestError::DimensionMismatch { expected: 4, found: 3 });
    }

    #[test]
    fn missing_header() {
        let err = parse_ascii_grid("ncols 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n7\n").unwrap_err();
        assert_eq!(err, IngestError::HeaderMissing("nrows"));
    }

    #[test]
    fn center_registration_is_converted() {
        let g = parse_ascii_grid("ncols 1\nnrows 1\nxllcenter 5\nyllcenter 5\ncellsize 2\n1\n").unwrap();
        assert_eq!((g.xll, g.yll), (4.0, 4.0));
    }

    #[test]
    fn nodata_round_trips_as_sentinel() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 4.5\n";
        let g = parse_ascii_grid(text).unwrap();
        assert_eq!(g.values, vec![-9999.0, 4.5]);
        let again = parse_ascii_grid(&write_ascii_grid(&g)).unwrap();
        assert_eq!(again, g);
        assert!(sample_terrain(&g, 0.5, 0.5).is_err());
        assert_eq!(sample_terrain(&g, 1.5, 0.5).unwrap(), 4.5);
    }

    #[test]
    fn bad_token_reports_line() {
        let err = parse_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 abc\n").unwrap_err();
        assert!(matches!(err, IngestError::MalformedLine { line: 6, .. }));
    }
}
