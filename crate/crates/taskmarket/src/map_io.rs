//! ASCII occupancy maps.
//!
//! ```text
//! resolution 0.1
//! ..#..
//! .....
//! ```
//!
//! The first grid line is row 0, which covers `0 <= y < resolution`.

use std::fmt::Write as _;
use std::path::Path;

use taskmarket_core::GridMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct MapParseError {
    /// 1-based line number in the file.
    pub line: usize,
    pub reason: String,
}

impl MapParseError {
    fn at(line: usize, reason: impl Into<String>) -> Self {
        Self {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MapLoadError {
    #[error("cannot read map {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("map {path}, {source}")]
    Parse {
        path: String,
        #[source]
        source: MapParseError,
    },
}

pub fn parse_map_str(text: &str) -> Result<GridMap, MapParseError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| MapParseError::at(1, "empty file"))?;
    let resolution = parse_header(header)?;

    let mut width = None;
    let mut height = 0;
    let mut occupancy = Vec::new();
    for (i, row) in lines.enumerate() {
        let line = i + 2;
        let w = *width.get_or_insert(row.len());
        if w == 0 {
            return Err(MapParseError::at(line, "empty row"));
        }
        if row.len() != w {
            return Err(MapParseError::at(line, format!("row has {} cells, expected {w}", row.len())));
        }
        for (col, ch) in row.chars().enumerate() {
            match ch {
                '#' => occupancy.push(true),
                '.' => occupancy.push(false),
                other => {
                    return Err(MapParseError::at(line, format!("unexpected {other:?} in column {}", col + 1)));
                }
            }
        }
        height += 1;
    }
    let width = width.ok_or_else(|| MapParseError::at(2, "map has no rows"))?;
    GridMap::new(width, height, resolution, occupancy).map_err(|e| MapParseError::at(1, e.to_string()))
}

fn parse_header(line: &str) -> Result<f64, MapParseError> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some("resolution"), Some(value), None) => {
            let r: f64 = value
                .parse()
                .map_err(|_| MapParseError::at(1, format!("bad resolution {value:?}")))?;
            if r.is_finite() && r > 0.0 {
                Ok(r)
            } else {
                Err(MapParseError::at(1, "resolution must be positive"))
            }
        }
        _ => Err(MapParseError::at(1, "expected `resolution <meters>`")),
    }
}

pub fn parse_map(path: &Path) -> Result<GridMap, MapLoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| MapLoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map_str(&text).map_err(|source| MapLoadError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Canonical text form; `parse_map_str(&serialize_map(m))` gives back `m`.
pub fn serialize_map(map: &GridMap) -> String {
    let mut out = String::with_capacity((map.width() + 1) * (map.height() + 1) + 20);
    let _ = writeln!(out, "resolution {}", map.resolution());
    for row in map.occupancy().chunks(map.width()) {
        out.extend(row.iter().map(|&occ| if occ { '#' } else { '.' }));
        out.push('\n');
    }
    out
}
