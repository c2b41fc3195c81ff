//! Tab-separated dataset manifests.
//!
//! One row per writing:
//!
//! ```text
//! row_id <TAB> field_type <TAB> transcript <TAB> image [<TAB> polygon]
//! ```
//!
//! The polygon, when present, is `x,y x,y x,y ...` in page pixels and marks
//! the image as a full page to be segmented. Without it the image is already
//! a cell cut-out. Lines starting with `#` and blank lines are ignored. Image
//! paths are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use anyhow::Result;
use tablereader_core::fields::gt_normalize;
use tablereader_core::preproc::FieldPolygon;
use tablereader_core::FieldType;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub row_id: String,
    pub field: FieldType,
    /// Canonical transcript; empty when the manifest carries none.
    pub transcript: String,
    pub image: PathBuf,
    pub polygon: Option<FieldPolygon>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedRow {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub dropped: Vec<DroppedRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transcripts {
    /// Rows without a usable transcript are dropped (training, evaluation).
    Required,
    /// The transcript column may be empty (decoding).
    Optional,
}

pub fn parse_polygon(text: &str, field: FieldType) -> Result<FieldPolygon, String> {
    let vertices = text
        .split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(',').ok_or_else(|| format!("bad vertex {pair:?}"))?;
            let x = x.trim().parse::<i64>().map_err(|_| format!("bad vertex {pair:?}"))?;
            let y = y.trim().parse::<i64>().map_err(|_| format!("bad vertex {pair:?}"))?;
            Ok((x, y))
        })
        .collect::<Result<Vec<_>, String>>()?;
    FieldPolygon::new(vertices, field).map_err(|e| e.to_string())
}

/// Parses manifest text. Unusable rows are dropped and recorded rather than
/// failing the whole file. With `check_images`, rows whose image file does
/// not exist are dropped too.
pub fn parse_manifest(text: &str, base: &Path, transcripts: Transcripts, check_images: bool) -> Manifest {
    let mut out = Manifest::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_row(line, base, transcripts) {
            Ok(entry) if check_images && !entry.image.is_file() => {
                out.dropped.push(DroppedRow { line: i + 1, reason: format!("missing image {}", entry.image.display()) })
            }
            Ok(entry) => out.entries.push(entry),
            Err(reason) => out.dropped.push(DroppedRow { line: i + 1, reason }),
        }
    }
    out
}

fn parse_row(line: &str, base: &Path, transcripts: Transcripts) -> Result<ManifestEntry, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if !(4..=5).contains(&cols.len()) {
        return Err(format!("expected 4 or 5 columns, found {}", cols.len()));
    }
    let row_id = cols[0].trim();
    if row_id.is_empty() {
        return Err("empty row id".into());
    }
    let field: FieldType = cols[1].parse().map_err(|e: tablereader_core::Error| e.to_string())?;
    let transcript = if cols[2].trim().is_empty() {
        if transcripts == Transcripts::Required {
            return Err("missing transcript".into());
        }
        String::new()
    } else {
        gt_normalize(field, cols[2]).map_err(|e| e.to_string())?
    };
    if cols[3].trim().is_empty() {
        return Err("missing image path".into());
    }
    let polygon = match cols.get(4).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        Some(p) => Some(parse_polygon(p, field)?),
        None => None,
    };
    Ok(ManifestEntry { row_id: row_id.to_string(), field, transcript, image: base.join(cols[3].trim()), polygon })
}

/// Reads and parses a manifest file, checking that images exist.
pub fn ingest_manifest(path: &Path, transcripts: Transcripts) -> Result<Manifest> {
    let text = crate::io::read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let m = parse_manifest(&text, base, transcripts, true);
    for d in &m.dropped {
        log::warn!("{}:{}: dropped row: {}", path.display(), d.line, d.reason);
    }
    Ok(m)
}
