use std::fs;
use std::path::Path;

use super::model::AttributionResult;
use crate::encoders::IMAGE_SIDE;
use crate::error::{Error, Result};

/// `|scores|` scaled so the largest maps to 255, as a binary 8-bit PGM.
/// All-zero scores give an all-zero image.
pub fn graymap(scores: &[f64], width: usize, height: usize) -> Result<Vec<u8>> {
    if scores.len() != width * height {
        return Err(Error::WidthMismatch {
            expected: width * height,
            actual: scores.len(),
            context: "graymap pixels",
        });
    }
    let max = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(scores.iter().map(|s| match max > 0.0 {
        true => (s.abs() / max * 255.0).round() as u8,
        false => 0,
    }));
    Ok(out)
}

/// Writes `<stem>.json` (tokens, scores, prediction, completeness) and
/// `<stem>.pgm` (pixel score magnitudes) into `dir`.
pub fn export_attribution(result: &AttributionResult, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(result).map_err(|e| Error::Parse(e.to_string()))?;
    let jpath = dir.join(format!("{stem}.json"));
    fs::write(&jpath, json + "\n").map_err(|e| Error::io(&jpath, e))?;
    let ppath = dir.join(format!("{stem}.pgm"));
    let pgm = graymap(&result.pixel_scores, IMAGE_SIDE, IMAGE_SIDE)?;
    fs::write(&ppath, pgm).map_err(|e| Error::io(&ppath, e))
}

pub fn read_attribution(path: &Path) -> Result<AttributionResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
