//! Small text tables: lexicons, gloss manifests, pre-computed gloss
//! predictions, and confidence sidecars.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Lexicon file: one `word<TAB>gloss` per line. `#` starts a comment.
pub fn read_lexicon(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let origin = path.display().to_string();
    let mut table = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, gloss) = line.split_once('\t').ok_or_else(|| {
            Error::parse(&origin, lineno + 1, "expected `word<TAB>gloss`")
        })?;
        table.insert(word.trim().to_string(), gloss.trim().to_string());
    }
    Ok(table)
}

/// Gloss manifest: one `video-id gloss gloss …` line per video.
pub fn read_gloss_manifest(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let origin = path.display().to_string();
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let video = fields
            .next()
            .ok_or_else(|| Error::parse(&origin, lineno + 1, "missing video id"))?;
        let glosses: Vec<String> = fields.map(str::to_string).collect();
        if glosses.is_empty() {
            return Err(Error::parse(
                &origin,
                lineno + 1,
                format!("video {video:?} lists no glosses"),
            ));
        }
        out.insert(video.to_string(), glosses);
    }
    Ok(out)
}

/// Predicted-gloss file: `sentence-id<TAB>gloss gloss …` per line.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let origin = path.display().to_string();
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, glosses) = line.split_once('\t').ok_or_else(|| {
            Error::parse(&origin, lineno + 1, "expected `sentence-id<TAB>glosses`")
        })?;
        out.insert(
            id.trim().to_string(),
            glosses.split_whitespace().map(str::to_string).collect(),
        );
    }
    Ok(out)
}

/// Confidence sidecar: `sign-id score` per line.
pub fn read_confidences(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let origin = path.display().to_string();
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                &origin,
                lineno + 1,
                "expected `sign-id score`",
            ));
        }
        let score: f64 = fields[1].parse().map_err(|_| {
            Error::parse(&origin, lineno + 1, format!("bad score {:?}", fields[1]))
        })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(
                &origin,
                lineno + 1,
                format!("score {score} outside [0, 1]"),
            ));
        }
        out.insert(fields[0].to_string(), score);
    }
    Ok(out)
}
