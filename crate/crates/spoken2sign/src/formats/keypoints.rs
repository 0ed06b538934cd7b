//! Keypoint stream format: one text record per frame.
//!
//! ```text
//! kp2d v1 landmarks 118
//! 0 x y w x y w ...   # frame index then one (x, y, ω) triple per landmark
//! 1 ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::skeleton::Keypoints2D;
use crate::{Error, Result};

pub fn write_keypoints(frames: &[Keypoints2D], path: &Path) -> Result<()> {
    let landmark_count = frames.first().map(|f| f.len()).unwrap_or(0);
    let mut out = format!("kp2d v1 landmarks {landmark_count}\n");
    for (t, frame) in frames.iter().enumerate() {
        let _ = write!(out, "{t}");
        for (c, w) in frame.coords.iter().zip(&frame.confidence) {
            let _ = write!(out, " {} {} {}", c[0], c[1], w);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parses a keypoint stream, checking the landmark count against
/// `expected_landmarks` when given.
pub fn read_keypoints(path: &Path, expected_landmarks: Option<usize>) -> Result<Vec<Keypoints2D>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let origin = path.display().to_string();
    parse_keypoints(&text, &origin, expected_landmarks)
}

pub fn parse_keypoints(
    text: &str,
    origin: &str,
    expected_landmarks: Option<usize>,
) -> Result<Vec<Keypoints2D>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty keypoint file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "kp2d" || fields[1] != "v1" || fields[2] != "landmarks" {
        return Err(Error::parse(
            origin,
            1,
            format!("expected `kp2d v1 landmarks <n>`, found {header:?}"),
        ));
    }
    let declared: usize = fields[3]
        .parse()
        .map_err(|_| Error::parse(origin, 1, "bad landmark count"))?;
    if let Some(expected) = expected_landmarks {
        if declared != expected {
            return Err(Error::DimensionMismatch {
                what: format!("landmark count in {origin}"),
                expected,
                found: declared,
            });
        }
    }

    let mut frames = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 1 + 3 * declared {
            return Err(Error::parse(
                origin,
                lineno,
                format!(
                    "expected {} fields (frame + {declared} triples), found {}",
                    1 + 3 * declared,
                    fields.len()
                ),
            ));
        }
        let frame_idx: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("bad frame index {:?}", fields[0])))?;
        if frame_idx != frames.len() {
            return Err(Error::parse(
                origin,
                lineno,
                format!("frame index {frame_idx} out of order (expected {})", frames.len()),
            ));
        }
        let mut coords = Vec::with_capacity(declared);
        let mut confidence = Vec::with_capacity(declared);
        for i in 0..declared {
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::parse(origin, lineno, format!("bad number {s:?}")))
            };
            let x = num(fields[1 + 3 * i])?;
            let y = num(fields[2 + 3 * i])?;
            let w = num(fields[3 + 3 * i])?;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("confidence {w} of landmark {i} in frame {frame_idx} outside [0, 1]"),
                ));
            }
            coords.push([x, y]);
            confidence.push(w);
        }
        frames.push(Keypoints2D { coords, confidence });
    }
    Ok(frames)
}
