//! Posterior-matrix files: a binary layout (magic, dimensions, class-name
//! table, row-major f32 probabilities) and a CSV alternative whose header
//! row names the classes. The background class is the last column in both.

use std::fs;
use std::path::Path;

use crate::align::PosteriorMatrix;
use crate::formats::bin::{self, Reader};
use crate::{Error, Result};

const POST_MAGIC: &[u8; 8] = b"S2SPOST\x01";
const POST_VERSION: u32 = 1;

pub fn write_posteriors_binary(post: &PosteriorMatrix, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(POST_MAGIC);
    bin::w_u32(&mut out, POST_VERSION);
    bin::w_u32(&mut out, post.frames() as u32);
    bin::w_u32(&mut out, (post.vocab() + 1) as u32);
    for name in &post.class_names {
        bin::w_str(&mut out, name);
    }
    for &p in post.raw() {
        bin::w_f32(&mut out, p as f32);
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_posteriors_binary(path: &Path) -> Result<PosteriorMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let what = path.display().to_string();
    let mut r = Reader::new(&bytes, what.clone());
    r.expect_magic(POST_MAGIC)?;
    let version = r.u32()?;
    if version != POST_VERSION {
        return Err(Error::FormatVersion {
            what,
            found: version,
            supported: POST_VERSION,
        });
    }
    let frames = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let mut names = Vec::with_capacity(classes);
    for _ in 0..classes {
        names.push(r.str()?);
    }
    let mut probs = Vec::with_capacity(frames * classes);
    for _ in 0..frames * classes {
        probs.push(normalize_stored(r.f32()? as f64));
    }
    PosteriorMatrix::new(probs, frames, names)
}

/// f32 storage rounds rows slightly off 1; renormalization happens at the
/// row level in `PosteriorMatrix::new`, this only clips negative zeros.
fn normalize_stored(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p
    }
}

pub fn write_posteriors_csv(post: &PosteriorMatrix, path: &Path) -> Result<()> {
    let mut out = post.class_names.join(",");
    out.push('\n');
    let classes = post.vocab() + 1;
    for t in 0..post.frames() {
        let row = &post.raw()[t * classes..(t + 1) * classes];
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_posteriors_csv(path: &Path) -> Result<PosteriorMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let origin = path.display().to_string();
    parse_posteriors_csv(&text, &origin)
}

pub fn parse_posteriors_csv(text: &str, origin: &str) -> Result<PosteriorMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty posterior file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() < 2 {
        return Err(Error::parse(
            origin,
            1,
            "need at least one gloss class plus the background column",
        ));
    }
    let classes = names.len();
    let mut probs = Vec::new();
    let mut frames = 0usize;
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != classes {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {classes} columns, found {}", fields.len()),
            ));
        }
        for f in fields {
            let p: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad probability {f:?}")))?;
            probs.push(p);
        }
        frames += 1;
    }
    PosteriorMatrix::new(probs, frames, names)
}

/// Reads a posterior file, sniffing binary vs CSV by the magic bytes.
pub fn read_posteriors(path: &Path) -> Result<PosteriorMatrix> {
    let mut head = [0u8; 8];
    {
        use std::io::Read;
        let mut f =
            fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let n = f
            .read(&mut head)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if n < 8 {
            return read_posteriors_csv(path);
        }
    }
    if &head == POST_MAGIC {
        read_posteriors_binary(path)
    } else {
        read_posteriors_csv(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::Label;

    fn sample() -> PosteriorMatrix {
        PosteriorMatrix::new(
            vec![0.5, 0.25, 0.25, 0.125, 0.75, 0.125],
            2,
            vec!["RAIN".into(), "SNOW".into(), "background".into()],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let post = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.post");
        write_posteriors_binary(&post, &path).unwrap();
        let back = read_posteriors(&path).unwrap();
        assert_eq!(back.class_names, post.class_names);
        assert_eq!(back.frames(), 2);
        assert_eq!(back.prob(1, Label::Gloss(1)), 0.75);
    }

    #[test]
    fn csv_round_trip() {
        let post = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_posteriors_csv(&post, &path).unwrap();
        let back = read_posteriors(&path).unwrap();
        assert_eq!(back.raw(), post.raw());
        assert_eq!(back.gloss_id("SNOW"), Some(1));
        assert_eq!(back.gloss_id("background"), None);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        assert!(parse_posteriors_csv("A,background\n0.5,0.4\n", "t").is_err());
        assert!(parse_posteriors_csv("A,background\n0.5\n", "t").is_err());
    }
}
