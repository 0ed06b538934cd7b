//! Binary container for mined co-articulation samples.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::align::CoarticulationSample;
use crate::formats::bin::{self, Reader};
use crate::{Error, Result};

const SAMPLES_MAGIC: &[u8; 8] = b"S2SCOAR\x01";
const SAMPLES_VERSION: u32 = 1;

pub fn write_samples(samples: &[CoarticulationSample], path: &Path) -> Result<()> {
    let joint_count = samples.first().map(|s| s.pre.len()).unwrap_or(0);
    for (i, s) in samples.iter().enumerate() {
        if s.pre.len() != joint_count || s.next.len() != joint_count {
            return Err(Error::DimensionMismatch {
                what: format!("sample {i} joint count"),
                expected: joint_count,
                found: s.pre.len().max(s.next.len()),
            });
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(SAMPLES_MAGIC);
    bin::w_u32(&mut out, SAMPLES_VERSION);
    bin::w_u32(&mut out, joint_count as u32);
    bin::w_u32(&mut out, samples.len() as u32);
    for s in samples {
        bin::w_u32(&mut out, s.duration as u32);
        for p in s.pre.iter().chain(&s.next) {
            bin::w_f32(&mut out, p.x as f32);
            bin::w_f32(&mut out, p.y as f32);
            bin::w_f32(&mut out, p.z as f32);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_samples(path: &Path) -> Result<Vec<CoarticulationSample>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let what = path.display().to_string();
    let mut r = Reader::new(&bytes, what.clone());
    r.expect_magic(SAMPLES_MAGIC)?;
    let version = r.u32()?;
    if version != SAMPLES_VERSION {
        return Err(Error::FormatVersion {
            what,
            found: version,
            supported: SAMPLES_VERSION,
        });
    }
    let joint_count = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let duration = r.u32()? as usize;
        let read_joints = |r: &mut Reader| -> Result<Vec<Vector3<f64>>> {
            (0..joint_count)
                .map(|_| {
                    Ok(Vector3::new(
                        r.f32()? as f64,
                        r.f32()? as f64,
                        r.f32()? as f64,
                    ))
                })
                .collect()
        };
        let pre = read_joints(&mut r)?;
        let next = read_joints(&mut r)?;
        samples.push(CoarticulationSample {
            pre,
            duration,
            next,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let samples = vec![
            CoarticulationSample {
                pre: vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.5, 0.0)],
                duration: 3,
                next: vec![Vector3::new(0.0, 0.0, 1.0), Vector3::new(2.0, 2.0, 2.0)],
            },
            CoarticulationSample {
                pre: vec![Vector3::zeros(), Vector3::new(0.25, 0.5, 0.75)],
                duration: 0,
                next: vec![Vector3::new(1.0, 1.0, 1.0), Vector3::zeros()],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.coar");
        write_samples(&samples, &path).unwrap();
        let back = read_samples(&path).unwrap();
        assert_eq!(back, samples);
    }

    #[test]
    fn empty_set_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.coar");
        write_samples(&[], &path).unwrap();
        assert!(read_samples(&path).unwrap().is_empty());
    }
}
