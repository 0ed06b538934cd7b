//! Structured-text animation export: per-frame parameters, landmark
//! positions, and sign/co-articulation tags. Values are f64 and round-trip
//! bit-exactly through JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connector::{FrameKind, StitchSpan, StitchedFrame, StitchedSequence};
use crate::skeleton::{Joints3D, KinematicTree, PoseParams};
use crate::{Error, Result};

pub const ANIM_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnimDocument {
    pub version: u32,
    pub fps: f64,
    pub tree_hash: String,
    pub spans: Vec<StitchSpan>,
    pub durations: Vec<usize>,
    pub frames: Vec<AnimFrame>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnimFrame {
    #[serde(flatten)]
    pub kind: FrameKind,
    /// Absent for co-articulation frames generated in joint mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseParams>,
    pub landmarks: Vec<[f64; 3]>,
}

pub fn to_document(seq: &StitchedSequence, tree: &KinematicTree, fps: f64) -> AnimDocument {
    AnimDocument {
        version: ANIM_VERSION,
        fps,
        tree_hash: tree.hash_hex(),
        spans: seq.spans.clone(),
        durations: seq.durations.clone(),
        frames: seq
            .frames
            .iter()
            .map(|f| AnimFrame {
                kind: f.kind.clone(),
                pose: f.pose.clone(),
                landmarks: f.joints.coords.iter().map(|p| [p.x, p.y, p.z]).collect(),
            })
            .collect(),
    }
}

pub fn from_document(doc: AnimDocument) -> StitchedSequence {
    StitchedSequence {
        frames: doc
            .frames
            .into_iter()
            .map(|f| StitchedFrame {
                kind: f.kind,
                pose: f.pose,
                joints: Joints3D {
                    coords: f
                        .landmarks
                        .into_iter()
                        .map(|[x, y, z]| nalgebra::Vector3::new(x, y, z))
                        .collect(),
                },
            })
            .collect(),
        spans: doc.spans,
        durations: doc.durations,
    }
}

pub fn write_anim_json(
    seq: &StitchedSequence,
    tree: &KinematicTree,
    fps: f64,
    path: &Path,
) -> Result<()> {
    let doc = to_document(seq, tree, fps);
    let json = serde_json::to_string_pretty(&doc).expect("animation document serializes");
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_anim_json(path: &Path) -> Result<AnimDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let doc: AnimDocument =
        serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            what: path.display().to_string(),
            message: e.to_string(),
        })?;
    if doc.version != ANIM_VERSION {
        return Err(Error::FormatVersion {
            what: path.display().to_string(),
            found: doc.version,
            supported: ANIM_VERSION,
        });
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::forward_kinematics;
    use crate::skeleton::CameraParams;

    #[test]
    fn round_trip_is_bit_exact() {
        let tree = KinematicTree::signer54();
        let cam = CameraParams::frontal(1.0, [0.0, 0.0], 0.0);
        let mut pose = PoseParams::rest(&tree);
        pose.theta[50] = 0.123456789012345;
        pose.beta[2] = -0.987654321;
        let joints = forward_kinematics(&tree, &pose, &cam).unwrap();
        let seq = StitchedSequence {
            frames: vec![StitchedFrame {
                kind: FrameKind::Sign {
                    gloss: "RAIN".into(),
                },
                pose: Some(pose.clone()),
                joints,
            }],
            spans: vec![StitchSpan {
                kind: FrameKind::Sign {
                    gloss: "RAIN".into(),
                },
                start: 0,
                len: 1,
            }],
            durations: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.anim.json");
        write_anim_json(&seq, &tree, 25.0, &path).unwrap();
        let doc = read_anim_json(&path).unwrap();
        let back = from_document(doc);
        let got = back.frames[0].pose.as_ref().unwrap();
        assert_eq!(got, &pose); // bit-exact f64 round trip
        assert_eq!(back.frames[0].joints.coords, seq.frames[0].joints.coords);
    }

    #[test]
    fn future_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.anim.json");
        fs::write(
            &path,
            r#"{"version":9,"fps":25.0,"tree_hash":"x","spans":[],"durations":[],"frames":[]}"#,
        )
        .unwrap();
        assert!(matches!(
            read_anim_json(&path),
            Err(Error::FormatVersion { .. })
        ));
    }
}
