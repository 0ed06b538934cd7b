//! Gloss-keyed dictionary of fitted 3D signs with multi-candidate storage,
//! confidence/medoid retrieval, and a binary on-disk layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::formats::bin::{self, Reader};
use crate::skeleton::{forward_kinematics, CameraParams, Joints3D, KinematicTree, PoseParams};
use crate::{Error, Result};

const SIGN_MAGIC: &[u8; 8] = b"S2SSIGN\x01";
const SIGN_VERSION: u32 = 1;
const INDEX_HEADER: &str = "s2sdict v1";

/// Frames a sign was cut from: source video id plus the inclusive frame
/// range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceTag {
    pub video: String,
    pub start: usize,
    pub end: usize,
}

/// A fitted isolated sign: per-frame pose parameters plus cached world-frame
/// landmark positions, tagged with its gloss.
///
/// Parameters are held in 32-bit precision (the on-disk precision), so a
/// save/load round trip is bit-identical and the joint cache recomputes
/// exactly.
#[derive(Debug, Clone)]
pub struct Sign3D {
    pub gloss: String,
    pub frames: Vec<PoseParams>,
    pub joints: Vec<Joints3D>,
    pub source: SourceTag,
    pub confidence: Option<f64>,
    pub tree_hash: String,
}

/// Camera with identity extrinsics used for the world-frame joint cache.
fn world_camera() -> CameraParams {
    CameraParams::frontal(1.0, [0.0, 0.0], 0.0)
}

impl Sign3D {
    pub fn new(
        gloss: impl Into<String>,
        frames: Vec<PoseParams>,
        tree: &KinematicTree,
        source: SourceTag,
        confidence: Option<f64>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidConfig("a sign needs at least one frame".into()));
        }
        let cam = world_camera();
        let mut quantized = Vec::with_capacity(frames.len());
        let mut joints = Vec::with_capacity(frames.len());
        for mut pose in frames {
            pose.canonicalize();
            pose.quantize_f32();
            joints.push(forward_kinematics(tree, &pose, &cam)?);
            quantized.push(pose);
        }
        Ok(Sign3D {
            gloss: gloss.into(),
            frames: quantized,
            joints,
            source,
            confidence,
            tree_hash: tree.hash_hex(),
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Stable file-safe identifier derived from the source tag and gloss.
    pub fn id(&self) -> String {
        format!(
            "{}_{:04}-{:04}_{}",
            sanitize(&self.source.video),
            self.source.start,
            self.source.end,
            sanitize(&self.gloss)
        )
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SIGN_MAGIC);
        bin::w_u32(&mut out, SIGN_VERSION);
        bin::w_str(&mut out, &self.tree_hash);
        bin::w_str(&mut out, &self.gloss);
        bin::w_str(&mut out, &self.source.video);
        bin::w_u32(&mut out, self.source.start as u32);
        bin::w_u32(&mut out, self.source.end as u32);
        match self.confidence {
            Some(c) => {
                out.push(1);
                bin::w_f32(&mut out, c as f32);
            }
            None => out.push(0),
        }
        let theta_dim = self.frames[0].theta.len();
        bin::w_u32(&mut out, (theta_dim / 3) as u32);
        bin::w_u32(&mut out, self.frames.len() as u32);
        for pose in &self.frames {
            for v in pose
                .zeta
                .iter()
                .chain(pose.beta.iter())
                .chain(pose.psi.iter())
                .chain(pose.theta.iter())
            {
                bin::w_f32(&mut out, *v as f32);
            }
        }
        out
    }

    fn from_bytes(buf: &[u8], what: &str, tree: &KinematicTree) -> Result<Self> {
        let mut r = Reader::new(buf, what);
        r.expect_magic(SIGN_MAGIC)?;
        let version = r.u32()?;
        if version != SIGN_VERSION {
            return Err(Error::FormatVersion {
                what: what.into(),
                found: version,
                supported: SIGN_VERSION,
            });
        }
        let tree_hash = r.str()?;
        if tree_hash != tree.hash_hex() {
            return Err(Error::TreeMismatch(format!(
                "{what} was fitted against tree {tree_hash}, dictionary tree is {}",
                tree.hash_hex()
            )));
        }
        let gloss = r.str()?;
        let video = r.str()?;
        let start = r.u32()? as usize;
        let end = r.u32()? as usize;
        let confidence = match r.u8()? {
            0 => None,
            1 => Some(r.f32()? as f64),
            other => {
                return Err(Error::Corrupt {
                    what: what.into(),
                    message: format!("bad confidence flag {other}"),
                })
            }
        };
        let joint_count = r.u32()? as usize;
        if joint_count != tree.joint_count() {
            return Err(Error::TreeMismatch(format!(
                "{what} has {joint_count} joints, tree has {}",
                tree.joint_count()
            )));
        }
        let frame_count = r.u32()? as usize;
        if frame_count == 0 {
            return Err(Error::Corrupt {
                what: what.into(),
                message: "zero frames".into(),
            });
        }
        let cam = world_camera();
        let mut frames = Vec::with_capacity(frame_count);
        let mut joints = Vec::with_capacity(frame_count);
        for _ in 0..frame_count {
            let mut pose = PoseParams::rest(tree);
            for slot in pose
                .zeta
                .iter_mut()
                .chain(pose.beta.iter_mut())
                .chain(pose.psi.iter_mut())
                .chain(pose.theta.iter_mut())
            {
                *slot = r.f32()? as f64;
            }
            joints.push(forward_kinematics(tree, &pose, &cam)?);
            frames.push(pose);
        }
        Ok(Sign3D {
            gloss,
            frames,
            joints,
            source: SourceTag { video, start, end },
            confidence,
            tree_hash,
        })
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// How [`Dictionary::retrieve`] ranks candidates of a gloss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalScorer {
    /// Stored confidence scores; candidates without one rank last.
    Confidence,
    /// Model-free fallback: the candidate closest to all others of the same
    /// gloss under a resampled mean-joint distance.
    Medoid,
    /// Confidence when every candidate of the gloss carries one, else medoid.
    Auto,
}

/// Number of frames trajectories are resampled to for medoid distances.
const MEDOID_RESAMPLE: usize = 16;

/// Gloss → candidate signs. `M` (the gloss count) is the number of keys.
#[derive(Debug, Clone)]
pub struct Dictionary {
    tree: KinematicTree,
    entries: BTreeMap<String, Vec<Sign3D>>,
}

impl Dictionary {
    pub fn new(tree: KinematicTree) -> Self {
        Dictionary {
            tree,
            entries: BTreeMap::new(),
        }
    }

    pub fn tree(&self) -> &KinematicTree {
        &self.tree
    }

    /// Number of distinct glosses (M).
    pub fn gloss_count(&self) -> usize {
        self.entries.len()
    }

    pub fn glosses(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, gloss: &str) -> bool {
        self.entries.contains_key(gloss)
    }

    pub fn candidates(&self, gloss: &str) -> &[Sign3D] {
        self.entries.get(gloss).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All candidates in deterministic (gloss, insertion) order.
    pub fn iter_signs(&self) -> impl Iterator<Item = &Sign3D> {
        self.entries.values().flatten()
    }

    pub fn insert(&mut self, sign: Sign3D) -> Result<()> {
        if sign.tree_hash != self.tree.hash_hex() {
            return Err(Error::TreeMismatch(format!(
                "sign {} was fitted against a different tree",
                sign.id()
            )));
        }
        self.entries.entry(sign.gloss.clone()).or_default().push(sign);
        Ok(())
    }

    /// Applies confidences from a sign-id → score table.
    pub fn set_confidences(&mut self, scores: &BTreeMap<String, f64>) {
        for signs in self.entries.values_mut() {
            for sign in signs.iter_mut() {
                if let Some(score) = scores.get(&sign.id()) {
                    sign.confidence = Some(*score);
                }
            }
        }
    }

    /// Picks the highest-scoring candidate for a gloss. Ties keep the
    /// earliest-inserted candidate.
    pub fn retrieve(&self, gloss: &str, scorer: RetrievalScorer) -> Result<&Sign3D> {
        let candidates = self
            .entries
            .get(gloss)
            .ok_or_else(|| Error::UnknownGloss(gloss.to_string()))?;
        if candidates.len() == 1 {
            return Ok(&candidates[0]);
        }
        let scorer = match scorer {
            RetrievalScorer::Auto => {
                if candidates.iter().all(|c| c.confidence.is_some()) {
                    RetrievalScorer::Confidence
                } else {
                    RetrievalScorer::Medoid
                }
            }
            s => s,
        };
        let scores: Vec<f64> = match scorer {
            RetrievalScorer::Confidence => candidates
                .iter()
                .map(|c| c.confidence.unwrap_or(f64::NEG_INFINITY))
                .collect(),
            RetrievalScorer::Medoid => medoid_scores(candidates),
            RetrievalScorer::Auto => unreachable!(),
        };
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = i;
            }
        }
        Ok(&candidates[best])
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let signs_dir = root.join("signs");
        fs::create_dir_all(&signs_dir).map_err(|e| Error::io(signs_dir.display().to_string(), e))?;
        let tree_path = root.join("tree.cfg");
        fs::write(&tree_path, self.tree.to_config_string())
            .map_err(|e| Error::io(tree_path.display().to_string(), e))?;

        let mut index = String::new();
        index.push_str(INDEX_HEADER);
        index.push('\n');
        index.push_str(&format!("tree tree.cfg {}\n", self.tree.hash_hex()));
        for sign in self.iter_signs() {
            let id = sign.id();
            let file = format!("signs/{id}.s3d");
            let conf = match sign.confidence {
                Some(c) => c.to_string(),
                None => "-".to_string(),
            };
            index.push_str(&format!("sign {id} {} {file} {conf}\n", sign.gloss));
            let path = root.join(&file);
            fs::write(&path, sign.to_bytes())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        let index_path = root.join("index.txt");
        fs::write(&index_path, index).map_err(|e| Error::io(index_path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(root: &Path) -> Result<Self> {
        let index_path = root.join("index.txt");
        let index = fs::read_to_string(&index_path)
            .map_err(|e| Error::io(index_path.display().to_string(), e))?;
        let origin = index_path.display().to_string();

        let mut lines = index.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(&origin, 1, "empty index"))?;
        if header.trim() != INDEX_HEADER {
            return Err(Error::parse(
                &origin,
                1,
                format!("expected {INDEX_HEADER:?}, found {header:?}"),
            ));
        }

        let mut tree: Option<KinematicTree> = None;
        let mut dict: Option<Dictionary> = None;
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "tree" if fields.len() == 3 => {
                    let tree_path = root.join(fields[1]);
                    let text = fs::read_to_string(&tree_path)
                        .map_err(|e| Error::io(tree_path.display().to_string(), e))?;
                    let parsed =
                        KinematicTree::parse_config(&text, &tree_path.display().to_string())?;
                    if parsed.hash_hex() != fields[2] {
                        return Err(Error::Corrupt {
                            what: origin.clone(),
                            message: "tree hash in index does not match tree.cfg".into(),
                        });
                    }
                    dict = Some(Dictionary::new(parsed.clone()));
                    tree = Some(parsed);
                }
                "sign" if fields.len() == 5 => {
                    let (Some(tree), Some(dict)) = (&tree, &mut dict) else {
                        return Err(Error::parse(&origin, lineno, "sign line before tree line"));
                    };
                    let path = root.join(fields[3]);
                    let bytes =
                        fs::read(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
                    let mut sign = Sign3D::from_bytes(&bytes, &path.display().to_string(), tree)?;
                    if fields[4] != "-" {
                        let conf: f64 = fields[4].parse().map_err(|_| {
                            Error::parse(&origin, lineno, format!("bad confidence {:?}", fields[4]))
                        })?;
                        sign.confidence = Some(conf);
                    }
                    dict.insert(sign)?;
                }
                _ => {
                    return Err(Error::parse(
                        &origin,
                        lineno,
                        format!("unrecognized index line {line:?}"),
                    ))
                }
            }
        }
        dict.ok_or_else(|| Error::Corrupt {
            what: origin,
            message: "index has no tree line".into(),
        })
    }
}

/// Medoid score (negated summed distance to the other candidates).
fn medoid_scores(candidates: &[Sign3D]) -> Vec<f64> {
    let resampled: Vec<Vec<Vec<Vector3<f64>>>> = candidates
        .iter()
        .map(|c| resample_trajectory(&c.joints, MEDOID_RESAMPLE))
        .collect();
    let n = candidates.len();
    let mut scores = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = trajectory_distance(&resampled[i], &resampled[j]);
            scores[i] -= d;
            scores[j] -= d;
        }
    }
    scores
}

/// Linear resampling of a joint trajectory to a fixed frame count.
pub fn resample_trajectory(joints: &[Joints3D], n: usize) -> Vec<Vec<Vector3<f64>>> {
    assert!(n >= 2);
    let f = joints.len();
    (0..n)
        .map(|i| {
            if f == 1 {
                return joints[0].coords.clone();
            }
            let u = i as f64 * (f - 1) as f64 / (n - 1) as f64;
            let lo = u.floor() as usize;
            let hi = (lo + 1).min(f - 1);
            let t = u - lo as f64;
            joints[lo]
                .coords
                .iter()
                .zip(&joints[hi].coords)
                .map(|(a, b)| a * (1.0 - t) + b * t)
                .collect()
        })
        .collect()
}

fn trajectory_distance(a: &[Vec<Vector3<f64>>], b: &[Vec<Vector3<f64>>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (fa, fb) in a.iter().zip(b) {
        for (pa, pb) in fa.iter().zip(fb) {
            total += (pa - pb).norm();
            count += 1;
        }
    }
    total / count as f64
}
