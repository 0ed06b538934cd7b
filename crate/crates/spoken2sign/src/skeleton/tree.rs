//! Kinematic tree definition, the `signer54` default skeleton, and the
//! key/value tree config format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Number of shape coefficients per joint.
pub const SHAPE_DIM: usize = 10;

/// One joint of the skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Parent joint index; `None` for the root. Non-root parents are always
    /// smaller than the joint's own index.
    pub parent: Option<usize>,
    /// Offset from the parent joint, in the parent's frame (meters).
    pub rest_offset: Vector3<f64>,
    /// Linear bone-length response to the shape vector β.
    pub shape_basis: [f64; SHAPE_DIM],
    /// Per-joint weight γ used by the joint and smoothness losses.
    pub weight: f64,
    /// Symmetric rotation limit per axis-angle component (radians), used by
    /// the prior's hinge penalty.
    pub angle_limit: f64,
}

/// One entry of the landmark map: either a posed joint or a fixed offset in
/// some joint's local frame.
#[derive(Debug, Clone, PartialEq)]
pub enum LandmarkDef {
    Joint(usize),
    Offset { joint: usize, offset: Vector3<f64> },
}

impl LandmarkDef {
    /// The joint whose pose drives this landmark.
    pub fn joint(&self) -> usize {
        match *self {
            LandmarkDef::Joint(j) => j,
            LandmarkDef::Offset { joint, .. } => joint,
        }
    }
}

/// Parametric skeleton: joints in topological order plus a landmark map and
/// named landmark sets. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTree {
    pub name: String,
    joints: Vec<Joint>,
    landmarks: Vec<LandmarkDef>,
    named_sets: BTreeMap<String, Vec<usize>>,
}

/// Canonical set names used by the pipeline.
pub mod sets {
    pub const BODY: &str = "body";
    pub const LEFT_HAND: &str = "left_hand";
    pub const RIGHT_HAND: &str = "right_hand";
    pub const FACE: &str = "face";
    /// Hands + wrists + elbows, the connector's input set.
    pub const SIGN_CONNECTOR: &str = "j_sc";
    /// Torso landmarks whose camera depths the upright loss equalizes.
    pub const UPRIGHT: &str = "j_upright";
}

impl KinematicTree {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<Joint>,
        landmarks: Vec<LandmarkDef>,
        named_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let tree = KinematicTree {
            name: name.into(),
            joints,
            landmarks,
            named_sets,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::InvalidConfig("tree has no joints".into()));
        }
        for (i, joint) in self.joints.iter().enumerate() {
            match joint.parent {
                None => {
                    if i != 0 {
                        return Err(Error::InvalidConfig(format!(
                            "joint {i} ({}) has no parent but is not joint 0",
                            joint.name
                        )));
                    }
                }
                Some(p) if p >= i => {
                    return Err(Error::InvalidConfig(format!(
                        "joint {i} ({}) has parent {p}, violating topological order",
                        joint.name
                    )));
                }
                _ => {}
            }
            if joint.weight < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "joint {i} ({}) has negative weight {}",
                    joint.name, joint.weight
                )));
            }
        }
        for (i, lm) in self.landmarks.iter().enumerate() {
            if lm.joint() >= self.joints.len() {
                return Err(Error::InvalidConfig(format!(
                    "landmark {i} references joint {} beyond joint count {}",
                    lm.joint(),
                    self.joints.len()
                )));
            }
        }
        for (name, indices) in &self.named_sets {
            for &idx in indices {
                if idx >= self.landmarks.len() {
                    return Err(Error::InvalidConfig(format!(
                        "set {name} contains landmark {idx} beyond landmark count {}",
                        self.landmarks.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn landmark_count(&self) -> usize {
        self.landmarks.len()
    }

    /// Dimension of the flattened joint-rotation vector θ.
    pub fn theta_dim(&self) -> usize {
        3 * self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint(&self, i: usize) -> &Joint {
        &self.joints[i]
    }

    pub fn landmarks(&self) -> &[LandmarkDef] {
        &self.landmarks
    }

    /// Landmark indices of a named set; empty slice when absent.
    pub fn set(&self, name: &str) -> &[usize] {
        self.named_sets
            .get(name)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn named_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.named_sets
    }

    /// Joint weight γ of the joint driving landmark `i`.
    pub fn landmark_weight(&self, i: usize) -> f64 {
        self.joints[self.landmarks[i].joint()].weight
    }

    /// Maps a set of landmark indices to the set of joints driving them,
    /// sorted and deduplicated.
    pub fn joints_for_landmarks(&self, landmark_indices: &[usize]) -> Vec<usize> {
        let mut joints: Vec<usize> = landmark_indices
            .iter()
            .map(|&i| self.landmarks[i].joint())
            .collect();
        joints.sort_unstable();
        joints.dedup();
        joints
    }

    /// Joint indices driving the two hand landmark sets.
    pub fn hand_joints(&self) -> Vec<usize> {
        let mut lms: Vec<usize> = self.set(sets::LEFT_HAND).to_vec();
        lms.extend_from_slice(self.set(sets::RIGHT_HAND));
        self.joints_for_landmarks(&lms)
    }

    /// Joint indices not driven by the hand sets.
    pub fn body_joints(&self) -> Vec<usize> {
        let hands = self.hand_joints();
        (0..self.joint_count())
            .filter(|j| !hands.contains(j))
            .collect()
    }

    /// SHA-256 of the canonical config serialization; identifies the tree in
    /// file headers.
    pub fn hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.to_config_string().as_bytes());
        hasher.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Serializes the tree in the config format parsed by
    /// [`KinematicTree::parse_config`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tree v1 {}", self.name);
        let _ = writeln!(out, "joints {}", self.joints.len());
        let _ = writeln!(out, "landmarks {}", self.landmarks.len());
        for (i, j) in self.joints.iter().enumerate() {
            let parent = match j.parent {
                Some(p) => p.to_string(),
                None => "-".to_string(),
            };
            let mut line = format!(
                "joint {i} {} {parent} {} {} {} {} {}",
                j.name, j.rest_offset.x, j.rest_offset.y, j.rest_offset.z, j.weight, j.angle_limit
            );
            for b in &j.shape_basis {
                let _ = write!(line, " {b}");
            }
            let _ = writeln!(out, "{line}");
        }
        for (i, lm) in self.landmarks.iter().enumerate() {
            match lm {
                LandmarkDef::Joint(j) => {
                    let _ = writeln!(out, "landmark {i} joint {j}");
                }
                LandmarkDef::Offset { joint, offset } => {
                    let _ = writeln!(
                        out,
                        "landmark {i} offset {joint} {} {} {}",
                        offset.x, offset.y, offset.z
                    );
                }
            }
        }
        for (name, indices) in &self.named_sets {
            let list = indices
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "set {name} {list}");
        }
        out
    }

    /// Parses the key/value tree config format.
    ///
    /// Lines: `tree v1 <name>`, `joints <n>`, `landmarks <n>`,
    /// `joint <idx> <name> <parent|-> <ox> <oy> <oz> <gamma> <limit> <b0..b9>`,
    /// `landmark <idx> joint <j>` or `landmark <idx> offset <j> <ox> <oy> <oz>`,
    /// `set <name> <i...>`. `#` starts a comment.
    pub fn parse_config(text: &str, origin: &str) -> Result<Self> {
        let mut name = String::new();
        let mut joint_count = None;
        let mut landmark_count = None;
        let mut joints: Vec<Option<Joint>> = Vec::new();
        let mut landmarks: Vec<Option<LandmarkDef>> = Vec::new();
        let mut named_sets = BTreeMap::new();
        let err = |line: usize, msg: String| Error::parse(origin, line, msg);

        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "tree" => {
                    if fields.len() < 3 || fields[1] != "v1" {
                        return Err(err(lineno, "expected `tree v1 <name>`".into()));
                    }
                    name = fields[2].to_string();
                }
                "joints" => {
                    let n: usize = fields
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(lineno, "bad joint count".into()))?;
                    joint_count = Some(n);
                    joints = vec![None; n];
                }
                "landmarks" => {
                    let n: usize = fields
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(lineno, "bad landmark count".into()))?;
                    landmark_count = Some(n);
                    landmarks = vec![None; n];
                }
                "joint" => {
                    if fields.len() != 9 + SHAPE_DIM {
                        return Err(err(
                            lineno,
                            format!("joint line needs {} fields", 9 + SHAPE_DIM),
                        ));
                    }
                    let idx: usize = fields[1]
                        .parse()
                        .map_err(|_| err(lineno, "bad joint index".into()))?;
                    if idx >= joints.len() {
                        return Err(err(lineno, format!("joint index {idx} out of range")));
                    }
                    let parent = if fields[3] == "-" {
                        None
                    } else {
                        Some(
                            fields[3]
                                .parse()
                                .map_err(|_| err(lineno, "bad parent index".into()))?,
                        )
                    };
                    let num = |s: &str| -> Result<f64> {
                        s.parse()
                            .map_err(|_| err(lineno, format!("bad number {s:?}")))
                    };
                    let mut shape_basis = [0.0; SHAPE_DIM];
                    for (k, slot) in shape_basis.iter_mut().enumerate() {
                        *slot = num(fields[9 + k])?;
                    }
                    joints[idx] = Some(Joint {
                        name: fields[2].to_string(),
                        parent,
                        rest_offset: Vector3::new(num(fields[4])?, num(fields[5])?, num(fields[6])?),
                        weight: num(fields[7])?,
                        angle_limit: num(fields[8])?,
                        shape_basis,
                    });
                }
                "landmark" => {
                    let idx: usize = fields
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(lineno, "bad landmark index".into()))?;
                    if idx >= landmarks.len() {
                        return Err(err(lineno, format!("landmark index {idx} out of range")));
                    }
                    match fields.get(2) {
                        Some(&"joint") if fields.len() == 4 => {
                            let j = fields[3]
                                .parse()
                                .map_err(|_| err(lineno, "bad joint reference".into()))?;
                            landmarks[idx] = Some(LandmarkDef::Joint(j));
                        }
                        Some(&"offset") if fields.len() == 7 => {
                            let j = fields[3]
                                .parse()
                                .map_err(|_| err(lineno, "bad joint reference".into()))?;
                            let num = |s: &str| -> Result<f64> {
                                s.parse()
                                    .map_err(|_| err(lineno, format!("bad number {s:?}")))
                            };
                            landmarks[idx] = Some(LandmarkDef::Offset {
                                joint: j,
                                offset: Vector3::new(
                                    num(fields[4])?,
                                    num(fields[5])?,
                                    num(fields[6])?,
                                ),
                            });
                        }
                        _ => return Err(err(lineno, "expected `joint <j>` or `offset <j> x y z`".into())),
                    }
                }
                "set" => {
                    if fields.len() < 2 {
                        return Err(err(lineno, "set line needs a name".into()));
                    }
                    let indices: Result<Vec<usize>> = fields[2..]
                        .iter()
                        .map(|s| {
                            s.parse()
                                .map_err(|_| err(lineno, format!("bad set index {s:?}")))
                        })
                        .collect();
                    named_sets.insert(fields[1].to_string(), indices?);
                }
                other => return Err(err(lineno, format!("unknown directive {other:?}"))),
            }
        }

        let joint_count =
            joint_count.ok_or_else(|| err(0, "missing `joints <n>` directive".into()))?;
        let landmark_count =
            landmark_count.ok_or_else(|| err(0, "missing `landmarks <n>` directive".into()))?;
        let joints: Vec<Joint> = joints
            .into_iter()
            .enumerate()
            .map(|(i, j)| j.ok_or_else(|| err(0, format!("joint {i} not defined"))))
            .collect::<Result<_>>()?;
        let landmarks: Vec<LandmarkDef> = landmarks
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| err(0, format!("landmark {i} not defined"))))
            .collect::<Result<_>>()?;
        if joints.len() != joint_count || landmarks.len() != landmark_count {
            return Err(err(0, "count directives disagree with definitions".into()));
        }
        KinematicTree::new(name, joints, landmarks, named_sets)
    }

    /// The default 54-joint signing skeleton: 22 body joints, 15 per hand,
    /// and jaw/eyes placeholders, with a 118-entry landmark map (25 body,
    /// 21 per hand, 51 face).
    pub fn signer54() -> Self {
        build_signer54()
    }
}

// Joint index constants for signer54, used by the builder and tests.
// Body: coordinates are x right, y down, z away from the camera; the signer
// faces -z.
mod j {
    pub const PELVIS: usize = 0;
    pub const L_HIP: usize = 1;
    pub const R_HIP: usize = 2;
    pub const SPINE1: usize = 3;
    pub const L_KNEE: usize = 4;
    pub const R_KNEE: usize = 5;
    pub const SPINE2: usize = 6;
    pub const L_ANKLE: usize = 7;
    pub const R_ANKLE: usize = 8;
    pub const SPINE3: usize = 9;
    pub const L_FOOT: usize = 10;
    pub const R_FOOT: usize = 11;
    pub const NECK: usize = 12;
    pub const L_COLLAR: usize = 13;
    pub const R_COLLAR: usize = 14;
    pub const HEAD: usize = 15;
    pub const L_SHOULDER: usize = 16;
    pub const R_SHOULDER: usize = 17;
    pub const L_ELBOW: usize = 18;
    pub const R_ELBOW: usize = 19;
    pub const L_WRIST: usize = 20;
    pub const R_WRIST: usize = 21;
    pub const JAW: usize = 22;
    pub const EYES: usize = 23;
    pub const L_HAND0: usize = 24; // 15 joints: 5 fingers x 3 segments
    pub const R_HAND0: usize = 39;
}

fn push_joint(
    joints: &mut Vec<Joint>,
    name: &str,
    parent: Option<usize>,
    offset: (f64, f64, f64),
    basis_slot: Option<usize>,
    weight: f64,
    limit: f64,
) {
    let mut shape_basis = [0.0; SHAPE_DIM];
    shape_basis[0] = 1.0; // component 0 scales every bone
    if let Some(slot) = basis_slot {
        shape_basis[slot] = 0.5;
    }
    joints.push(Joint {
        name: name.to_string(),
        parent,
        rest_offset: Vector3::new(offset.0, offset.1, offset.2),
        shape_basis,
        weight,
        angle_limit: limit,
    });
}

fn build_signer54() -> KinematicTree {
    let mut joints: Vec<Joint> = Vec::with_capacity(54);
    macro_rules! add {
        ($($args:expr),* $(,)?) => { push_joint(&mut joints, $($args),*) };
    }

    // Shape slots: 1 = torso length, 2 = limb length, 3 = hand size.
    add!("pelvis", None, (0.0, 0.0, 0.0), None, 1.0, 2.0);
    add!("left_hip", Some(j::PELVIS), (0.09, 0.06, 0.0), Some(2), 1.0, 2.0);
    add!("right_hip", Some(j::PELVIS), (-0.09, 0.06, 0.0), Some(2), 1.0, 2.0);
    add!("spine1", Some(j::PELVIS), (0.0, -0.13, 0.0), Some(1), 1.0, 2.0);
    add!("left_knee", Some(j::L_HIP), (0.0, 0.40, 0.0), Some(2), 1.0, 2.0);
    add!("right_knee", Some(j::R_HIP), (0.0, 0.40, 0.0), Some(2), 1.0, 2.0);
    add!("spine2", Some(j::SPINE1), (0.0, -0.13, 0.0), Some(1), 1.0, 2.0);
    add!("left_ankle", Some(j::L_KNEE), (0.0, 0.42, 0.0), Some(2), 1.0, 2.0);
    add!("right_ankle", Some(j::R_KNEE), (0.0, 0.42, 0.0), Some(2), 1.0, 2.0);
    add!("spine3", Some(j::SPINE2), (0.0, -0.12, 0.0), Some(1), 1.0, 2.0);
    add!("left_foot", Some(j::L_ANKLE), (0.0, 0.05, -0.12), Some(2), 1.0, 2.0);
    add!("right_foot", Some(j::R_ANKLE), (0.0, 0.05, -0.12), Some(2), 1.0, 2.0);
    add!("neck", Some(j::SPINE3), (0.0, -0.10, 0.0), Some(1), 1.0, 2.0);
    add!("left_collar", Some(j::NECK), (0.03, 0.02, 0.0), Some(1), 1.0, 2.0);
    add!("right_collar", Some(j::NECK), (-0.03, 0.02, 0.0), Some(1), 1.0, 2.0);
    add!("head", Some(j::NECK), (0.0, -0.12, 0.0), Some(1), 1.0, 2.0);
    add!("left_shoulder", Some(j::L_COLLAR), (0.12, 0.0, 0.0), Some(2), 1.0, 2.0);
    add!("right_shoulder", Some(j::R_COLLAR), (-0.12, 0.0, 0.0), Some(2), 1.0, 2.0);
    add!("left_elbow", Some(j::L_SHOULDER), (0.27, 0.0, 0.0), Some(2), 1.0, 2.0);
    add!("right_elbow", Some(j::R_SHOULDER), (-0.27, 0.0, 0.0), Some(2), 1.0, 2.0);
    add!("left_wrist", Some(j::L_ELBOW), (0.25, 0.0, 0.0), Some(2), 2.0, 2.0);
    add!("right_wrist", Some(j::R_ELBOW), (-0.25, 0.0, 0.0), Some(2), 2.0, 2.0);
    add!("jaw", Some(j::HEAD), (0.0, 0.06, -0.06), None, 0.5, 0.8);
    add!("eyes", Some(j::HEAD), (0.0, -0.02, -0.08), None, 0.5, 0.8);

    // Hands: thumb, index, middle, ring, pinky; 3 segments each, x mirrored
    // on the right side.
    let finger_roots = [
        ("thumb", (0.025, 0.015, -0.020)),
        ("index", (0.090, 0.005, -0.015)),
        ("middle", (0.092, 0.0, 0.0)),
        ("ring", (0.088, 0.0, 0.012)),
        ("pinky", (0.082, 0.0, 0.025)),
    ];
    let segments = [(0.035, 0.0, 0.0), (0.025, 0.0, 0.0)];
    for (side, wrist, sign) in [("left", j::L_WRIST, 1.0), ("right", j::R_WRIST, -1.0)] {
        for (finger, root) in finger_roots {
            let base = joints.len();
            add!(
                &format!("{side}_{finger}1"),
                Some(wrist),
                (sign * root.0, root.1, root.2),
                Some(3),
                2.0,
                1.6,
            );
            add!(
                &format!("{side}_{finger}2"),
                Some(base),
                (sign * segments[0].0, segments[0].1, segments[0].2),
                Some(3),
                2.0,
                1.6,
            );
            add!(
                &format!("{side}_{finger}3"),
                Some(base + 1),
                (sign * segments[1].0, segments[1].1, segments[1].2),
                Some(3),
                2.0,
                1.6,
            );
        }
    }
    debug_assert_eq!(joints.len(), 54);

    // Landmark map. Order: 25 body, 21 left hand, 21 right hand, 51 face.
    let mut landmarks: Vec<LandmarkDef> = Vec::with_capacity(118);
    let jl = LandmarkDef::Joint;
    let off = |joint: usize, x: f64, y: f64, z: f64| LandmarkDef::Offset {
        joint,
        offset: Vector3::new(x, y, z),
    };

    // Body 25: nose, neck, shoulders/elbows/wrists, pelvis, hips/knees/ankles,
    // eyes, ears, toes, heels.
    landmarks.push(off(j::HEAD, 0.0, 0.02, -0.10)); // 0 nose
    landmarks.push(jl(j::NECK)); // 1
    landmarks.push(jl(j::R_SHOULDER)); // 2
    landmarks.push(jl(j::R_ELBOW)); // 3
    landmarks.push(jl(j::R_WRIST)); // 4
    landmarks.push(jl(j::L_SHOULDER)); // 5
    landmarks.push(jl(j::L_ELBOW)); // 6
    landmarks.push(jl(j::L_WRIST)); // 7
    landmarks.push(jl(j::PELVIS)); // 8
    landmarks.push(jl(j::R_HIP)); // 9
    landmarks.push(jl(j::R_KNEE)); // 10
    landmarks.push(jl(j::R_ANKLE)); // 11
    landmarks.push(jl(j::L_HIP)); // 12
    landmarks.push(jl(j::L_KNEE)); // 13
    landmarks.push(jl(j::L_ANKLE)); // 14
    landmarks.push(off(j::EYES, -0.031, 0.0, -0.01)); // 15 right eye
    landmarks.push(off(j::EYES, 0.031, 0.0, -0.01)); // 16 left eye
    landmarks.push(off(j::HEAD, -0.072, 0.01, -0.01)); // 17 right ear
    landmarks.push(off(j::HEAD, 0.072, 0.01, -0.01)); // 18 left ear
    landmarks.push(off(j::L_FOOT, 0.01, 0.0, -0.03)); // 19 left big toe
    landmarks.push(off(j::L_FOOT, 0.035, 0.0, -0.02)); // 20 left small toe
    landmarks.push(off(j::L_ANKLE, 0.0, 0.02, 0.03)); // 21 left heel
    landmarks.push(off(j::R_FOOT, -0.01, 0.0, -0.03)); // 22 right big toe
    landmarks.push(off(j::R_FOOT, -0.035, 0.0, -0.02)); // 23 right small toe
    landmarks.push(off(j::R_ANKLE, 0.0, 0.02, 0.03)); // 24 right heel

    // Hands: wrist, then per finger 3 joints + tip offset = 21 each.
    for (wrist, hand0, sign) in [(j::L_WRIST, j::L_HAND0, 1.0), (j::R_WRIST, j::R_HAND0, -1.0)] {
        landmarks.push(jl(wrist));
        for finger in 0..5 {
            let base = hand0 + finger * 3;
            landmarks.push(jl(base));
            landmarks.push(jl(base + 1));
            landmarks.push(jl(base + 2));
            landmarks.push(off(base + 2, sign * 0.02, 0.0, 0.0)); // fingertip
        }
    }

    // Face 51: 10 brows (eyes joint), 9 nose (head), 12 eye contour (eyes),
    // 20 mouth (jaw).
    for side in [1.0f64, -1.0] {
        for k in 0..5 {
            let x = side * (0.018 + 0.009 * k as f64);
            landmarks.push(off(j::EYES, x, -0.018, -0.012));
        }
    }
    for k in 0..4 {
        // nose bridge, descending
        landmarks.push(off(j::HEAD, 0.0, -0.01 + 0.012 * k as f64, -0.098));
    }
    for k in 0..5 {
        // nostril row
        let x = -0.016 + 0.008 * k as f64;
        landmarks.push(off(j::HEAD, x, 0.032, -0.092));
    }
    for side in [1.0f64, -1.0] {
        // 6 points around each eye
        for k in 0..6 {
            let ang = std::f64::consts::PI / 3.0 * k as f64;
            let x = side * 0.031 + 0.012 * ang.cos();
            let y = 0.007 * ang.sin();
            landmarks.push(off(j::EYES, x, y, -0.011));
        }
    }
    for k in 0..12 {
        // outer lip ellipse
        let ang = std::f64::consts::TAU / 12.0 * k as f64;
        landmarks.push(off(j::JAW, 0.025 * ang.cos(), -0.015 + 0.010 * ang.sin(), -0.030));
    }
    for k in 0..8 {
        // inner lip ellipse
        let ang = std::f64::consts::TAU / 8.0 * k as f64;
        landmarks.push(off(j::JAW, 0.015 * ang.cos(), -0.015 + 0.005 * ang.sin(), -0.030));
    }
    debug_assert_eq!(landmarks.len(), 118);

    let mut named_sets = BTreeMap::new();
    named_sets.insert(sets::BODY.to_string(), (0..25).collect::<Vec<_>>());
    named_sets.insert(sets::LEFT_HAND.to_string(), (25..46).collect::<Vec<_>>());
    named_sets.insert(sets::RIGHT_HAND.to_string(), (46..67).collect::<Vec<_>>());
    named_sets.insert(sets::FACE.to_string(), (67..118).collect::<Vec<_>>());
    // Connector set: both hands (wrists included) plus the two elbows.
    let mut j_sc: Vec<usize> = (25..67).collect();
    j_sc.push(3); // right elbow landmark
    j_sc.push(6); // left elbow landmark
    j_sc.sort_unstable();
    named_sets.insert(sets::SIGN_CONNECTOR.to_string(), j_sc);
    // Upright set: neck, pelvis, shoulders, hips.
    named_sets.insert(sets::UPRIGHT.to_string(), vec![1, 2, 5, 8, 9, 12]);

    KinematicTree::new("signer54", joints, landmarks, named_sets)
        .expect("built-in signer54 tree is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signer54_dimensions() {
        let tree = KinematicTree::signer54();
        assert_eq!(tree.joint_count(), 54);
        assert_eq!(tree.landmark_count(), 118);
        assert_eq!(tree.set(sets::SIGN_CONNECTOR).len(), 44);
        assert_eq!(tree.set(sets::FACE).len(), 51);
    }

    #[test]
    fn signer54_hand_and_body_joint_split_covers_all() {
        let tree = KinematicTree::signer54();
        let hands = tree.hand_joints();
        let body = tree.body_joints();
        assert_eq!(hands.len() + body.len(), 54);
        // wrists are driven by the hand landmark sets
        assert!(hands.contains(&j::L_WRIST));
        assert!(hands.contains(&j::R_WRIST));
        assert!(body.contains(&j::HEAD));
    }

    #[test]
    fn config_round_trip() {
        let tree = KinematicTree::signer54();
        let text = tree.to_config_string();
        let parsed = KinematicTree::parse_config(&text, "inline").unwrap();
        assert_eq!(tree, parsed);
        assert_eq!(tree.hash(), parsed.hash());
    }

    #[test]
    fn parse_rejects_bad_topology() {
        let text = "tree v1 bad\njoints 2\nlandmarks 1\n\
                    joint 0 a 1 0 0 0 1 2 1 0 0 0 0 0 0 0 0 0\n\
                    joint 1 b - 0 0 0 1 2 1 0 0 0 0 0 0 0 0 0\n\
                    landmark 0 joint 0\n";
        let e = KinematicTree::parse_config(text, "inline").unwrap_err();
        assert!(e.to_string().contains("topological") || e.to_string().contains("parent"));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "tree v1 bad\njoints 1\nlandmarks 1\njoint 0 a - 0 0 zzz 1 2 1 0 0 0 0 0 0 0 0 0\nlandmark 0 joint 0\n";
        let e = KinematicTree::parse_config(text, "cfg").unwrap_err();
        assert!(e.to_string().contains("cfg:4"), "{e}");
    }

    #[test]
    fn sets_reference_valid_landmarks() {
        let tree = KinematicTree::signer54();
        for indices in tree.named_sets().values() {
            for &i in indices {
                assert!(i < tree.landmark_count());
            }
        }
    }
}
