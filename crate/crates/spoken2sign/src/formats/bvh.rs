//! BVH export: skeleton hierarchy from the kinematic tree, per-frame Euler
//! rotations converted from axis-angle in ZXY channel order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Matrix3;

use crate::connector::StitchedSequence;
use crate::skeleton::{apply_shape, rodrigues, KinematicTree, PoseParams};
use crate::{Error, Result};

/// Extracts (z, x, y) in radians from `R = Rz(z)·Rx(x)·Ry(y)`.
///
/// When `cos(x)` vanishes the z/y split is degenerate; z is set to 0 and the
/// remaining rotation folded into y.
pub fn euler_zxy(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let sx = r[(2, 1)].clamp(-1.0, 1.0);
    let x = sx.asin();
    if sx.abs() < 1.0 - 1e-9 {
        let z = (-r[(0, 1)]).atan2(r[(1, 1)]);
        let y = (-r[(2, 0)]).atan2(r[(2, 2)]);
        (z, x, y)
    } else {
        (0.0, x, r[(0, 2)].atan2(r[(0, 0)]))
    }
}

fn euler_of_pose_joint(pose: &PoseParams, joint: usize) -> (f64, f64, f64) {
    let rot = if joint == 0 {
        rodrigues(&pose.zeta_vec()) * rodrigues(&pose.joint_rotation(0))
    } else {
        rodrigues(&pose.joint_rotation(joint))
    };
    euler_zxy(&rot)
}

/// Writes the stitched sequence as BVH. Every frame must carry pose
/// parameters (joint-mode co-articulations are pose-free and cannot drive a
/// skeleton).
pub fn write_bvh(
    seq: &StitchedSequence,
    tree: &KinematicTree,
    fps: f64,
    path: &Path,
) -> Result<()> {
    if seq.frames.is_empty() {
        return Err(Error::InvalidConfig("cannot export an empty sequence".into()));
    }
    let poses: Vec<&PoseParams> = seq
        .frames
        .iter()
        .map(|f| {
            f.pose.as_ref().ok_or_else(|| {
                Error::InvalidConfig(
                    "sequence contains pose-free frames; export requires pose mode".into(),
                )
            })
        })
        .collect::<Result<_>>()?;

    // static offsets use the first frame's shape
    let offsets = apply_shape(tree, &poses[0].beta);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); tree.joint_count()];
    for (j, joint) in tree.joints().iter().enumerate() {
        if let Some(p) = joint.parent {
            children[p].push(j);
        }
    }

    let mut out = String::new();
    out.push_str("HIERARCHY\n");
    write_joint(&mut out, tree, &children, &offsets, 0, 0);

    let _ = writeln!(out, "MOTION");
    let _ = writeln!(out, "Frames: {}", poses.len());
    let _ = writeln!(out, "Frame Time: {}", 1.0 / fps);
    for pose in &poses {
        let mut fields: Vec<String> = Vec::with_capacity(3 + 3 * tree.joint_count());
        let root = &offsets[0];
        fields.push(fmt(root.x));
        fields.push(fmt(root.y));
        fields.push(fmt(root.z));
        for j in 0..tree.joint_count() {
            let (z, x, y) = euler_of_pose_joint(pose, j);
            fields.push(fmt(z.to_degrees()));
            fields.push(fmt(x.to_degrees()));
            fields.push(fmt(y.to_degrees()));
        }
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

fn fmt(v: f64) -> String {
    // fixed precision keeps files compact; -0 confuses some readers
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.6}")
}

fn write_joint(
    out: &mut String,
    tree: &KinematicTree,
    children: &[Vec<usize>],
    offsets: &[nalgebra::Vector3<f64>],
    joint: usize,
    depth: usize,
) {
    let pad = "  ".repeat(depth);
    let name = &tree.joint(joint).name;
    let o = &offsets[joint];
    if joint == 0 {
        let _ = writeln!(out, "{pad}ROOT {name}");
        let _ = writeln!(out, "{pad}{{");
        let _ = writeln!(out, "{pad}  OFFSET 0.000000 0.000000 0.000000");
        let _ = writeln!(
            out,
            "{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation"
        );
    } else {
        let _ = writeln!(out, "{pad}JOINT {name}");
        let _ = writeln!(out, "{pad}{{");
        let _ = writeln!(out, "{pad}  OFFSET {} {} {}", fmt(o.x), fmt(o.y), fmt(o.z));
        let _ = writeln!(out, "{pad}  CHANNELS 3 Zrotation Xrotation Yrotation");
    }
    if children[joint].is_empty() {
        let _ = writeln!(out, "{pad}  End Site");
        let _ = writeln!(out, "{pad}  {{");
        let _ = writeln!(out, "{pad}    OFFSET 0.000000 0.010000 0.000000");
        let _ = writeln!(out, "{pad}  }}");
    } else {
        for &c in &children[joint] {
            write_joint(out, tree, children, offsets, c, depth + 1);
        }
    }
    let _ = writeln!(out, "{pad}}}");
}
