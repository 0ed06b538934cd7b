//! Pose parameters: global orientation, shape, expression, and per-joint
//! rotations.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::rotation::{canonicalize_axis_angle, compose_rotation};
use super::tree::{KinematicTree, SHAPE_DIM};
use crate::{Error, Result};

/// Per-frame optimization variable: global orientation ζ, shape β,
/// expression ψ (geometric pass-through), and joint rotations θ (axis-angle,
/// 3 per joint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseParams {
    pub zeta: [f64; 3],
    pub beta: [f64; SHAPE_DIM],
    pub psi: [f64; SHAPE_DIM],
    pub theta: Vec<f64>,
}

impl PoseParams {
    /// The rest pose: every parameter zero.
    pub fn rest(tree: &KinematicTree) -> Self {
        PoseParams {
            zeta: [0.0; 3],
            beta: [0.0; SHAPE_DIM],
            psi: [0.0; SHAPE_DIM],
            theta: vec![0.0; tree.theta_dim()],
        }
    }

    pub fn zeta_vec(&self) -> Vector3<f64> {
        Vector3::from(self.zeta)
    }

    /// Axis-angle triple of joint `j`.
    pub fn joint_rotation(&self, j: usize) -> Vector3<f64> {
        Vector3::new(self.theta[3 * j], self.theta[3 * j + 1], self.theta[3 * j + 2])
    }

    pub fn set_joint_rotation(&mut self, j: usize, aa: Vector3<f64>) {
        self.theta[3 * j] = aa.x;
        self.theta[3 * j + 1] = aa.y;
        self.theta[3 * j + 2] = aa.z;
    }

    pub fn validate(&self, tree: &KinematicTree) -> Result<()> {
        if self.theta.len() != tree.theta_dim() {
            return Err(Error::DimensionMismatch {
                what: "pose theta".into(),
                expected: tree.theta_dim(),
                found: self.theta.len(),
            });
        }
        let finite = self.zeta.iter().all(|v| v.is_finite())
            && self.beta.iter().all(|v| v.is_finite())
            && self.psi.iter().all(|v| v.is_finite())
            && self.theta.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("pose contains non-finite values".into()));
        }
        Ok(())
    }

    /// Wraps ζ and every θ triple to the canonical axis-angle range.
    pub fn canonicalize(&mut self) {
        let z = canonicalize_axis_angle(&self.zeta_vec());
        self.zeta = [z.x, z.y, z.z];
        for j in 0..self.theta.len() / 3 {
            let aa = canonicalize_axis_angle(&Vector3::new(
                self.theta[3 * j],
                self.theta[3 * j + 1],
                self.theta[3 * j + 2],
            ));
            self.theta[3 * j] = aa.x;
            self.theta[3 * j + 1] = aa.y;
            self.theta[3 * j + 2] = aa.z;
        }
    }

    /// Rounds every parameter through `f32`, the precision used by the
    /// on-disk sign format. Keeps in-memory values identical to what a
    /// save/load round trip yields.
    pub fn quantize_f32(&mut self) {
        for v in self
            .zeta
            .iter_mut()
            .chain(self.beta.iter_mut())
            .chain(self.psi.iter_mut())
            .chain(self.theta.iter_mut())
        {
            *v = *v as f32 as f64;
        }
    }
}

/// Composes a world rotation of `delta` radians about `axis` with the pose's
/// global orientation; every other parameter is untouched.
pub fn rotate_global(pose: &PoseParams, delta: f64, axis: &Vector3<f64>) -> PoseParams {
    if delta == 0.0 {
        return pose.clone();
    }
    let mut out = pose.clone();
    let z = compose_rotation(&pose.zeta_vec(), delta, axis);
    out.zeta = [z.x, z.y, z.z];
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::rotation::rodrigues;

    #[test]
    fn rest_pose_is_all_zero() {
        let tree = KinematicTree::signer54();
        let rest = PoseParams::rest(&tree);
        assert!(rest.zeta.iter().all(|&v| v == 0.0));
        assert!(rest.beta.iter().all(|&v| v == 0.0));
        assert!(rest.psi.iter().all(|&v| v == 0.0));
        assert!(rest.theta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rest_pose_fixed_under_canonicalization() {
        let tree = KinematicTree::signer54();
        let mut rest = PoseParams::rest(&tree);
        let before = rest.clone();
        rest.canonicalize();
        assert_eq!(rest, before);
    }

    #[test]
    fn rotate_global_zero_delta_is_identity() {
        let tree = KinematicTree::signer54();
        let mut pose = PoseParams::rest(&tree);
        pose.zeta = [0.2, -0.1, 0.3];
        let rotated = rotate_global(&pose, 0.0, &Vector3::y());
        assert_eq!(rotated, pose);
    }

    #[test]
    fn rotate_global_composes_as_rotations() {
        let tree = KinematicTree::signer54();
        let mut pose = PoseParams::rest(&tree);
        pose.zeta = [0.1, 0.4, -0.2];
        let axis = Vector3::y();
        let a = rotate_global(&rotate_global(&pose, 0.3, &axis), 0.5, &axis);
        let b = rotate_global(&pose, 0.8, &axis);
        let ra = rodrigues(&a.zeta_vec());
        let rb = rodrigues(&b.zeta_vec());
        assert!((ra - rb).norm() < 1e-10);
    }

    #[test]
    fn canonicalize_bounds_norms() {
        let tree = KinematicTree::signer54();
        let mut pose = PoseParams::rest(&tree);
        pose.set_joint_rotation(5, Vector3::new(0.0, 7.5, 0.0));
        pose.canonicalize();
        let aa = pose.joint_rotation(5);
        assert!(aa.norm() < 2.0 * std::f64::consts::PI);
        assert!((rodrigues(&aa) - rodrigues(&Vector3::new(0.0, 7.5, 0.0))).norm() < 1e-9);
    }
}
