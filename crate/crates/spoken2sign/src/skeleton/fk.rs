//! Forward kinematics over the joint chain and the reverse-mode gradient of
//! landmark positions with respect to pose, shape, and camera translation.

use nalgebra::{Matrix3, Vector3};

use super::camera::{CameraParams, Joints3D};
use super::pose::PoseParams;
use super::rotation::{rodrigues, rodrigues_jacobian};
use super::tree::{KinematicTree, LandmarkDef, SHAPE_DIM};
use crate::Result;

/// Lower bound on the per-bone shape scale factor.
const MIN_SHAPE_SCALE: f64 = 0.1;

/// Shaped rest offsets: each bone scaled by `1 + dot(basis, β)`, clamped to
/// at least 0.1.
pub fn apply_shape(tree: &KinematicTree, beta: &[f64; SHAPE_DIM]) -> Vec<Vector3<f64>> {
    tree.joints()
        .iter()
        .map(|j| j.rest_offset * shape_scale(&j.shape_basis, beta).0)
        .collect()
}

fn shape_scale(basis: &[f64; SHAPE_DIM], beta: &[f64; SHAPE_DIM]) -> (f64, bool) {
    let raw = 1.0 + basis.iter().zip(beta).map(|(b, v)| b * v).sum::<f64>();
    if raw < MIN_SHAPE_SCALE {
        (MIN_SHAPE_SCALE, false)
    } else {
        (raw, true)
    }
}

/// Intermediate FK state kept for the backward pass.
pub struct FkCache {
    rot_local: Vec<Matrix3<f64>>,
    rot_world: Vec<Matrix3<f64>>,
    pos_world: Vec<Vector3<f64>>,
    shaped_offsets: Vec<Vector3<f64>>,
    shape_active: Vec<bool>,
    rot_zeta: Matrix3<f64>,
    rot_theta_root: Matrix3<f64>,
}

impl FkCache {
    /// World-frame (pre-extrinsics) landmark positions.
    pub fn landmark_world(&self, tree: &KinematicTree, i: usize) -> Vector3<f64> {
        match &tree.landmarks()[i] {
            LandmarkDef::Joint(k) => self.pos_world[*k],
            LandmarkDef::Offset { joint, offset } => {
                self.pos_world[*joint] + self.rot_world[*joint] * offset
            }
        }
    }
}

/// Runs the kinematic chain in world frame. The global orientation ζ is
/// applied at the root; extrinsics are not applied here.
pub fn fk_world(tree: &KinematicTree, pose: &PoseParams) -> Result<FkCache> {
    pose.validate(tree)?;
    let n = tree.joint_count();
    let mut rot_local = Vec::with_capacity(n);
    let mut rot_world = Vec::with_capacity(n);
    let mut pos_world = Vec::with_capacity(n);
    let mut shaped_offsets = Vec::with_capacity(n);
    let mut shape_active = Vec::with_capacity(n);

    let rot_zeta = rodrigues(&pose.zeta_vec());
    let rot_theta_root = rodrigues(&pose.joint_rotation(0));

    for (k, joint) in tree.joints().iter().enumerate() {
        let (scale, active) = shape_scale(&joint.shape_basis, &pose.beta);
        let offset = joint.rest_offset * scale;
        shaped_offsets.push(offset);
        shape_active.push(active);

        let local = if k == 0 {
            rot_zeta * rot_theta_root
        } else {
            rodrigues(&pose.joint_rotation(k))
        };
        match joint.parent {
            None => {
                rot_world.push(local);
                pos_world.push(offset);
            }
            Some(p) => {
                rot_world.push(rot_world[p] * local);
                pos_world.push(pos_world[p] + rot_world[p] * offset);
            }
        }
        rot_local.push(local);
    }

    Ok(FkCache {
        rot_local,
        rot_world,
        pos_world,
        shaped_offsets,
        shape_active,
        rot_zeta,
        rot_theta_root,
    })
}

/// Camera-frame landmark positions for a pose: kinematic chain, then the
/// rigid extrinsic transform.
pub fn forward_kinematics(
    tree: &KinematicTree,
    pose: &PoseParams,
    cam: &CameraParams,
) -> Result<Joints3D> {
    let (joints, _) = forward_kinematics_cached(tree, pose, cam)?;
    Ok(joints)
}

/// As [`forward_kinematics`], also returning the cache consumed by
/// [`fk_backward`].
pub fn forward_kinematics_cached(
    tree: &KinematicTree,
    pose: &PoseParams,
    cam: &CameraParams,
) -> Result<(Joints3D, FkCache)> {
    let cache = fk_world(tree, pose)?;
    let coords = (0..tree.landmark_count())
        .map(|i| cam.to_camera(&cache.landmark_world(tree, i)))
        .collect();
    Ok((Joints3D { coords }, cache))
}

/// Gradient of a scalar with respect to the FK inputs, given its gradient
/// with respect to every camera-frame landmark position.
#[derive(Debug, Clone)]
pub struct PoseGradient {
    pub zeta: Vector3<f64>,
    pub beta: [f64; SHAPE_DIM],
    pub theta: Vec<f64>,
    pub cam_translation: Vector3<f64>,
}

impl PoseGradient {
    pub fn zeros(tree: &KinematicTree) -> Self {
        PoseGradient {
            zeta: Vector3::zeros(),
            beta: [0.0; SHAPE_DIM],
            theta: vec![0.0; tree.theta_dim()],
            cam_translation: Vector3::zeros(),
        }
    }
}

/// Reverse-mode pass through extrinsics and the kinematic chain.
///
/// `grad_landmarks[i]` is ∂L/∂D_i in the camera frame; the returned gradient
/// covers ζ, β, θ and the extrinsic translation.
pub fn fk_backward(
    tree: &KinematicTree,
    pose: &PoseParams,
    cam: &CameraParams,
    cache: &FkCache,
    grad_landmarks: &[Vector3<f64>],
) -> PoseGradient {
    let n = tree.joint_count();
    let mut grad_pos = vec![Vector3::zeros(); n];
    let mut grad_rot = vec![Matrix3::zeros(); n];
    let mut out = PoseGradient::zeros(tree);

    let r_ext_t = cam.extrinsic_rotation.transpose();
    for (i, g) in grad_landmarks.iter().enumerate() {
        out.cam_translation += g;
        let g_world = r_ext_t * g;
        match &tree.landmarks()[i] {
            LandmarkDef::Joint(k) => grad_pos[*k] += g_world,
            LandmarkDef::Offset { joint, offset } => {
                grad_pos[*joint] += g_world;
                grad_rot[*joint] += g_world * offset.transpose();
            }
        }
    }

    // Children have larger indices, so a reverse sweep sees every joint after
    // all of its descendants.
    for k in (1..n).rev() {
        let p = tree.joint(k).parent.expect("non-root joint has a parent");
        let grad_on_offset = cache.rot_world[p].transpose() * grad_pos[k];
        accumulate_shape_gradient(tree, k, cache, &grad_on_offset, &mut out.beta, &pose.beta);

        let gp = grad_pos[k];
        let gr = grad_rot[k];
        grad_rot[p] += gp * cache.shaped_offsets[k].transpose();
        grad_pos[p] += gp;
        grad_rot[p] += gr * cache.rot_local[k].transpose();
        let grad_local = cache.rot_world[p].transpose() * gr;

        let jac = rodrigues_jacobian(&pose.joint_rotation(k));
        for c in 0..3 {
            out.theta[3 * k + c] = grad_local.dot(&jac[c]);
        }
    }

    // Root: position equals its own shaped offset; local rotation is
    // R(ζ)·R(θ_root).
    accumulate_shape_gradient(tree, 0, cache, &grad_pos[0], &mut out.beta, &pose.beta);
    let grad_local = grad_rot[0];
    let grad_r_zeta = grad_local * cache.rot_theta_root.transpose();
    let jac_zeta = rodrigues_jacobian(&pose.zeta_vec());
    for c in 0..3 {
        out.zeta[c] = grad_r_zeta.dot(&jac_zeta[c]);
    }
    let grad_r_theta0 = cache.rot_zeta.transpose() * grad_local;
    let jac0 = rodrigues_jacobian(&pose.joint_rotation(0));
    for c in 0..3 {
        out.theta[c] = grad_r_theta0.dot(&jac0[c]);
    }

    out
}

fn accumulate_shape_gradient(
    tree: &KinematicTree,
    k: usize,
    cache: &FkCache,
    grad_on_offset: &Vector3<f64>,
    beta_grad: &mut [f64; SHAPE_DIM],
    _beta: &[f64; SHAPE_DIM],
) {
    if !cache.shape_active[k] {
        return; // clamped scale: flat region
    }
    let joint = tree.joint(k);
    let along_rest = grad_on_offset.dot(&joint.rest_offset);
    for (m, b) in joint.shape_basis.iter().enumerate() {
        beta_grad[m] += along_rest * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::pose::rotate_global;
    use crate::skeleton::tree::{Joint, LandmarkDef};
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn chain_tree(offsets: &[(f64, f64, f64)]) -> KinematicTree {
        let joints = offsets
            .iter()
            .enumerate()
            .map(|(i, &(x, y, z))| Joint {
                name: format!("j{i}"),
                parent: if i == 0 { None } else { Some(i - 1) },
                rest_offset: Vector3::new(x, y, z),
                shape_basis: {
                    let mut b = [0.0; SHAPE_DIM];
                    b[0] = 1.0;
                    b
                },
                weight: 1.0,
                angle_limit: 2.0,
            })
            .collect::<Vec<_>>();
        let landmarks = (0..offsets.len()).map(LandmarkDef::Joint).collect();
        KinematicTree::new("chain", joints, landmarks, BTreeMap::new()).unwrap()
    }

    fn identity_cam() -> CameraParams {
        CameraParams::frontal(1000.0, [0.0, 0.0], 0.0)
    }

    #[test]
    fn rest_pose_lands_on_cumulative_offsets() {
        let tree = chain_tree(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.5, 0.5, 0.0)]);
        let pose = PoseParams::rest(&tree);
        let j = forward_kinematics(&tree, &pose, &identity_cam()).unwrap();
        assert!((j.coords[0] - Vector3::zeros()).norm() < 1e-15);
        assert!((j.coords[1] - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((j.coords[2] - Vector3::new(1.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn root_quarter_turn_moves_child() {
        let tree = chain_tree(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let mut pose = PoseParams::rest(&tree);
        pose.set_joint_rotation(0, Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let j = forward_kinematics(&tree, &pose, &identity_cam()).unwrap();
        assert!((j.coords[1] - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    /// Independent oracle: compose homogeneous 4×4 transforms explicitly.
    fn fk_oracle_4x4(tree: &KinematicTree, pose: &PoseParams) -> Vec<Vector3<f64>> {
        let n = tree.joint_count();
        let mut transforms: Vec<Matrix4<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let joint = tree.joint(k);
            let scale = {
                let raw = 1.0
                    + joint
                        .shape_basis
                        .iter()
                        .zip(&pose.beta)
                        .map(|(b, v)| b * v)
                        .sum::<f64>();
                raw.max(0.1)
            };
            let rot = if k == 0 {
                rodrigues(&pose.zeta_vec()) * rodrigues(&pose.joint_rotation(0))
            } else {
                rodrigues(&pose.joint_rotation(k))
            };
            let mut local = Matrix4::identity();
            local
                .fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&rot);
            let mut trans = Matrix4::identity();
            trans
                .fixed_view_mut::<3, 1>(0, 3)
                .copy_from(&(joint.rest_offset * scale));
            let own = trans * local;
            let global = match joint.parent {
                None => own,
                Some(p) => transforms[p] * own,
            };
            transforms.push(global);
        }
        transforms
            .iter()
            .map(|t| Vector3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)]))
            .collect()
    }

    #[test]
    fn random_pose_matches_transform_composition_oracle() {
        let tree = chain_tree(&[(0.0, 0.0, 0.0), (1.0, 0.2, -0.1), (0.4, 0.5, 0.3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let mut pose = PoseParams::rest(&tree);
            pose.zeta = [
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            ];
            for v in pose.theta.iter_mut() {
                *v = rng.random_range(-1.5..1.5);
            }
            pose.beta[0] = rng.random_range(-0.3..0.3);
            let j = forward_kinematics(&tree, &pose, &identity_cam()).unwrap();
            let oracle = fk_oracle_4x4(&tree, &pose);
            for (a, b) in j.coords.iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn translation_equivariance_in_extrinsics() {
        let tree = KinematicTree::signer54();
        let mut pose = PoseParams::rest(&tree);
        pose.theta[3 * 16] = 0.4;
        let mut cam = identity_cam();
        cam.extrinsic_translation = Vector3::new(0.0, 0.0, 3.0);
        let a = forward_kinematics(&tree, &pose, &cam).unwrap();
        let shift = Vector3::new(0.3, -0.2, 1.1);
        cam.extrinsic_translation += shift;
        let b = forward_kinematics(&tree, &pose, &cam).unwrap();
        for (pa, pb) in a.coords.iter().zip(&b.coords) {
            assert!((pa + shift - pb).norm() < 1e-12);
        }
    }

    #[test]
    fn project_fk_invariant_under_rigid_gauge() {
        use crate::skeleton::camera::project;
        let tree = KinematicTree::signer54();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let mut pose = PoseParams::rest(&tree);
            for v in pose.theta.iter_mut().take(60) {
                *v = rng.random_range(-0.3..0.3);
            }
            let cam = CameraParams::frontal(1000.0, [500.0, 500.0], 3.0);
            let base = project(&forward_kinematics(&tree, &pose, &cam).unwrap(), &cam).unwrap();

            // Rotate the world pose by Q and compensate in the extrinsics.
            let delta = rng.random_range(-1.0..1.0);
            let axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let q = rodrigues(&(axis * delta));
            let rotated_pose = rotate_global(&pose, delta, &axis);
            let comp_cam = CameraParams::new(
                cam.focal,
                cam.principal_point,
                cam.extrinsic_rotation * q.transpose(),
                cam.extrinsic_translation,
            )
            .unwrap();
            let moved = project(
                &forward_kinematics(&tree, &rotated_pose, &comp_cam).unwrap(),
                &comp_cam,
            )
            .unwrap();
            for (a, b) in base.coords.iter().zip(&moved.coords) {
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                assert!(d < 1e-6, "gauge shift moved a projection by {d}");
            }
        }
    }

    #[test]
    fn rotate_global_round_trip_recovers_landmarks() {
        let tree = KinematicTree::signer54();
        let mut pose = PoseParams::rest(&tree);
        pose.theta[3 * 18 + 2] = 0.7;
        let cam = CameraParams::frontal(1000.0, [500.0, 500.0], 3.0);
        let axis = Vector3::y();
        let there = rotate_global(&pose, 0.9, &axis);
        let back = rotate_global(&there, -0.9, &axis);
        let a = forward_kinematics(&tree, &pose, &cam).unwrap();
        let b = forward_kinematics(&tree, &back, &cam).unwrap();
        for (pa, pb) in a.coords.iter().zip(&b.coords) {
            assert!((pa - pb).norm() < 1e-9);
        }
    }

    #[test]
    fn rotated_pose_joints_equal_rotated_joints() {
        // Root-anchored tree: rotating ζ equals rotating the world landmarks.
        let tree = KinematicTree::signer54();
        let mut pose = PoseParams::rest(&tree);
        pose.theta[3 * 19 + 1] = -0.5;
        let delta = 0.6;
        let axis = Vector3::y();
        let rotated = rotate_global(&pose, delta, &axis);
        let q = rodrigues(&(axis * delta));
        let base = fk_world(&tree, &pose).unwrap();
        let moved = fk_world(&tree, &rotated).unwrap();
        for i in 0..tree.landmark_count() {
            let expect = q * base.landmark_world(&tree, i);
            let got = moved.landmark_world(&tree, i);
            assert!((expect - got).norm() < 1e-9);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let tree = KinematicTree::signer54();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cam = CameraParams::frontal(1000.0, [500.0, 500.0], 3.0);

        let mut pose = PoseParams::rest(&tree);
        pose.zeta = [0.1, -0.2, 0.05];
        for v in pose.theta.iter_mut() {
            *v = rng.random_range(-0.4..0.4);
        }
        for v in pose.beta.iter_mut() {
            *v = rng.random_range(-0.2..0.2);
        }

        // Scalar functional: weighted sum of landmark coordinates.
        let weights: Vec<Vector3<f64>> = (0..tree.landmark_count())
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let eval = |pose: &PoseParams, cam: &CameraParams| -> f64 {
            let j = forward_kinematics(&tree, pose, cam).unwrap();
            j.coords
                .iter()
                .zip(&weights)
                .map(|(p, w)| p.dot(w))
                .sum()
        };

        let (_, cache) = forward_kinematics_cached(&tree, &pose, &cam).unwrap();
        let grad = fk_backward(&tree, &pose, &cam, &cache, &weights);

        let h = 1e-6;
        let check = |analytic: f64, fd: f64, label: &str| {
            let denom = analytic.abs().max(fd.abs()).max(1e-8);
            assert!(
                (analytic - fd).abs() / denom < 1e-4,
                "{label}: analytic {analytic}, fd {fd}"
            );
        };

        for c in 0..3 {
            let mut plus = pose.clone();
            let mut minus = pose.clone();
            plus.zeta[c] += h;
            minus.zeta[c] -= h;
            check(
                grad.zeta[c],
                (eval(&plus, &cam) - eval(&minus, &cam)) / (2.0 * h),
                "zeta",
            );
        }
        for idx in (0..tree.theta_dim()).step_by(17) {
            let mut plus = pose.clone();
            let mut minus = pose.clone();
            plus.theta[idx] += h;
            minus.theta[idx] -= h;
            check(
                grad.theta[idx],
                (eval(&plus, &cam) - eval(&minus, &cam)) / (2.0 * h),
                "theta",
            );
        }
        for m in 0..SHAPE_DIM {
            let mut plus = pose.clone();
            let mut minus = pose.clone();
            plus.beta[m] += h;
            minus.beta[m] -= h;
            check(
                grad.beta[m],
                (eval(&plus, &cam) - eval(&minus, &cam)) / (2.0 * h),
                "beta",
            );
        }
        for c in 0..3 {
            let mut cp = cam.clone();
            let mut cm = cam.clone();
            cp.extrinsic_translation[c] += h;
            cm.extrinsic_translation[c] -= h;
            check(
                grad.cam_translation[c],
                (eval(&pose, &cp) - eval(&pose, &cm)) / (2.0 * h),
                "cam_t",
            );
        }
    }
}
