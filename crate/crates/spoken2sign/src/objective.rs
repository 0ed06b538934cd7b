//! The fitting objective: robust joint reprojection loss, simplified prior,
//! unseen/upright/smoothness regularizers, and the analytic gradient of the
//! weighted total.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::skeleton::{
    fk_backward, forward_kinematics_cached, CameraParams, Joints3D, Keypoints2D, KinematicTree,
    PoseGradient, PoseParams, SHAPE_DIM,
};
use crate::{Error, Result};

/// Geman-McClure scale σ per loss term. Joint is in pixels, upright in
/// meters, the rest in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub sigma_joint: f64,
    pub sigma_unseen: f64,
    pub sigma_upright: f64,
    pub sigma_smooth: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            sigma_joint: 100.0,
            sigma_unseen: 0.3,
            sigma_upright: 0.05,
            sigma_smooth: 0.3,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_joint", self.sigma_joint),
            ("sigma_unseen", self.sigma_unseen),
            ("sigma_upright", self.sigma_upright),
            ("sigma_smooth", self.sigma_smooth),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Term weights of the total objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitWeights {
    /// Unseen-keypoint regularizer weight λ1.
    pub lambda1: f64,
    /// Upright-posture regularizer weight λ2.
    pub lambda2: f64,
    /// Temporal smoothness weight λ3.
    pub lambda3: f64,
    /// Confidence threshold λ below which a keypoint counts as unseen.
    pub unseen_threshold: f64,
    /// Quadratic pose/shape/expression deviation weight.
    pub prior_weight: f64,
    /// Weight of the squared hinge past per-joint angle limits.
    pub limit_weight: f64,
}

impl Default for FitWeights {
    fn default() -> Self {
        FitWeights {
            lambda1: 3e5,
            lambda2: 7e5,
            lambda3: 1e3,
            unseen_threshold: 0.65,
            prior_weight: 1e-3,
            limit_weight: 1.0,
        }
    }
}

impl FitWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("prior_weight", self.prior_weight),
            ("limit_weight", self.limit_weight),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.unseen_threshold) {
            return Err(Error::InvalidConfig(format!(
                "unseen_threshold must lie in [0, 1], got {}",
                self.unseen_threshold
            )));
        }
        Ok(())
    }
}

/// One frame's observations for the objective.
#[derive(Debug, Clone)]
pub struct FrameObservation {
    pub keypoints: Keypoints2D,
    /// Landmark indices classified as unseen (ω below threshold).
    pub unseen: Vec<usize>,
    /// θ of the previous frame, when fitting a sequence.
    pub prev_theta: Option<Vec<f64>>,
}

impl FrameObservation {
    /// Builds an observation, deriving the unseen set from confidences.
    pub fn from_keypoints(keypoints: Keypoints2D, unseen_threshold: f64) -> Self {
        let unseen = classify_unseen(&keypoints, unseen_threshold);
        FrameObservation {
            keypoints,
            unseen,
            prev_theta: None,
        }
    }
}

/// The robust Geman-McClure penalty σ²e²/(σ²+e²): even, monotone in |e|,
/// bounded by σ².
pub fn geman_mcclure(e: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let e2 = e * e;
    s2 * e2 / (s2 + e2)
}

/// d/de of [`geman_mcclure`].
pub fn geman_mcclure_deriv(e: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let denom = s2 + e * e;
    2.0 * s2 * s2 * e / (denom * denom)
}

/// Geman-McClure expressed in the squared residual s = e²; smooth in s.
fn gm_of_sq(s: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    s2 * s / (s2 + s)
}

/// d/ds of [`gm_of_sq`].
fn gm_of_sq_deriv(s: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let denom = s2 + s;
    s2 * s2 / (denom * denom)
}

/// Landmark indices whose confidence is strictly below the threshold.
pub fn classify_unseen(kps: &Keypoints2D, threshold: f64) -> Vec<usize> {
    kps.confidence
        .iter()
        .enumerate()
        .filter(|(_, &w)| w < threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Robust reprojection loss: mean over landmarks of γωℓ_r(‖P(D) − K‖).
pub fn joint_loss(
    pose: &PoseParams,
    tree: &KinematicTree,
    cam: &CameraParams,
    kps: &Keypoints2D,
    robust: &RobustConfig,
) -> Result<f64> {
    check_keypoint_dims(tree, kps)?;
    let (joints, _) = forward_kinematics_cached(tree, pose, cam)?;
    let mut total = 0.0;
    for i in 0..tree.landmark_count() {
        let w = kps.confidence[i];
        if w == 0.0 {
            continue;
        }
        let uv = cam.project_point(&joints.coords[i], i)?;
        let d = uv - Vector2::new(kps.coords[i][0], kps.coords[i][1]);
        total += tree.landmark_weight(i) * w * gm_of_sq(d.norm_squared(), robust.sigma_joint);
    }
    Ok(total / tree.landmark_count() as f64)
}

/// Simplified prior: quadratic deviation of θ/β/ψ plus a squared hinge past
/// each joint's angle limit.
pub fn prior_loss(pose: &PoseParams, tree: &KinematicTree, weights: &FitWeights) -> f64 {
    let quad: f64 = pose.theta.iter().map(|v| v * v).sum::<f64>()
        + pose.beta.iter().map(|v| v * v).sum::<f64>()
        + pose.psi.iter().map(|v| v * v).sum::<f64>();
    let mut hinge = 0.0;
    for (j, joint) in tree.joints().iter().enumerate() {
        for c in 0..3 {
            let over = pose.theta[3 * j + c].abs() - joint.angle_limit;
            if over > 0.0 {
                hinge += over * over;
            }
        }
    }
    weights.prior_weight * quad + weights.limit_weight * hinge
}

/// Pulls unseen joints toward the rest pose: Σ ℓ_r(θ_i − θ̂_i) over the
/// components of every unseen joint.
pub fn unseen_loss(
    theta: &[f64],
    theta_rest: &[f64],
    unseen_joints: &[usize],
    sigma: f64,
) -> f64 {
    let mut total = 0.0;
    for &j in unseen_joints {
        for c in 0..3 {
            total += geman_mcclure(theta[3 * j + c] - theta_rest[3 * j + c], sigma);
        }
    }
    total
}

/// Depth-consistency loss over the unordered pairs of the upright set.
pub fn upright_loss(joints: &Joints3D, upright_set: &[usize], sigma: f64) -> f64 {
    let mut total = 0.0;
    for (a, &i) in upright_set.iter().enumerate() {
        for &j in &upright_set[a + 1..] {
            total += geman_mcclure(joints.depth(i) - joints.depth(j), sigma);
        }
    }
    total
}

/// Temporal consistency: γ-weighted robust distance between θ and the
/// previous frame's θ. Zero when there is no previous frame.
pub fn smooth_loss(
    theta: &[f64],
    theta_prev: Option<&[f64]>,
    tree: &KinematicTree,
    sigma: f64,
) -> f64 {
    let Some(prev) = theta_prev else {
        return 0.0;
    };
    let mut total = 0.0;
    for (j, joint) in tree.joints().iter().enumerate() {
        for c in 0..3 {
            total += joint.weight * geman_mcclure(theta[3 * j + c] - prev[3 * j + c], sigma);
        }
    }
    total
}

/// Gradient of the total objective over the full variable layout.
pub type ObjectiveGradient = PoseGradient;

/// Extends [`PoseGradient`] with the ψ block (ψ only enters the prior).
#[derive(Debug, Clone)]
pub struct TotalGradient {
    pub pose: PoseGradient,
    pub psi: [f64; SHAPE_DIM],
}

/// Weighted total objective and its analytic gradient over
/// (ζ, β, ψ, θ, camera translation).
///
/// Total = joint + prior + λ1·unseen + λ2·upright + λ3·smooth; the
/// penetration term of the source formulation is identically zero here (it
/// requires a mesh).
pub fn total_objective(
    pose: &PoseParams,
    tree: &KinematicTree,
    cam: &CameraParams,
    obs: &FrameObservation,
    weights: &FitWeights,
    robust: &RobustConfig,
) -> Result<(f64, TotalGradient)> {
    check_keypoint_dims(tree, &obs.keypoints)?;
    if let Some(prev) = &obs.prev_theta {
        if prev.len() != tree.theta_dim() {
            return Err(Error::DimensionMismatch {
                what: "previous-frame theta".into(),
                expected: tree.theta_dim(),
                found: prev.len(),
            });
        }
    }

    let (joints, cache) = forward_kinematics_cached(tree, pose, cam)?;
    let inv_count = 1.0 / tree.landmark_count() as f64;
    let mut value = 0.0;
    let mut grad_landmarks = vec![Vector3::zeros(); tree.landmark_count()];

    // Joint term: γωℓ_r(‖P(D)−K‖), averaged over landmarks.
    for i in 0..tree.landmark_count() {
        let w = obs.keypoints.confidence[i];
        if w == 0.0 {
            continue;
        }
        let p = &joints.coords[i];
        let uv = cam.project_point(p, i)?;
        let d = uv - Vector2::new(obs.keypoints.coords[i][0], obs.keypoints.coords[i][1]);
        let s = d.norm_squared();
        let scale = tree.landmark_weight(i) * w * inv_count;
        value += scale * gm_of_sq(s, robust.sigma_joint);
        let dl_duv = d * (2.0 * scale * gm_of_sq_deriv(s, robust.sigma_joint));
        grad_landmarks[i] += cam.projection_jacobian(p).transpose() * dl_duv;
    }

    // Upright term: pairwise depth consistency.
    let upright_set = tree.set(crate::skeleton::sets::UPRIGHT);
    if weights.lambda2 > 0.0 && upright_set.len() > 1 {
        let mut up_value = 0.0;
        for (a, &i) in upright_set.iter().enumerate() {
            for &j in &upright_set[a + 1..] {
                let e = joints.depth(i) - joints.depth(j);
                up_value += geman_mcclure(e, robust.sigma_upright);
                let g = weights.lambda2 * geman_mcclure_deriv(e, robust.sigma_upright);
                grad_landmarks[i].z += g;
                grad_landmarks[j].z -= g;
            }
        }
        value += weights.lambda2 * up_value;
    }

    let mut grad = fk_backward(tree, pose, cam, &cache, &grad_landmarks);

    // Prior: quadratic deviation plus angle-limit hinges.
    let mut psi_grad = [0.0; SHAPE_DIM];
    {
        let mut quad = 0.0;
        for (idx, v) in pose.theta.iter().enumerate() {
            quad += v * v;
            grad.theta[idx] += 2.0 * weights.prior_weight * v;
        }
        for (m, v) in pose.beta.iter().enumerate() {
            quad += v * v;
            grad.beta[m] += 2.0 * weights.prior_weight * v;
        }
        for (m, v) in pose.psi.iter().enumerate() {
            quad += v * v;
            psi_grad[m] = 2.0 * weights.prior_weight * v;
        }
        let mut hinge = 0.0;
        for (j, joint) in tree.joints().iter().enumerate() {
            for c in 0..3 {
                let v = pose.theta[3 * j + c];
                let over = v.abs() - joint.angle_limit;
                if over > 0.0 {
                    hinge += over * over;
                    grad.theta[3 * j + c] += 2.0 * weights.limit_weight * over * v.signum();
                }
            }
        }
        value += weights.prior_weight * quad + weights.limit_weight * hinge;
    }

    // Unseen term: components of unseen joints pulled to rest (θ̂ = 0).
    if weights.lambda1 > 0.0 && !obs.unseen.is_empty() {
        let unseen_joints = tree.joints_for_landmarks(&obs.unseen);
        let mut un_value = 0.0;
        for &j in &unseen_joints {
            for c in 0..3 {
                let v = pose.theta[3 * j + c];
                un_value += geman_mcclure(v, robust.sigma_unseen);
                grad.theta[3 * j + c] +=
                    weights.lambda1 * geman_mcclure_deriv(v, robust.sigma_unseen);
            }
        }
        value += weights.lambda1 * un_value;
    }

    // Smoothness term against the previous frame.
    if weights.lambda3 > 0.0 {
        if let Some(prev) = &obs.prev_theta {
            let mut sm_value = 0.0;
            for (j, joint) in tree.joints().iter().enumerate() {
                for c in 0..3 {
                    let e = pose.theta[3 * j + c] - prev[3 * j + c];
                    sm_value += joint.weight * geman_mcclure(e, robust.sigma_smooth);
                    grad.theta[3 * j + c] += weights.lambda3
                        * joint.weight
                        * geman_mcclure_deriv(e, robust.sigma_smooth);
                }
            }
            value += weights.lambda3 * sm_value;
        }
    }

    Ok((
        value,
        TotalGradient {
            pose: grad,
            psi: psi_grad,
        },
    ))
}

fn check_keypoint_dims(tree: &KinematicTree, kps: &Keypoints2D) -> Result<()> {
    if kps.len() != tree.landmark_count() {
        return Err(Error::DimensionMismatch {
            what: "keypoints per frame".into(),
            expected: tree.landmark_count(),
            found: kps.len(),
        });
    }
    Ok(())
}
