//! Multi-stage L-BFGS fitting: shared per-video calibration, per-frame pose
//! estimation, and whole-video fitting with temporal chaining.

pub mod lbfgs;

use serde::{Deserialize, Serialize};

use crate::dictionary::{Sign3D, SourceTag};
use crate::objective::{total_objective, FitWeights, FrameObservation, RobustConfig};
use crate::skeleton::{CameraParams, Keypoints2D, KinematicTree, PoseParams, SHAPE_DIM};
use crate::{Error, Result};

pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsResult};

/// A block of optimization variables a stage may activate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageVar {
    Zeta,
    Beta,
    Psi,
    ThetaBody,
    ThetaHands,
    /// Extrinsic camera translation. Optimized during calibration; frozen
    /// (per-video shared) during per-frame fitting.
    Camera,
}

/// One fitting stage: the active variable blocks, its iteration share of the
/// per-frame budget, and optional weight overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub variables: Vec<StageVar>,
    pub iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<FitWeights>,
}

/// Ordered coarse-to-fine stages. The default follows the usual practice of
/// solving camera/orientation first, then shape, then body, then hands and
/// expression, with a total budget of 300 iterations per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub stages: Vec<Stage>,
}

impl Default for StageSchedule {
    fn default() -> Self {
        let stage = |variables: Vec<StageVar>, iters: usize| Stage {
            variables,
            iters,
            weights: None,
        };
        StageSchedule {
            stages: vec![
                stage(vec![StageVar::Camera, StageVar::Zeta], 60),
                stage(vec![StageVar::Beta], 40),
                stage(vec![StageVar::ThetaBody], 100),
                stage(vec![StageVar::ThetaHands, StageVar::Psi], 100),
            ],
        }
    }
}

impl StageSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidConfig("schedule has no stages".into()));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.iters == 0 {
                return Err(Error::InvalidConfig(format!("stage {i} has a zero budget")));
            }
            if stage.variables.is_empty() {
                return Err(Error::InvalidConfig(format!("stage {i} activates nothing")));
            }
        }
        for required in [
            StageVar::Zeta,
            StageVar::Beta,
            StageVar::Psi,
            StageVar::ThetaBody,
            StageVar::ThetaHands,
        ] {
            if !self
                .stages
                .iter()
                .any(|s| s.variables.contains(&required))
            {
                return Err(Error::InvalidConfig(format!(
                    "no stage optimizes {required:?}; the union of stages must cover all variables"
                )));
            }
        }
        Ok(())
    }

    pub fn total_iters(&self) -> usize {
        self.stages.iter().map(|s| s.iters).sum()
    }
}

/// Shape, global orientation, and camera shared by every frame of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedCalibration {
    pub beta: [f64; SHAPE_DIM],
    pub zeta: [f64; 3],
    pub camera: CameraParams,
}

/// Everything the fitter needs besides the observations.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub weights: FitWeights,
    pub robust: RobustConfig,
    pub schedule: StageSchedule,
    pub lbfgs: LbfgsConfig,
    pub calibration_iters: usize,
    pub calibration_max_frames: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            weights: FitWeights::default(),
            robust: RobustConfig::default(),
            schedule: StageSchedule::default(),
            lbfgs: LbfgsConfig::default(),
            calibration_iters: 150,
            calibration_max_frames: 10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.robust.validate()?;
        self.schedule.validate()?;
        self.lbfgs.validate()?;
        if self.calibration_iters == 0 || self.calibration_max_frames == 0 {
            return Err(Error::InvalidConfig(
                "calibration iterations and frame cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Flat vector layout over the active variable blocks.
struct Layout {
    zeta: bool,
    beta: bool,
    psi: bool,
    camera: bool,
    theta_joints: Vec<usize>,
}

impl Layout {
    fn from_stage(stage: &Stage, tree: &KinematicTree, allow_camera: bool) -> Self {
        let mut theta_joints = Vec::new();
        if stage.variables.contains(&StageVar::ThetaBody) {
            theta_joints.extend(tree.body_joints());
        }
        if stage.variables.contains(&StageVar::ThetaHands) {
            theta_joints.extend(tree.hand_joints());
        }
        theta_joints.sort_unstable();
        Layout {
            zeta: stage.variables.contains(&StageVar::Zeta),
            beta: stage.variables.contains(&StageVar::Beta),
            psi: stage.variables.contains(&StageVar::Psi),
            camera: allow_camera && stage.variables.contains(&StageVar::Camera),
            theta_joints,
        }
    }

    fn calibration() -> Self {
        Layout {
            zeta: true,
            beta: true,
            psi: false,
            camera: true,
            theta_joints: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        let mut n = 0;
        if self.zeta {
            n += 3;
        }
        if self.beta {
            n += SHAPE_DIM;
        }
        if self.psi {
            n += SHAPE_DIM;
        }
        if self.camera {
            n += 3;
        }
        n + 3 * self.theta_joints.len()
    }

    fn pack(&self, pose: &PoseParams, cam: &CameraParams) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        if self.zeta {
            x.extend_from_slice(&pose.zeta);
        }
        if self.beta {
            x.extend_from_slice(&pose.beta);
        }
        if self.psi {
            x.extend_from_slice(&pose.psi);
        }
        if self.camera {
            x.extend_from_slice(cam.extrinsic_translation.as_slice());
        }
        for &j in &self.theta_joints {
            x.extend_from_slice(&pose.theta[3 * j..3 * j + 3]);
        }
        x
    }

    fn unpack(&self, x: &[f64], pose: &mut PoseParams, cam: &mut CameraParams) {
        let mut i = 0;
        if self.zeta {
            pose.zeta.copy_from_slice(&x[i..i + 3]);
            i += 3;
        }
        if self.beta {
            pose.beta.copy_from_slice(&x[i..i + SHAPE_DIM]);
            i += SHAPE_DIM;
        }
        if self.psi {
            pose.psi.copy_from_slice(&x[i..i + SHAPE_DIM]);
            i += SHAPE_DIM;
        }
        if self.camera {
            cam.extrinsic_translation
                .as_mut_slice()
                .copy_from_slice(&x[i..i + 3]);
            i += 3;
        }
        for &j in &self.theta_joints {
            pose.theta[3 * j..3 * j + 3].copy_from_slice(&x[i..i + 3]);
            i += 3;
        }
    }

    fn pack_gradient(&self, grad: &crate::objective::TotalGradient) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.len());
        if self.zeta {
            g.extend_from_slice(grad.pose.zeta.as_slice());
        }
        if self.beta {
            g.extend_from_slice(&grad.pose.beta);
        }
        if self.psi {
            g.extend_from_slice(&grad.psi);
        }
        if self.camera {
            g.extend_from_slice(grad.pose.cam_translation.as_slice());
        }
        for &j in &self.theta_joints {
            g.extend_from_slice(&grad.pose.theta[3 * j..3 * j + 3]);
        }
        g
    }
}

/// Evaluates the total objective, mapping infeasible trial poses (landmarks
/// behind the camera) to +∞ so the line search backs off.
fn eval_or_inf(
    pose: &PoseParams,
    tree: &KinematicTree,
    cam: &CameraParams,
    obs: &FrameObservation,
    weights: &FitWeights,
    robust: &RobustConfig,
) -> (f64, Option<crate::objective::TotalGradient>) {
    match total_objective(pose, tree, cam, obs, weights, robust) {
        Ok((v, g)) => (v, Some(g)),
        Err(Error::BehindCamera { .. }) => (f64::INFINITY, None),
        Err(_) => (f64::NAN, None),
    }
}

/// Jointly estimates shape β, global orientation ζ, and the extrinsic camera
/// translation over a uniform subsample of frames, with θ held at rest.
///
/// The result is frozen for all frames of the video. The optimized objective
/// is the mean per-frame joint + prior loss, so duplicated frames calibrate
/// identically to their single-frame equivalent.
pub fn precalibrate_video(
    frames: &[Keypoints2D],
    tree: &KinematicTree,
    base_cam: &CameraParams,
    cfg: &FitConfig,
) -> Result<SharedCalibration> {
    cfg.validate()?;
    base_cam.validate()?;
    if frames.is_empty() {
        return Err(Error::Calibration("no frames to calibrate on".into()));
    }
    for kps in frames {
        if kps.len() != tree.landmark_count() {
            return Err(Error::DimensionMismatch {
                what: "calibration keypoints".into(),
                expected: tree.landmark_count(),
                found: kps.len(),
            });
        }
    }
    let selected = subsample_indices(frames.len(), cfg.calibration_max_frames);
    if selected
        .iter()
        .all(|&i| frames[i].confidence.iter().all(|&w| w == 0.0))
    {
        return Err(Error::Calibration(
            "every subsampled frame has all-zero confidences".into(),
        ));
    }

    // joint + prior only: regularizer weights off, empty unseen set
    let weights = FitWeights {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        ..cfg.weights.clone()
    };
    let observations: Vec<FrameObservation> = selected
        .iter()
        .map(|&i| FrameObservation {
            keypoints: frames[i].clone(),
            unseen: Vec::new(),
            prev_theta: None,
        })
        .collect();

    let layout = Layout::calibration();
    let rest = PoseParams::rest(tree);
    let x0 = layout.pack(&rest, base_cam);
    let mut scratch_pose = rest.clone();
    let mut scratch_cam = base_cam.clone();
    let inv_n = 1.0 / observations.len() as f64;

    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        layout.unpack(x, &mut scratch_pose, &mut scratch_cam);
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for obs in &observations {
            let (v, g) = eval_or_inf(&scratch_pose, tree, &scratch_cam, obs, &weights, &cfg.robust);
            if !v.is_finite() {
                return (v, vec![0.0; x.len()]);
            }
            value += v * inv_n;
            let packed = layout.pack_gradient(&g.expect("finite value has a gradient"));
            for (acc, gi) in grad.iter_mut().zip(&packed) {
                *acc += gi * inv_n;
            }
        }
        (value, grad)
    };

    let lbfgs_cfg = cfg.lbfgs.clone().with_max_iters(cfg.calibration_iters);
    let result = lbfgs_minimize(objective, &x0, &lbfgs_cfg)
        .map_err(|e| Error::Calibration(e.to_string()))?;

    let mut pose = rest;
    let mut cam = base_cam.clone();
    layout.unpack(&result.x, &mut pose, &mut cam);
    Ok(SharedCalibration {
        beta: pose.beta,
        zeta: pose.zeta,
        camera: cam,
    })
}

fn subsample_indices(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap)
        .map(|i| (i as f64 * (n - 1) as f64 / (cap - 1) as f64).round() as usize)
        .collect()
}

/// Fits one frame by running the stage schedule, warm-started from the
/// shared calibration and (when present) the previous frame's θ.
///
/// The camera stays at the shared calibration; stages listing it only refine
/// per-frame pose blocks. Returns the pose with the lowest total objective
/// encountered, so the result is never worse than the initialization.
pub fn fit_frame(
    obs: &FrameObservation,
    shared: &SharedCalibration,
    tree: &KinematicTree,
    cfg: &FitConfig,
) -> Result<PoseParams> {
    cfg.validate()?;
    let mut pose = PoseParams::rest(tree);
    pose.zeta = shared.zeta;
    pose.beta = shared.beta;
    if let Some(prev) = &obs.prev_theta {
        pose.theta.clone_from(prev);
    }
    let cam = shared.camera.clone();

    let evaluate = |p: &PoseParams| -> Result<f64> {
        total_objective(p, tree, &cam, obs, &cfg.weights, &cfg.robust).map(|(v, _)| v)
    };
    let mut best = pose.clone();
    let mut best_value = evaluate(&pose)?;

    for stage in &cfg.schedule.stages {
        let layout = Layout::from_stage(stage, tree, false);
        if layout.len() == 0 {
            continue;
        }
        let weights = stage.weights.as_ref().unwrap_or(&cfg.weights);
        let mut scratch = pose.clone();
        let mut scratch_cam = cam.clone();
        let x0 = layout.pack(&pose, &cam);
        let objective = |x: &[f64]| -> (f64, Vec<f64>) {
            layout.unpack(x, &mut scratch, &mut scratch_cam);
            let (v, g) = eval_or_inf(&scratch, tree, &cam, obs, weights, &cfg.robust);
            match g {
                Some(g) => (v, layout.pack_gradient(&g)),
                None => (v, vec![0.0; x.len()]),
            }
        };
        let lbfgs_cfg = cfg.lbfgs.clone().with_max_iters(stage.iters);
        let result = lbfgs_minimize(objective, &x0, &lbfgs_cfg)?;
        let mut unused_cam = cam.clone();
        layout.unpack(&result.x, &mut pose, &mut unused_cam);

        let value = evaluate(&pose)?;
        if value < best_value {
            best_value = value;
            best = pose.clone();
        } else {
            // a stage with overridden weights may wander off the total
            // objective; resume from the best iterate
            pose = best.clone();
        }
    }
    Ok(best)
}

/// Fits every frame sequentially, feeding each result as the next frame's
/// θ_pre, and returns the fitted parameter sequence plus the calibration.
pub fn fit_video_poses(
    frames: &[FrameObservation],
    tree: &KinematicTree,
    base_cam: &CameraParams,
    cfg: &FitConfig,
) -> Result<(Vec<PoseParams>, SharedCalibration)> {
    if frames.is_empty() {
        return Err(Error::Calibration("empty video".into()));
    }
    let keypoints: Vec<Keypoints2D> = frames.iter().map(|f| f.keypoints.clone()).collect();
    let shared = precalibrate_video(&keypoints, tree, base_cam, cfg)?;

    let mut poses: Vec<PoseParams> = Vec::with_capacity(frames.len());
    for (t, obs) in frames.iter().enumerate() {
        let mut obs = obs.clone();
        obs.prev_theta = poses.last().map(|p| p.theta.clone());
        let pose = fit_frame(&obs, &shared, tree, cfg).map_err(|e| e.at_frame(t))?;
        poses.push(pose);
    }
    Ok((poses, shared))
}

/// Fits a whole video into a tagged 3D sign.
pub fn fit_video(
    frames: &[FrameObservation],
    tree: &KinematicTree,
    base_cam: &CameraParams,
    cfg: &FitConfig,
    gloss: &str,
    source: SourceTag,
) -> Result<Sign3D> {
    let (poses, _) = fit_video_poses(frames, tree, base_cam, cfg)?;
    Sign3D::new(gloss, poses, tree, source, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{forward_kinematics, project};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tree() -> KinematicTree {
        KinematicTree::signer54()
    }

    fn camera() -> CameraParams {
        CameraParams::frontal(1000.0, [500.0, 500.0], 3.0)
    }

    /// Arms/head-only random signing pose. The torso chain (and collars,
    /// which carry the shoulder landmarks) stays at rest, so the upright
    /// depths remain consistent as they would for a real signer.
    fn signing_pose(tree: &KinematicTree, rng: &mut ChaCha8Rng) -> PoseParams {
        let mut pose = PoseParams::rest(tree);
        let arm_joints = [15, 16, 17, 18, 19, 20, 21];
        for &j in &arm_joints {
            for c in 0..3 {
                pose.theta[3 * j + c] = rng.random_range(-0.5..0.5);
            }
        }
        for j in 24..54 {
            for c in 0..3 {
                pose.theta[3 * j + c] = rng.random_range(-0.4..0.4);
            }
        }
        pose
    }

    fn exact_observation(
        tree: &KinematicTree,
        pose: &PoseParams,
        cam: &CameraParams,
    ) -> FrameObservation {
        let joints = forward_kinematics(tree, pose, cam).unwrap();
        let kps = project(&joints, cam).unwrap();
        FrameObservation::from_keypoints(kps, FitWeights::default().unseen_threshold)
    }

    fn reprojection_error(
        tree: &KinematicTree,
        pose: &PoseParams,
        cam: &CameraParams,
        target: &Keypoints2D,
    ) -> f64 {
        let joints = forward_kinematics(tree, pose, cam).unwrap();
        let proj = project(&joints, cam).unwrap();
        let mut total = 0.0;
        for (a, b) in proj.coords.iter().zip(&target.coords) {
            total += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        }
        total / proj.coords.len() as f64
    }

    #[test]
    fn default_schedule_is_valid_with_300_iterations() {
        let schedule = StageSchedule::default();
        schedule.validate().unwrap();
        assert_eq!(schedule.total_iters(), 300);
    }

    #[test]
    fn calibration_recovers_synthetic_camera() {
        let tree = tree();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut true_cam = camera();
        true_cam.extrinsic_translation = nalgebra::Vector3::new(0.05, -0.1, 3.2);
        let mut truth = PoseParams::rest(&tree);
        truth.beta[0] = 0.08;
        truth.zeta = [0.05, 0.2, -0.03];
        let _ = &mut rng;

        let joints = forward_kinematics(&tree, &truth, &true_cam).unwrap();
        let kps = project(&joints, &true_cam).unwrap();
        let frames = vec![kps.clone(), kps.clone(), kps];

        let cfg = FitConfig::default();
        let shared = precalibrate_video(&frames, &tree, &camera(), &cfg).unwrap();

        // round-trip reprojection of the rest pose under the calibration
        let mut calibrated = PoseParams::rest(&tree);
        calibrated.beta = shared.beta;
        calibrated.zeta = shared.zeta;
        let err = reprojection_error(&tree, &calibrated, &shared.camera, &frames[0]);
        assert!(err < 1.0, "calibration reprojection error {err}");
    }

    #[test]
    fn calibration_single_frame_equals_duplicated_frames() {
        let tree = tree();
        let truth = PoseParams::rest(&tree);
        let cam = camera();
        let joints = forward_kinematics(&tree, &truth, &cam).unwrap();
        let kps = project(&joints, &cam).unwrap();

        let cfg = FitConfig::default();
        let single = precalibrate_video(&[kps.clone()], &tree, &cam, &cfg).unwrap();
        let doubled = precalibrate_video(&[kps.clone(), kps], &tree, &cam, &cfg).unwrap();
        assert_eq!(single, doubled); // mean objective: scaled copy
    }

    #[test]
    fn calibration_rejects_all_zero_confidences() {
        let tree = tree();
        let kps = Keypoints2D {
            coords: vec![[0.0, 0.0]; tree.landmark_count()],
            confidence: vec![0.0; tree.landmark_count()],
        };
        let err = precalibrate_video(&[kps], &tree, &camera(), &FitConfig::default());
        assert!(matches!(err, Err(Error::Calibration(_))));
    }

    #[test]
    fn fit_frame_recovers_a_reachable_pose() {
        let tree = tree();
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = signing_pose(&tree, &mut rng);
        let obs = exact_observation(&tree, &truth, &cam);
        let shared = SharedCalibration {
            beta: truth.beta,
            zeta: truth.zeta,
            camera: cam.clone(),
        };
        let fitted = fit_frame(&obs, &shared, &tree, &FitConfig::default()).unwrap();
        let err = reprojection_error(&tree, &fitted, &cam, &obs.keypoints);
        assert!(err < 2.0, "mean reprojection error {err} px");
    }

    #[test]
    fn fit_frame_initialized_at_truth_stays_there() {
        let tree = tree();
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = signing_pose(&tree, &mut rng);
        let mut obs = exact_observation(&tree, &truth, &cam);
        obs.prev_theta = Some(truth.theta.clone());
        let shared = SharedCalibration {
            beta: truth.beta,
            zeta: truth.zeta,
            camera: cam.clone(),
        };
        let fitted = fit_frame(&obs, &shared, &tree, &FitConfig::default()).unwrap();
        let max_dev = fitted
            .theta
            .iter()
            .zip(&truth.theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 0.05, "max theta deviation {max_dev}");
        let err = reprojection_error(&tree, &fitted, &cam, &obs.keypoints);
        assert!(err < 0.5, "reprojection error {err}");
    }

    #[test]
    fn fit_frame_all_unseen_collapses_to_rest() {
        let tree = tree();
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = signing_pose(&tree, &mut rng);
        let mut obs = exact_observation(&tree, &truth, &cam);
        // every keypoint unseen: ω below the threshold zeroes nothing in the
        // joint term but λ1 dominates
        for w in obs.keypoints.confidence.iter_mut() {
            *w = 0.1;
        }
        let obs = FrameObservation::from_keypoints(obs.keypoints, 0.65);
        let shared = SharedCalibration {
            beta: [0.0; SHAPE_DIM],
            zeta: [0.0; 3],
            camera: cam.clone(),
        };
        let fitted = fit_frame(&obs, &shared, &tree, &FitConfig::default()).unwrap();
        let max_theta = fitted.theta.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_theta < 1e-3, "theta did not collapse to rest: {max_theta}");
    }

    #[test]
    fn fit_never_increases_total_objective() {
        let tree = tree();
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let truth = signing_pose(&tree, &mut rng);
        let mut obs = exact_observation(&tree, &truth, &cam);
        // noisy observations
        for c in obs.keypoints.coords.iter_mut() {
            c[0] += rng.random_range(-4.0..4.0);
            c[1] += rng.random_range(-4.0..4.0);
        }
        let shared = SharedCalibration {
            beta: [0.0; SHAPE_DIM],
            zeta: [0.0; 3],
            camera: cam.clone(),
        };
        let cfg = FitConfig::default();
        let init = {
            let mut p = PoseParams::rest(&tree);
            p.zeta = shared.zeta;
            p.beta = shared.beta;
            p
        };
        let (init_value, _) =
            total_objective(&init, &tree, &cam, &obs, &cfg.weights, &cfg.robust).unwrap();
        let fitted = fit_frame(&obs, &shared, &tree, &cfg).unwrap();
        let (fit_value, _) =
            total_objective(&fitted, &tree, &cam, &obs, &cfg.weights, &cfg.robust).unwrap();
        assert!(fit_value <= init_value + 1e-9);
    }

    #[test]
    fn fit_video_constant_input_has_tiny_theta_variance() {
        let tree = tree();
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let truth = signing_pose(&tree, &mut rng);
        let obs = exact_observation(&tree, &truth, &cam);
        let frames = vec![obs; 4];
        let cfg = FitConfig::default();
        let (poses, _) = fit_video_poses(&frames, &tree, &cam, &cfg).unwrap();
        assert_eq!(poses.len(), 4);
        // per-component variance across frames
        let dim = poses[0].theta.len();
        let mut max_var = 0.0f64;
        for c in 0..dim {
            let mean = poses.iter().map(|p| p.theta[c]).sum::<f64>() / poses.len() as f64;
            let var = poses
                .iter()
                .map(|p| (p.theta[c] - mean).powi(2))
                .sum::<f64>()
                / poses.len() as f64;
            max_var = max_var.max(var);
        }
        assert!(max_var < 1e-4, "theta variance {max_var}");
    }

    #[test]
    fn smoothness_weight_reduces_jitter() {
        let tree = tree();
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let base = signing_pose(&tree, &mut rng);
        // noisy observations of the same underlying pose
        let mut frames = Vec::new();
        for _ in 0..6 {
            let mut obs = exact_observation(&tree, &base, &cam);
            for c in obs.keypoints.coords.iter_mut() {
                c[0] += rng.random_range(-3.0..3.0);
                c[1] += rng.random_range(-3.0..3.0);
            }
            frames.push(obs);
        }
        let run = |lambda3: f64| {
            let mut cfg = FitConfig::default();
            cfg.weights.lambda3 = lambda3;
            let (poses, _) = fit_video_poses(&frames, &tree, &cam, &cfg).unwrap();
            let mut jitter = 0.0;
            for w in poses.windows(2) {
                let d: f64 = w[0]
                    .theta
                    .iter()
                    .zip(&w[1].theta)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                jitter += d;
            }
            jitter / (poses.len() - 1) as f64
        };
        let with = run(1e3);
        let without = run(0.0);
        assert!(
            with < without,
            "smoothing did not reduce jitter: {with} vs {without}"
        );
    }
}
