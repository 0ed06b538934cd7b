//! The sign connector: a small MLP that predicts co-articulation durations,
//! and interpolation-based stitching of adjacent 3D signs.

pub mod mlp;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::CoarticulationSample;
use crate::dictionary::Sign3D;
use crate::skeleton::{
    forward_kinematics, slerp_axis_angle, CameraParams, Joints3D, KinematicTree, PoseParams,
};
use crate::{Error, Result};

pub use mlp::{Adam, MlpModel};

/// Training settings for the connector MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorTrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Samples with a longer co-articulation are dropped before training,
    /// and predictions are clamped to this cap.
    pub duration_cap: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for ConnectorTrainConfig {
    fn default() -> Self {
        ConnectorTrainConfig {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            duration_cap: 12,
            hidden: vec![512, 256, 128],
            seed: 0,
        }
    }
}

impl ConnectorTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.duration_cap == 0 {
            return Err(Error::InvalidConfig("duration cap must be at least 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Connector input: the two boundary joint sets and their difference,
/// flattened as (pre, next, pre − next).
pub fn featurize(pre: &[Vector3<f64>], next: &[Vector3<f64>]) -> Result<Vec<f64>> {
    if pre.len() != next.len() {
        return Err(Error::DimensionMismatch {
            what: "connector boundary joints".into(),
            expected: pre.len(),
            found: next.len(),
        });
    }
    let mut x = Vec::with_capacity(9 * pre.len());
    for p in pre {
        x.extend_from_slice(p.as_slice());
    }
    for p in next {
        x.extend_from_slice(p.as_slice());
    }
    for (p, n) in pre.iter().zip(next) {
        x.push(p.x - n.x);
        x.push(p.y - n.y);
        x.push(p.z - n.z);
    }
    Ok(x)
}

/// Variant inputs kept for ablation comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureVariant {
    /// (pre, next, pre − next) — the full input.
    Full,
    /// (pre, next) without the coordinate-difference block.
    NoDifference,
}

impl FeatureVariant {
    pub fn build(&self, pre: &[Vector3<f64>], next: &[Vector3<f64>]) -> Result<Vec<f64>> {
        match self {
            FeatureVariant::Full => featurize(pre, next),
            FeatureVariant::NoDifference => {
                if pre.len() != next.len() {
                    return Err(Error::DimensionMismatch {
                        what: "connector boundary joints".into(),
                        expected: pre.len(),
                        found: next.len(),
                    });
                }
                let mut x = Vec::with_capacity(6 * pre.len());
                for p in pre.iter().chain(next) {
                    x.extend_from_slice(p.as_slice());
                }
                Ok(x)
            }
        }
    }

    pub fn width(&self, joint_count: usize) -> usize {
        match self {
            FeatureVariant::Full => 9 * joint_count,
            FeatureVariant::NoDifference => 6 * joint_count,
        }
    }
}

/// Mean L1 over a sample set under a model.
pub fn mean_l1(
    model: &MlpModel,
    samples: &[CoarticulationSample],
    variant: FeatureVariant,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("no samples to evaluate".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let x = variant.build(&s.pre, &s.next)?;
        total += (model.forward(&x)? - s.duration as f64).abs();
    }
    Ok(total / samples.len() as f64)
}

/// Trains the connector on mined co-articulations with minibatch Adam and
/// the L1 loss. Samples longer than the duration cap are filtered out of
/// every batch. Returns the model and the per-epoch training L1 trace.
pub fn train_connector(
    samples: &[CoarticulationSample],
    cfg: &ConnectorTrainConfig,
    feature_tag: &str,
) -> Result<(MlpModel, Vec<(usize, f64)>)> {
    train_connector_variant(samples, cfg, feature_tag, FeatureVariant::Full)
}

/// As [`train_connector`] for a chosen input variant.
pub fn train_connector_variant(
    samples: &[CoarticulationSample],
    cfg: &ConnectorTrainConfig,
    feature_tag: &str,
    variant: FeatureVariant,
) -> Result<(MlpModel, Vec<(usize, f64)>)> {
    cfg.validate()?;
    let kept: Vec<&CoarticulationSample> = samples
        .iter()
        .filter(|s| s.duration <= cfg.duration_cap)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no training samples remain after filtering durations > {}",
            cfg.duration_cap
        )));
    }
    let joint_count = kept[0].pre.len();
    let features: Vec<Vec<f64>> = kept
        .iter()
        .map(|s| variant.build(&s.pre, &s.next))
        .collect::<Result<_>>()?;
    let targets: Vec<f64> = kept.iter().map(|s| s.duration as f64).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::new(
        variant.width(joint_count),
        &cfg.hidden,
        feature_tag,
        cfg.duration_cap,
        &mut rng,
    )?;
    let mut adam = Adam::new(&model, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);

    let n = features.len();
    let full_batch = cfg.batch_size >= n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = mlp::ParamGrads::zeros_like(&model);
            for &i in batch {
                let (pred, cache) = model.forward_cached(&features[i])?;
                let residual = pred - targets[i];
                // d|r|/dr; zero at exactly zero residual
                let dl = if residual > 0.0 {
                    1.0
                } else if residual < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                grads.accumulate(&model.backward(&cache, dl));
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model, &grads);
        }
        let mut l1 = 0.0;
        for (x, t) in features.iter().zip(&targets) {
            l1 += (model.forward(x)? - t).abs();
        }
        trace.push((epoch, l1 / n as f64));
    }
    Ok((model, trace))
}

/// Rounds the raw model output half-to-even and clamps it into
/// `[0, duration_cap]`.
pub fn predict_duration(
    model: &MlpModel,
    pre: &[Vector3<f64>],
    next: &[Vector3<f64>],
) -> Result<usize> {
    let raw = model.forward(&featurize(pre, next)?)?;
    Ok(quantize_duration(raw, model.duration_cap))
}

pub(crate) fn quantize_duration(raw: f64, cap: usize) -> usize {
    let rounded = raw.round_ties_even();
    if rounded <= 0.0 {
        0
    } else {
        (rounded as usize).min(cap)
    }
}

/// How co-articulation frames are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMode {
    /// Spherical interpolation of rotations with linear shape/expression;
    /// interpolated frames carry full pose parameters.
    Pose,
    /// Linear interpolation of 3D landmark coordinates; interpolated frames
    /// are pose-free trajectories.
    Joint,
}

/// `count` pose frames between `a` and `b` at fractions i/(count+1).
pub fn interpolate_pose(a: &PoseParams, b: &PoseParams, count: usize) -> Vec<PoseParams> {
    let joints = a.theta.len() / 3;
    (1..=count)
        .map(|i| {
            let t = i as f64 / (count + 1) as f64;
            let mut out = a.clone();
            let z = slerp_axis_angle(&a.zeta_vec(), &b.zeta_vec(), t);
            out.zeta = [z.x, z.y, z.z];
            for m in 0..a.beta.len() {
                out.beta[m] = a.beta[m] * (1.0 - t) + b.beta[m] * t;
                out.psi[m] = a.psi[m] * (1.0 - t) + b.psi[m] * t;
            }
            for j in 0..joints {
                let aa = slerp_axis_angle(&a.joint_rotation(j), &b.joint_rotation(j), t);
                out.set_joint_rotation(j, aa);
            }
            out
        })
        .collect()
}

/// `count` landmark frames between `a` and `b` at fractions i/(count+1).
pub fn interpolate_joints(a: &Joints3D, b: &Joints3D, count: usize) -> Result<Vec<Joints3D>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "interpolation endpoints".into(),
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok((1..=count)
        .map(|i| {
            let t = i as f64 / (count + 1) as f64;
            Joints3D {
                coords: a
                    .coords
                    .iter()
                    .zip(&b.coords)
                    .map(|(pa, pb)| pa * (1.0 - t) + pb * t)
                    .collect(),
            }
        })
        .collect())
}

/// Whether a stitched frame belongs to a retrieved sign or a generated
/// co-articulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrameKind {
    Sign { gloss: String },
    Coarticulation,
}

/// One frame of a stitched sequence. `pose` is absent for co-articulation
/// frames generated in joint mode.
#[derive(Debug, Clone)]
pub struct StitchedFrame {
    pub kind: FrameKind,
    pub pose: Option<PoseParams>,
    pub joints: Joints3D,
}

/// A contiguous span of the stitched output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchSpan {
    pub kind: FrameKind,
    pub start: usize,
    pub len: usize,
}

/// Signs interleaved with generated co-articulations, in order.
#[derive(Debug, Clone)]
pub struct StitchedSequence {
    pub frames: Vec<StitchedFrame>,
    pub spans: Vec<StitchSpan>,
    /// Predicted duration per boundary (K−1 entries for K signs).
    pub durations: Vec<usize>,
}

impl StitchedSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Stitches retrieved signs with predicted co-articulations between them.
///
/// Durations come from the model applied to the boundary frames restricted
/// to the connector joint set.
pub fn stitch(
    signs: &[&Sign3D],
    model: &MlpModel,
    mode: InterpolationMode,
    tree: &KinematicTree,
) -> Result<StitchedSequence> {
    if signs.is_empty() {
        return Err(Error::EmptyTranslation);
    }
    let tree_hash = tree.hash_hex();
    for s in signs {
        if s.tree_hash != tree_hash {
            return Err(Error::TreeMismatch(format!(
                "sign {} does not match the stitching tree",
                s.id()
            )));
        }
    }
    let connector_set = tree.set(crate::skeleton::sets::SIGN_CONNECTOR);
    let cam = CameraParams::frontal(1.0, [0.0, 0.0], 0.0);

    let mut frames: Vec<StitchedFrame> = Vec::new();
    let mut spans: Vec<StitchSpan> = Vec::new();
    let mut durations: Vec<usize> = Vec::new();

    let push_span = |frames: &mut Vec<StitchedFrame>,
                         spans: &mut Vec<StitchSpan>,
                         kind: FrameKind,
                         new: Vec<StitchedFrame>| {
        if new.is_empty() {
            return;
        }
        spans.push(StitchSpan {
            kind,
            start: frames.len(),
            len: new.len(),
        });
        frames.extend(new);
    };

    for (k, sign) in signs.iter().enumerate() {
        if k > 0 {
            let prev = signs[k - 1];
            let pre = prev.joints.last().expect("signs are nonempty").select(connector_set);
            let next = sign.joints.first().expect("signs are nonempty").select(connector_set);
            let duration = predict_duration(model, &pre, &next)?;
            durations.push(duration);
            let coart: Vec<StitchedFrame> = match mode {
                InterpolationMode::Pose => {
                    let poses = interpolate_pose(
                        prev.frames.last().unwrap(),
                        sign.frames.first().unwrap(),
                        duration,
                    );
                    poses
                        .into_iter()
                        .map(|pose| {
                            let joints = forward_kinematics(tree, &pose, &cam)?;
                            Ok(StitchedFrame {
                                kind: FrameKind::Coarticulation,
                                pose: Some(pose),
                                joints,
                            })
                        })
                        .collect::<Result<_>>()?
                }
                InterpolationMode::Joint => interpolate_joints(
                    prev.joints.last().unwrap(),
                    sign.joints.first().unwrap(),
                    duration,
                )?
                .into_iter()
                .map(|joints| StitchedFrame {
                    kind: FrameKind::Coarticulation,
                    pose: None,
                    joints,
                })
                .collect(),
            };
            push_span(&mut frames, &mut spans, FrameKind::Coarticulation, coart);
        }
        let own: Vec<StitchedFrame> = sign
            .frames
            .iter()
            .zip(&sign.joints)
            .map(|(pose, joints)| StitchedFrame {
                kind: FrameKind::Sign {
                    gloss: sign.gloss.clone(),
                },
                pose: Some(pose.clone()),
                joints: joints.clone(),
            })
            .collect();
        push_span(
            &mut frames,
            &mut spans,
            FrameKind::Sign {
                gloss: sign.gloss.clone(),
            },
            own,
        );
    }

    Ok(StitchedSequence {
        frames,
        spans,
        durations,
    })
}
