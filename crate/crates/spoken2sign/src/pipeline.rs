//! End-to-end assembly: text → gloss sequence → retrieved signs → stitched
//! animation, plus the 3D-keypoint augmentation / multi-view by-products and
//! the 2D-KL / TC metrics.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::connector::{stitch, InterpolationMode, MlpModel, StitchSpan, StitchedSequence};
use crate::dictionary::{Dictionary, RetrievalScorer, Sign3D};
use crate::skeleton::{
    forward_kinematics, project, rotate_global, CameraParams, Keypoints2D, KinematicTree,
};
use crate::{Error, Result};

/// Maps input text to a gloss sequence.
pub trait Text2Gloss {
    /// Translates `input` (a sentence, or a sentence id for file-backed
    /// translators) into glosses. `dropped` records skipped tokens.
    fn glosses(&self, input: &str) -> Result<GlossTranslation>;
}

#[derive(Debug, Clone, Default)]
pub struct GlossTranslation {
    pub glosses: Vec<String>,
    pub dropped: Vec<String>,
}

/// What to do with words or glosses that cannot be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    /// Drop it and record a warning.
    Skip,
    /// Fail the translation.
    Error,
}

/// Word → gloss table with lowercasing and punctuation stripping.
#[derive(Debug, Clone)]
pub struct LexiconTranslator {
    table: BTreeMap<String, String>,
    pub unknown_policy: UnknownPolicy,
}

impl LexiconTranslator {
    pub fn new(table: BTreeMap<String, String>, unknown_policy: UnknownPolicy) -> Self {
        let table = table
            .into_iter()
            .map(|(word, gloss)| (word.to_lowercase(), gloss))
            .collect();
        LexiconTranslator {
            table,
            unknown_policy,
        }
    }

    fn normalize(token: &str) -> String {
        token
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase()
    }
}

impl Text2Gloss for LexiconTranslator {
    fn glosses(&self, input: &str) -> Result<GlossTranslation> {
        let mut out = GlossTranslation::default();
        for token in input.split_whitespace() {
            let word = Self::normalize(token);
            if word.is_empty() {
                continue;
            }
            match self.table.get(&word) {
                Some(gloss) => out.glosses.push(gloss.clone()),
                None => match self.unknown_policy {
                    UnknownPolicy::Skip => out.dropped.push(word),
                    UnknownPolicy::Error => {
                        return Err(Error::Lookup(format!("word {word:?} not in lexicon")))
                    }
                },
            }
        }
        Ok(out)
    }
}

/// Pre-computed gloss sequences keyed by sentence id.
#[derive(Debug, Clone)]
pub struct FileTranslator {
    sequences: BTreeMap<String, Vec<String>>,
}

impl FileTranslator {
    pub fn new(sequences: BTreeMap<String, Vec<String>>) -> Self {
        FileTranslator { sequences }
    }
}

impl Text2Gloss for FileTranslator {
    fn glosses(&self, input: &str) -> Result<GlossTranslation> {
        let glosses = self
            .sequences
            .get(input)
            .ok_or_else(|| Error::Lookup(format!("sentence id {input:?} has no gloss sequence")))?;
        Ok(GlossTranslation {
            glosses: glosses.clone(),
            dropped: Vec::new(),
        })
    }
}

/// Record of one translation run: what was requested, what was used, and how
/// the output is laid out.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationManifest {
    pub input: String,
    pub glosses_requested: Vec<String>,
    pub glosses_used: Vec<String>,
    /// Chosen dictionary candidate per used gloss.
    pub candidate_ids: Vec<String>,
    /// Predicted co-articulation durations (one per stitched boundary).
    pub durations: Vec<usize>,
    pub spans: Vec<StitchSpan>,
    pub total_frames: usize,
    pub warnings: Vec<String>,
}

/// Translation settings beyond the loaded artifacts.
#[derive(Debug, Clone)]
pub struct TranslateOptions {
    pub mode: InterpolationMode,
    pub scorer: RetrievalScorer,
    pub unknown_gloss: UnknownPolicy,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        TranslateOptions {
            mode: InterpolationMode::Pose,
            scorer: RetrievalScorer::Auto,
            unknown_gloss: UnknownPolicy::Skip,
        }
    }
}

/// Full pipeline: translate text to glosses, retrieve a 3D sign per gloss,
/// stitch with predicted co-articulations.
pub fn translate(
    input: &str,
    translator: &dyn Text2Gloss,
    dict: &Dictionary,
    model: &MlpModel,
    options: &TranslateOptions,
) -> Result<(StitchedSequence, TranslationManifest)> {
    let translation = translator.glosses(input)?;
    let mut warnings: Vec<String> = translation
        .dropped
        .iter()
        .map(|w| format!("word {w:?} not in lexicon, skipped"))
        .collect();

    let mut used = Vec::new();
    let mut signs: Vec<&Sign3D> = Vec::new();
    for gloss in &translation.glosses {
        if !dict.contains(gloss) {
            match options.unknown_gloss {
                UnknownPolicy::Skip => {
                    warnings.push(format!("gloss {gloss:?} not in dictionary, skipped"));
                    continue;
                }
                UnknownPolicy::Error => return Err(Error::UnknownGloss(gloss.clone())),
            }
        }
        signs.push(dict.retrieve(gloss, options.scorer)?);
        used.push(gloss.clone());
    }
    if signs.is_empty() {
        return Err(Error::EmptyTranslation);
    }

    let stitched = stitch(&signs, model, options.mode, dict.tree())?;
    let manifest = TranslationManifest {
        input: input.to_string(),
        glosses_requested: translation.glosses,
        glosses_used: used,
        candidate_ids: signs.iter().map(|s| s.id()).collect(),
        durations: stitched.durations.clone(),
        spans: stitched.spans.clone(),
        total_frames: stitched.len(),
        warnings,
    };
    Ok((stitched, manifest))
}

/// Augmentation settings: rotation range Δ (radians) about an axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub delta: f64,
    pub axis: [f64; 3],
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            delta: 20.0f64.to_radians(),
            axis: [0.0, 1.0, 0.0],
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta < 0.0 {
            return Err(Error::InvalidConfig("augmentation delta must be >= 0".into()));
        }
        if Vector3::from(self.axis).norm() < 1e-9 {
            return Err(Error::InvalidConfig("augmentation axis is zero".into()));
        }
        Ok(())
    }
}

/// Rotates every frame of a sign by a fixed angle about an axis and projects
/// it; output confidences are 1.
pub fn project_rotated(
    sign: &Sign3D,
    delta: f64,
    axis: &Vector3<f64>,
    tree: &KinematicTree,
    cam: &CameraParams,
) -> Result<Vec<Keypoints2D>> {
    sign.frames
        .iter()
        .map(|pose| {
            let rotated = rotate_global(pose, delta, axis);
            let joints = forward_kinematics(tree, &rotated, cam)?;
            project(&joints, cam)
        })
        .collect()
}

/// Samples one angle δ uniformly from [−Δ, Δ], rotates the whole sign by it,
/// and projects every frame. Returns the projections and the sampled δ.
pub fn augment_3d<R: Rng>(
    sign: &Sign3D,
    cfg: &AugmentConfig,
    tree: &KinematicTree,
    cam: &CameraParams,
    rng: &mut R,
) -> Result<(Vec<Keypoints2D>, f64)> {
    cfg.validate()?;
    let delta = if cfg.delta == 0.0 {
        0.0
    } else {
        rng.random_range(-cfg.delta..=cfg.delta)
    };
    let axis = Vector3::from(cfg.axis);
    let frames = project_rotated(sign, delta, &axis, tree, cam)?;
    Ok((frames, delta))
}

/// Deterministic fixed-angle views (e.g. frontal 0° and a 60° side view).
pub fn multiview_project(
    sign: &Sign3D,
    tree: &KinematicTree,
    cam: &CameraParams,
    angles: &[f64],
    axis: &Vector3<f64>,
) -> Result<Vec<Vec<Keypoints2D>>> {
    angles
        .iter()
        .map(|&angle| project_rotated(sign, angle, axis, tree, cam))
        .collect()
}

/// Mean Euclidean distance between corresponding 2D keypoints, weighted by
/// the reference confidences.
pub fn metric_2d_kl(pred: &[Keypoints2D], reference: &[Keypoints2D]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            what: "metric frame count".into(),
            expected: reference.len(),
            found: pred.len(),
        });
    }
    let mut total = 0.0;
    let mut weight = 0.0;
    for (p, r) in pred.iter().zip(reference) {
        if p.len() != r.len() {
            return Err(Error::DimensionMismatch {
                what: "metric landmark count".into(),
                expected: r.len(),
                found: p.len(),
            });
        }
        for i in 0..p.len() {
            let w = r.confidence[i];
            if w == 0.0 {
                continue;
            }
            let dx = p.coords[i][0] - r.coords[i][0];
            let dy = p.coords[i][1] - r.coords[i][1];
            total += w * (dx * dx + dy * dy).sqrt();
            weight += w;
        }
    }
    if weight == 0.0 {
        return Err(Error::Metric(
            "every reference confidence is zero; 2D distance is undefined".into(),
        ));
    }
    Ok(total / weight)
}

/// Temporal-consistency metric with the frames that had to be skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcResult {
    /// Mean cosine similarity of consecutive frames, in [−1, 1].
    pub value: f64,
    /// Consecutive pairs skipped because one side was a zero vector.
    pub skipped: usize,
}

/// Mean cosine similarity across consecutive flattened frames.
pub fn metric_tc(frames: &[Vec<f64>]) -> Result<TcResult> {
    if frames.len() < 2 {
        return Err(Error::Metric(
            "temporal consistency needs at least two frames".into(),
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    for w in frames.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                what: "metric frame width".into(),
                expected: a.len(),
                found: b.len(),
            });
        }
        let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            skipped += 1;
            continue;
        }
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        total += dot / (na * nb);
        pairs += 1;
    }
    if pairs == 0 {
        return Err(Error::Metric("no nonzero consecutive frame pairs".into()));
    }
    Ok(TcResult {
        value: total / pairs as f64,
        skipped,
    })
}

/// Flattens keypoint coordinates for [`metric_tc`].
pub fn flatten_keypoints(kps: &Keypoints2D) -> Vec<f64> {
    kps.coords.iter().flat_map(|c| [c[0], c[1]]).collect()
}
