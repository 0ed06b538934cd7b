//! CTC forced alignment: the optimal feasible frame labeling for a known
//! gloss sequence, segmentation into isolated signs, and co-articulation
//! mining.

use nalgebra::Vector3;

use crate::skeleton::Joints3D;
use crate::{Error, Result};

/// Per-frame class posteriors: `T` rows over `V` gloss classes plus one
/// background class. The background is always the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    probs: Vec<f64>,
    frames: usize,
    classes: usize,
    /// Class names; `class_names[V]` names the background.
    pub class_names: Vec<String>,
}

impl PosteriorMatrix {
    /// Validates shape, nonnegativity, and that rows sum to 1 ± 1e-6.
    pub fn new(probs: Vec<f64>, frames: usize, class_names: Vec<String>) -> Result<Self> {
        let classes = class_names.len();
        if classes < 2 {
            return Err(Error::InvalidConfig(
                "posteriors need at least one gloss class plus background".into(),
            ));
        }
        if probs.len() != frames * classes {
            return Err(Error::DimensionMismatch {
                what: "posterior matrix".into(),
                expected: frames * classes,
                found: probs.len(),
            });
        }
        for t in 0..frames {
            let row = &probs[t * classes..(t + 1) * classes];
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "posterior row {t} contains a negative or non-finite probability"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "posterior row {t} sums to {sum}, expected 1 +/- 1e-6"
                )));
            }
        }
        Ok(PosteriorMatrix {
            probs,
            frames,
            classes,
            class_names,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Gloss vocabulary size V (excludes background).
    pub fn vocab(&self) -> usize {
        self.classes - 1
    }

    pub fn prob(&self, t: usize, label: Label) -> f64 {
        let col = match label {
            Label::Gloss(g) => g,
            Label::Background => self.classes - 1,
        };
        self.probs[t * self.classes + col]
    }

    pub fn raw(&self) -> &[f64] {
        &self.probs
    }

    /// Resolves a gloss name to its class id.
    pub fn gloss_id(&self, name: &str) -> Option<usize> {
        self.class_names[..self.vocab()]
            .iter()
            .position(|n| n == name)
    }
}

/// A frame label: one of the V gloss classes or the background class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Gloss(usize),
    Background,
}

/// The ground-truth gloss sequence of one continuous video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlossSequence(pub Vec<usize>);

impl GlossSequence {
    pub fn new(ids: Vec<usize>, vocab: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidConfig("gloss sequence is empty".into()));
        }
        for &g in &ids {
            if g >= vocab {
                return Err(Error::LabelOutOfRange {
                    label: g,
                    classes: vocab,
                });
            }
        }
        Ok(GlossSequence(ids))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A feasible frame labeling: collapsing it (drop background, merge adjacent
/// duplicates) recovers the gloss sequence it was aligned to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath(pub Vec<Label>);

impl AlignmentPath {
    /// CTC collapse: remove background and merge adjacent duplicates.
    pub fn collapse(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut prev: Option<Label> = None;
        for &label in &self.0 {
            if let Label::Gloss(g) = label {
                if prev != Some(label) {
                    out.push(g);
                }
            }
            prev = Some(label);
        }
        out
    }
}

/// Probability (and log-probability) of a path: the product of per-frame
/// posteriors.
pub fn path_probability(post: &PosteriorMatrix, path: &AlignmentPath) -> Result<(f64, f64)> {
    if path.0.len() != post.frames() {
        return Err(Error::DimensionMismatch {
            what: "alignment path".into(),
            expected: post.frames(),
            found: path.0.len(),
        });
    }
    let mut log_p = 0.0;
    for (t, &label) in path.0.iter().enumerate() {
        if let Label::Gloss(g) = label {
            if g >= post.vocab() {
                return Err(Error::LabelOutOfRange {
                    label: g,
                    classes: post.vocab(),
                });
            }
        }
        log_p += post.prob(t, label).ln();
    }
    Ok((log_p.exp(), log_p))
}

/// Minimum number of frames a gloss sequence can be aligned to: one frame
/// per gloss plus a separating background frame between equal neighbors.
fn min_feasible_frames(g: &GlossSequence) -> usize {
    let mut n = g.len();
    for w in g.0.windows(2) {
        if w[0] == w[1] {
            n += 1;
        }
    }
    n
}

/// Viterbi over the 2N+1-state CTC lattice (background, g1, background, …,
/// gN, background) in log space.
///
/// Background states are optional except between equal adjacent glosses.
/// Ties prefer the lower lattice state, resolved from the final frame
/// backwards, which makes the result match exhaustive enumeration under a
/// reversed-lexicographic order on state sequences.
pub fn forced_align(post: &PosteriorMatrix, g: &GlossSequence) -> Result<AlignmentPath> {
    for &gloss in &g.0 {
        if gloss >= post.vocab() {
            return Err(Error::LabelOutOfRange {
                label: gloss,
                classes: post.vocab(),
            });
        }
    }
    let t_len = post.frames();
    let min_len = min_feasible_frames(g);
    if t_len < min_len {
        return Err(Error::Infeasible(format!(
            "{t_len} frames cannot realize {} glosses (minimum {min_len})",
            g.len()
        )));
    }

    let n = g.len();
    let states = 2 * n + 1;
    let state_label = |s: usize| -> Label {
        if s % 2 == 0 {
            Label::Background
        } else {
            Label::Gloss(g.0[(s - 1) / 2])
        }
    };
    // skip from s-2 allowed only into a gloss state with a different gloss
    let skip_allowed = |s: usize| -> bool {
        s % 2 == 1 && s >= 3 && g.0[(s - 1) / 2] != g.0[(s - 3) / 2]
    };

    const UNREACHED: f64 = f64::NEG_INFINITY;
    let mut score = vec![UNREACHED; t_len * states];
    let mut reached = vec![false; t_len * states];
    let mut backptr = vec![0usize; t_len * states];

    for s in [0, 1] {
        if s < states {
            score[s] = post.prob(0, state_label(s)).ln();
            reached[s] = true;
        }
    }

    for t in 1..t_len {
        for s in 0..states {
            // predecessors in ascending order; strict improvement keeps the
            // lowest state on ties
            let mut best: Option<(f64, usize)> = None;
            let mut candidates = [usize::MAX; 3];
            let mut k = 0;
            if skip_allowed(s) {
                candidates[k] = s - 2;
                k += 1;
            }
            if s >= 1 {
                candidates[k] = s - 1;
                k += 1;
            }
            candidates[k] = s;
            k += 1;
            for &p in &candidates[..k] {
                if !reached[(t - 1) * states + p] {
                    continue;
                }
                let cand = score[(t - 1) * states + p];
                match best {
                    Some((b, _)) if cand <= b => {}
                    _ => best = Some((cand, p)),
                }
            }
            if let Some((prev_score, p)) = best {
                let idx = t * states + s;
                score[idx] = prev_score + post.prob(t, state_label(s)).ln();
                reached[idx] = true;
                backptr[idx] = p;
            }
        }
    }

    // end at the final gloss or final background state; lower index wins ties
    let last = (t_len - 1) * states;
    let mut end: Option<usize> = None;
    for s in [states - 2, states - 1] {
        if !reached[last + s] {
            continue;
        }
        end = match end {
            Some(e) if score[last + e] >= score[last + s] => Some(e),
            _ => Some(s),
        };
    }
    let Some(mut s) = end else {
        return Err(Error::Infeasible(
            "no feasible alignment path reaches a final state".into(),
        ));
    };

    let mut labels = vec![Label::Background; t_len];
    labels[t_len - 1] = state_label(s);
    for t in (1..t_len).rev() {
        s = backptr[t * states + s];
        labels[t - 1] = state_label(s);
    }
    Ok(AlignmentPath(labels))
}

/// A maximal run of one gloss in an alignment path (inclusive frame range).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub gloss: usize,
    pub start: usize,
    pub end: usize,
}

/// Aggregates successive duplicate gloss labels into segments; background
/// runs separate segments and produce none.
pub fn segments_from_path(path: &AlignmentPath) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (t, &label) in path.0.iter().enumerate() {
        match label {
            Label::Background => {}
            Label::Gloss(g) => match out.last_mut() {
                Some(seg) if seg.gloss == g && seg.end + 1 == t => seg.end = t,
                _ => out.push(Segment {
                    gloss: g,
                    start: t,
                    end: t,
                }),
            },
        }
    }
    out
}

/// Training sample for the sign connector: boundary joints of two adjacent
/// signs (restricted to the connector set) and the gap length between them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarticulationSample {
    pub pre: Vec<Vector3<f64>>,
    pub duration: usize,
    pub next: Vec<Vector3<f64>>,
}

/// Mines one sample per adjacent segment pair: the last frame of the earlier
/// sign, the first frame of the later one, and the background gap length
/// (possibly zero).
pub fn extract_coarticulations(
    segments: &[Segment],
    video_joints: &[Joints3D],
    connector_set: &[usize],
) -> Result<Vec<CoarticulationSample>> {
    let mut out = Vec::new();
    for pair in segments.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.end >= video_joints.len() || b.start >= video_joints.len() {
            return Err(Error::DimensionMismatch {
                what: "segment frame index".into(),
                expected: video_joints.len(),
                found: a.end.max(b.start) + 1,
            });
        }
        out.push(CoarticulationSample {
            pre: video_joints[a.end].select(connector_set),
            duration: b.start - a.end - 1,
            next: video_joints[b.start].select(connector_set),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(frames: usize, classes: usize) -> PosteriorMatrix {
        let p = 1.0 / classes as f64;
        let names = (0..classes - 1)
            .map(|i| format!("G{i}"))
            .chain(std::iter::once("background".to_string()))
            .collect();
        PosteriorMatrix::new(vec![p; frames * classes], frames, names).unwrap()
    }

    fn matrix(rows: &[&[f64]]) -> PosteriorMatrix {
        let classes = rows[0].len();
        let names = (0..classes - 1)
            .map(|i| format!("G{i}"))
            .chain(std::iter::once("background".to_string()))
            .collect();
        PosteriorMatrix::new(rows.concat(), rows.len(), names).unwrap()
    }

    #[test]
    fn row_validation() {
        assert!(PosteriorMatrix::new(
            vec![0.5, 0.4],
            1,
            vec!["A".into(), "background".into()]
        )
        .is_err());
        assert!(PosteriorMatrix::new(
            vec![1.2, -0.2],
            1,
            vec!["A".into(), "background".into()]
        )
        .is_err());
    }

    #[test]
    fn uniform_path_probability() {
        let post = uniform(4, 3);
        let path = AlignmentPath(vec![
            Label::Gloss(0),
            Label::Background,
            Label::Gloss(1),
            Label::Background,
        ]);
        let (p, _) = path_probability(&post, &path).unwrap();
        assert!((p - (1.0f64 / 3.0).powi(4)).abs() < 1e-12);
    }

    #[test]
    fn direct_product_probability() {
        // p1(A)=0.9, p2(bg)=0.8 → 0.72
        let post = matrix(&[&[0.9, 0.1], &[0.2, 0.8]]);
        let path = AlignmentPath(vec![Label::Gloss(0), Label::Background]);
        let (p, log_p) = path_probability(&post, &path).unwrap();
        assert!((p - 0.72).abs() < 1e-12);
        assert!((log_p - 0.72f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_factor_zeroes_the_product() {
        let post = matrix(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let path = AlignmentPath(vec![Label::Gloss(0), Label::Background]);
        let (p, log_p) = path_probability(&post, &path).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(log_p, f64::NEG_INFINITY);
    }

    #[test]
    fn label_out_of_range_is_an_error() {
        let post = uniform(2, 3);
        let path = AlignmentPath(vec![Label::Gloss(7), Label::Background]);
        assert!(matches!(
            path_probability(&post, &path),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn forced_align_two_frame_example() {
        // argmax over {(A,A):0.18, (A,bg):0.72, (bg,A):0.02}
        let post = matrix(&[&[0.9, 0.1], &[0.2, 0.8]]);
        let g = GlossSequence::new(vec![0], 1).unwrap();
        let path = forced_align(&post, &g).unwrap();
        assert_eq!(path.0, vec![Label::Gloss(0), Label::Background]);
        let (p, _) = path_probability(&post, &path).unwrap();
        assert!((p - 0.72).abs() < 1e-12);
    }

    #[test]
    fn forced_align_single_frame() {
        let post = matrix(&[&[0.3, 0.7]]);
        let g = GlossSequence::new(vec![0], 1).unwrap();
        let path = forced_align(&post, &g).unwrap();
        assert_eq!(path.0, vec![Label::Gloss(0)]);
    }

    #[test]
    fn repeated_gloss_forces_separating_background() {
        // T=3, g=(A,A): the only feasible path is (A, bg, A)
        let post = matrix(&[&[0.9, 0.1], &[0.9, 0.1], &[0.9, 0.1]]);
        let g = GlossSequence::new(vec![0, 0], 1).unwrap();
        let path = forced_align(&post, &g).unwrap();
        assert_eq!(
            path.0,
            vec![Label::Gloss(0), Label::Background, Label::Gloss(0)]
        );
    }

    #[test]
    fn too_few_frames_is_infeasible() {
        let post = matrix(&[&[0.9, 0.1], &[0.9, 0.1]]);
        let g = GlossSequence::new(vec![0, 0], 1).unwrap();
        assert!(matches!(forced_align(&post, &g), Err(Error::Infeasible(_))));
    }

    #[test]
    fn alignment_always_collapses_to_the_sequence() {
        // feasibility on a batch of random instances
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let v = rng.random_range(1..=3usize);
            let t = rng.random_range(1..=8usize);
            let n = rng.random_range(1..=3usize);
            let g: Vec<usize> = (0..n).map(|_| rng.random_range(0..v)).collect();
            let g = GlossSequence::new(g, v).unwrap();
            let mut probs = Vec::new();
            for _ in 0..t {
                let mut row: Vec<f64> = (0..=v).map(|_| rng.random_range(0.01..1.0)).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                probs.extend(row);
            }
            let names = (0..v)
                .map(|i| format!("G{i}"))
                .chain(std::iter::once("background".into()))
                .collect();
            let post = PosteriorMatrix::new(probs, t, names).unwrap();
            match forced_align(&post, &g) {
                Ok(path) => assert_eq!(path.collapse(), g.0, "path must collapse to g"),
                Err(Error::Infeasible(_)) => assert!(t < min_feasible_frames(&g)),
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }

    #[test]
    fn segments_basic_runs() {
        let path = AlignmentPath(vec![
            Label::Gloss(0),
            Label::Gloss(0),
            Label::Background,
            Label::Gloss(1),
        ]);
        let segs = segments_from_path(&path);
        assert_eq!(
            segs,
            vec![
                Segment { gloss: 0, start: 0, end: 1 },
                Segment { gloss: 1, start: 3, end: 3 },
            ]
        );
    }

    #[test]
    fn segments_all_background_is_empty() {
        let path = AlignmentPath(vec![Label::Background; 5]);
        assert!(segments_from_path(&path).is_empty());
    }

    #[test]
    fn segments_are_runs_not_global_merges() {
        let path = AlignmentPath(vec![
            Label::Gloss(0),
            Label::Gloss(1),
            Label::Gloss(1),
            Label::Gloss(0),
        ]);
        let segs = segments_from_path(&path);
        assert_eq!(
            segs,
            vec![
                Segment { gloss: 0, start: 0, end: 0 },
                Segment { gloss: 1, start: 1, end: 2 },
                Segment { gloss: 0, start: 3, end: 3 },
            ]
        );
    }

    #[test]
    fn segmentation_is_lossless() {
        // reconstructing the path from segments (gaps as background) gives
        // the original labels
        let path = AlignmentPath(vec![
            Label::Background,
            Label::Gloss(2),
            Label::Gloss(2),
            Label::Background,
            Label::Background,
            Label::Gloss(0),
            Label::Background,
        ]);
        let segs = segments_from_path(&path);
        let mut rebuilt = vec![Label::Background; path.0.len()];
        for seg in &segs {
            for slot in rebuilt.iter_mut().take(seg.end + 1).skip(seg.start) {
                *slot = Label::Gloss(seg.gloss);
            }
        }
        assert_eq!(rebuilt, path.0);
    }

    fn joints_at(v: f64, count: usize) -> Joints3D {
        Joints3D {
            coords: vec![Vector3::new(v, 0.0, 0.0); count],
        }
    }

    #[test]
    fn coarticulation_gap_arithmetic() {
        let joints: Vec<Joints3D> = (0..8).map(|t| joints_at(t as f64, 4)).collect();
        let segs = vec![
            Segment { gloss: 0, start: 1, end: 2 },
            Segment { gloss: 1, start: 5, end: 6 },
        ];
        let samples = extract_coarticulations(&segs, &joints, &[0, 2]).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].duration, 2);
        assert_eq!(samples[0].pre[0].x, 2.0);
        assert_eq!(samples[0].next[0].x, 5.0);
        assert_eq!(samples[0].pre.len(), 2);
    }

    #[test]
    fn adjacent_segments_have_zero_duration() {
        let joints: Vec<Joints3D> = (0..4).map(|t| joints_at(t as f64, 2)).collect();
        let segs = vec![
            Segment { gloss: 0, start: 0, end: 1 },
            Segment { gloss: 1, start: 2, end: 3 },
        ];
        let samples = extract_coarticulations(&segs, &joints, &[0]).unwrap();
        assert_eq!(samples[0].duration, 0);
    }

    #[test]
    fn single_segment_yields_no_samples() {
        let joints: Vec<Joints3D> = (0..3).map(|t| joints_at(t as f64, 2)).collect();
        let segs = vec![Segment { gloss: 0, start: 0, end: 2 }];
        assert!(extract_coarticulations(&segs, &joints, &[0])
            .unwrap()
            .is_empty());
    }
}
