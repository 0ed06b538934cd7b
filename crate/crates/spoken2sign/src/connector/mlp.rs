//! Dense MLP with rectified-linear hidden activations, hand-rolled
//! backpropagation, and an Adam optimizer.

use rand::Rng;

use crate::formats::bin::{self, Reader};
use crate::{Error, Result};

const MODEL_MAGIC: &[u8; 8] = b"S2SMLP\x01\x00";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Layer {
    /// Row-major `out_dim × in_dim` weights.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Layer {
    fn new_random(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        // Xavier-uniform initialization
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Layer {
            w,
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            *yo += row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
        y
    }
}

/// Scalar-output MLP: affine layers with ReLU between them and a linear
/// final layer. Immutable once trained; safe to share across threads.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    /// Identifies the joint set/tree the input features came from.
    pub feature_tag: String,
    /// Predictions are clamped to `[0, duration_cap]` frames.
    pub duration_cap: usize,
}

/// Per-layer activations cached by the forward pass for backprop.
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer `l` (post-activation of `l-1`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation outputs of every layer.
    pre: Vec<Vec<f64>>,
}

/// Gradients with the same shapes as the model parameters.
pub struct ParamGrads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(model: &MlpModel) -> Self {
        ParamGrads {
            w: model.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: model.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.w.iter_mut().chain(self.b.iter_mut()) {
            for v in layer.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn accumulate(&mut self, other: &ParamGrads) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

impl MlpModel {
    /// Builds a randomly initialized network. `hidden` lists the hidden
    /// widths; the output is always a single scalar.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        feature_tag: impl Into<String>,
        duration_cap: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("MLP input width must be positive".into()));
        }
        if hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| Layer::new_random(w[0], w[1], rng))
            .collect();
        Ok(MlpModel {
            layers,
            feature_tag: feature_tag.into(),
            duration_cap,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Layer widths including input and output.
    pub fn shape(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    /// Scalar prediction for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Forward pass keeping the activations needed by [`Self::backward`].
    pub fn forward_cached(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "MLP input".into(),
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(current.clone());
            let z = layer.forward(&current);
            pre.push(z.clone());
            current = if l == last {
                z
            } else {
                z.into_iter().map(|v| v.max(0.0)).collect()
            };
        }
        Ok((current[0], ForwardCache { inputs, pre }))
    }

    /// Backpropagates d(loss)/d(output) through the cached activations.
    pub fn backward(&self, cache: &ForwardCache, dl_dout: f64) -> ParamGrads {
        let mut grads = ParamGrads::zeros_like(self);
        let mut delta = vec![dl_dout];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if l != self.layers.len() - 1 {
                // ReLU mask of this layer's pre-activation
                for (d, z) in delta.iter_mut().zip(&cache.pre[l]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &cache.inputs[l];
            for (o, d) in delta.iter().enumerate() {
                grads.b[l][o] += d;
                let row = &mut grads.w[l][o * layer.in_dim..(o + 1) * layer.in_dim];
                for (slot, xi) in row.iter_mut().zip(input) {
                    *slot += d * xi;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (slot, w) in next.iter_mut().zip(row) {
                        *slot += d * w;
                    }
                }
                delta = next;
            }
        }
        grads
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        bin::w_u32(&mut out, MODEL_VERSION);
        bin::w_str(&mut out, &self.feature_tag);
        bin::w_u32(&mut out, self.duration_cap as u32);
        bin::w_u32(&mut out, self.layers.len() as u32);
        for layer in &self.layers {
            bin::w_u32(&mut out, layer.in_dim as u32);
            bin::w_u32(&mut out, layer.out_dim as u32);
        }
        for layer in &self.layers {
            for v in layer.w.iter().chain(&layer.b) {
                bin::w_f32(&mut out, *v as f32);
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8], what: &str) -> Result<Self> {
        let mut r = Reader::new(buf, what);
        r.expect_magic(MODEL_MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::FormatVersion {
                what: what.into(),
                found: version,
                supported: MODEL_VERSION,
            });
        }
        let feature_tag = r.str()?;
        let duration_cap = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = r.u32()? as usize;
            let out_dim = r.u32()? as usize;
            shapes.push((in_dim, out_dim));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (in_dim, out_dim) in shapes {
            let mut w = vec![0.0; in_dim * out_dim];
            for v in w.iter_mut() {
                *v = r.f32()? as f64;
            }
            let mut b = vec![0.0; out_dim];
            for v in b.iter_mut() {
                *v = r.f32()? as f64;
            }
            layers.push(Layer {
                w,
                b,
                in_dim,
                out_dim,
            });
        }
        if layers.is_empty() || layers.last().unwrap().out_dim != 1 {
            return Err(Error::Corrupt {
                what: what.into(),
                message: "model must end in a scalar output layer".into(),
            });
        }
        Ok(MlpModel {
            layers,
            feature_tag,
            duration_cap,
        })
    }
}

/// Adam state over the model parameters.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: ParamGrads,
    v: ParamGrads,
}

impl Adam {
    pub fn new(model: &MlpModel, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: ParamGrads::zeros_like(model),
            v: ParamGrads::zeros_like(model),
        }
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &ParamGrads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (l, layer) in model.layers.iter_mut().enumerate() {
            for (i, g) in grads.w[l].iter().enumerate() {
                let m = &mut self.m.w[l][i];
                let v = &mut self.v.w[l][i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                layer.w[i] -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.epsilon);
            }
            for (i, g) in grads.b[l].iter().enumerate() {
                let m = &mut self.m.b[l][i];
                let v = &mut self.v.b[l][i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                layer.b[i] -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_zero_weights_output_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = MlpModel::new(4, &[3, 2, 2], "test", 12, &mut rng).unwrap();
        for layer in model.layers.iter_mut() {
            layer.w.iter_mut().for_each(|v| *v = 0.0);
            layer.b.iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(model.forward(&[1.0, -2.0, 3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_single_unit_chain() {
        // four 1-wide layers: y = w4·relu(w3·relu(w2·relu(w1·x + b1)..)..)
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = MlpModel::new(1, &[1, 1, 1], "test", 12, &mut rng).unwrap();
        let params = [(2.0, 0.5), (-1.0, 3.0), (0.5, -0.25), (4.0, 1.0)];
        for (layer, (w, b)) in model.layers.iter_mut().zip(params) {
            layer.w[0] = w;
            layer.b[0] = b;
        }
        // x=1: z1=2.5, a1=2.5; z2=0.5, a2=0.5; z3=0.0, a3=0.0; y=1.0
        assert_eq!(model.forward(&[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = MlpModel::new(6, &[5, 4, 3], "test", 12, &mut rng).unwrap();
        let x: Vec<f64> = (0..6).map(|i| (i as f64 - 2.5) * 0.3).collect();
        let (_, cache) = model.forward_cached(&x).unwrap();
        let grads = model.backward(&cache, 1.0);

        let h = 1e-6;
        for l in 0..model.layers.len() {
            for i in (0..model.layers[l].w.len()).step_by(7) {
                let mut plus = model.clone();
                plus.layers[l].w[i] += h;
                let mut minus = model.clone();
                minus.layers[l].w[i] -= h;
                let fd =
                    (plus.forward(&x).unwrap() - minus.forward(&x).unwrap()) / (2.0 * h);
                let an = grads.w[l][i];
                let denom = an.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (an - fd).abs() / denom < 1e-4,
                    "layer {l} w[{i}]: {an} vs {fd}"
                );
            }
            for i in 0..model.layers[l].b.len() {
                let mut plus = model.clone();
                plus.layers[l].b[i] += h;
                let mut minus = model.clone();
                minus.layers[l].b[i] -= h;
                let fd =
                    (plus.forward(&x).unwrap() - minus.forward(&x).unwrap()) / (2.0 * h);
                let an = grads.b[l][i];
                let denom = an.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (an - fd).abs() / denom < 1e-4,
                    "layer {l} b[{i}]: {an} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn model_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = MlpModel::new(8, &[4, 3, 2], "tag123", 9, &mut rng).unwrap();
        // quantize to the file precision so the round trip is exact
        for layer in model.layers.iter_mut() {
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = *v as f32 as f64;
            }
        }
        let bytes = model.to_bytes();
        let back = MlpModel::from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back.feature_tag, "tag123");
        assert_eq!(back.duration_cap, 9);
        assert_eq!(back.shape(), model.shape());
        for (a, b) in model.layers.iter().zip(&back.layers) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
        }
    }

    #[test]
    fn future_version_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = MlpModel::new(2, &[2], "t", 12, &mut rng).unwrap();
        let mut bytes = model.to_bytes();
        bytes[8] = 42;
        assert!(matches!(
            MlpModel::from_bytes(&bytes, "mem"),
            Err(Error::FormatVersion { .. })
        ));
    }
}
