//! Minimal dense-autoencoder engine.
//!
//! Supports exactly what the collaborative-training protocol needs: a
//! symmetric stack of dense layers with ReLU/sigmoid activations, MSE loss,
//! backpropagation, momentum SGD, flattening of all parameters into a single
//! vector for device-to-device exchange, and a binary checkpoint format.
//!
//! All arithmetic is carried out in f64; checkpoints store f32.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Checkpoint file magic, first 8 bytes of the 16-byte header.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WAFLAE01";

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// Default architecture: 784-256-64-256-784, ReLU hidden, sigmoid output.
pub const DEFAULT_LAYER_SIZES: [usize; 5] = [784, 256, 64, 256, 784];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// Numerically stable sigmoid, clamped into the open interval (0,1) so the
/// output contract holds even for saturating pre-activations.
#[inline]
fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// One dense layer: `y = act(W x + b)` with `W` of shape (out, in).
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            biases: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Flat copy of all trainable parameters in canonical order: layer 0
/// weights row-major, layer 0 biases, layer 1 weights, ... This is the unit
/// of device-to-device exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Dense autoencoder. Layer sizes are a palindrome (the decoder mirrors the
/// encoder) and the final activation is always sigmoid, so reconstructions
/// stay inside (0,1).
#[derive(Debug, Clone)]
pub struct Autoencoder {
    layer_sizes: Vec<usize>,
    layers: Vec<DenseLayer>,
}

impl Autoencoder {
    /// Builds a zero-initialized model with ReLU hidden layers and a sigmoid
    /// output layer.
    pub fn new(layer_sizes: &[usize]) -> Result<Self> {
        let n = layer_sizes.len();
        let mut activations = vec![Activation::Relu; n.saturating_sub(1)];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Sigmoid;
        }
        Self::with_activations(layer_sizes, &activations)
    }

    /// Builds a zero-initialized model with explicit per-layer activations.
    /// The final activation must be sigmoid.
    pub fn with_activations(layer_sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "autoencoder needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        let n = layer_sizes.len();
        for i in 0..n / 2 {
            if layer_sizes[i] != layer_sizes[n - 1 - i] {
                return Err(Error::InvalidArgument(format!(
                    "layer sizes must mirror around the bottleneck: {layer_sizes:?}"
                )));
            }
        }
        if activations.len() != n - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} activations, got {}",
                n - 1,
                activations.len()
            )));
        }
        if *activations.last().unwrap() != Activation::Sigmoid {
            return Err(Error::InvalidArgument(
                "final activation must be sigmoid".into(),
            ));
        }
        let layers = layer_sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| DenseLayer::zeros(w[0], w[1], a))
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    /// Zero-initialized model, then Xavier-uniform weights from the seed.
    pub fn seeded(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::new(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.init_weights(&mut rng);
        Ok(model)
    }

    /// Xavier-uniform initialization: weights in ±sqrt(6/(fan_in+fan_out)),
    /// biases zero.
    pub fn init_weights<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            let limit = (6.0 / (layer.in_dim() + layer.out_dim()) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("valid range");
            for w in layer.weights.iter_mut() {
                *w = dist.sample(rng);
            }
            layer.biases.fill(0.0);
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Forward pass for a single sample.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut a = x.to_vec();
        for layer in &self.layers {
            let w = layer.weights.as_slice().expect("standard layout");
            let in_dim = layer.in_dim();
            let mut out = Vec::with_capacity(layer.out_dim());
            for (o, &b) in layer.biases.iter().enumerate() {
                let row = &w[o * in_dim..(o + 1) * in_dim];
                let mut s = b;
                for (&wv, &av) in row.iter().zip(&a) {
                    s += wv * av;
                }
                out.push(layer.activation.apply(s));
            }
            a = out;
        }
        Ok(a)
    }

    /// Forward pass for a batch (rows are samples). Uses GEMM, so this is
    /// the fast path for training and bulk scoring.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut a = x.to_owned();
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights.t()) + &layer.biases;
            z.mapv_inplace(|v| layer.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Batch-mean reconstruction loss and its gradient with respect to every
    /// parameter, in canonical flat order. Does not modify the model.
    pub fn batch_gradient(&self, batch: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        if batch.nrows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if batch.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }

        // Forward, retaining post-activations of every layer.
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(batch.to_owned());
        for layer in &self.layers {
            let mut z = acts.last().unwrap().dot(&layer.weights.t()) + &layer.biases;
            z.mapv_inplace(|v| layer.activation.apply(v));
            acts.push(z);
        }

        let output = acts.last().unwrap();
        let diff = output - &batch;
        let loss = diff.mapv(|d| d * d).mean().unwrap();

        // Backward. The loss is the mean over all batch elements, so the
        // 1/(B·D) factor folds into the initial upstream gradient.
        let scale = 2.0 / (batch.nrows() * batch.ncols()) as f64;
        let mut d_act = diff * scale;
        let n_layers = self.layers.len();
        let mut layer_grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let mut dz = d_act;
            dz.zip_mut_with(&acts[l + 1], |d, &a| *d *= layer.activation.grad_from_output(a));
            let dw = dz.t().dot(&acts[l]);
            let db = dz.sum_axis(Axis(0));
            d_act = if l > 0 {
                dz.dot(&layer.weights)
            } else {
                Array2::zeros((0, 0))
            };
            layer_grads.push((dw, db));
        }
        layer_grads.reverse();

        let mut grad = Vec::with_capacity(self.param_count());
        for (dw, db) in &layer_grads {
            grad.extend_from_slice(dw.as_slice().expect("standard layout"));
            grad.extend_from_slice(db.as_slice().expect("standard layout"));
        }
        Ok((loss, grad))
    }

    /// Flattens all parameters into canonical order.
    pub fn flatten(&self) -> ParamVector {
        let mut v = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            v.extend_from_slice(layer.weights.as_slice().expect("standard layout"));
            v.extend_from_slice(layer.biases.as_slice().expect("standard layout"));
        }
        ParamVector(v)
    }

    /// Overwrites all parameters from a flat vector in canonical order.
    pub fn load(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let wn = layer.weights.len();
            layer
                .weights
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&params.as_slice()[off..off + wn]);
            off += wn;
            let bn = layer.biases.len();
            layer
                .biases
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&params.as_slice()[off..off + bn]);
            off += bn;
        }
        Ok(())
    }

    /// Writes the checkpoint: 8-byte magic, parameter count as u64 LE, then
    /// all parameters as f32 LE in canonical order.
    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_u64::<LittleEndian>(self.param_count() as u64)?;
        for layer in &self.layers {
            for &p in layer.weights.as_slice().expect("standard layout") {
                w.write_f32::<LittleEndian>(p as f32)?;
            }
            for &p in layer.biases.iter() {
                w.write_f32::<LittleEndian>(p as f32)?;
            }
        }
        Ok(())
    }

    pub fn save_checkpoint<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_checkpoint(&mut f)
    }

    /// Loads checkpointed parameters into this model. The stored count must
    /// match the model architecture.
    pub fn load_checkpoint<P: AsRef<Path>>(&mut self, path: P) -> Result<()> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let params = read_checkpoint(&mut f)?;
        self.load(&params)
    }
}

/// Reads a checkpoint stream into a flat parameter vector (f32 storage
/// widened to f64).
pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<ParamVector> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Truncated {
        expected: 16,
        got: 0,
    })?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let count = r.read_u64::<LittleEndian>().map_err(|_| Error::Truncated {
        expected: 16,
        got: 8,
    })? as usize;
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let v = r.read_f32::<LittleEndian>().map_err(|_| Error::Truncated {
            expected: 16 + count * 4,
            got: 16 + i * 4,
        })?;
        values.push(v as f64);
    }
    Ok(ParamVector(values))
}

/// Mean squared error between two equal-length vectors.
pub fn mse(x_hat: &[f64], x: &[f64]) -> Result<f64> {
    if x_hat.len() != x.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty vectors".into()));
    }
    let sum: f64 = x_hat
        .iter()
        .zip(x)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / x.len() as f64)
}

/// Momentum-SGD state: classical form `v ← μv + g`, `θ ← θ − lr·v`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    velocity: Vec<f64>,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl OptimizerState {
    pub fn new(param_count: usize, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be nonnegative, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0,1), got {momentum}"
            )));
        }
        Ok(Self {
            velocity: vec![0.0; param_count],
            learning_rate,
            momentum,
        })
    }

    pub fn for_model(model: &Autoencoder, learning_rate: f64, momentum: f64) -> Result<Self> {
        Self::new(model.param_count(), learning_rate, momentum)
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Applies one momentum-SGD step for the given flat gradient.
    pub fn apply(&mut self, model: &mut Autoencoder, grad: &[f64]) -> Result<()> {
        if grad.len() != self.velocity.len() {
            return Err(Error::Shape {
                expected: self.velocity.len(),
                got: grad.len(),
            });
        }
        if model.param_count() != self.velocity.len() {
            return Err(Error::Shape {
                expected: self.velocity.len(),
                got: model.param_count(),
            });
        }
        let mu = self.momentum;
        let lr = self.learning_rate;
        let mut off = 0;
        for layer in &mut model.layers {
            let ws = layer.weights.as_slice_mut().expect("standard layout");
            for (w, (v, &g)) in ws
                .iter_mut()
                .zip(self.velocity[off..].iter_mut().zip(&grad[off..]))
            {
                *v = mu * *v + g;
                *w -= lr * *v;
            }
            off += layer.weights.len();
            let bs = layer.biases.as_slice_mut().expect("standard layout");
            for (b, (v, &g)) in bs
                .iter_mut()
                .zip(self.velocity[off..].iter_mut().zip(&grad[off..]))
            {
                *v = mu * *v + g;
                *b -= lr * *v;
            }
            off += layer.biases.len();
        }
        Ok(())
    }
}

/// One mini-batch training step. Returns the batch-mean reconstruction MSE
/// measured before the parameter update.
pub fn train_step(
    model: &mut Autoencoder,
    opt: &mut OptimizerState,
    batch: ArrayView2<f64>,
) -> Result<f64> {
    let (loss, grad) = model.batch_gradient(batch)?;
    opt.apply(model, &grad)?;
    Ok(loss)
}

/// Compares the analytic batch gradient against central finite differences
/// and returns the maximum relative error. Models with more than
/// `GRAD_CHECK_EXHAUSTIVE_LIMIT` parameters are probed on a fixed random
/// subsample of `GRAD_CHECK_SAMPLE` indices.
pub fn grad_check(model: &mut Autoencoder, batch: ArrayView2<f64>, epsilon: f64) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let (_, analytic) = model.batch_gradient(batch)?;
    let original = model.flatten();
    let n = original.len();

    let indices: Vec<usize> = if n <= GRAD_CHECK_EXHAUSTIVE_LIMIT {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
        let mut picked = std::collections::BTreeSet::new();
        while picked.len() < GRAD_CHECK_SAMPLE {
            picked.insert(rng.random_range(0..n));
        }
        picked.into_iter().collect()
    };

    let batch_loss = |model: &Autoencoder| -> Result<f64> {
        let out = model.forward_batch(batch)?;
        Ok((&out - &batch).mapv(|d| d * d).mean().unwrap())
    };

    let mut probe = original.clone();
    let mut max_rel = 0.0f64;
    for &i in &indices {
        let orig = probe.0[i];
        probe.0[i] = orig + epsilon;
        model.load(&probe)?;
        let loss_plus = batch_loss(model)?;
        probe.0[i] = orig - epsilon;
        model.load(&probe)?;
        let loss_minus = batch_loss(model)?;
        probe.0[i] = orig;

        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    model.load(&original)?;
    Ok(max_rel)
}

const GRAD_CHECK_EXHAUSTIVE_LIMIT: usize = 512;
const GRAD_CHECK_SAMPLE: usize = 256;
