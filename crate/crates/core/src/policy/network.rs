//! Action-policy MLP: `(x, y, cos psi, sin psi)` in, softmax over the
//! discrete actions out. Each hidden block is affine, ReLU, then an
//! optional batch-norm.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Uniform};

use crate::codec::{Decoder, Encoder};
use crate::dynamics::State;
use crate::error::{Error, Result};

use super::actions::ActionPmf;

pub const INPUT_DIM: usize = 4;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;
const MAGIC: [u8; 4] = *b"CUNN";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch-norm uses batch statistics.
    Train,
    /// Batch-norm uses running statistics.
    Eval,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkShape {
    pub hidden: Vec<usize>,
    pub actions: usize,
    pub batch_norm: bool,
}

impl NetworkShape {
    pub fn new(hidden: Vec<usize>, actions: usize, batch_norm: bool) -> Self {
        NetworkShape {
            hidden,
            actions,
            batch_norm,
        }
    }
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape::new(vec![256, 256], super::DEFAULT_ACTIONS, true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`, applied as `x W + b`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    fn kaiming<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Dense {
            w: Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng)),
            b: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

/// Weight, bias and optional `(gamma, beta)` gradients of one hidden layer.
type LayerGrads = (Array2<f64>, Array1<f64>, Option<(Array1<f64>, Array1<f64>)>);

/// Per-hidden-layer values kept for the backward pass.
#[derive(Clone, Debug)]
struct LayerCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    norm: Option<NormCache>,
}

#[derive(Clone, Debug)]
struct NormCache {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
    /// Batch statistics, `None` when running statistics were used.
    batch: Option<(Array1<f64>, Array1<f64>)>,
}

/// Result of a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub probs: Array2<f64>,
    layers: Vec<LayerCache>,
    last_hidden: Array2<f64>,
}

/// Parameter gradients in declaration order.
#[derive(Clone, Debug)]
pub struct Gradients {
    tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn tensors(&self) -> &[Vec<f64>] {
        &self.tensors
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNetwork {
    hidden: Vec<Dense>,
    norms: Vec<BatchNorm>,
    out: Dense,
}

pub fn features(s: &State) -> [f64; INPUT_DIM] {
    let (sin, cos) = s.psi.sin_cos();
    [s.x, s.y, cos, sin]
}

fn feature_matrix(states: &[State]) -> Array2<f64> {
    let mut m = Array2::zeros((states.len(), INPUT_DIM));
    for (mut row, s) in m.axis_iter_mut(Axis(0)).zip(states) {
        for (dst, v) in row.iter_mut().zip(features(s)) {
            *dst = v;
        }
    }
    m
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

impl PolicyNetwork {
    /// Kaiming-uniform hidden layers and a zero output layer, so the
    /// initial policy is uniform over actions.
    pub fn new<R: Rng + ?Sized>(shape: &NetworkShape, rng: &mut R) -> Self {
        let mut hidden = Vec::with_capacity(shape.hidden.len());
        let mut fan_in = INPUT_DIM;
        for &width in &shape.hidden {
            hidden.push(Dense::kaiming(fan_in, width, rng));
            fan_in = width;
        }
        let norms = if shape.batch_norm {
            shape.hidden.iter().map(|&w| BatchNorm::new(w)).collect()
        } else {
            Vec::new()
        };
        PolicyNetwork {
            hidden,
            norms,
            out: Dense::zeros(fan_in, shape.actions),
        }
    }

    /// Like [`PolicyNetwork::new`] but with a random output layer too.
    pub fn new_random<R: Rng + ?Sized>(shape: &NetworkShape, rng: &mut R) -> Self {
        let mut net = Self::new(shape, rng);
        let fan_in = net.out.w.nrows();
        net.out = Dense::kaiming(fan_in, shape.actions, rng);
        let dist = Uniform::new_inclusive(-0.5, 0.5).expect("finite bound");
        for layer in net.hidden.iter_mut().chain(std::iter::once(&mut net.out)) {
            layer.b.mapv_inplace(|_| dist.sample(rng));
        }
        net
    }

    pub fn shape(&self) -> NetworkShape {
        NetworkShape {
            hidden: self.hidden.iter().map(|d| d.b.len()).collect(),
            actions: self.out.b.len(),
            batch_norm: !self.norms.is_empty(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.out.b.len()
    }

    pub fn hidden_layers(&self) -> &[Dense] {
        &self.hidden
    }

    pub fn batch_norms(&self) -> &[BatchNorm] {
        &self.norms
    }

    pub fn output_layer(&self) -> &Dense {
        &self.out
    }

    /// Action pmf for a single state. A lone sample has no batch
    /// statistics, so both modes normalize with the running statistics.
    pub fn forward(&self, s: &State, mode: Mode) -> Result<ActionPmf> {
        let pass = self.forward_batch(std::slice::from_ref(s), mode)?;
        ActionPmf::new(pass.probs.row(0).to_vec())
    }

    pub fn forward_batch(&self, states: &[State], mode: Mode) -> Result<ForwardPass> {
        self.forward_features(feature_matrix(states), mode)
    }

    pub fn probs_batch(&self, states: &[State], mode: Mode) -> Result<Array2<f64>> {
        Ok(self.forward_batch(states, mode)?.probs)
    }

    fn forward_features(&self, x: Array2<f64>, mode: Mode) -> Result<ForwardPass> {
        let batch = x.nrows();
        let use_batch_stats = mode == Mode::Train && batch >= 2;
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut h = x;
        for (l, dense) in self.hidden.iter().enumerate() {
            let pre = dense.apply(&h);
            let act = pre.mapv(|v| v.max(0.0));
            let (next, norm) = match self.norms.get(l) {
                None => (act, None),
                Some(bn) => {
                    let (mean, var, batch_stats) = if use_batch_stats {
                        let mean = act.mean_axis(Axis(0)).expect("nonempty batch");
                        let var = act.var_axis(Axis(0), 0.0);
                        (mean.clone(), var.clone(), Some((mean, var)))
                    } else {
                        (bn.running_mean.clone(), bn.running_var.clone(), None)
                    };
                    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let x_hat = (&act - &mean) * &inv_std;
                    let y = &x_hat * &bn.gamma + &bn.beta;
                    (
                        y,
                        Some(NormCache {
                            x_hat,
                            inv_std,
                            batch: batch_stats,
                        }),
                    )
                }
            };
            layers.push(LayerCache {
                input: h,
                pre,
                norm,
            });
            h = next;
        }
        let mut probs = self.out.apply(&h);
        softmax_rows(&mut probs);
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                context: "policy network output".into(),
            });
        }
        Ok(ForwardPass {
            probs,
            layers,
            last_hidden: h,
        })
    }

    /// Folds the batch statistics of a training pass into the running
    /// statistics (momentum 0.1, unbiased variance).
    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        let n = pass.probs.nrows() as f64;
        for (bn, layer) in self.norms.iter_mut().zip(&pass.layers) {
            if let Some((mean, var)) = layer.norm.as_ref().and_then(|c| c.batch.as_ref()) {
                let unbiased = var * (n / (n - 1.0));
                Zip::from(&mut bn.running_mean)
                    .and(mean)
                    .for_each(|r, &m| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m);
                Zip::from(&mut bn.running_var)
                    .and(&unbiased)
                    .for_each(|r, &v| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v);
            }
        }
    }

    /// Backpropagates `d_logits` (gradient of the loss w.r.t. the
    /// pre-softmax outputs) through a pass produced by this network.
    pub fn backward(&self, pass: &ForwardPass, d_logits: &Array2<f64>) -> Gradients {
        let out_w = pass.last_hidden.t().dot(d_logits);
        let out_b = d_logits.sum_axis(Axis(0));
        let mut grad_h = d_logits.dot(&self.out.w.t());
        let mut per_layer: Vec<LayerGrads> = Vec::with_capacity(self.hidden.len());

        for (l, (dense, cache)) in self.hidden.iter().zip(&pass.layers).enumerate().rev() {
            let (grad_act, norm_grads) = match (&cache.norm, self.norms.get(l)) {
                (Some(nc), Some(bn)) => {
                    let dgamma = (&grad_h * &nc.x_hat).sum_axis(Axis(0));
                    let dbeta = grad_h.sum_axis(Axis(0));
                    let dx_hat = &grad_h * &bn.gamma;
                    let grad_act = if nc.batch.is_some() {
                        let n = dx_hat.nrows() as f64;
                        let sum_dx = dx_hat.sum_axis(Axis(0));
                        let sum_dx_xhat = (&dx_hat * &nc.x_hat).sum_axis(Axis(0));
                        ((&dx_hat * n) - &sum_dx - &(&nc.x_hat * &sum_dx_xhat)) * &nc.inv_std / n
                    } else {
                        dx_hat * &nc.inv_std
                    };
                    (grad_act, Some((dgamma, dbeta)))
                }
                _ => (grad_h, None),
            };
            let mut grad_pre = grad_act;
            Zip::from(&mut grad_pre).and(&cache.pre).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
            let dw = cache.input.t().dot(&grad_pre);
            let db = grad_pre.sum_axis(Axis(0));
            grad_h = grad_pre.dot(&dense.w.t());
            per_layer.push((dw, db, norm_grads));
        }
        per_layer.reverse();

        let mut tensors = Vec::new();
        for (dw, db, norm) in per_layer {
            tensors.push(dw.iter().copied().collect());
            tensors.push(db.to_vec());
            if let Some((dg, dbeta)) = norm {
                tensors.push(dg.to_vec());
                tensors.push(dbeta.to_vec());
            }
        }
        tensors.push(out_w.iter().copied().collect());
        tensors.push(out_b.to_vec());
        Gradients { tensors }
    }

    /// Mutable views of every trainable tensor in declaration order:
    /// per hidden layer `W, b, [gamma, beta]`, then the output `W, b`.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        let mut norms = self.norms.iter_mut();
        for dense in self.hidden.iter_mut() {
            out.push(dense.w.as_slice_mut().expect("standard layout"));
            out.push(dense.b.as_slice_mut().expect("standard layout"));
            if let Some(bn) = norms.next() {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out.push(self.out.w.as_slice_mut().expect("standard layout"));
        out.push(self.out.b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        let mut norms = self.norms.iter();
        for dense in &self.hidden {
            out.push(dense.w.as_slice().expect("standard layout"));
            out.push(dense.b.as_slice().expect("standard layout"));
            if let Some(bn) = norms.next() {
                out.push(bn.gamma.as_slice().expect("standard layout"));
                out.push(bn.beta.as_slice().expect("standard layout"));
            }
        }
        out.push(self.out.w.as_slice().expect("standard layout"));
        out.push(self.out.b.as_slice().expect("standard layout"));
        out
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.tensors().into_iter().flatten().copied().collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "parameter vector length mismatch");
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
            && self.norms.iter().all(|bn| {
                bn.running_var.iter().all(|&v| v > 0.0 && v.is_finite())
                    && bn.running_mean.iter().all(|v| v.is_finite())
            })
    }

    /// Model file: magic, version, layer dimensions, batch-norm flag,
    /// parameters in declaration order, then running mean and variance of
    /// each batch-norm layer. All values little-endian.
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let shape = self.shape();
        let mut enc = Encoder::new(w);
        enc.bytes(&MAGIC)?;
        enc.u32(VERSION)?;
        enc.u32(shape.hidden.len() as u32 + 2)?;
        enc.u32(INPUT_DIM as u32)?;
        for &h in &shape.hidden {
            enc.u32(h as u32)?;
        }
        enc.u32(shape.actions as u32)?;
        enc.u32(shape.batch_norm as u32)?;
        for t in self.tensors() {
            enc.f64s(t)?;
        }
        for bn in &self.norms {
            enc.f64s(bn.running_mean.iter())?;
            enc.f64s(bn.running_var.iter())?;
        }
        enc.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut dec = Decoder::new(r, "model file");
        dec.magic(MAGIC)?;
        dec.version(VERSION)?;
        let n_dims = dec.u32("dimension count")? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(Error::Malformed(format!(
                "implausible layer count {n_dims}"
            )));
        }
        let dims = (0..n_dims)
            .map(|_| dec.u32("layer dimension").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if dims[0] != INPUT_DIM || dims.iter().any(|&d| d == 0 || d > 1 << 16) {
            return Err(Error::Malformed(format!("bad layer dimensions {dims:?}")));
        }
        let batch_norm = match dec.u32("batch-norm flag")? {
            0 => false,
            1 => true,
            other => return Err(Error::Malformed(format!("batch-norm flag {other}"))),
        };
        let shape = NetworkShape::new(dims[1..n_dims - 1].to_vec(), dims[n_dims - 1], batch_norm);
        let mut net = PolicyNetwork::new(&shape, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        for t in net.tensors_mut() {
            let vals = dec.f64s(t.len(), "parameters")?;
            t.copy_from_slice(&vals);
        }
        for bn in &mut net.norms {
            let n = bn.running_mean.len();
            bn.running_mean = Array1::from(dec.f64s(n, "running mean")?);
            bn.running_var = Array1::from(dec.f64s(n, "running variance")?);
        }
        dec.end()?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}
