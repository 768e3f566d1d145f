//! Small fully connected networks with exact backpropagation and the Adam
//! and AdaMax optimizers.

mod optim;

pub use optim::{OptimizerKind, OptimizerState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Elu,
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Elu => elu(x),
            Activation::Softplus => softplus(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Elu => elu_derivative(x),
            Activation::Softplus => softplus_derivative(x),
        }
    }
}

#[inline]
pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
pub fn elu_derivative(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// ln(1 + e^x) without overflow for large x.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn softplus_derivative(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Architecture and training hyperparameters of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub hidden: Vec<usize>,
    pub output_activation: Activation,
    pub output_floor: f64,
}

impl NetSpec {
    pub fn drift(hidden_layers: usize) -> Self {
        Self {
            hidden: vec![25; hidden_layers],
            output_activation: Activation::Identity,
            output_floor: 0.0,
        }
    }

    pub fn diffusion() -> Self {
        Self {
            hidden: vec![25; 2],
            output_activation: Activation::Softplus,
            output_floor: 1e-13,
        }
    }

    pub fn build(&self, input: usize, output: usize, seed: u64) -> Result<Mlp> {
        let mut dims = vec![input];
        dims.extend_from_slice(&self.hidden);
        dims.push(output);
        Mlp::new(dims, Activation::Elu, self.output_activation, self.output_floor, seed)
    }
}

/// Feedforward network. Parameters live in one flat vector: for each layer
/// the row-major (out × in) weight matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    output_floor: f64,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Per-sample buffers reused across forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    // pre-activations and activations per layer; acts[0] is the input
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
    floored: Vec<bool>,
}

/// Gradients returned by [`Mlp::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Mlp {
    /// Builds a network with weights and biases uniform in ±√(1/fan_in).
    pub fn new(
        layer_dims: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
        output_floor: f64,
        seed: u64,
    ) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::config("layer_dims needs at least two positive entries"));
        }
        if !(output_floor >= 0.0) {
            return Err(Error::config("output_floor must be non-negative"));
        }
        let mut offsets = vec![0];
        for w in layer_dims.windows(2) {
            let last = *offsets.last().unwrap();
            offsets.push(last + w[0] * w[1] + w[1]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; *offsets.last().unwrap()];
        for (l, w) in layer_dims.windows(2).enumerate() {
            let bound = (1.0 / w[0] as f64).sqrt();
            for p in &mut params[offsets[l]..offsets[l + 1]] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            layer_dims,
            hidden_activation,
            output_activation,
            output_floor,
            params,
            offsets,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn output_floor(&self) -> f64 {
        self.output_floor
    }

    fn layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Weight matrix (row-major, out × in) and bias of a layer.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.layer_dims[l], self.layer_dims[l + 1]);
        let base = self.offsets[l];
        (
            &self.params[base..base + i * o],
            &self.params[base + i * o..self.offsets[l + 1]],
        )
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.layer_dims[l], self.layer_dims[l + 1]);
        let base = self.offsets[l];
        let (w, b) = self.params[base..self.offsets[l + 1]].split_at_mut(i * o);
        (w, b)
    }

    pub fn workspace(&self) -> Workspace {
        let widest = *self.layer_dims.iter().max().unwrap();
        Workspace {
            pre: self.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
            acts: self.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
            delta: vec![0.0; widest],
            delta_next: vec![0.0; widest],
            floored: vec![false; self.output_dim()],
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut ws = self.workspace();
        Ok(self.forward_ws(x, &mut ws).to_vec())
    }

    /// Forward pass keeping the intermediate values needed by
    /// [`Mlp::backward_ws`]. `x` must have the input dimension.
    pub fn forward_ws<'a>(&self, x: &[f64], ws: &'a mut Workspace) -> &'a [f64] {
        ws.acts[0].copy_from_slice(x);
        let n = self.layers();
        for l in 0..n {
            let (i, o) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let base = self.offsets[l];
            let w = &self.params[base..base + i * o];
            let b = &self.params[base + i * o..base + i * o + o];
            let act = self.activation(l);
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            let pre = &mut ws.pre[l + 1];
            for r in 0..o {
                let row = &w[r * i..(r + 1) * i];
                let z = row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>() + b[r];
                pre[r] = z;
                out[r] = act.apply(z);
            }
        }
        if self.output_activation == Activation::Softplus {
            let out = &mut ws.acts[n];
            for (k, v) in out.iter_mut().enumerate() {
                ws.floored[k] = *v < self.output_floor;
                if ws.floored[k] {
                    *v = self.output_floor;
                }
            }
        }
        &ws.acts[n]
    }

    /// Accumulates ∂(upstream · output)/∂params into `grad` for the sample
    /// last passed through [`Mlp::forward_ws`]; optionally writes the input
    /// gradient.
    pub fn backward_ws(&self, ws: &mut Workspace, upstream: &[f64], grad: &mut [f64], input_grad: Option<&mut [f64]>) {
        let n = self.layers();
        let out_dim = self.output_dim();
        for k in 0..out_dim {
            let floored = self.output_activation == Activation::Softplus && ws.floored[k];
            ws.delta[k] = if floored {
                0.0
            } else {
                upstream[k] * self.output_activation.derivative(ws.pre[n][k])
            };
        }
        for l in (0..n).rev() {
            let (i, o) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let base = self.offsets[l];
            let input = &ws.acts[l];
            {
                let (gw, gb) = grad[base..base + i * o + o].split_at_mut(i * o);
                for r in 0..o {
                    let d = ws.delta[r];
                    if d == 0.0 {
                        continue;
                    }
                    gb[r] += d;
                    for (g, a) in gw[r * i..(r + 1) * i].iter_mut().zip(input.iter()) {
                        *g += d * a;
                    }
                }
            }
            if l == 0 && input_grad.is_none() {
                break;
            }
            let w = &self.params[base..base + i * o];
            for c in 0..i {
                ws.delta_next[c] = 0.0;
            }
            for r in 0..o {
                let d = ws.delta[r];
                if d == 0.0 {
                    continue;
                }
                for (dn, wv) in ws.delta_next[..i].iter_mut().zip(&w[r * i..(r + 1) * i]) {
                    *dn += d * wv;
                }
            }
            if l > 0 {
                let act = self.activation(l - 1);
                for c in 0..i {
                    ws.delta_next[c] *= act.derivative(ws.pre[l][c]);
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_next);
        }
        if let Some(ig) = input_grad {
            ig.copy_from_slice(&ws.delta[..self.input_dim()]);
        }
    }

    /// Gradients of upstream · net(x) with respect to parameters and input.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        self.check_input(x)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut ws = self.workspace();
        self.forward_ws(x, &mut ws);
        let mut params = vec![0.0; self.param_count()];
        let mut input = vec![0.0; self.input_dim()];
        self.backward_ws(&mut ws, upstream, &mut params, Some(&mut input));
        Ok(Gradients { params, input })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layer_dims: self.layer_dims.clone(),
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
            output_floor: self.output_floor,
            layers: (0..self.layers())
                .map(|l| {
                    let (w, b) = self.layer(l);
                    CheckpointLayer {
                        weights: w.to_vec(),
                        biases: b.to_vec(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let mut net = Self::new(
            c.layer_dims.clone(),
            c.hidden_activation,
            c.output_activation,
            c.output_floor,
            0,
        )?;
        if c.layers.len() != net.layers() {
            return Err(Error::config("checkpoint layer count does not match layer_dims"));
        }
        for (l, layer) in c.layers.iter().enumerate() {
            let (w, b) = net.layer_mut(l);
            if layer.weights.len() != w.len() || layer.biases.len() != b.len() {
                return Err(Error::config(format!("checkpoint layer {l} has the wrong shape")));
            }
            w.copy_from_slice(&layer.weights);
            b.copy_from_slice(&layer.biases);
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_checkpoint())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_checkpoint(&serde_json::from_str(s)?)
    }
}

/// Serialized form of an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub output_floor: f64,
    pub layers: Vec<CheckpointLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLayer {
    /// Row-major (out × in).
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activations() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu_derivative(0.0), 1.0);
        assert!((elu(-1.0) - (-0.632_120_558_828_557_7)).abs() < 1e-15);
        assert!((softplus(50.0) - 50.0).abs() < 1e-12);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(800.0).is_finite());
        assert_eq!(softplus(-800.0), 0.0);
        assert!((softplus_derivative(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let mut net = Mlp::new(vec![2, 3, 2], Activation::Elu, Activation::Identity, 0.0, 1).unwrap();
        net.params_mut().fill(0.0);
        assert_eq!(net.forward(&[0.3, -0.4]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let mut net = Mlp::new(vec![2, 2], Activation::Elu, Activation::Identity, 0.0, 1).unwrap();
        let (w, b) = net.layer_mut(0);
        w.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        b.fill(0.0);
        assert_eq!(net.forward(&[0.3, -0.4]).unwrap(), vec![0.3, -0.4]);
    }

    #[test]
    fn softplus_output_at_zero_preactivation() {
        let mut net = Mlp::new(vec![1, 2], Activation::Elu, Activation::Softplus, 1e-13, 1).unwrap();
        net.params_mut().fill(0.0);
        let y = net.forward(&[1.0]).unwrap();
        assert!(y.iter().all(|v| (v - 2f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn floored_output_blocks_gradient() {
        let mut net = Mlp::new(vec![1, 1], Activation::Elu, Activation::Softplus, 1e-13, 1).unwrap();
        let (w, b) = net.layer_mut(0);
        w[0] = 0.0;
        b[0] = -100.0;
        let y = net.forward(&[1.0]).unwrap();
        assert_eq!(y, vec![1e-13]);
        let g = net.backward(&[1.0], &[1.0]).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_gradient_is_input() {
        let net = Mlp::new(vec![3, 2], Activation::Elu, Activation::Identity, 0.0, 4).unwrap();
        let x = [0.5, -1.5, 2.0];
        let g = net.backward(&x, &[0.0, 1.0]).unwrap();
        // second row of W then biases
        assert_eq!(&g.params[3..6], &x);
        assert_eq!(&g.params[6..8], &[0.0, 1.0]);
        let z = net.backward(&x, &[0.0, 0.0]).unwrap();
        assert!(z.params.iter().chain(&z.input).all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::new(vec![2, 3, 1], Activation::Elu, Activation::Identity, 0.0, 1).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.backward(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(Mlp::new(vec![2], Activation::Elu, Activation::Identity, 0.0, 1).is_err());
    }

    #[test]
    fn init_bounds_and_determinism() {
        let a = NetSpec::drift(3).build(1, 1, 7).unwrap();
        let b = NetSpec::drift(3).build(1, 1, 7).unwrap();
        assert_eq!(a, b);
        let (w, _) = a.layer(1);
        assert!(w.iter().all(|v| v.abs() <= (1.0f64 / 25.0).sqrt()));
        assert_eq!(a.param_count(), 2 * 25 + 2 * (25 * 25 + 25) + 26);
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = NetSpec::diffusion().build(2, 2, 3).unwrap();
        let json = net.to_json().unwrap();
        let back = Mlp::from_json(&json).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json().unwrap(), json);
    }
}
