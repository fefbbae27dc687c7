//! Multi-layer perceptrons with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat `Vec<f64>`; layer `l` stores its weight
//! matrix (`out x in`, row-major) followed by its bias vector. Keeping the
//! storage flat makes the optimizer, target blending and checkpointing plain
//! slice operations.

mod adam;
pub mod checkpoint;

pub use adam::{adam_step, AdamConfig, AdamState};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        let spec = Self { layer_sizes, hidden, output };
        spec.validate()?;
        Ok(spec)
    }

    /// `input -> hidden... -> output` with the given hidden widths.
    pub fn mlp(input: usize, hidden_sizes: &[usize], output: usize, hidden: Activation, out: Activation) -> Self {
        let mut sizes = Vec::with_capacity(hidden_sizes.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden_sizes);
        sizes.push(output);
        Self { layer_sizes: sizes, hidden, output: out }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(contract("a network needs at least an input and an output layer"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(contract("layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output
        } else {
            self.hidden
        }
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        write!(f, "{} {} {}", sizes.join(","), self.hidden, self.output)
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Checkpoint(format!("malformed network spec '{s}'")));
        }
        let sizes = parts[0]
            .split(',')
            .map(|p| p.parse::<usize>().map_err(|e| Error::Checkpoint(format!("bad layer size '{p}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        NetworkSpec::new(sizes, parts[1].parse()?, parts[2].parse()?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    spec: NetworkSpec,
    data: Vec<f64>,
}

/// Per-layer outputs recorded by a forward pass (index 0 is the input).
#[derive(Debug, Clone)]
pub struct Tape {
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(spec, &mut rng)
    }

    pub fn init_with_rng<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut data = Vec::with_capacity(spec.num_params());
        for w in spec.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            data.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
            data.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self { spec: spec.clone(), data })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec: spec.clone(), data: vec![0.0; spec.num_params()] })
    }

    pub fn from_flat(spec: &NetworkSpec, data: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.num_params() {
            return Err(contract(format!(
                "parameter vector has {} entries, spec needs {}",
                data.len(),
                spec.num_params()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(contract("parameters must be finite"));
        }
        Ok(Self { spec: spec.clone(), data })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.spec.layer_sizes[..=layer]
            .windows(2)
            .take(layer)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Weight matrix of `layer` (`out x in`, row-major).
    pub fn weight(&self, layer: usize) -> &[f64] {
        let (i, o) = (self.spec.layer_sizes[layer], self.spec.layer_sizes[layer + 1]);
        let off = self.layer_offset(layer);
        &self.data[off..off + i * o]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut [f64] {
        let (i, o) = (self.spec.layer_sizes[layer], self.spec.layer_sizes[layer + 1]);
        let off = self.layer_offset(layer);
        &mut self.data[off..off + i * o]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (i, o) = (self.spec.layer_sizes[layer], self.spec.layer_sizes[layer + 1]);
        let off = self.layer_offset(layer) + i * o;
        &self.data[off..off + o]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let (i, o) = (self.spec.layer_sizes[layer], self.spec.layer_sizes[layer + 1]);
        let off = self.layer_offset(layer) + i * o;
        &mut self.data[off..off + o]
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_tape(input)?.activations.pop().unwrap())
    }

    pub fn forward_tape(&self, input: &[f64]) -> Result<Tape> {
        if input.len() != self.spec.input_dim() {
            return Err(contract(format!(
                "network expects input of length {}, got {}",
                self.spec.input_dim(),
                input.len()
            )));
        }
        let mut activations = Vec::with_capacity(self.spec.layer_sizes.len());
        activations.push(input.to_vec());
        let mut off = 0;
        for layer in 0..self.spec.num_layers() {
            let (n_in, n_out) = (self.spec.layer_sizes[layer], self.spec.layer_sizes[layer + 1]);
            let w = &self.data[off..off + n_in * n_out];
            let b = &self.data[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let act = self.spec.activation(layer);
            let x = activations.last().unwrap();
            let y: Vec<f64> = w
                .chunks_exact(n_in)
                .zip(b)
                .map(|(row, bj)| act.apply(dot(row, x) + bj))
                .collect();
            activations.push(y);
        }
        Ok(Tape { activations })
    }

    /// Back-propagates `upstream` (d loss / d output) through a recorded
    /// pass, adding parameter gradients into `grads` and returning the
    /// gradient with respect to the input.
    pub fn backward(&self, tape: &Tape, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if grads.len() != self.data.len() {
            return Err(contract("gradient buffer does not match parameter count"));
        }
        self.backprop(tape, upstream, Some(grads))
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn input_gradient(&self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backprop(tape, upstream, None)
    }

    fn backprop(&self, tape: &Tape, upstream: &[f64], mut grads: Option<&mut [f64]>) -> Result<Vec<f64>> {
        if upstream.len() != self.spec.output_dim() {
            return Err(contract(format!(
                "upstream gradient has length {}, network output is {}",
                upstream.len(),
                self.spec.output_dim()
            )));
        }
        let layers = self.spec.num_layers();
        let mut delta: Vec<f64> = upstream.to_vec();
        let mut off_end = self.data.len();
        for layer in (0..layers).rev() {
            let (n_in, n_out) = (self.spec.layer_sizes[layer], self.spec.layer_sizes[layer + 1]);
            let off = off_end - (n_in * n_out + n_out);
            off_end = off;
            let act = self.spec.activation(layer);
            let y = &tape.activations[layer + 1];
            for (d, &yj) in delta.iter_mut().zip(y) {
                *d *= act.derivative_from_output(yj);
            }
            let x = &tape.activations[layer];
            let w = &self.data[off..off + n_in * n_out];
            let mut dx = vec![0.0; n_in];
            if let Some(g) = grads.as_deref_mut() {
                let (gw, gb) = g[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (j, &dj) in delta.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    gb[j] += dj;
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let grow = &mut gw[j * n_in..(j + 1) * n_in];
                    for k in 0..n_in {
                        grow[k] += dj * x[k];
                        dx[k] += dj * row[k];
                    }
                }
            } else {
                for (j, &dj) in delta.iter().enumerate() {
                    if dj != 0.0 {
                        let row = &w[j * n_in..(j + 1) * n_in];
                        for k in 0..n_in {
                            dx[k] += dj * row[k];
                        }
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Gradients of `<upstream, f(input)>` with respect to parameters and input.
    pub fn gradients(&self, input: &[f64], upstream: &[f64]) -> Result<(NetworkParams, Vec<f64>)> {
        let tape = self.forward_tape(input)?;
        let mut g = vec![0.0; self.data.len()];
        let dx = self.backward(&tape, upstream, &mut g)?;
        Ok((NetworkParams { spec: self.spec.clone(), data: g }, dx))
    }

    /// `self <- tau * online + (1 - tau) * self`, kept inside the closed
    /// interval spanned by the two values.
    pub fn soft_update_from(&mut self, online: &NetworkParams, tau: f64) -> Result<()> {
        if self.spec != online.spec {
            return Err(contract("soft update between networks of different shapes"));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(contract(format!("tau must lie in [0, 1], got {tau}")));
        }
        if tau == 1.0 {
            self.data.copy_from_slice(&online.data);
            return Ok(());
        }
        if tau == 0.0 {
            return Ok(());
        }
        for (t, &o) in self.data.iter_mut().zip(&online.data) {
            let blended = *t + tau * (o - *t);
            *t = blended.clamp(t.min(o), t.max(o));
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn net_init(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams> {
    NetworkParams::init(spec, seed)
}

pub fn net_forward(params: &NetworkParams, input: &[f64]) -> Result<Vec<f64>> {
    params.forward(input)
}

pub fn net_gradients(params: &NetworkParams, input: &[f64], upstream: &[f64]) -> Result<(NetworkParams, Vec<f64>)> {
    params.gradients(input, upstream)
}

pub fn soft_update(target: &NetworkParams, online: &NetworkParams, tau: f64) -> Result<NetworkParams> {
    let mut next = target.clone();
    next.soft_update_from(online, tau)?;
    Ok(next)
}

const FD_STEP: f64 = 1e-5;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Worst relative error between the supplied analytic gradients and
/// central finite differences of `<upstream, f(input)>`.
pub fn compare_with_finite_differences(
    params: &NetworkParams,
    input: &[f64],
    upstream: &[f64],
    param_grads: &[f64],
    input_grads: &[f64],
) -> Result<f64> {
    let objective = |p: &NetworkParams, x: &[f64]| -> Result<f64> { Ok(dot(&p.forward(x)?, upstream)) };
    if param_grads.len() != params.len() || input_grads.len() != input.len() {
        return Err(contract(format!(
            "gradient shapes {}/{} do not match params {} and input {}",
            param_grads.len(),
            input_grads.len(),
            params.len(),
            input.len()
        )));
    }
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (k, &analytic) in param_grads.iter().enumerate() {
        let orig = probe.data[k];
        probe.data[k] = orig + FD_STEP;
        let plus = objective(&probe, input)?;
        probe.data[k] = orig - FD_STEP;
        let minus = objective(&probe, input)?;
        probe.data[k] = orig;
        worst = worst.max(relative_error(analytic, (plus - minus) / (2.0 * FD_STEP)));
    }
    let mut x = input.to_vec();
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + FD_STEP;
        let plus = objective(params, &x)?;
        x[k] = orig - FD_STEP;
        let minus = objective(params, &x)?;
        x[k] = orig;
        worst = worst.max(relative_error(input_grads[k], (plus - minus) / (2.0 * FD_STEP)));
    }
    Ok(worst)
}

pub fn fd_gradcheck(params: &NetworkParams, input: &[f64], upstream: &[f64]) -> Result<f64> {
    let (g, dx) = params.gradients(input, upstream)?;
    compare_with_finite_differences(params, input, upstream, g.as_slice(), &dx)
}
