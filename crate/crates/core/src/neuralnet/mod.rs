//! A small fully-connected network with explicit backpropagation.
//!
//! Hidden layers are affine + ELU (alpha = 1) followed by inverted dropout in
//! training mode. The output layer is affine + tanh for embeddings, or plain
//! affine for the classification baseline. Inputs are sparse: card encodings
//! are counts over a handful of cards.

mod adam;
mod gradcheck;
mod io;
mod loss;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::AdamState;
pub use gradcheck::{analytic_triplet_gradient, grad_check, max_relative_error, numeric_triplet_gradient};
pub use io::{read_model_file, write_model_file, ModelFile};
pub use loss::{euclidean_distance, softmax_cross_entropy_backward, triplet_backward, triplet_loss, TripletLossConfig};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("parameter shapes do not match")]
    Shape,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    #[default]
    Tanh,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub dropout_rate: f64,
    #[serde(default)]
    pub output_activation: OutputActivation,
}

impl NetworkSpec {
    /// Embedding network with the default dropout of 0.5.
    pub fn embedding(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        NetworkSpec { input_dim, hidden_dims, output_dim, dropout_rate: 0.5, output_activation: OutputActivation::Tanh }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(NetError::Spec("all layer widths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::Spec(format!("dropout rate must lie in [0, 1), got {}", self.dropout_rate)));
        }
        Ok(())
    }

    /// `(inputs, outputs)` per layer, input side first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_dims.len() + 2);
        widths.push(self.input_dim);
        widths.extend(&self.hidden_dims);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

/// All weights and biases in one flat buffer.
///
/// Layer `l` stores its `outputs × inputs` weight matrix row-major at
/// `weight_offset`, followed by its bias vector. Gradients and Adam moments
/// use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    shapes: Vec<LayerShape>,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let mut shapes = Vec::new();
        let mut offset = 0;
        for (inputs, outputs) in spec.layer_dims() {
            shapes.push(LayerShape { inputs, outputs, weight_offset: offset, bias_offset: offset + inputs * outputs });
            offset += inputs * outputs + outputs;
        }
        ModelParams { shapes, values: vec![0.0; offset] }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams { shapes: self.shapes.clone(), values: vec![0.0; self.values.len()] }
    }

    /// He-normal weights for ELU layers, Xavier-uniform for the output layer,
    /// zero biases.
    pub fn init(spec: &NetworkSpec, rng: &mut impl Rng) -> Self {
        let mut params = Self::zeros(spec);
        let last = params.shapes.len() - 1;
        for (l, shape) in params.shapes.clone().into_iter().enumerate() {
            let weights = &mut params.values[shape.weight_offset..shape.bias_offset];
            if l < last {
                let normal = Normal::new(0.0, (2.0 / shape.inputs as f64).sqrt()).expect("finite std");
                weights.iter_mut().for_each(|w| *w = normal.sample(rng));
            } else {
                let limit = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
                let uniform = Uniform::new_inclusive(-limit, limit);
                weights.iter_mut().for_each(|w| *w = uniform.sample(rng));
            }
        }
        params
    }

    /// Builds parameters from a flat buffer in the documented layout.
    pub fn from_values(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self, NetError> {
        let mut params = Self::zeros(spec);
        if values.len() != params.values.len() {
            return Err(NetError::Dim { expected: params.values.len(), got: values.len() });
        }
        params.values = values;
        Ok(params)
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = self.shapes[layer];
        &self.values[s.weight_offset..s.bias_offset]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = self.shapes[layer];
        &self.values[s.bias_offset..s.bias_offset + s.outputs]
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.shapes == other.shapes
    }

    pub fn matches(&self, spec: &NetworkSpec) -> bool {
        self.shapes.len() == spec.num_layers()
            && self.shapes.iter().zip(spec.layer_dims()).all(|(s, (i, o))| s.inputs == i && s.outputs == o)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        axpy(scale, &other.values, &mut self.values);
    }
}

/// Evaluation is deterministic; training applies dropout drawn from the rng.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut dyn RngCore),
}

/// Activations recorded by a training-mode forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<(usize, f64)>,
    /// Pre-activation per layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-activation per layer (after dropout for hidden layers).
    pub post: Vec<Vec<f64>>,
    /// Inverted-dropout scale per hidden unit: 0 or 1/(1 - rate). Empty when
    /// dropout is off.
    pub masks: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a.remainder().iter().zip(chunks_b.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

fn elu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

/// Nonzero entries of a dense input.
pub fn sparse_input(dense: &[f64]) -> Vec<(usize, f64)> {
    dense.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).collect()
}

fn check_input(spec: &NetworkSpec, input: &[(usize, f64)]) -> Result<(), NetError> {
    for &(i, v) in input {
        if i >= spec.input_dim {
            return Err(NetError::Dim { expected: spec.input_dim, got: i + 1 });
        }
        if !v.is_finite() {
            return Err(NetError::NonFinite("input"));
        }
    }
    Ok(())
}

/// Runs the network on a sparse input, filling `trace`.
///
/// `dropout` enables inverted dropout on hidden activations.
pub fn forward_into(
    spec: &NetworkSpec,
    params: &ModelParams,
    input: &[(usize, f64)],
    mut dropout: Option<&mut dyn RngCore>,
    trace: &mut ForwardTrace,
) -> Result<(), NetError> {
    check_input(spec, input)?;
    if !params.matches(spec) {
        return Err(NetError::Shape);
    }
    let n_layers = params.shapes.len();
    trace.input.clear();
    trace.input.extend_from_slice(input);
    trace.pre.resize_with(n_layers, Vec::new);
    trace.post.resize_with(n_layers, Vec::new);
    let use_dropout = dropout.is_some() && spec.dropout_rate > 0.0;
    if use_dropout {
        trace.masks.resize_with(n_layers - 1, Vec::new);
    } else {
        trace.masks.clear();
    }
    let keep = 1.0 - spec.dropout_rate;

    for l in 0..n_layers {
        let shape = params.shapes[l];
        let w = params.weights(l);
        let mut z = std::mem::take(&mut trace.pre[l]);
        z.clear();
        z.extend_from_slice(params.bias(l));
        if l == 0 {
            for &(i, v) in input {
                for (o, zo) in z.iter_mut().enumerate() {
                    *zo += v * w[o * shape.inputs + i];
                }
            }
        } else {
            let x = &trace.post[l - 1];
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += dot(&w[o * shape.inputs..(o + 1) * shape.inputs], x);
            }
        }
        let mut a = std::mem::take(&mut trace.post[l]);
        a.clear();
        if l + 1 < n_layers {
            a.extend(z.iter().map(|&v| elu(v)));
            if use_dropout {
                let rng = dropout.as_deref_mut().expect("dropout rng");
                let mask = &mut trace.masks[l];
                mask.clear();
                mask.extend((0..a.len()).map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 }));
                a.iter_mut().zip(mask.iter()).for_each(|(ai, mi)| *ai *= mi);
            }
        } else {
            match spec.output_activation {
                OutputActivation::Tanh => a.extend(z.iter().map(|v| v.tanh())),
                OutputActivation::Linear => a.extend_from_slice(&z),
            }
        }
        trace.pre[l] = z;
        trace.post[l] = a;
    }
    Ok(())
}

/// Forward pass on a dense input. Training mode also returns the trace.
pub fn forward(
    spec: &NetworkSpec,
    params: &ModelParams,
    input: &[f64],
    mode: Mode<'_>,
) -> Result<(Vec<f64>, Option<ForwardTrace>), NetError> {
    if input.len() != spec.input_dim {
        return Err(NetError::Dim { expected: spec.input_dim, got: input.len() });
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(NetError::NonFinite("input"));
    }
    let sparse = sparse_input(input);
    let mut trace = ForwardTrace::default();
    match mode {
        Mode::Eval => {
            forward_into(spec, params, &sparse, None, &mut trace)?;
            Ok((trace.output().to_vec(), None))
        }
        Mode::Train(rng) => {
            forward_into(spec, params, &sparse, Some(rng), &mut trace)?;
            Ok((trace.output().to_vec(), Some(trace)))
        }
    }
}

/// Deterministic evaluation of a sparse input.
pub fn embed_sparse(spec: &NetworkSpec, params: &ModelParams, input: &[(usize, f64)]) -> Result<Vec<f64>, NetError> {
    let mut trace = ForwardTrace::default();
    forward_into(spec, params, input, None, &mut trace)?;
    Ok(trace.post.pop().unwrap_or_default())
}

/// Scratch buffers for [`backprop`].
#[derive(Debug, Default)]
pub struct BackpropScratch {
    delta: Vec<f64>,
    next: Vec<f64>,
}

/// Accumulates into `grads` the gradient of `<grad_output, output>` with
/// respect to the parameters, through the activations stored in `trace`.
pub fn backprop(
    spec: &NetworkSpec,
    params: &ModelParams,
    trace: &ForwardTrace,
    grad_output: &[f64],
    grads: &mut ModelParams,
    scratch: &mut BackpropScratch,
) -> Result<(), NetError> {
    if !params.same_shape(grads) || trace.pre.len() != params.shapes.len() {
        return Err(NetError::Shape);
    }
    if grad_output.len() != spec.output_dim {
        return Err(NetError::Dim { expected: spec.output_dim, got: grad_output.len() });
    }
    let n_layers = params.shapes.len();
    let delta = &mut scratch.delta;
    delta.clear();
    let out = &trace.post[n_layers - 1];
    match spec.output_activation {
        OutputActivation::Tanh => delta.extend(grad_output.iter().zip(out).map(|(g, a)| g * (1.0 - a * a))),
        OutputActivation::Linear => delta.extend_from_slice(grad_output),
    }

    for l in (0..n_layers).rev() {
        let shape = params.shapes[l];
        let w = params.weights(l);
        {
            let gw = &mut grads.values[shape.weight_offset..shape.bias_offset];
            if l == 0 {
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        for &(i, v) in &trace.input {
                            gw[o * shape.inputs + i] += d * v;
                        }
                    }
                }
            } else {
                let x = &trace.post[l - 1];
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, x, &mut gw[o * shape.inputs..(o + 1) * shape.inputs]);
                    }
                }
            }
        }
        axpy(1.0, delta, &mut grads.values[shape.bias_offset..shape.bias_offset + shape.outputs]);

        if l > 0 {
            let next = &mut scratch.next;
            next.clear();
            next.resize(shape.inputs, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &w[o * shape.inputs..(o + 1) * shape.inputs], next);
                }
            }
            // through dropout, then ELU of the previous layer
            let prev_pre = &trace.pre[l - 1];
            if let Some(mask) = trace.masks.get(l - 1) {
                next.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            }
            next.iter_mut().zip(prev_pre).for_each(|(g, &z)| *g *= elu_grad(z));
            std::mem::swap(delta, next);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> NetworkSpec {
        NetworkSpec::embedding(6, vec![5, 4], 3)
    }

    #[test]
    fn layout_and_counts() {
        let p = ModelParams::zeros(&spec());
        assert_eq!(p.len(), 6 * 5 + 5 + 5 * 4 + 4 + 4 * 3 + 3);
        assert_eq!(p.shapes()[1].weight_offset, 35);
        assert!(p.matches(&spec()));
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = ModelParams::zeros(&spec());
        let (out, trace) = forward(&spec(), &p, &[1.0, 0.0, 2.0, 0.0, 0.0, 3.0], Mode::Eval).unwrap();
        assert_eq!(out, vec![0.0; 3]);
        assert!(trace.is_none());
    }

    #[test]
    fn eval_is_deterministic_and_train_returns_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ModelParams::init(&spec(), &mut rng);
        let x = [0.0, 1.0, 0.0, 2.0, 0.0, 0.0];
        let a = forward(&spec(), &p, &x, Mode::Eval).unwrap().0;
        let b = forward(&spec(), &p, &x, Mode::Eval).unwrap().0;
        assert_eq!(a, b);
        let (_, trace) = forward(&spec(), &p, &x, Mode::Train(&mut rng)).unwrap();
        let trace = trace.unwrap();
        assert_eq!(trace.masks.len(), 2);
        assert!(trace.masks.iter().flatten().all(|&m| m == 0.0 || m == 2.0));
    }

    #[test]
    fn input_errors() {
        let p = ModelParams::zeros(&spec());
        assert!(matches!(forward(&spec(), &p, &[0.0; 5], Mode::Eval), Err(NetError::Dim { expected: 6, got: 5 })));
        let mut x = [0.0; 6];
        x[2] = f64::NAN;
        assert!(matches!(forward(&spec(), &p, &x, Mode::Eval), Err(NetError::NonFinite(_))));
        let other = ModelParams::zeros(&NetworkSpec::embedding(6, vec![2], 3));
        assert!(matches!(forward(&spec(), &other, &[0.0; 6], Mode::Eval), Err(NetError::Shape)));
    }

    #[test]
    fn spec_validation() {
        assert!(spec().validate().is_ok());
        assert!(NetworkSpec::embedding(0, vec![], 2).validate().is_err());
        assert!(NetworkSpec { dropout_rate: 1.0, ..spec() }.validate().is_err());
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn outputs_stay_in_unit_box(seed in 0u64..1000, scale in 0.1f64..50.0, train in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = ModelParams::init(&spec(), &mut rng);
            p.values_mut().iter_mut().for_each(|v| *v *= scale);
            let x: Vec<f64> = (0..6).map(|i| ((seed + i) % 4) as f64).collect();
            let mode = if train { Mode::Train(&mut rng) } else { Mode::Eval };
            let (out, _) = forward(&spec(), &p, &x, mode).unwrap();
            prop_assert!(out.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
