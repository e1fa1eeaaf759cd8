//! Minimal differentiable-network core: dense and convolutional layers,
//! reverse-mode gradients, squared-error loss, gradient-descent updates,
//! and a finite-difference gradient checker.
//!
//! Everything is f64 and single-sample; batches are handled by callers
//! looping (or fanning out) over samples.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch at layer {layer}: expected input of length {expected}, got {got}")]
    ShapeMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("activation set does not match layer chain: expected {expected} tensors, got {got}")]
    ActivationMismatch { expected: usize, got: usize },
    #[error("parameter set does not match layer chain at layer {layer}")]
    ParamMismatch { layer: usize },
}

/// Dense row-major value container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One layer of the chain. Conv2d carries its input geometry so that
/// shapes compose without a separate shape-inference pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        in_h: usize,
        in_w: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Flatten,
}

impl LayerSpec {
    pub fn conv_out_dims(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv2d {
                in_h,
                in_w,
                kernel,
                stride,
                ..
            } => Some(((in_h - kernel) / stride + 1, (in_w - kernel) / stride + 1)),
            _ => None,
        }
    }

    pub fn input_len(&self, upstream: usize) -> usize {
        match *self {
            LayerSpec::Dense { input, .. } => input,
            LayerSpec::Conv2d {
                in_ch, in_h, in_w, ..
            } => in_ch * in_h * in_w,
            LayerSpec::Relu | LayerSpec::Flatten => upstream,
        }
    }

    pub fn output_len(&self, upstream: usize) -> usize {
        match *self {
            LayerSpec::Dense { output, .. } => output,
            LayerSpec::Conv2d { out_ch, .. } => {
                let (oh, ow) = self.conv_out_dims().unwrap();
                out_ch * oh * ow
            }
            LayerSpec::Relu | LayerSpec::Flatten => upstream,
        }
    }

    /// (weight shape, bias shape) for parametric layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { input, output } => Some((vec![output, input], vec![output])),
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => Some((vec![out_ch, in_ch, kernel, kernel], vec![out_ch])),
            LayerSpec::Relu | LayerSpec::Flatten => None,
        }
    }

    fn fan_in_out(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Dense { input, output } => Some((input, output)),
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => Some((in_ch * kernel * kernel, out_ch * kernel * kernel)),
            _ => None,
        }
    }
}

/// Weight and bias tensors for one layer; empty for parameter-free layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    fn empty() -> Self {
        LayerParams {
            weight: Tensor::zeros(vec![0]),
            bias: Tensor::zeros(vec![0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
}

impl NetworkParams {
    pub fn zeros_like(specs: &[LayerSpec]) -> Self {
        let layers = specs
            .iter()
            .map(|s| match s.param_shapes() {
                Some((w, b)) => LayerParams {
                    weight: Tensor::zeros(w),
                    bias: Tensor::zeros(b),
                },
                None => LayerParams::empty(),
            })
            .collect();
        NetworkParams { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data.iter().chain(l.bias.data.iter()))
            .map(|g| g * g)
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for v in l.weight.data.iter_mut().chain(l.bias.data.iter_mut()) {
                *v *= factor;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &NetworkParams, factor: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data.iter_mut().zip(&b.weight.data) {
                *x += factor * y;
            }
            for (x, y) in a.bias.data.iter_mut().zip(&b.bias.data) {
                *x += factor * y;
            }
        }
    }
}

/// Uniform init in +/- sqrt(6/(fan_in+fan_out)), biases zero.
pub fn init_params<R: Rng>(specs: &[LayerSpec], rng: &mut R) -> NetworkParams {
    let layers = specs
        .iter()
        .map(|s| match s.param_shapes() {
            Some((wshape, bshape)) => {
                let (fan_in, fan_out) = s.fan_in_out().unwrap();
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let n: usize = wshape.iter().product();
                let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
                LayerParams {
                    weight: Tensor::from_vec(wshape, data),
                    bias: Tensor::zeros(bshape),
                }
            }
            None => LayerParams::empty(),
        })
        .collect();
    NetworkParams { layers }
}

/// All intermediate tensors of one forward pass: input, then one output
/// per layer.
#[derive(Debug, Clone)]
pub struct Activations {
    pub tensors: Vec<Tensor>,
}

impl Activations {
    pub fn output(&self) -> &Tensor {
        self.tensors.last().unwrap()
    }
}

pub fn forward(
    params: &NetworkParams,
    specs: &[LayerSpec],
    input: &Tensor,
) -> Result<Activations, NnError> {
    if params.layers.len() != specs.len() {
        return Err(NnError::ParamMismatch { layer: 0 });
    }
    let mut tensors = Vec::with_capacity(specs.len() + 1);
    tensors.push(input.clone());
    for (idx, (spec, lp)) in specs.iter().zip(&params.layers).enumerate() {
        let x = tensors.last().unwrap();
        let expected = spec.input_len(x.len());
        if x.len() != expected {
            return Err(NnError::ShapeMismatch {
                layer: idx,
                expected,
                got: x.len(),
            });
        }
        let y = match *spec {
            LayerSpec::Dense { input, output } => {
                let mut out = vec![0.0; output];
                for o in 0..output {
                    let row = &lp.weight.data[o * input..(o + 1) * input];
                    let mut acc = lp.bias.data[o];
                    for (w, xi) in row.iter().zip(&x.data) {
                        acc += w * xi;
                    }
                    out[o] = acc;
                }
                Tensor::from_vec(vec![output], out)
            }
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                in_h,
                in_w,
                kernel,
                stride,
            } => {
                let (oh, ow) = spec.conv_out_dims().unwrap();
                let mut out = vec![0.0; out_ch * oh * ow];
                for oc in 0..out_ch {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = lp.bias.data[oc];
                            for ic in 0..in_ch {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let iy = oy * stride + ky;
                                        let ix = ox * stride + kx;
                                        let w = lp.weight.data
                                            [((oc * in_ch + ic) * kernel + ky) * kernel + kx];
                                        acc += w * x.data[(ic * in_h + iy) * in_w + ix];
                                    }
                                }
                            }
                            out[(oc * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
                Tensor::from_vec(vec![out_ch, oh, ow], out)
            }
            LayerSpec::Relu => Tensor {
                shape: x.shape.clone(),
                data: x.data.iter().map(|v| v.max(0.0)).collect(),
            },
            LayerSpec::Flatten => Tensor::from_vec(vec![x.len()], x.data.clone()),
        };
        tensors.push(y);
    }
    Ok(Activations { tensors })
}

/// Reverse-mode gradients of a scalar loss. `output_gradient` is
/// dLoss/dOutput; returns (parameter gradients, input gradient).
pub fn backward(
    params: &NetworkParams,
    specs: &[LayerSpec],
    acts: &Activations,
    output_gradient: &Tensor,
) -> Result<(NetworkParams, Tensor), NnError> {
    if acts.tensors.len() != specs.len() + 1 {
        return Err(NnError::ActivationMismatch {
            expected: specs.len() + 1,
            got: acts.tensors.len(),
        });
    }
    let mut grads = NetworkParams::zeros_like(specs);
    let mut dy = output_gradient.clone();
    for (idx, spec) in specs.iter().enumerate().rev() {
        let x = &acts.tensors[idx];
        let lp = &params.layers[idx];
        let gl = &mut grads.layers[idx];
        dy = match *spec {
            LayerSpec::Dense { input, output } => {
                let mut dx = vec![0.0; input];
                for o in 0..output {
                    let g = dy.data[o];
                    gl.bias.data[o] += g;
                    let wrow = &lp.weight.data[o * input..(o + 1) * input];
                    let grow = &mut gl.weight.data[o * input..(o + 1) * input];
                    for i in 0..input {
                        grow[i] += g * x.data[i];
                        dx[i] += g * wrow[i];
                    }
                }
                Tensor::from_vec(vec![input], dx)
            }
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                in_h,
                in_w,
                kernel,
                stride,
            } => {
                let (oh, ow) = spec.conv_out_dims().unwrap();
                let mut dx = vec![0.0; in_ch * in_h * in_w];
                for oc in 0..out_ch {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = dy.data[(oc * oh + oy) * ow + ox];
                            gl.bias.data[oc] += g;
                            for ic in 0..in_ch {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let iy = oy * stride + ky;
                                        let ix = ox * stride + kx;
                                        let widx =
                                            ((oc * in_ch + ic) * kernel + ky) * kernel + kx;
                                        gl.weight.data[widx] +=
                                            g * x.data[(ic * in_h + iy) * in_w + ix];
                                        dx[(ic * in_h + iy) * in_w + ix] +=
                                            g * lp.weight.data[widx];
                                    }
                                }
                            }
                        }
                    }
                }
                Tensor::from_vec(vec![in_ch, in_h, in_w], dx)
            }
            LayerSpec::Relu => Tensor {
                shape: x.shape.clone(),
                data: x
                    .data
                    .iter()
                    .zip(&dy.data)
                    .map(|(xi, g)| if *xi > 0.0 { *g } else { 0.0 })
                    .collect(),
            },
            LayerSpec::Flatten => Tensor {
                shape: x.shape.clone(),
                data: dy.data.clone(),
            },
        };
    }
    Ok((grads, dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub grad_clip: Option<f64>,
    /// Decoupled L2 shrinkage per update (0 disables).
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.05,
            grad_clip: Some(5.0),
            weight_decay: 0.1,
        }
    }
}

/// theta <- (1 - alpha*lambda) * theta - alpha * g, after optional
/// global-norm clipping of g.
pub fn apply_update(params: &mut NetworkParams, gradients: &NetworkParams, cfg: &OptimizerConfig) {
    let mut scale = 1.0;
    if let Some(clip) = cfg.grad_clip {
        let norm = gradients.squared_norm().sqrt();
        if norm > clip {
            scale = clip / norm;
        }
    }
    if cfg.weight_decay > 0.0 {
        // decay weights only; biases carry calibration offsets
        let f = 1.0 - cfg.learning_rate * cfg.weight_decay;
        for l in &mut params.layers {
            for v in l.weight.data.iter_mut() {
                *v *= f;
            }
        }
    }
    params.add_scaled(gradients, -cfg.learning_rate * scale);
}

/// Loss used by the gradient checker: 0.5 * ||f(x) - target||^2.
pub fn sse_loss(output: &Tensor, target: &Tensor) -> f64 {
    output
        .data
        .iter()
        .zip(&target.data)
        .map(|(y, t)| 0.5 * (y - t) * (y - t))
        .sum()
}

pub fn sse_loss_grad(output: &Tensor, target: &Tensor) -> Tensor {
    Tensor {
        shape: output.shape.clone(),
        data: output
            .data
            .iter()
            .zip(&target.data)
            .map(|(y, t)| y - t)
            .collect(),
    }
}

fn loss_at(params: &NetworkParams, specs: &[LayerSpec], input: &Tensor, target: &Tensor) -> f64 {
    let acts = forward(params, specs, input).expect("shapes validated by caller");
    sse_loss(acts.output(), target)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn fd_entry_error(
    params: &NetworkParams,
    specs: &[LayerSpec],
    input: &Tensor,
    target: &Tensor,
    analytic: &NetworkParams,
    h: f64,
    layer: usize,
    in_weight: bool,
    idx: usize,
) -> f64 {
    let mut perturbed = params.clone();
    {
        let t = if in_weight {
            &mut perturbed.layers[layer].weight
        } else {
            &mut perturbed.layers[layer].bias
        };
        t.data[idx] += h;
    }
    let plus = loss_at(&perturbed, specs, input, target);
    {
        let t = if in_weight {
            &mut perturbed.layers[layer].weight
        } else {
            &mut perturbed.layers[layer].bias
        };
        t.data[idx] -= 2.0 * h;
    }
    let minus = loss_at(&perturbed, specs, input, target);
    let numeric = (plus - minus) / (2.0 * h);
    let a = if in_weight {
        analytic.layers[layer].weight.data[idx]
    } else {
        analytic.layers[layer].bias.data[idx]
    };
    relative_error(a, numeric)
}

fn fd_entries(params: &NetworkParams) -> Vec<(usize, bool, usize)> {
    let mut entries = Vec::new();
    for (layer, lp) in params.layers.iter().enumerate() {
        for idx in 0..lp.weight.len() {
            entries.push((layer, true, idx));
        }
        for idx in 0..lp.bias.len() {
            entries.push((layer, false, idx));
        }
    }
    entries
}

/// Compares every analytic gradient entry of the squared-error loss
/// against central finite differences; returns the worst relative error.
pub fn finite_difference_check(
    params: &NetworkParams,
    specs: &[LayerSpec],
    input: &Tensor,
    target: &Tensor,
    h: f64,
) -> f64 {
    assert!(h > 0.0);
    let acts = forward(params, specs, input).expect("input shape must match layer chain");
    let grad_out = sse_loss_grad(acts.output(), target);
    let (analytic, _) = backward(params, specs, &acts, &grad_out).unwrap();
    let entries = fd_entries(params);
    fd_max_error(params, specs, input, target, &analytic, h, &entries)
}

#[cfg(feature = "parallel")]
fn fd_max_error(
    params: &NetworkParams,
    specs: &[LayerSpec],
    input: &Tensor,
    target: &Tensor,
    analytic: &NetworkParams,
    h: f64,
    entries: &[(usize, bool, usize)],
) -> f64 {
    use rayon::prelude::*;
    entries
        .par_chunks(256)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&(layer, in_weight, idx)| {
                    fd_entry_error(
                        params, specs, input, target, analytic, h, layer, in_weight, idx,
                    )
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(not(feature = "parallel"))]
fn fd_max_error(
    params: &NetworkParams,
    specs: &[LayerSpec],
    input: &Tensor,
    target: &Tensor,
    analytic: &NetworkParams,
    h: f64,
    entries: &[(usize, bool, usize)],
) -> f64 {
    entries
        .iter()
        .map(|&(layer, in_weight, idx)| {
            fd_entry_error(
                params, specs, input, target, analytic, h, layer, in_weight, idx,
            )
        })
        .fold(0.0, f64::max)
}

/// Sequential variant kept unconditionally for benchmarking against the
/// rayon path.
pub fn finite_difference_check_seq(
    params: &NetworkParams,
    specs: &[LayerSpec],
    input: &Tensor,
    target: &Tensor,
    h: f64,
) -> f64 {
    assert!(h > 0.0);
    let acts = forward(params, specs, input).expect("input shape must match layer chain");
    let grad_out = sse_loss_grad(acts.output(), target);
    let (analytic, _) = backward(params, specs, &acts, &grad_out).unwrap();
    fd_entries(params)
        .iter()
        .map(|&(layer, in_weight, idx)| {
            fd_entry_error(
                params, specs, input, target, &analytic, h, layer, in_weight, idx,
            )
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_identity(n: usize) -> (Vec<LayerSpec>, NetworkParams) {
        let specs = vec![LayerSpec::Dense { input: n, output: n }];
        let mut params = NetworkParams::zeros_like(&specs);
        for i in 0..n {
            params.layers[0].weight.data[i * n + i] = 1.0;
        }
        (specs, params)
    }

    #[test]
    fn dense_identity_maps_input() {
        let (specs, params) = dense_identity(2);
        let acts = forward(&params, &specs, &Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert_eq!(acts.output().data, vec![1.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let specs = vec![LayerSpec::Relu];
        let params = NetworkParams::zeros_like(&specs);
        let acts = forward(&params, &specs, &Tensor::vector(vec![-1.0, 2.0])).unwrap();
        assert_eq!(acts.output().data, vec![0.0, 2.0]);
    }

    #[test]
    fn one_by_one_conv_scales_grid() {
        let specs = vec![LayerSpec::Conv2d {
            in_ch: 1,
            out_ch: 1,
            in_h: 3,
            in_w: 3,
            kernel: 1,
            stride: 1,
        }];
        let mut params = NetworkParams::zeros_like(&specs);
        params.layers[0].weight.data[0] = 2.0;
        let input = Tensor::from_vec(vec![1, 3, 3], vec![1.0; 9]);
        let acts = forward(&params, &specs, &input).unwrap();
        assert_eq!(acts.output().data, vec![2.0; 9]);
    }

    #[test]
    fn shape_mismatch_reports_layer() {
        let (specs, params) = dense_identity(2);
        let err = forward(&params, &specs, &Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap_err();
        match err {
            NnError::ShapeMismatch { layer, expected, got } => {
                assert_eq!(layer, 0);
                assert_eq!(expected, 2);
                assert_eq!(got, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dense_weight_gradient_is_outer_product() {
        // y = Wx, loss 0.5*||y - t||^2 => dL/dW = (y - t) x^T
        let specs = vec![LayerSpec::Dense { input: 2, output: 2 }];
        let mut params = NetworkParams::zeros_like(&specs);
        params.layers[0].weight.data = vec![1.0, 0.5, -0.5, 2.0];
        let x = Tensor::vector(vec![3.0, -1.0]);
        let t = Tensor::vector(vec![1.0, 1.0]);
        let acts = forward(&params, &specs, &x).unwrap();
        let grad_out = sse_loss_grad(acts.output(), &t);
        let (grads, _) = backward(&params, &specs, &acts, &grad_out).unwrap();
        let y = acts.output();
        for o in 0..2 {
            for i in 0..2 {
                let expected = (y.data[o] - t.data[o]) * x.data[i];
                assert!((grads.layers[0].weight.data[o * 2 + i] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = vec![
            LayerSpec::Dense { input: 4, output: 3 },
            LayerSpec::Relu,
            LayerSpec::Dense { input: 3, output: 2 },
        ];
        let params = init_params(&specs, &mut rng);
        let x = Tensor::vector(vec![0.3, -0.2, 0.5, 0.1]);
        let acts = forward(&params, &specs, &x).unwrap();
        let zero = Tensor::zeros(vec![2]);
        let (grads, dx) = backward(&params, &specs, &acts, &zero).unwrap();
        assert!(grads.squared_norm() == 0.0);
        assert!(dx.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_layer_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let specs = vec![
            LayerSpec::Dense { input: 5, output: 4 },
            LayerSpec::Relu,
            LayerSpec::Dense { input: 4, output: 2 },
        ];
        let params = init_params(&specs, &mut rng);
        let x = Tensor::vector(vec![0.7, -0.4, 0.9, 0.2, -0.6]);
        let t = Tensor::vector(vec![0.5, -0.5]);
        let err = finite_difference_check(&params, &specs, &x, &t, 1e-5);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn linear_net_finite_difference_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = vec![
            LayerSpec::Dense { input: 6, output: 4 },
            LayerSpec::Dense { input: 4, output: 3 },
        ];
        let params = init_params(&specs, &mut rng);
        let x = Tensor::vector(vec![0.3, 0.8, -0.2, 0.1, -0.9, 0.4]);
        let t = Tensor::vector(vec![0.0, 1.0, -1.0]);
        let err = finite_difference_check(&params, &specs, &x, &t, 1e-5);
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn conv_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let specs = vec![
            LayerSpec::Conv2d {
                in_ch: 1,
                out_ch: 2,
                in_h: 6,
                in_w: 6,
                kernel: 3,
                stride: 2,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { input: 8, output: 2 },
        ];
        let params = init_params(&specs, &mut rng);
        let data: Vec<f64> = (0..36).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let x = Tensor::from_vec(vec![1, 6, 6], data);
        let t = Tensor::vector(vec![0.3, -0.7]);
        let err = finite_difference_check(&params, &specs, &x, &t, 1e-5);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn finite_difference_check_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let specs = vec![LayerSpec::Dense { input: 3, output: 3 }];
        let params = init_params(&specs, &mut rng);
        let x = Tensor::vector(vec![0.2, 0.4, -0.3]);
        let t = Tensor::vector(vec![1.0, 0.0, 0.0]);
        let a = finite_difference_check(&params, &specs, &x, &t, 1e-5);
        let b = finite_difference_check(&params, &specs, &x, &t, 1e-5);
        assert_eq!(a, b);
    }

    #[test]
    fn update_with_zero_rate_is_identity() {
        let (specs, params) = dense_identity(2);
        let mut updated = params.clone();
        let mut grads = NetworkParams::zeros_like(&specs);
        grads.layers[0].weight.data = vec![1.0, 2.0, 3.0, 4.0];
        apply_update(
            &mut updated,
            &grads,
            &OptimizerConfig {
                learning_rate: 0.0,
                grad_clip: None,
                weight_decay: 0.0,
            },
        );
        assert_eq!(updated, params);
    }

    #[test]
    fn update_applies_scaled_gradient() {
        let specs = vec![LayerSpec::Dense { input: 1, output: 1 }];
        let mut params = NetworkParams::zeros_like(&specs);
        params.layers[0].weight.data[0] = 1.0;
        let mut grads = NetworkParams::zeros_like(&specs);
        grads.layers[0].weight.data[0] = 0.5;
        apply_update(
            &mut params,
            &grads,
            &OptimizerConfig {
                learning_rate: 0.1,
                grad_clip: None,
                weight_decay: 0.0,
            },
        );
        assert!((params.layers[0].weight.data[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn clipping_caps_gradient_norm() {
        let specs = vec![LayerSpec::Dense { input: 1, output: 1 }];
        let mut params = NetworkParams::zeros_like(&specs);
        let mut grads = NetworkParams::zeros_like(&specs);
        grads.layers[0].weight.data[0] = 10.0;
        apply_update(
            &mut params,
            &grads,
            &OptimizerConfig {
                learning_rate: 1.0,
                grad_clip: Some(1.0),
                weight_decay: 0.0,
            },
        );
        // effective gradient is clipped to norm 1.0
        assert!((params.layers[0].weight.data[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn update_decreases_loss_on_smooth_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let specs = vec![
            LayerSpec::Dense { input: 3, output: 4 },
            LayerSpec::Dense { input: 4, output: 2 },
        ];
        let mut params = init_params(&specs, &mut rng);
        let x = Tensor::vector(vec![0.5, -0.3, 0.8]);
        let t = Tensor::vector(vec![2.0, -1.0]);
        let before = loss_at(&params, &specs, &x, &t);
        let acts = forward(&params, &specs, &x).unwrap();
        let grad_out = sse_loss_grad(acts.output(), &t);
        let (grads, _) = backward(&params, &specs, &acts, &grad_out).unwrap();
        apply_update(
            &mut params,
            &grads,
            &OptimizerConfig {
                learning_rate: 0.01,
                grad_clip: None,
                weight_decay: 0.0,
            },
        );
        let after = loss_at(&params, &specs, &x, &t);
        assert!(after < before, "loss {before} -> {after}");
    }
}
