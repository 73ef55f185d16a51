//! Layer primitives: dense, temporal convolution, max-over-time pooling,
//! GRU recurrence, and inverted dropout. Each op comes as a forward returning
//! a cache and a backward consuming it, accumulating parameter gradients.

#![allow(clippy::needless_range_loop)]

use crate::neural::rng::RandomSource;
use crate::neural::tensor::{Parameter, Tensor};
use crate::neural::NeuralError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Softmax,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DenseCache {
    input: Tensor,
    output: Tensor,
    activation: Activation,
}

/// Affine map then activation, applied row-wise.
/// `input` is `[batch x in]`, `weights` `[in x out]`, `bias` `[out]`.
pub fn dense_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    activation: Activation,
) -> Result<(Tensor, DenseCache), NeuralError> {
    let (batch, d_in) = (input.rows(), input.cols());
    let (w_in, d_out) = (weights.rows(), weights.cols());
    if d_in != w_in || bias.len() != d_out {
        return Err(NeuralError::ShapeMismatch {
            context: "dense".into(),
            detail: format!(
                "input {:?} weights {:?} bias {:?}",
                input.shape(),
                weights.shape(),
                bias.shape()
            ),
        });
    }
    let mut out = Tensor::zeros(&[batch, d_out]);
    for b in 0..batch {
        let x = input.row(b);
        let o = out.row_mut(b);
        o.copy_from_slice(bias.data());
        for (i, &xi) in x.iter().enumerate() {
            let wrow = weights.row(i);
            for j in 0..d_out {
                o[j] += xi * wrow[j];
            }
        }
        apply_activation(o, activation);
    }
    out.check_finite("dense")?;
    let cache = DenseCache {
        input: input.clone(),
        output: out.clone(),
        activation,
    };
    Ok((out, cache))
}

fn apply_activation(row: &mut [f64], activation: Activation) {
    match activation {
        Activation::Linear => {}
        Activation::Relu => row.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => row.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Softmax => {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
    }
}

/// Backward through the activation and affine map. Accumulates into
/// `weights.gradient` / `bias.gradient` and returns the input gradient.
pub fn dense_backward(
    cache: &DenseCache,
    weights: &mut Parameter,
    bias: &mut Parameter,
    grad_out: &Tensor,
) -> Result<Tensor, NeuralError> {
    let (batch, d_out) = (cache.output.rows(), cache.output.cols());
    if grad_out.shape() != cache.output.shape() {
        return Err(NeuralError::ShapeMismatch {
            context: "dense backward".into(),
            detail: format!(
                "grad {:?} vs output {:?}",
                grad_out.shape(),
                cache.output.shape()
            ),
        });
    }
    let d_in = cache.input.cols();
    let mut grad_in = Tensor::zeros(&[batch, d_in]);
    let mut grad_pre = vec![0.0; d_out];
    for b in 0..batch {
        let out = cache.output.row(b);
        let g = grad_out.row(b);
        match cache.activation {
            Activation::Linear => grad_pre.copy_from_slice(g),
            Activation::Relu => {
                for j in 0..d_out {
                    grad_pre[j] = if out[j] > 0.0 { g[j] } else { 0.0 };
                }
            }
            Activation::Sigmoid => {
                for j in 0..d_out {
                    grad_pre[j] = g[j] * out[j] * (1.0 - out[j]);
                }
            }
            Activation::Softmax => {
                let dot: f64 = (0..d_out).map(|j| g[j] * out[j]).sum();
                for j in 0..d_out {
                    grad_pre[j] = out[j] * (g[j] - dot);
                }
            }
        }
        let x = cache.input.row(b);
        for (i, &xi) in x.iter().enumerate() {
            let wg = weights.gradient.row_mut(i);
            for j in 0..d_out {
                wg[j] += xi * grad_pre[j];
            }
        }
        let bg = bias.gradient.data_mut();
        for j in 0..d_out {
            bg[j] += grad_pre[j];
        }
        let gi = grad_in.row_mut(b);
        for i in 0..d_in {
            let wrow = weights.value.row(i);
            let mut acc = 0.0;
            for j in 0..d_out {
                acc += wrow[j] * grad_pre[j];
            }
            gi[i] = acc;
        }
    }
    Ok(grad_in)
}

// ---------------------------------------------------------------------------
// Temporal convolution
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Conv1dCache {
    input: Tensor,
    output: Tensor,
    window: usize,
}

/// Valid (no implicit padding) temporal convolution with ReLU activation.
/// `sequence` is `[len x dim]`, `filters` `[w x dim x f]`, `bias` `[f]`,
/// output `[(len - w + 1) x f]`. Callers PAD-extend shorter sequences.
pub fn conv1d_temporal(
    sequence: &Tensor,
    filters: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, Conv1dCache), NeuralError> {
    let (len, dim) = (sequence.rows(), sequence.cols());
    let fshape = filters.shape();
    if fshape.len() != 3 || fshape[1] != dim || bias.len() != fshape[2] {
        return Err(NeuralError::ShapeMismatch {
            context: "conv1d".into(),
            detail: format!("sequence {:?} filters {:?}", sequence.shape(), fshape),
        });
    }
    let (w, n_f) = (fshape[0], fshape[2]);
    if w < 1 || len < w {
        return Err(NeuralError::ShapeMismatch {
            context: "conv1d".into(),
            detail: format!("sequence length {} shorter than window {}", len, w),
        });
    }
    let out_len = len - w + 1;
    let mut out = Tensor::zeros(&[out_len, n_f]);
    for t in 0..out_len {
        let o = out.row_mut(t);
        o.copy_from_slice(bias.data());
        for a in 0..w {
            let x = sequence.row(t + a);
            for (c, &xc) in x.iter().enumerate() {
                // filters laid out [w][dim][f]
                let base = (a * dim + c) * n_f;
                let krow = &filters.data()[base..base + n_f];
                for j in 0..n_f {
                    o[j] += xc * krow[j];
                }
            }
        }
        o.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    out.check_finite("conv1d")?;
    let cache = Conv1dCache {
        input: sequence.clone(),
        output: out.clone(),
        window: w,
    };
    Ok((out, cache))
}

pub fn conv1d_backward(
    cache: &Conv1dCache,
    filters: &mut Parameter,
    bias: &mut Parameter,
    grad_out: &Tensor,
) -> Result<Tensor, NeuralError> {
    let (len, dim) = (cache.input.rows(), cache.input.cols());
    let (out_len, n_f) = (cache.output.rows(), cache.output.cols());
    if grad_out.shape() != cache.output.shape() {
        return Err(NeuralError::ShapeMismatch {
            context: "conv1d backward".into(),
            detail: format!(
                "grad {:?} vs output {:?}",
                grad_out.shape(),
                cache.output.shape()
            ),
        });
    }
    let w = cache.window;
    let mut grad_in = Tensor::zeros(&[len, dim]);
    let mut grad_pre = vec![0.0; n_f];
    for t in 0..out_len {
        let out = cache.output.row(t);
        let g = grad_out.row(t);
        for j in 0..n_f {
            grad_pre[j] = if out[j] > 0.0 { g[j] } else { 0.0 };
        }
        let bg = bias.gradient.data_mut();
        for j in 0..n_f {
            bg[j] += grad_pre[j];
        }
        for a in 0..w {
            let x = cache.input.row(t + a);
            let gi = grad_in.row_mut(t + a);
            for c in 0..dim {
                let base = (a * dim + c) * n_f;
                let krow = &filters.value.data()[base..base + n_f];
                let kg = &mut filters.gradient.data_mut()[base..base + n_f];
                let xc = x[c];
                let mut acc = 0.0;
                for j in 0..n_f {
                    kg[j] += xc * grad_pre[j];
                    acc += krow[j] * grad_pre[j];
                }
                gi[c] += acc;
            }
        }
    }
    Ok(grad_in)
}

// ---------------------------------------------------------------------------
// Max-over-time pooling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MaxPoolCache {
    argmax: Vec<usize>,
    input_len: usize,
}

/// Per-channel maximum over the time axis. `sequence` is `[len x f]`.
pub fn max_over_time(sequence: &Tensor) -> Result<(Tensor, MaxPoolCache), NeuralError> {
    let (len, n_f) = (sequence.rows(), sequence.cols());
    if len == 0 {
        return Err(NeuralError::EmptySequence("max_over_time".into()));
    }
    let mut out = Tensor::zeros(&[n_f]);
    let mut argmax = vec![0usize; n_f];
    for j in 0..n_f {
        let mut best = sequence.at(0, j);
        let mut best_t = 0;
        for t in 1..len {
            let v = sequence.at(t, j);
            // ties keep the earliest index
            if v > best {
                best = v;
                best_t = t;
            }
        }
        out.data_mut()[j] = best;
        argmax[j] = best_t;
    }
    Ok((
        out,
        MaxPoolCache {
            argmax,
            input_len: len,
        },
    ))
}

/// Routes each channel's gradient to its (earliest) argmax position.
pub fn max_over_time_backward(cache: &MaxPoolCache, grad_out: &Tensor) -> Tensor {
    let n_f = cache.argmax.len();
    let mut grad_in = Tensor::zeros(&[cache.input_len, n_f]);
    for j in 0..n_f {
        let t = cache.argmax[j];
        grad_in.row_mut(t)[j] = grad_out.data()[j];
    }
    grad_in
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

/// Gate parameters for one GRU layer: input kernels `[in x h]`, recurrent
/// kernels `[h x h]`, and biases `[h]` for the update (z), reset (r), and
/// candidate (h) paths.
#[derive(Clone, Debug)]
pub struct GruParams {
    pub w_z: Parameter,
    pub u_z: Parameter,
    pub b_z: Parameter,
    pub w_r: Parameter,
    pub u_r: Parameter,
    pub b_r: Parameter,
    pub w_h: Parameter,
    pub u_h: Parameter,
    pub b_h: Parameter,
}

impl GruParams {
    pub fn zeros(prefix: &str, input: usize, hidden: usize) -> GruParams {
        let w = |n: &str| Parameter::new(format!("{prefix}.{n}"), Tensor::zeros(&[input, hidden]));
        let u = |n: &str| Parameter::new(format!("{prefix}.{n}"), Tensor::zeros(&[hidden, hidden]));
        let b = |n: &str| Parameter::new(format!("{prefix}.{n}"), Tensor::zeros(&[hidden]));
        GruParams {
            w_z: w("w_z"),
            u_z: u("u_z"),
            b_z: b("b_z"),
            w_r: w("w_r"),
            u_r: u("u_r"),
            b_r: b("b_r"),
            w_h: w("w_h"),
            u_h: u("u_h"),
            b_h: b("b_h"),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b_z.value.len()
    }

    pub fn input_size(&self) -> usize {
        self.w_z.value.rows()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h,
            &self.u_h, &self.b_h,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct GruCache {
    input: Tensor,
    z: Tensor,
    r: Tensor,
    cand: Tensor,
    outputs: Tensor,
}

impl GruCache {
    /// Sequence length of the cached forward pass.
    pub fn len(&self) -> usize {
        self.outputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Standard GRU recurrence over a `[len x in]` sequence with zero initial
/// state. Update gate z and reset gate r use sigmoid, the candidate uses tanh
/// with the reset applied to the previous state before the recurrent kernel:
///
/// ```text
/// z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
/// r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
/// c_t = tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)
/// h_t = (1 - z_t) * h_{t-1} + z_t * c_t
/// ```
///
/// Returns the full output sequence `[len x h]` plus the cache; the last row
/// of the outputs is the final state.
pub fn gru_sequence(
    sequence: &Tensor,
    params: &GruParams,
) -> Result<(Tensor, GruCache), NeuralError> {
    let (len, d_in) = (sequence.rows(), sequence.cols());
    if len == 0 {
        return Err(NeuralError::EmptySequence("gru".into()));
    }
    let h = params.hidden_size();
    if params.input_size() != d_in {
        return Err(NeuralError::ShapeMismatch {
            context: "gru".into(),
            detail: format!("input dim {} vs kernel rows {}", d_in, params.input_size()),
        });
    }
    let mut zs = Tensor::zeros(&[len, h]);
    let mut rs = Tensor::zeros(&[len, h]);
    let mut cands = Tensor::zeros(&[len, h]);
    let mut outputs = Tensor::zeros(&[len, h]);
    let mut h_prev = vec![0.0; h];
    let mut a_z = vec![0.0; h];
    let mut a_r = vec![0.0; h];
    let mut a_c = vec![0.0; h];
    for t in 0..len {
        let x = sequence.row(t);
        a_z.copy_from_slice(params.b_z.value.data());
        a_r.copy_from_slice(params.b_r.value.data());
        a_c.copy_from_slice(params.b_h.value.data());
        for (i, &xi) in x.iter().enumerate() {
            let wz = params.w_z.value.row(i);
            let wr = params.w_r.value.row(i);
            let wh = params.w_h.value.row(i);
            for j in 0..h {
                a_z[j] += xi * wz[j];
                a_r[j] += xi * wr[j];
                a_c[j] += xi * wh[j];
            }
        }
        for (i, &hi) in h_prev.iter().enumerate() {
            let uz = params.u_z.value.row(i);
            let ur = params.u_r.value.row(i);
            for j in 0..h {
                a_z[j] += hi * uz[j];
                a_r[j] += hi * ur[j];
            }
        }
        let z_row = zs.row_mut(t);
        let r_row = rs.row_mut(t);
        for j in 0..h {
            z_row[j] = sigmoid(a_z[j]);
            r_row[j] = sigmoid(a_r[j]);
        }
        for (i, &hi) in h_prev.iter().enumerate() {
            let uh = params.u_h.value.row(i);
            let rh = rs.at(t, i) * hi;
            for j in 0..h {
                a_c[j] += rh * uh[j];
            }
        }
        let c_row = cands.row_mut(t);
        for j in 0..h {
            c_row[j] = a_c[j].tanh();
        }
        let o_row = outputs.row_mut(t);
        for j in 0..h {
            let z = zs.at(t, j);
            o_row[j] = (1.0 - z) * h_prev[j] + z * cands.at(t, j);
        }
        h_prev.copy_from_slice(outputs.row(t));
    }
    outputs.check_finite("gru")?;
    let cache = GruCache {
        input: sequence.clone(),
        z: zs,
        r: rs,
        cand: cands,
        outputs: outputs.clone(),
    };
    Ok((outputs, cache))
}

/// Backpropagation through time. `grad_outputs` holds dL/dh_t for every
/// step; parameter gradients accumulate, the input gradient is returned.
pub fn gru_backward(
    cache: &GruCache,
    params: &mut GruParams,
    grad_outputs: &Tensor,
) -> Result<Tensor, NeuralError> {
    let (len, d_in) = (cache.input.rows(), cache.input.cols());
    let h = params.hidden_size();
    if grad_outputs.shape() != cache.outputs.shape() {
        return Err(NeuralError::ShapeMismatch {
            context: "gru backward".into(),
            detail: format!(
                "grad {:?} vs outputs {:?}",
                grad_outputs.shape(),
                cache.outputs.shape()
            ),
        });
    }
    let mut grad_in = Tensor::zeros(&[len, d_in]);
    let mut dh_next = vec![0.0; h];
    let zero = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut da_z = vec![0.0; h];
    let mut da_r = vec![0.0; h];
    let mut da_c = vec![0.0; h];
    let mut drh = vec![0.0; h];
    for t in (0..len).rev() {
        let h_prev: &[f64] = if t == 0 { &zero } else { cache.outputs.row(t - 1) };
        let z = cache.z.row(t);
        let r = cache.r.row(t);
        let c = cache.cand.row(t);
        let g = grad_outputs.row(t);
        for j in 0..h {
            dh[j] = g[j] + dh_next[j];
        }
        // through h_t = (1-z) h_prev + z c
        for j in 0..h {
            let dz = dh[j] * (c[j] - h_prev[j]);
            let dc = dh[j] * z[j];
            dh_next[j] = dh[j] * (1.0 - z[j]);
            da_c[j] = dc * (1.0 - c[j] * c[j]);
            da_z[j] = dz * z[j] * (1.0 - z[j]);
        }
        // candidate path: c = tanh(x W_h + (r h_prev) U_h + b_h)
        for i in 0..h {
            let uh = params.u_h.value.row(i);
            let ug = params.u_h.gradient.row_mut(i);
            let rh = r[i] * h_prev[i];
            let mut acc = 0.0;
            for j in 0..h {
                ug[j] += rh * da_c[j];
                acc += uh[j] * da_c[j];
            }
            drh[i] = acc;
        }
        for j in 0..h {
            let dr = drh[j] * h_prev[j];
            dh_next[j] += drh[j] * r[j];
            da_r[j] = dr * r[j] * (1.0 - r[j]);
        }
        // gate recurrent kernels and input kernels
        for i in 0..h {
            let hi = h_prev[i];
            let uz = params.u_z.value.row(i);
            let ur = params.u_r.value.row(i);
            let uzg = params.u_z.gradient.row_mut(i);
            let mut acc = 0.0;
            for j in 0..h {
                uzg[j] += hi * da_z[j];
                acc += uz[j] * da_z[j];
            }
            dh_next[i] += acc;
            let urg = params.u_r.gradient.row_mut(i);
            let mut acc_r = 0.0;
            for j in 0..h {
                urg[j] += hi * da_r[j];
                acc_r += ur[j] * da_r[j];
            }
            dh_next[i] += acc_r;
        }
        let x = cache.input.row(t);
        let gi = grad_in.row_mut(t);
        for (i, &xi) in x.iter().enumerate() {
            let wz = params.w_z.value.row(i);
            let wr = params.w_r.value.row(i);
            let wh = params.w_h.value.row(i);
            let mut acc = 0.0;
            for j in 0..h {
                acc += wz[j] * da_z[j] + wr[j] * da_r[j] + wh[j] * da_c[j];
            }
            gi[i] = acc;
            let wzg = params.w_z.gradient.row_mut(i);
            for j in 0..h {
                wzg[j] += xi * da_z[j];
            }
            let wrg = params.w_r.gradient.row_mut(i);
            for j in 0..h {
                wrg[j] += xi * da_r[j];
            }
            let whg = params.w_h.gradient.row_mut(i);
            for j in 0..h {
                whg[j] += xi * da_c[j];
            }
        }
        let bzg = params.b_z.gradient.data_mut();
        let brg = params.b_r.gradient.data_mut();
        let bhg = params.b_h.gradient.data_mut();
        for j in 0..h {
            bzg[j] += da_z[j];
            brg[j] += da_r[j];
            bhg[j] += da_c[j];
        }
    }
    Ok(grad_in)
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DropoutCache {
    // survivor scale per element: 0.0 for dropped, 1/(1-rate) for kept
    scales: Option<Vec<f64>>,
}

/// Inverted dropout: at training time entries are zeroed independently with
/// probability `rate` and survivors scaled by `1/(1-rate)`; at inference the
/// op is the identity.
pub fn dropout_forward(
    input: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut RandomSource,
) -> (Tensor, DropoutCache) {
    assert!((0.0..1.0).contains(&rate), "dropout rate {rate}");
    if !training || rate == 0.0 {
        return (input.clone(), DropoutCache { scales: None });
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mut out = input.clone();
    let mut scales = vec![0.0; input.len()];
    for (v, s) in out.data_mut().iter_mut().zip(scales.iter_mut()) {
        if rng.uniform() < rate {
            *v = 0.0;
        } else {
            *v *= keep_scale;
            *s = keep_scale;
        }
    }
    (out, DropoutCache { scales: Some(scales) })
}

pub fn dropout_backward(cache: &DropoutCache, grad_out: &Tensor) -> Tensor {
    match &cache.scales {
        None => grad_out.clone(),
        Some(scales) => {
            let mut grad_in = grad_out.clone();
            for (g, &s) in grad_in.data_mut().iter_mut().zip(scales.iter()) {
                *g *= s;
            }
            grad_in
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{gradient_check, GradCheckModel};
    use crate::neural::NeuralError;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    fn random_tensor(shape: &[usize], rng: &mut RandomSource) -> Tensor {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    // -- dense ---------------------------------------------------------

    #[test]
    fn dense_identity_linear_passes_input_through() {
        let input = t(&[2, 3], &[1.0, -2.0, 3.0, 0.5, 0.0, -1.5]);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.set(i, i, 1.0);
        }
        let bias = Tensor::zeros(&[3]);
        let (out, _) = dense_forward(&input, &eye, &bias, Activation::Linear).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn dense_zero_weights_softmax_is_uniform() {
        let input = t(&[2, 3], &[1.0, 2.0, 3.0, -1.0, 0.0, 1.0]);
        let weights = Tensor::zeros(&[3, 4]);
        let bias = Tensor::zeros(&[4]);
        let (out, _) = dense_forward(&input, &weights, &bias, Activation::Softmax).unwrap();
        for v in out.data() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_matches_nested_loop_oracle() {
        let mut rng = RandomSource::new(41);
        let input = random_tensor(&[3, 5], &mut rng);
        let weights = random_tensor(&[5, 4], &mut rng);
        let bias = random_tensor(&[4], &mut rng);
        let (out, _) = dense_forward(&input, &weights, &bias, Activation::Linear).unwrap();
        for b in 0..3 {
            for j in 0..4 {
                let mut expected = bias.data()[j];
                for i in 0..5 {
                    expected += input.at(b, i) * weights.at(i, j);
                }
                assert!((out.at(b, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_shape_mismatch_is_an_error() {
        let input = Tensor::zeros(&[2, 3]);
        let weights = Tensor::zeros(&[4, 4]);
        let bias = Tensor::zeros(&[4]);
        assert!(dense_forward(&input, &weights, &bias, Activation::Linear).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = RandomSource::new(17);
        let input = random_tensor(&[4, 6], &mut rng);
        let weights = random_tensor(&[6, 5], &mut rng);
        let bias = random_tensor(&[5], &mut rng);
        let (out, _) = dense_forward(&input, &weights, &bias, Activation::Softmax).unwrap();
        for b in 0..4 {
            let sum: f64 = out.row(b).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sigmoid_outputs_in_open_unit_interval() {
        let mut rng = RandomSource::new(18);
        let input = random_tensor(&[4, 6], &mut rng);
        let weights = random_tensor(&[6, 5], &mut rng);
        let bias = random_tensor(&[5], &mut rng);
        let (out, _) = dense_forward(&input, &weights, &bias, Activation::Sigmoid).unwrap();
        for v in out.data() {
            assert!(*v > 0.0 && *v < 1.0);
        }
    }

    // -- conv ----------------------------------------------------------

    #[test]
    fn conv_window_one_identity_filters_pass_nonnegative_input() {
        // w=1, f=dim, filters = per-channel identity
        let input = t(&[4, 2], &[0.5, 1.0, 0.0, 2.0, 3.0, 0.25, 1.5, 0.75]);
        let mut filters = Tensor::zeros(&[1, 2, 2]);
        filters.data_mut()[0] = 1.0; // [0][0][0]
        filters.data_mut()[3] = 1.0; // [0][1][1]
        let bias = Tensor::zeros(&[2]);
        let (out, _) = conv1d_temporal(&input, &filters, &bias).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn conv_constant_input_gives_equal_rows() {
        let input = t(&[6, 3], &[0.7; 18]);
        let mut rng = RandomSource::new(3);
        let filters = random_tensor(&[2, 3, 4], &mut rng);
        let bias = random_tensor(&[4], &mut rng);
        let (out, _) = conv1d_temporal(&input, &filters, &bias).unwrap();
        for r in 1..out.rows() {
            assert_eq!(out.row(r), out.row(0));
        }
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        let mut rng = RandomSource::new(23);
        let input = random_tensor(&[7, 3], &mut rng);
        let filters = random_tensor(&[3, 3, 2], &mut rng);
        let bias = random_tensor(&[2], &mut rng);
        let (out, _) = conv1d_temporal(&input, &filters, &bias).unwrap();
        assert_eq!(out.shape(), &[5, 2]);
        for time in 0..5 {
            for f in 0..2 {
                let mut acc = bias.data()[f];
                for a in 0..3 {
                    for c in 0..3 {
                        acc += input.at(time + a, c) * filters.data()[(a * 3 + c) * 2 + f];
                    }
                }
                let expected = acc.max(0.0);
                assert!((out.at(time, f) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_sequence_shorter_than_window() {
        let input = Tensor::zeros(&[2, 3]);
        let filters = Tensor::zeros(&[3, 3, 2]);
        let bias = Tensor::zeros(&[2]);
        assert!(conv1d_temporal(&input, &filters, &bias).is_err());
    }

    // -- max pooling ---------------------------------------------------

    #[test]
    fn max_pool_single_row_is_identity() {
        let input = t(&[1, 3], &[0.1, -0.5, 2.0]);
        let (out, _) = max_over_time(&input).unwrap();
        assert_eq!(out.data(), &[0.1, -0.5, 2.0]);
    }

    #[test]
    fn max_pool_picks_column_maximum() {
        let input = t(&[3, 1], &[1.0, 5.0, 3.0]);
        let (out, _) = max_over_time(&input).unwrap();
        assert_eq!(out.data(), &[5.0]);
    }

    #[test]
    fn max_pool_empty_sequence_errors() {
        let input = Tensor::zeros(&[0, 3]);
        assert!(matches!(
            max_over_time(&input),
            Err(NeuralError::EmptySequence(_))
        ));
    }

    #[test]
    fn max_pool_backward_routes_single_unit_per_channel() {
        let mut rng = RandomSource::new(8);
        let input = random_tensor(&[5, 4], &mut rng);
        let (_, cache) = max_over_time(&input).unwrap();
        let grad_out = t(&[4], &[1.0; 4]);
        let grad_in = max_over_time_backward(&cache, &grad_out);
        for j in 0..4 {
            let ones: Vec<usize> = (0..5).filter(|&r| grad_in.at(r, j) != 0.0).collect();
            assert_eq!(ones.len(), 1);
            assert_eq!(grad_in.at(ones[0], j), 1.0);
        }
    }

    #[test]
    fn max_pool_tie_routes_to_earliest() {
        let input = t(&[3, 1], &[2.0, 2.0, 1.0]);
        let (_, cache) = max_over_time(&input).unwrap();
        let grad_in = max_over_time_backward(&cache, &t(&[1], &[1.0]));
        assert_eq!(grad_in.data(), &[1.0, 0.0, 0.0]);
    }

    // -- gru -----------------------------------------------------------

    fn random_gru(prefix: &str, d_in: usize, h: usize, rng: &mut RandomSource) -> GruParams {
        let mut p = GruParams::zeros(prefix, d_in, h);
        for param in p.params_mut() {
            for v in param.value.data_mut() {
                *v = rng.uniform_in(-0.8, 0.8);
            }
        }
        p
    }

    #[test]
    fn gru_zero_everything_stays_zero() {
        let params = GruParams::zeros("g", 3, 2);
        let input = Tensor::zeros(&[4, 3]);
        let (out, _) = gru_sequence(&input, &params).unwrap();
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gru_length_one_last_is_only_row() {
        let mut rng = RandomSource::new(5);
        let params = random_gru("g", 3, 2, &mut rng);
        let input = random_tensor(&[1, 3], &mut rng);
        let (out, _) = gru_sequence(&input, &params).unwrap();
        assert_eq!(out.rows(), 1);
    }

    /// Step-by-step scalar oracle written independently of the layer code.
    fn gru_oracle(input: &Tensor, p: &GruParams) -> Vec<Vec<f64>> {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let matvec = |m: &Tensor, v: &[f64]| -> Vec<f64> {
            let (rows, cols) = (m.rows(), m.cols());
            let mut out = vec![0.0; cols];
            for j in 0..cols {
                for (i, item) in v.iter().enumerate().take(rows) {
                    out[j] += item * m.at(i, j);
                }
            }
            out
        };
        let h = p.hidden_size();
        let mut state = vec![0.0; h];
        let mut outputs = Vec::new();
        for step in 0..input.rows() {
            let x: Vec<f64> = input.row(step).to_vec();
            let az = matvec(&p.w_z.value, &x);
            let azr = matvec(&p.u_z.value, &state);
            let ar = matvec(&p.w_r.value, &x);
            let arr = matvec(&p.u_r.value, &state);
            let z: Vec<f64> = (0..h)
                .map(|j| sig(az[j] + azr[j] + p.b_z.value.data()[j]))
                .collect();
            let r: Vec<f64> = (0..h)
                .map(|j| sig(ar[j] + arr[j] + p.b_r.value.data()[j]))
                .collect();
            let rh: Vec<f64> = (0..h).map(|j| r[j] * state[j]).collect();
            let ac = matvec(&p.w_h.value, &x);
            let acr = matvec(&p.u_h.value, &rh);
            let cand: Vec<f64> = (0..h)
                .map(|j| (ac[j] + acr[j] + p.b_h.value.data()[j]).tanh())
                .collect();
            state = (0..h)
                .map(|j| (1.0 - z[j]) * state[j] + z[j] * cand[j])
                .collect();
            outputs.push(state.clone());
        }
        outputs
    }

    #[test]
    fn gru_matches_scalar_oracle() {
        let mut rng = RandomSource::new(77);
        let params = random_gru("g", 3, 2, &mut rng);
        let input = random_tensor(&[4, 3], &mut rng);
        let (out, _) = gru_sequence(&input, &params).unwrap();
        let expected = gru_oracle(&input, &params);
        for step in 0..4 {
            for j in 0..2 {
                assert!(
                    (out.at(step, j) - expected[step][j]).abs() < 1e-12,
                    "step {step} unit {j}"
                );
            }
        }
    }

    // -- dropout -------------------------------------------------------

    #[test]
    fn dropout_inference_is_identity() {
        let mut rng = RandomSource::new(1);
        let input = random_tensor(&[10, 10], &mut rng);
        let (out, _) = dropout_forward(&input, 0.5, false, &mut rng);
        assert_eq!(out, input);
    }

    #[test]
    fn dropout_rate_zero_is_identity_in_training() {
        let mut rng = RandomSource::new(2);
        let input = random_tensor(&[10, 10], &mut rng);
        let (out, _) = dropout_forward(&input, 0.0, true, &mut rng);
        assert_eq!(out, input);
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = RandomSource::new(3);
        let input = Tensor::from_vec(&[100, 100], vec![1.0; 10_000]).unwrap();
        let (out, _) = dropout_forward(&input, 0.5, true, &mut rng);
        let mean: f64 = out.data().iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    // -- finite-difference verification of every backward pass ----------

    /// Wraps a layer plus a fixed readout so the scalar loss exercises all
    /// gradients, including the one with respect to the input (checked by
    /// treating the input as a parameter).
    struct LayerFixture<F, G> {
        params: Vec<Parameter>,
        forward_grad: F,
        forward_loss: G,
    }

    impl<F, G> GradCheckModel for LayerFixture<F, G>
    where
        F: FnMut(&mut Vec<Parameter>) -> Result<f64, NeuralError>,
        G: FnMut(&Vec<Parameter>) -> Result<f64, NeuralError>,
    {
        fn loss_and_grad(&mut self) -> Result<f64, NeuralError> {
            (self.forward_grad)(&mut self.params)
        }
        fn loss(&mut self) -> Result<f64, NeuralError> {
            (self.forward_loss)(&self.params)
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            self.params.iter_mut().collect()
        }
    }

    fn readout(out: &Tensor, coef: &Tensor) -> f64 {
        out.data().iter().zip(coef.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        for activation in [
            Activation::Linear,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Softmax,
        ] {
            let mut rng = RandomSource::new(100 + activation as u64);
            let input = random_tensor(&[3, 4], &mut rng);
            let weights = random_tensor(&[4, 5], &mut rng);
            let bias = random_tensor(&[5], &mut rng);
            let coef = random_tensor(&[3, 5], &mut rng);
            let params = vec![
                Parameter::new("w", weights),
                Parameter::new("b", bias),
                Parameter::new("x", input),
            ];
            let coef2 = coef.clone();
            let mut fixture = LayerFixture {
                params,
                forward_grad: move |ps: &mut Vec<Parameter>| {
                    let (out, cache) =
                        dense_forward(&ps[2].value.clone(), &ps[0].value, &ps[1].value, activation)?;
                    let loss = readout(&out, &coef);
                    let (w, rest) = ps.split_at_mut(1);
                    let (b, x) = rest.split_at_mut(1);
                    let grad_in = dense_backward(&cache, &mut w[0], &mut b[0], &coef)?;
                    x[0].gradient = grad_in;
                    Ok(loss)
                },
                forward_loss: move |ps: &Vec<Parameter>| {
                    let (out, _) =
                        dense_forward(&ps[2].value, &ps[0].value, &ps[1].value, activation)?;
                    Ok(readout(&out, &coef2))
                },
            };
            let mut check_rng = RandomSource::new(9);
            let err = gradient_check(&mut fixture, 1e-5, 500, &mut check_rng).unwrap();
            assert!(err < 1e-6, "{activation:?}: max rel err {err}");
        }
    }

    #[test]
    fn conv_and_pool_backward_match_finite_differences() {
        let mut rng = RandomSource::new(55);
        let input = random_tensor(&[7, 3], &mut rng);
        let filters = random_tensor(&[3, 3, 4], &mut rng);
        let bias = random_tensor(&[4], &mut rng);
        let coef = random_tensor(&[4], &mut rng);
        let params = vec![
            Parameter::new("k", filters),
            Parameter::new("b", bias),
            Parameter::new("x", input),
        ];
        let coef2 = coef.clone();
        let mut fixture = LayerFixture {
            params,
            forward_grad: move |ps: &mut Vec<Parameter>| {
                let (conv, conv_cache) =
                    conv1d_temporal(&ps[2].value.clone(), &ps[0].value, &ps[1].value)?;
                let (pooled, pool_cache) = max_over_time(&conv)?;
                let loss = readout(&pooled, &coef);
                let grad_pool = max_over_time_backward(&pool_cache, &coef);
                let (k, rest) = ps.split_at_mut(1);
                let (b, x) = rest.split_at_mut(1);
                let grad_in = conv1d_backward(&conv_cache, &mut k[0], &mut b[0], &grad_pool)?;
                x[0].gradient = grad_in;
                Ok(loss)
            },
            forward_loss: move |ps: &Vec<Parameter>| {
                let (conv, _) = conv1d_temporal(&ps[2].value, &ps[0].value, &ps[1].value)?;
                let (pooled, _) = max_over_time(&conv)?;
                Ok(readout(&pooled, &coef2))
            },
        };
        let mut check_rng = RandomSource::new(10);
        let err = gradient_check(&mut fixture, 1e-5, 500, &mut check_rng).unwrap();
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn gru_backward_matches_finite_differences() {
        let mut rng = RandomSource::new(66);
        let gru = random_gru("g", 3, 4, &mut rng);
        let input = random_tensor(&[5, 3], &mut rng);
        let coef = random_tensor(&[5, 4], &mut rng);
        let mut params: Vec<Parameter> = gru.params().into_iter().cloned().collect();
        params.push(Parameter::new("x", input));
        let rebuild = |ps: &[Parameter]| -> GruParams {
            GruParams {
                w_z: ps[0].clone(),
                u_z: ps[1].clone(),
                b_z: ps[2].clone(),
                w_r: ps[3].clone(),
                u_r: ps[4].clone(),
                b_r: ps[5].clone(),
                w_h: ps[6].clone(),
                u_h: ps[7].clone(),
                b_h: ps[8].clone(),
            }
        };
        let coef2 = coef.clone();
        let mut fixture = LayerFixture {
            params,
            forward_grad: move |ps: &mut Vec<Parameter>| {
                let mut gru = rebuild(ps);
                let (out, cache) = gru_sequence(&ps[9].value, &gru)?;
                let loss = readout(&out, &coef);
                let grad_in = gru_backward(&cache, &mut gru, &coef)?;
                for (dst, src) in ps.iter_mut().zip(gru.params()) {
                    dst.gradient = src.gradient.clone();
                }
                ps[9].gradient = grad_in;
                Ok(loss)
            },
            forward_loss: move |ps: &Vec<Parameter>| {
                let gru = rebuild(ps);
                let (out, _) = gru_sequence(&ps[9].value, &gru)?;
                Ok(readout(&out, &coef2))
            },
        };
        let mut check_rng = RandomSource::new(11);
        let err = gradient_check(&mut fixture, 1e-5, 500, &mut check_rng).unwrap();
        assert!(err < 1e-6, "max rel err {err}");
    }
}
