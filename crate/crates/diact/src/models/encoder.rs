//! Segment encoders: the five-layer GRU stack and the three-branch temporal
//! CNN bank, producing a fixed-width representation from a `[len x dim]`
//! embedding sequence.

use crate::models::config::EncoderConfig;
use crate::neural::{
    conv1d_backward, conv1d_temporal, gru_backward, gru_sequence, max_over_time,
    max_over_time_backward, Conv1dCache, GruCache, GruParams, MaxPoolCache, NeuralError,
    Parameter, RandomSource, Tensor,
};

fn glorot_init(value: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut RandomSource) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in value.data_mut() {
        *v = rng.uniform_in(-limit, limit);
    }
}

pub struct CnnBranch {
    pub window: usize,
    pub filters: Parameter,
    pub bias: Parameter,
}

pub enum Encoder {
    Rnn(Vec<GruParams>),
    Cnn(Vec<CnnBranch>),
}

pub enum EncoderCache {
    Rnn(Vec<GruCache>),
    Cnn {
        branches: Vec<(Conv1dCache, MaxPoolCache)>,
        input_len: usize,
        padded_len: usize,
    },
}

impl Encoder {
    pub fn init(config: &EncoderConfig, input_dim: usize, rng: &mut RandomSource) -> Encoder {
        match config {
            EncoderConfig::Rnn { layers, hidden_size } => {
                let mut stack = Vec::with_capacity(*layers);
                for layer in 0..*layers {
                    let d_in = if layer == 0 { input_dim } else { *hidden_size };
                    let mut params = GruParams::zeros(&format!("gru{layer}"), d_in, *hidden_size);
                    for p in [&mut params.w_z, &mut params.w_r, &mut params.w_h] {
                        glorot_init(&mut p.value, d_in, *hidden_size, rng);
                    }
                    for p in [&mut params.u_z, &mut params.u_r, &mut params.u_h] {
                        glorot_init(&mut p.value, *hidden_size, *hidden_size, rng);
                    }
                    stack.push(params);
                }
                Encoder::Rnn(stack)
            }
            EncoderConfig::Cnn {
                windows,
                filters_per_window,
            } => {
                let branches = windows
                    .iter()
                    .map(|&w| {
                        let mut filters = Parameter::new(
                            format!("conv_w{w}.filters"),
                            Tensor::zeros(&[w, input_dim, *filters_per_window]),
                        );
                        glorot_init(
                            &mut filters.value,
                            w * input_dim,
                            w * *filters_per_window,
                            rng,
                        );
                        let bias = Parameter::new(
                            format!("conv_w{w}.bias"),
                            Tensor::zeros(&[*filters_per_window]),
                        );
                        CnnBranch {
                            window: w,
                            filters,
                            bias,
                        }
                    })
                    .collect();
                Encoder::Cnn(branches)
            }
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Rnn(stack) => stack.iter().map(|p| p.hidden_size()).sum(),
            Encoder::Cnn(branches) => branches.iter().map(|b| b.bias.value.len()).sum(),
        }
    }

    pub fn max_window(&self) -> usize {
        match self {
            Encoder::Rnn(_) => 1,
            Encoder::Cnn(branches) => branches.iter().map(|b| b.window).max().unwrap_or(1),
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        match self {
            Encoder::Rnn(stack) => stack.iter().flat_map(|p| p.params()).collect(),
            Encoder::Cnn(branches) => branches
                .iter()
                .flat_map(|b| [&b.filters, &b.bias])
                .collect(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Encoder::Rnn(stack) => stack.iter_mut().flat_map(|p| p.params_mut()).collect(),
            Encoder::Cnn(branches) => branches
                .iter_mut()
                .flat_map(|b| [&mut b.filters, &mut b.bias])
                .collect(),
        }
    }

    /// Encodes an embedded segment into its representation vector.
    ///
    /// The recurrent stack feeds each layer's full output sequence to the
    /// next and concatenates the five last-step outputs. The CNN bank
    /// zero-extends sequences shorter than the largest window (the PAD
    /// embedding row is all-zero), runs each branch through convolution and
    /// max-over-time pooling, and concatenates the pooled vectors.
    pub fn forward(&self, embedded: &Tensor) -> Result<(Tensor, EncoderCache), NeuralError> {
        match self {
            Encoder::Rnn(stack) => {
                let mut caches = Vec::with_capacity(stack.len());
                let mut repr = Vec::with_capacity(self.output_dim());
                let mut sequence = embedded.clone();
                for layer in stack {
                    let (outputs, cache) = gru_sequence(&sequence, layer)?;
                    repr.extend_from_slice(outputs.row(outputs.rows() - 1));
                    sequence = outputs;
                    caches.push(cache);
                }
                let repr = Tensor::from_vec(&[repr.len()], repr)?;
                Ok((repr, EncoderCache::Rnn(caches)))
            }
            Encoder::Cnn(branches) => {
                let input_len = embedded.rows();
                let padded_len = input_len.max(self.max_window());
                let padded = if padded_len > input_len {
                    let mut t = Tensor::zeros(&[padded_len, embedded.cols()]);
                    t.data_mut()[..embedded.len()].copy_from_slice(embedded.data());
                    t
                } else {
                    embedded.clone()
                };
                let mut repr = Vec::with_capacity(self.output_dim());
                let mut caches = Vec::with_capacity(branches.len());
                for branch in branches {
                    let (conv, conv_cache) =
                        conv1d_temporal(&padded, &branch.filters.value, &branch.bias.value)?;
                    let (pooled, pool_cache) = max_over_time(&conv)?;
                    repr.extend_from_slice(pooled.data());
                    caches.push((conv_cache, pool_cache));
                }
                let repr = Tensor::from_vec(&[repr.len()], repr)?;
                Ok((
                    repr,
                    EncoderCache::Cnn {
                        branches: caches,
                        input_len,
                        padded_len,
                    },
                ))
            }
        }
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the embedded input.
    pub fn backward(
        &mut self,
        cache: &EncoderCache,
        grad_repr: &Tensor,
    ) -> Result<Tensor, NeuralError> {
        match (self, cache) {
            (Encoder::Rnn(stack), EncoderCache::Rnn(caches)) => {
                let len = caches[0].len();
                // split the representation gradient into per-layer chunks
                let mut offset = 0;
                let mut chunk_grads: Vec<Tensor> = Vec::with_capacity(stack.len());
                for layer in stack.iter() {
                    let h = layer.hidden_size();
                    let mut g = Tensor::zeros(&[len, h]);
                    g.row_mut(len - 1)
                        .copy_from_slice(&grad_repr.data()[offset..offset + h]);
                    offset += h;
                    chunk_grads.push(g);
                }
                // walk the stack top-down, adding each layer's input gradient
                // to the output gradient of the layer below
                let mut grad_below: Option<Tensor> = None;
                for (layer, cache) in stack.iter_mut().zip(caches.iter()).rev() {
                    let mut grad_outputs = chunk_grads.pop().expect("chunk per layer");
                    if let Some(extra) = grad_below.take() {
                        for (g, e) in grad_outputs.data_mut().iter_mut().zip(extra.data()) {
                            *g += e;
                        }
                    }
                    grad_below = Some(gru_backward(cache, layer, &grad_outputs)?);
                }
                Ok(grad_below.expect("non-empty stack"))
            }
            (
                Encoder::Cnn(branches),
                EncoderCache::Cnn {
                    branches: caches,
                    input_len,
                    padded_len,
                },
            ) => {
                let dim = branches[0].filters.value.shape()[1];
                let mut grad_padded = Tensor::zeros(&[*padded_len, dim]);
                let mut offset = 0;
                for (branch, (conv_cache, pool_cache)) in branches.iter_mut().zip(caches) {
                    let f = branch.bias.value.len();
                    let grad_pooled =
                        Tensor::from_vec(&[f], grad_repr.data()[offset..offset + f].to_vec())?;
                    offset += f;
                    let grad_conv = max_over_time_backward(pool_cache, &grad_pooled);
                    let grad_in =
                        conv1d_backward(conv_cache, &mut branch.filters, &mut branch.bias, &grad_conv)?;
                    for (g, e) in grad_padded.data_mut().iter_mut().zip(grad_in.data()) {
                        *g += e;
                    }
                }
                // gradients for zero-extension rows are dropped
                let mut grad_input = Tensor::zeros(&[*input_len, dim]);
                let keep = grad_input.len();
                grad_input
                    .data_mut()
                    .copy_from_slice(&grad_padded.data()[..keep]);
                Ok(grad_input)
            }
            _ => Err(NeuralError::ShapeMismatch {
                context: "encoder backward".into(),
                detail: "cache variant does not match encoder variant".into(),
            }),
        }
    }
}
