//! The assembled segment classifier: embedding lookup, segment encoder,
//! label-context concatenation, dimensionality reduction with dropout, and
//! the output head.

use crate::models::config::REDUCTION_DIM;
use crate::models::encoder::{Encoder, EncoderCache};
use crate::models::ModelError;
use crate::neural::{
    dense_backward, dense_forward, dropout_backward, dropout_forward, Activation, DenseCache,
    DropoutCache, NeuralError, Parameter, RandomSource, Tensor,
};
use crate::text::{EmbeddingTable, Vocabulary, PAD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Single-label head: softmax activation, categorical cross entropy.
    Softmax,
    /// Multi-label head: sigmoid activation, binary cross entropy.
    Sigmoid,
}

impl HeadKind {
    pub fn activation(self) -> Activation {
        match self {
            HeadKind::Softmax => Activation::Softmax,
            HeadKind::Sigmoid => Activation::Sigmoid,
        }
    }
}

/// The trainable network over (token indices, context vector) inputs.
pub struct SegmentClassifier {
    pub vocab: Vocabulary,
    pub embedding: Parameter,
    pub embedding_trainable: bool,
    pub encoder: Encoder,
    pub context_width: usize,
    pub reduction_w: Parameter,
    pub reduction_b: Parameter,
    pub reduction_relu: bool,
    pub dropout: f64,
    pub head_w: Parameter,
    pub head_b: Parameter,
    pub head_kind: HeadKind,
    pub max_len: usize,
}

pub struct NetCache {
    indices: Vec<usize>,
    encoder: EncoderCache,
    reduction: DenseCache,
    dropout: DropoutCache,
    head: DenseCache,
    embedded_rows: usize,
}

#[allow(clippy::too_many_arguments)]
impl SegmentClassifier {
    pub fn init(
        vocab: Vocabulary,
        embeddings: EmbeddingTable,
        encoder_config: &crate::models::config::EncoderConfig,
        context_width: usize,
        classes: usize,
        head_kind: HeadKind,
        reduction_relu: bool,
        dropout: f64,
        max_len: usize,
        rng: &mut RandomSource,
    ) -> SegmentClassifier {
        let dim = embeddings.dimension;
        let encoder = Encoder::init(encoder_config, dim, rng);
        let concat_width = encoder.output_dim() + context_width;
        let mut reduction_w = Parameter::new(
            "reduction.w",
            Tensor::zeros(&[concat_width, REDUCTION_DIM]),
        );
        glorot(&mut reduction_w, concat_width, REDUCTION_DIM, rng);
        let reduction_b = Parameter::new("reduction.b", Tensor::zeros(&[REDUCTION_DIM]));
        let mut head_w = Parameter::new("head.w", Tensor::zeros(&[REDUCTION_DIM, classes]));
        glorot(&mut head_w, REDUCTION_DIM, classes, rng);
        let head_b = Parameter::new("head.b", Tensor::zeros(&[classes]));
        SegmentClassifier {
            vocab,
            embedding_trainable: embeddings.trainable,
            embedding: Parameter::new("embedding", embeddings.matrix),
            encoder,
            context_width,
            reduction_w,
            reduction_b,
            reduction_relu,
            dropout,
            head_w,
            head_b,
            head_kind,
            max_len,
        }
    }

    pub fn classes(&self) -> usize {
        self.head_b.value.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.value.cols()
    }

    fn embed(&self, indices: &[usize]) -> Result<Tensor, ModelError> {
        if indices.is_empty() {
            return Err(ModelError::Neural(NeuralError::EmptySequence(
                "embedding lookup".into(),
            )));
        }
        let dim = self.embedding_dim();
        let mut out = Tensor::zeros(&[indices.len(), dim]);
        for (row, &idx) in indices.iter().enumerate() {
            out.row_mut(row).copy_from_slice(self.embedding.value.row(idx));
        }
        Ok(out)
    }

    /// Full forward pass. Dropout fires only when `training` is true.
    pub fn forward(
        &self,
        indices: &[usize],
        context: &[f64],
        training: bool,
        rng: &mut RandomSource,
    ) -> Result<(Tensor, NetCache), ModelError> {
        if context.len() != self.context_width {
            return Err(ModelError::Neural(NeuralError::ShapeMismatch {
                context: "context vector".into(),
                detail: format!(
                    "expected width {}, got {}",
                    self.context_width,
                    context.len()
                ),
            }));
        }
        let embedded = self.embed(indices)?;
        let (repr, enc_cache) = self.encoder.forward(&embedded)?;
        let mut concat = Vec::with_capacity(repr.len() + context.len());
        concat.extend_from_slice(repr.data());
        concat.extend_from_slice(context);
        let concat = Tensor::from_vec(&[1, concat.len()], concat).map_err(ModelError::Neural)?;
        let activation = if self.reduction_relu {
            Activation::Relu
        } else {
            Activation::Linear
        };
        let (reduced, red_cache) = dense_forward(
            &concat,
            &self.reduction_w.value,
            &self.reduction_b.value,
            activation,
        )?;
        let (dropped, drop_cache) = dropout_forward(&reduced, self.dropout, training, rng);
        let (probs, head_cache) = dense_forward(
            &dropped,
            &self.head_w.value,
            &self.head_b.value,
            self.head_kind.activation(),
        )?;
        probs.check_finite("head").map_err(ModelError::Neural)?;
        Ok((
            probs,
            NetCache {
                indices: indices.to_vec(),
                encoder: enc_cache,
                reduction: red_cache,
                dropout: drop_cache,
                head: head_cache,
                embedded_rows: embedded.rows(),
            },
        ))
    }

    /// Inference-only forward pass; deterministic, dropout disabled.
    pub fn predict_probs(&self, indices: &[usize], context: &[f64]) -> Result<Tensor, ModelError> {
        let mut rng = RandomSource::new(0);
        Ok(self.forward(indices, context, false, &mut rng)?.0)
    }

    /// Backpropagates `grad_probs` (shape `[1 x classes]`), accumulating all
    /// parameter gradients.
    pub fn backward(&mut self, cache: &NetCache, grad_probs: &Tensor) -> Result<(), ModelError> {
        let grad_dropped =
            dense_backward(&cache.head, &mut self.head_w, &mut self.head_b, grad_probs)?;
        let grad_reduced = dropout_backward(&cache.dropout, &grad_dropped);
        let grad_concat = dense_backward(
            &cache.reduction,
            &mut self.reduction_w,
            &mut self.reduction_b,
            &grad_reduced,
        )?;
        let enc_dim = self.encoder.output_dim();
        let grad_repr =
            Tensor::from_vec(&[enc_dim], grad_concat.data()[..enc_dim].to_vec())
                .map_err(ModelError::Neural)?;
        // context features are inputs, not parameters; their grads stop here
        let grad_embedded = self.encoder.backward(&cache.encoder, &grad_repr)?;
        debug_assert_eq!(grad_embedded.rows(), cache.embedded_rows);
        if self.embedding_trainable {
            for (row, &idx) in cache.indices.iter().enumerate() {
                if idx == PAD {
                    continue;
                }
                let g = grad_embedded.row(row);
                let dst = self.embedding.gradient.row_mut(idx);
                for (d, s) in dst.iter_mut().zip(g) {
                    *d += s;
                }
            }
        }
        Ok(())
    }

    /// Parameters in checkpoint order: embedding, encoder, reduction, head.
    pub fn all_params(&self) -> Vec<&Parameter> {
        let mut params = vec![&self.embedding];
        params.extend(self.encoder.params());
        params.push(&self.reduction_w);
        params.push(&self.reduction_b);
        params.push(&self.head_w);
        params.push(&self.head_b);
        params
    }

    pub fn all_params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut params = vec![&mut self.embedding];
        params.extend(self.encoder.params_mut());
        params.push(&mut self.reduction_w);
        params.push(&mut self.reduction_b);
        params.push(&mut self.head_w);
        params.push(&mut self.head_b);
        params
    }

    /// Parameters the optimizer updates (the embedding only when trainable).
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Parameter> {
        let trainable_embedding = self.embedding_trainable;
        let mut params: Vec<&mut Parameter> = Vec::new();
        let mut all = self.all_params_mut();
        if !trainable_embedding {
            all.remove(0);
        }
        params.extend(all);
        params
    }

    pub fn zero_grads(&mut self) {
        for p in self.all_params_mut() {
            p.zero_grad();
        }
    }

    /// Snapshot of all parameter values, for early-stopping restore.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.all_params().iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor]) {
        for (p, saved) in self.all_params_mut().iter_mut().zip(snapshot) {
            p.value = saved.clone();
        }
    }
}

fn glorot(param: &mut Parameter, fan_in: usize, fan_out: usize, rng: &mut RandomSource) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in param.value.data_mut() {
        *v = rng.uniform_in(-limit, limit);
    }
}

/// Argmax with ties broken by the lowest label index.
pub fn predict_single(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = i;
        }
    }
    best
}

/// All labels whose probability reaches the threshold; the empty set denotes
/// Nil. A probability exactly at the threshold is included.
pub fn predict_multi(probabilities: &[f64], threshold: f64) -> Vec<usize> {
    probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_single_argmax_and_ties() {
        assert_eq!(predict_single(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(predict_single(&[0.5, 0.5]), 0);
        assert_eq!(predict_single(&[0.25, 0.25, 0.25, 0.25]), 0);
    }

    #[test]
    fn predict_single_is_invariant_under_monotone_transforms() {
        let probs = [0.03, 0.4, 0.17, 0.4001, 0.0];
        let base = predict_single(&probs);
        let squared: Vec<f64> = probs.iter().map(|p| p * p).collect();
        let shifted: Vec<f64> = probs.iter().map(|p| 3.0 * p + 1.0).collect();
        assert_eq!(predict_single(&squared), base);
        assert_eq!(predict_single(&shifted), base);
    }

    #[test]
    fn predict_multi_threshold_boundary() {
        assert_eq!(predict_multi(&[0.9, 0.4, 0.6], 0.5), vec![0, 2]);
        assert!(predict_multi(&[0.1, 0.2], 0.5).is_empty());
        assert_eq!(predict_multi(&[0.5, 0.49999], 0.5), vec![0]);
    }
}
