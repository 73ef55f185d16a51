//! Cross-entropy losses over probability tensors.
//!
//! Probabilities are floored at [`PROB_FLOOR`] before every log so a
//! saturated head cannot produce an infinite loss.

use crate::neural::tensor::Tensor;
use crate::neural::NeuralError;

pub const PROB_FLOOR: f64 = 1e-12;

fn validate_shapes(
    context: &str,
    probabilities: &Tensor,
    targets: &Tensor,
) -> Result<(usize, usize), NeuralError> {
    if probabilities.shape() != targets.shape() || probabilities.rows() == 0 {
        return Err(NeuralError::ShapeMismatch {
            context: context.into(),
            detail: format!(
                "probabilities {:?} vs targets {:?}",
                probabilities.shape(),
                targets.shape()
            ),
        });
    }
    Ok((probabilities.rows(), probabilities.cols()))
}

/// Mean over the batch of `-log p(target class)`. Each probability row must
/// sum to 1 within 1e-9 and each target row must be one-hot.
pub fn categorical_cross_entropy(
    probabilities: &Tensor,
    one_hot_targets: &Tensor,
) -> Result<f64, NeuralError> {
    Ok(categorical_cross_entropy_with_grad(probabilities, one_hot_targets)?.0)
}

/// Loss plus its gradient with respect to the probabilities.
pub fn categorical_cross_entropy_with_grad(
    probabilities: &Tensor,
    one_hot_targets: &Tensor,
) -> Result<(f64, Tensor), NeuralError> {
    let (batch, classes) = validate_shapes("categorical_cross_entropy", probabilities, one_hot_targets)?;
    let mut grad = Tensor::zeros(&[batch, classes]);
    let mut total = 0.0;
    for b in 0..batch {
        let p = probabilities.row(b);
        let y = one_hot_targets.row(b);
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(NeuralError::InvalidProbability { row: b, sum });
        }
        let mut target = None;
        for (j, &yj) in y.iter().enumerate() {
            if yj == 1.0 {
                if target.is_some() {
                    return Err(NeuralError::TargetNotOneHot(b));
                }
                target = Some(j);
            } else if yj != 0.0 {
                return Err(NeuralError::TargetNotOneHot(b));
            }
        }
        let t = target.ok_or(NeuralError::TargetNotOneHot(b))?;
        let pt = p[t].max(PROB_FLOOR);
        total += -pt.ln();
        if p[t] > PROB_FLOOR {
            grad.row_mut(b)[t] = -1.0 / (p[t] * batch as f64);
        }
    }
    Ok((total / batch as f64, grad))
}

/// Mean over batch and classes of `-[y log p + (1-y) log(1-p)]`.
pub fn binary_cross_entropy(
    probabilities: &Tensor,
    multi_hot_targets: &Tensor,
) -> Result<f64, NeuralError> {
    Ok(binary_cross_entropy_with_grad(probabilities, multi_hot_targets)?.0)
}

pub fn binary_cross_entropy_with_grad(
    probabilities: &Tensor,
    multi_hot_targets: &Tensor,
) -> Result<(f64, Tensor), NeuralError> {
    let (batch, classes) = validate_shapes("binary_cross_entropy", probabilities, multi_hot_targets)?;
    let scale = 1.0 / (batch * classes) as f64;
    let mut grad = Tensor::zeros(&[batch, classes]);
    let mut total = 0.0;
    for b in 0..batch {
        let p = probabilities.row(b);
        let y = multi_hot_targets.row(b);
        let g = grad.row_mut(b);
        for j in 0..classes {
            let pj = p[j].max(PROB_FLOOR);
            let qj = (1.0 - p[j]).max(PROB_FLOOR);
            total += -(y[j] * pj.ln() + (1.0 - y[j]) * qj.ln());
            let mut d = 0.0;
            if p[j] > PROB_FLOOR {
                d -= y[j] / p[j];
            }
            if 1.0 - p[j] > PROB_FLOOR {
                d += (1.0 - y[j]) / (1.0 - p[j]);
            }
            g[j] = d * scale;
        }
    }
    Ok((total * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn perfect_prediction_zero_loss() {
        let p = t(&[1, 3], &[0.0, 1.0, 0.0]);
        let y = t(&[1, 3], &[0.0, 1.0, 0.0]);
        let loss = categorical_cross_entropy(&p, &y).unwrap();
        assert!(loss.abs() < 1e-9, "loss {loss}");
    }

    #[test]
    fn uniform_over_four_classes_is_ln4() {
        let p = t(&[2, 4], &[0.25; 8]);
        let y = t(&[2, 4], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let loss = categorical_cross_entropy(&p, &y).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ce_matches_hand_computation() {
        // mean of -ln p_target over the batch, computed by hand
        let p = t(&[2, 3], &[0.2, 0.5, 0.3, 0.1, 0.2, 0.7]);
        let y = t(&[2, 3], &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let expected = (-(0.5f64.ln()) - 0.7f64.ln()) / 2.0;
        let loss = categorical_cross_entropy(&p, &y).unwrap();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn ce_rejects_non_one_hot() {
        let p = t(&[1, 2], &[0.5, 0.5]);
        let y = t(&[1, 2], &[1.0, 1.0]);
        assert!(matches!(
            categorical_cross_entropy(&p, &y),
            Err(NeuralError::TargetNotOneHot(0))
        ));
    }

    #[test]
    fn ce_rejects_unnormalized_rows() {
        let p = t(&[1, 2], &[0.7, 0.7]);
        let y = t(&[1, 2], &[1.0, 0.0]);
        assert!(matches!(
            categorical_cross_entropy(&p, &y),
            Err(NeuralError::InvalidProbability { .. })
        ));
    }

    #[test]
    fn bce_exact_match_zero_loss() {
        let p = t(&[1, 3], &[1.0, 0.0, 1.0]);
        let y = t(&[1, 3], &[1.0, 0.0, 1.0]);
        let loss = binary_cross_entropy(&p, &y).unwrap();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let p = t(&[2, 3], &[0.5; 6]);
        let y = t(&[2, 3], &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let loss = binary_cross_entropy(&p, &y).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bce_matches_hand_computation() {
        let p = t(&[2, 3], &[0.9, 0.2, 0.6, 0.3, 0.8, 0.5]);
        let y = t(&[2, 3], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let mut expected = 0.0;
        for (pj, yj) in p.data().iter().zip(y.data().iter()) {
            expected += -(yj * pj.ln() + (1.0 - yj) * (1.0 - pj).ln());
        }
        expected /= 6.0;
        let loss = binary_cross_entropy(&p, &y).unwrap();
        assert!((loss - expected).abs() < 1e-12);
    }
}
