//! Central finite-difference gradient verification.

use crate::neural::rng::RandomSource;
use crate::neural::tensor::Parameter;
use crate::neural::NeuralError;

/// A model fixture whose analytic gradients can be compared against finite
/// differences. `loss_and_grad` must leave the parameter gradients populated
/// for the fixed input fixture; `loss` evaluates the same fixture without
/// touching gradients.
pub trait GradCheckModel {
    fn loss_and_grad(&mut self) -> Result<f64, NeuralError>;
    fn loss(&mut self) -> Result<f64, NeuralError>;
    fn params_mut(&mut self) -> Vec<&mut Parameter>;
}

/// Outcome of a finite-difference sweep: the maximum relative error and the
/// coordinate that produced it.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub worst_param: String,
    pub worst_coord: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compares analytic gradients against central finite differences on a
/// random subsample of coordinates (all of them when the model is small).
/// Returns the maximum relative error
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn gradient_check(
    model: &mut dyn GradCheckModel,
    epsilon: f64,
    max_coords: usize,
    rng: &mut RandomSource,
) -> Result<f64, NeuralError> {
    Ok(gradient_check_report(model, epsilon, max_coords, rng)?.max_rel_error)
}

pub fn gradient_check_report(
    model: &mut dyn GradCheckModel,
    epsilon: f64,
    max_coords: usize,
    rng: &mut RandomSource,
) -> Result<GradCheckReport, NeuralError> {
    for p in model.params_mut() {
        p.zero_grad();
    }
    let base_loss = model.loss_and_grad()?;
    if !base_loss.is_finite() {
        return Err(NeuralError::NonFinite {
            layer: "gradient_check loss".into(),
        });
    }
    let analytic: Vec<Vec<f64>> = model
        .params_mut()
        .iter()
        .map(|p| p.gradient.data().to_vec())
        .collect();

    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (pi, grads) in analytic.iter().enumerate() {
        for ci in 0..grads.len() {
            coords.push((pi, ci));
        }
    }
    if coords.len() > max_coords {
        rng.shuffle(&mut coords);
        coords.truncate(max_coords);
    }

    let coords_checked = coords.len();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked,
        worst_param: String::new(),
        worst_coord: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for (pi, ci) in coords {
        let original = {
            let mut params = model.params_mut();
            let v = params[pi].value.data()[ci];
            params[pi].value.data_mut()[ci] = v + epsilon;
            v
        };
        let loss_plus = model.loss()?;
        {
            let mut params = model.params_mut();
            params[pi].value.data_mut()[ci] = original - epsilon;
        }
        let loss_minus = model.loss()?;
        {
            let mut params = model.params_mut();
            params[pi].value.data_mut()[ci] = original;
        }
        if !loss_plus.is_finite() || !loss_minus.is_finite() {
            return Err(NeuralError::NonFinite {
                layer: "gradient_check perturbed loss".into(),
            });
        }
        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let a = analytic[pi][ci];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = model.params_mut()[pi].name.clone();
            report.worst_coord = ci;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}
