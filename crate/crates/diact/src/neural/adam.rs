//! Adam optimizer with bias correction.

use crate::neural::tensor::{Parameter, Tensor};
use crate::neural::NeuralError;

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct AdamHyperParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyperParams {
    fn default() -> Self {
        AdamHyperParams {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub hyper: AdamHyperParams,
    moments: Vec<(Tensor, Tensor)>,
    step_count: u64,
}

impl AdamState {
    pub fn new(hyper: AdamHyperParams) -> AdamState {
        AdamState {
            hyper,
            moments: Vec::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update over `params`. Gradients must be populated; they are
/// zeroed after the step. Moment buffers are allocated on the first call and
/// stay aligned with the parameter order across calls.
pub fn adam_step(params: &mut [&mut Parameter], state: &mut AdamState) -> Result<(), NeuralError> {
    if state.moments.is_empty() {
        state.moments = params
            .iter()
            .map(|p| (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())))
            .collect();
    }
    if state.moments.len() != params.len() {
        return Err(NeuralError::ShapeMismatch {
            context: "adam".into(),
            detail: format!(
                "optimizer tracks {} parameters, got {}",
                state.moments.len(),
                params.len()
            ),
        });
    }
    for (p, (m, _)) in params.iter().zip(state.moments.iter()) {
        if p.value.shape() != m.shape() {
            return Err(NeuralError::ShapeMismatch {
                context: "adam".into(),
                detail: format!("parameter {} changed shape", p.name),
            });
        }
        if p.gradient.data().iter().any(|g| g.is_nan()) {
            return Err(NeuralError::NanGradient(p.name.clone()));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let h = state.hyper;
    let bc1 = 1.0 - h.beta1.powi(t);
    let bc2 = 1.0 - h.beta2.powi(t);
    for (p, (m, v)) in params.iter_mut().zip(state.moments.iter_mut()) {
        let grads = p.gradient.data();
        let ms = m.data_mut();
        let vs = v.data_mut();
        for i in 0..grads.len() {
            let g = grads[i];
            ms[i] = h.beta1 * ms[i] + (1.0 - h.beta1) * g;
            vs[i] = h.beta2 * vs[i] + (1.0 - h.beta2) * g * g;
        }
        let values = p.value.data_mut();
        for i in 0..values.len() {
            let m_hat = ms[i] / bc1;
            let v_hat = vs[i] / bc2;
            values[i] -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        }
        p.zero_grad();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(value: f64) -> Parameter {
        Parameter::new("x", Tensor::scalar(value))
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_param(0.0);
        p.gradient.data_mut()[0] = 1.0;
        let mut state = AdamState::new(AdamHyperParams::default());
        adam_step(&mut [&mut p], &mut state).unwrap();
        // bias-corrected first step is -lr * g/(|g| + eps') ~= -lr
        assert!((p.value.data()[0] + 0.001).abs() < 1e-9);
        assert_eq!(state.step_count(), 1);
        assert_eq!(p.gradient.data()[0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_value_but_counts_step() {
        let mut p = scalar_param(0.7);
        let mut state = AdamState::new(AdamHyperParams::default());
        adam_step(&mut [&mut p], &mut state).unwrap();
        assert_eq!(p.value.data()[0], 0.7);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn three_step_trajectory_matches_hand_recurrence() {
        let h = AdamHyperParams::default();
        let grads = [0.5, -1.25, 2.0];
        let mut p = scalar_param(1.0);
        let mut state = AdamState::new(h);

        // independent scalar recurrence
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        for (t, &g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = h.beta1 * m + (1.0 - h.beta1) * g;
            v = h.beta2 * v + (1.0 - h.beta2) * g * g;
            let m_hat = m / (1.0 - h.beta1.powi(t));
            let v_hat = v / (1.0 - h.beta2.powi(t));
            x -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        }

        for &g in &grads {
            p.gradient.data_mut()[0] = g;
            adam_step(&mut [&mut p], &mut state).unwrap();
        }
        assert!((p.value.data()[0] - x).abs() < 1e-12);
    }

    #[test]
    fn nan_gradient_is_an_error() {
        let mut p = scalar_param(0.0);
        p.gradient.data_mut()[0] = f64::NAN;
        let mut state = AdamState::new(AdamHyperParams::default());
        assert!(matches!(
            adam_step(&mut [&mut p], &mut state),
            Err(NeuralError::NanGradient(_))
        ));
    }
}
