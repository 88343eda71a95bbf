//! Adam optimizer with bias-corrected moment estimates.

use crate::model::{Gradients, Model};
use crate::tensor::Tensor;
use crate::{NnError, Result};

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per trainable tensor, in the
/// same order as [`Model::trainable_params`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        let shapes: Vec<Vec<usize>> = model
            .trainable_params()
            .iter()
            .map(|t| t.shape().to_vec())
            .collect();
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Fails with a divergence error if any gradient or
    /// updated parameter is non-finite, leaving the model untouched in the
    /// gradient case.
    pub fn step(&mut self, model: &mut Model, grads: &Gradients) -> Result<()> {
        let flat_grads = grads.flat();
        for g in &flat_grads {
            if !g.all_finite() {
                return Err(NnError::Diverged("non-finite gradient"));
            }
        }
        let mut params = model.trainable_params_mut();
        if params.len() != flat_grads.len() {
            return Err(NnError::InvalidSpec(format!(
                "optimizer state covers {} tensors but gradients cover {}",
                params.len(),
                flat_grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as f64;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powf(t);
        let bc2 = 1.0 - c.beta2.powf(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(&flat_grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for ((p, g), (mv, vv)) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mv = c.beta1 * *mv + (1.0 - c.beta1) * g;
                *vv = c.beta2 * *vv + (1.0 - c.beta2) * g * g;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        for param in params {
            if !param.all_finite() {
                return Err(NnError::Diverged("non-finite parameter after update"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{LayerSpec, Phase};

    /// Minimizing (w·1 + b − 3)² with Adam drives the output to 3.
    #[test]
    fn adam_converges_on_quadratic() {
        let mut model = Model::new(vec![LayerSpec::FullyConnected {
            in_features: 1,
            out_features: 1,
        }])
        .unwrap();
        model.init_params(3);
        let mut adam = AdamState::new(&model, AdamConfig::with_learning_rate(0.05));
        let input = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
        let target = Tensor::from_vec(&[1, 1], vec![3.0]).unwrap();
        let mut last_loss = f64::INFINITY;
        for _ in 0..500 {
            let cache = model.forward_cached(&input, Phase::Train, 0).unwrap();
            let (loss, grads) = model.backward(&cache, &target).unwrap();
            adam.step(&mut model, &grads).unwrap();
            last_loss = loss;
        }
        assert!(last_loss < 1e-8, "loss {last_loss}");
        assert_eq!(adam.step_count(), 500);
    }

    #[test]
    fn non_finite_gradient_reports_divergence() {
        let mut model = Model::new(vec![LayerSpec::FullyConnected {
            in_features: 1,
            out_features: 1,
        }])
        .unwrap();
        let mut adam = AdamState::new(&model, AdamConfig::with_learning_rate(0.01));
        let grads = Gradients {
            layers: vec![vec![
                ("weight", Tensor::from_vec(&[1, 1], vec![f64::NAN]).unwrap()),
                ("bias", Tensor::zeros(&[1])),
            ]],
        };
        let before = model.layers[0].param("weight").clone();
        let err = adam.step(&mut model, &grads).unwrap_err();
        assert!(matches!(err, NnError::Diverged(_)));
        // The model is untouched after a rejected step.
        assert_eq!(model.layers[0].param("weight"), &before);
    }
}
