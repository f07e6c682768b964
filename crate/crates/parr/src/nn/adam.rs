//! Adaptive-moment gradient descent.

use crate::error::{Error, Result};

use super::{GradSet, NetSpec, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub step: u64,
    pub m: GradSet,
    pub v: GradSet,
}

impl AdamState {
    pub fn new(spec: &NetSpec, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m: GradSet::zeros(spec),
            v: GradSet::zeros(spec),
        }
    }

    /// One optimizer step.
    ///
    /// Refuses to touch the parameters if any gradient entry is non-finite.
    pub fn apply(&mut self, params: &mut ParamSet, grads: &GradSet) -> Result<()> {
        if grads.layers.len() != params.layers.len() {
            return Err(Error::Contract(
                "gradient layer count does not match parameters".into(),
            ));
        }
        for (g, p) in grads.layers.iter().zip(&params.layers) {
            if g.weights.len() != p.weights.len() || g.biases.len() != p.biases.len() {
                return Err(Error::Contract("gradient shape mismatch".into()));
            }
        }
        if !grads.is_finite() {
            return Err(Error::Numerical(
                "non-finite gradient entry; optimizer step refused".into(),
            ));
        }

        self.step += 1;
        let t = self.step as i32;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for (l, grad_layer) in grads.layers.iter().enumerate() {
            let ml = &mut self.m.layers[l];
            let vl = &mut self.v.layers[l];
            let pl = &mut params.layers[l];

            for (idx, &g) in grad_layer.weights.iter().enumerate() {
                let m = beta1 * ml.weights[idx] + (1.0 - beta1) * g;
                let v = beta2 * vl.weights[idx] + (1.0 - beta2) * g * g;
                ml.weights[idx] = m;
                vl.weights[idx] = v;
                pl.weights[idx] -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            }
            for (idx, &g) in grad_layer.biases.iter().enumerate() {
                let m = beta1 * ml.biases[idx] + (1.0 - beta1) * g;
                let v = beta2 * vl.biases[idx] + (1.0 - beta2) * g * g;
                ml.biases[idx] = m;
                vl.biases[idx] = v;
                pl.biases[idx] -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
