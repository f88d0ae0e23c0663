use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers for a fixed set of parameter groups, laid out back to back.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, parameter_count: usize) -> Self {
        Self {
            config,
            first: vec![0.0; parameter_count],
            second: vec![0.0; parameter_count],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected update over `(params, grads)` groups. The groups'
    /// total length must equal the state's parameter count and stay in the
    /// same order across calls.
    pub fn step(&mut self, groups: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        let total: usize = groups.iter().map(|(p, _)| p.len()).sum();
        if total != self.first.len() {
            return Err(Error::Shape(format!(
                "adam state holds {} parameters, got {total}",
                self.first.len()
            )));
        }
        if let Some((p, g)) = groups.iter().find(|(p, g)| p.len() != g.len()) {
            return Err(Error::Shape(format!(
                "parameter group of length {} with gradient of length {}",
                p.len(),
                g.len()
            )));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let mut k = 0;
        for (params, grads) in groups.iter_mut() {
            for (p, &g) in params.iter_mut().zip(grads.iter()) {
                let m = &mut self.first[k];
                let v = &mut self.second[k];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                k += 1;
            }
        }
        Ok(())
    }
}
