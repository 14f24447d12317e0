//! Parameter updates.

use crate::params::{Gradients, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Plain SGD with rate `lr / (1 + decay * epoch)`.
    Sgd { lr: f64, decay: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Sgd { lr: 0.1, decay: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    /// Gradients with a larger global norm are rescaled to this norm.
    pub clip: Option<f64>,
    epoch: usize,
    steps: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, clip: Option<f64>) -> Self {
        Optimizer { kind, clip, epoch: 0, steps: 0, moments: Vec::new() }
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn learning_rate(&self) -> f64 {
        match self.kind {
            OptimizerKind::Sgd { lr, decay } => lr / (1.0 + decay * self.epoch as f64),
            OptimizerKind::Adam { lr, .. } => lr,
        }
    }

    /// Applies one update from `grads`.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        let mut k = 1.0;
        if let Some(c) = self.clip {
            let n = grads.norm();
            if n > c {
                k = c / n;
            }
        }
        self.steps += 1;
        let lr = self.learning_rate();
        match self.kind {
            OptimizerKind::Sgd { .. } => {
                for (id, g) in grads.iter() {
                    let t = store.get_mut(id);
                    t.values.iter_mut().zip(g).for_each(|(w, g)| *w -= lr * k * g);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps, .. } => {
                if self.moments.len() < store.len() {
                    self.moments.resize(store.len(), (Vec::new(), Vec::new()));
                }
                let c1 = 1.0 - beta1.powi(self.steps as i32);
                let c2 = 1.0 - beta2.powi(self.steps as i32);
                for (id, g) in grads.iter() {
                    let (m, v) = &mut self.moments[id.0];
                    if m.is_empty() {
                        *m = vec![0.0; g.len()];
                        *v = vec![0.0; g.len()];
                    }
                    let t = store.get_mut(id);
                    for i in 0..g.len() {
                        let gi = k * g[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        t.values[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}
