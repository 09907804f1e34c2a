use serde::{Deserialize, Serialize};

use super::{check_training_set, dimension, LinearKind, LinearModel};
use crate::error::Result;
use crate::sparse::SparseVec;
use crate::util::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    pub l2: f64,
    pub iters: usize,
    pub lr: f64,
}

impl Default for LogregParams {
    fn default() -> Self {
        LogregParams {
            l2: 1e-4,
            iters: 200,
            lr: 0.5,
        }
    }
}

/// Mean log loss plus `l2/2 · |w|²` (bias unregularized).
pub fn logreg_loss(x: &[SparseVec], y: &[bool], w: &[f64], b: f64, l2: f64) -> f64 {
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let z = xi.dot(w) + b;
            softplus(z) - if yi { z } else { 0.0 }
        })
        .sum::<f64>()
        / x.len() as f64;
    data + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`logreg_loss`] with respect to `(w, b)`.
pub fn logreg_gradient(x: &[SparseVec], y: &[bool], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = w.iter().map(|v| l2 * v).collect();
    let mut gb = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let r = (sigmoid(xi.dot(w) + b) - if yi { 1.0 } else { 0.0 }) / n;
        for (id, v) in xi.iter() {
            if let Some(g) = gw.get_mut(id as usize) {
                *g += r * v;
            }
        }
        gb += r;
    }
    (gw, gb)
}

/// Full-batch gradient descent from zero weights.
pub fn train_logreg(x: &[SparseVec], y: &[bool], params: &LogregParams) -> Result<LinearModel> {
    check_training_set(x, y)?;
    let mut model = LinearModel::zeros(LinearKind::Logreg, dimension(x));
    for _ in 0..params.iters {
        let (gw, gb) = logreg_gradient(x, y, &model.weights, model.bias, params.l2);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= params.lr * g;
        }
        model.bias -= params.lr * gb;
    }
    Ok(model)
}
