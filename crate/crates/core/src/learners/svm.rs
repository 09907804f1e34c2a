use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, dimension, platt_calibrate, LinearKind, LinearModel};
use crate::error::Result;
use crate::sparse::SparseVec;
use crate::tuner_eval::stratified_kfold;
use crate::util::derive_seed;

const CALIBRATION_FOLDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub l2: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            l2: 1e-4,
            epochs: 20,
        }
    }
}

/// Weight vector kept as `scale · v` so the per-step shrink is O(1).
struct ScaledWeights {
    v: Vec<f64>,
    vb: f64,
    scale: f64,
    sq_norm: f64,
}

impl ScaledWeights {
    fn margin(&self, x: &SparseVec) -> f64 {
        self.scale * (x.dot(&self.v) + self.vb)
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.vb = 0.0;
            self.scale = 1.0;
            self.sq_norm = 0.0;
            return;
        }
        self.scale *= factor;
        if self.scale < 1e-9 {
            let s = self.scale;
            self.v.iter_mut().for_each(|w| *w *= s);
            self.vb *= s;
            self.sq_norm *= s * s;
            self.scale = 1.0;
        }
    }

    /// `w += step · x` with the bias as a constant feature of value 1.
    fn add(&mut self, x: &SparseVec, step: f64) {
        let a = step / self.scale;
        let mut dot = self.vb;
        let mut xx = 1.0;
        for (id, val) in x.iter() {
            let i = id as usize;
            dot += self.v[i] * val;
            xx += val * val;
            self.v[i] += a * val;
        }
        self.vb += a;
        self.sq_norm += 2.0 * a * dot + a * a * xx;
    }

    fn norm(&self) -> f64 {
        self.scale * self.sq_norm.max(0.0).sqrt()
    }

    fn into_model(self) -> LinearModel {
        LinearModel {
            kind: LinearKind::Svm,
            weights: self.v.iter().map(|w| w * self.scale).collect(),
            bias: self.vb * self.scale,
            calibration: None,
        }
    }
}

/// Pegasos SGD on the L2-regularized hinge loss, step size `1/(l2·t)`.
///
/// The bias is learned as the weight of a constant feature and is
/// regularized with the rest. After each step the weights are projected
/// onto the ball of radius `1/√l2`.
pub fn pegasos(
    x: &[SparseVec],
    y: &[bool],
    dim: usize,
    params: &SvmParams,
    seed: u64,
) -> LinearModel {
    let mut w = ScaledWeights {
        v: vec![0.0; dim],
        vb: 0.0,
        scale: 1.0,
        sq_norm: 0.0,
    };
    let radius = 1.0 / params.l2.sqrt();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0usize;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.l2 * t as f64);
            let label = if y[i] { 1.0 } else { -1.0 };
            let violated = label * w.margin(&x[i]) < 1.0;
            w.shrink(1.0 - eta * params.l2);
            if violated {
                w.add(&x[i], eta * label);
            }
            let norm = w.norm();
            if norm > radius {
                w.shrink(radius / norm);
            }
        }
    }
    w.into_model()
}

/// Decision values from models that never saw the scored example, or
/// `None` when some internal training split holds a single class.
fn out_of_fold_scores(
    x: &[SparseVec],
    y: &[bool],
    dim: usize,
    params: &SvmParams,
    seed: u64,
) -> Option<Vec<f64>> {
    if x.len() < CALIBRATION_FOLDS {
        return None;
    }
    let labels: Vec<u8> = y.iter().map(|&v| v as u8).collect();
    let folds = stratified_kfold(&labels, CALIBRATION_FOLDS, derive_seed(seed, 1)).ok()?;
    let mut scores = vec![0.0; x.len()];
    for k in 0..CALIBRATION_FOLDS {
        let train: Vec<usize> = (0..x.len()).filter(|&i| folds.fold_of(i) != k).collect();
        let pos = train.iter().filter(|&&i| y[i]).count();
        if pos == 0 || pos == train.len() {
            return None;
        }
        let xs: Vec<SparseVec> = train.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let sub = pegasos(&xs, &ys, dim, params, derive_seed(seed, 2 + k as u64));
        for i in (0..x.len()).filter(|&i| folds.fold_of(i) == k) {
            scores[i] = sub.decision_value(&x[i]);
        }
    }
    Some(scores)
}

/// Pegasos fit plus Platt calibration on out-of-fold decision values.
///
/// When an internal fold would see a single class, calibration falls back
/// to the in-sample decision values of the full model.
pub fn train_linear_svm(
    x: &[SparseVec],
    y: &[bool],
    params: &SvmParams,
    seed: u64,
) -> Result<LinearModel> {
    check_training_set(x, y)?;
    let dim = dimension(x);
    let mut model = pegasos(x, y, dim, params, seed);
    let scores = out_of_fold_scores(x, y, dim, params, seed)
        .unwrap_or_else(|| x.iter().map(|xi| model.decision_value(xi)).collect());
    model.calibration = Some(platt_calibrate(&scores, y)?);
    Ok(model)
}
