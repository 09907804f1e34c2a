//! Platt scaling: a sigmoid fitted over raw decision values.
//!
//! Targets are smoothed to `(N₊+1)/(N₊+2)` and `1/(N₋+2)` so the optimum
//! stays finite on separable scores. Scores are standardized before the
//! fit and the coefficients mapped back afterwards, which keeps the Newton
//! iteration well conditioned whatever the scale of the decision values.
//! The objective is minimized with Newton steps on a lightly regularized
//! Hessian plus a backtracking line search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{sigmoid, softplus};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-10;
const HESSIAN_RIDGE: f64 = 1e-12;
const MIN_STEP: f64 = 1e-10;

/// Calibrated probability `σ(a·s + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    pub fn apply(&self, score: f64) -> f64 {
        sigmoid(self.a * score + self.b)
    }
}

fn targets(y: &[bool]) -> Vec<f64> {
    let pos = y.iter().filter(|v| **v).count() as f64;
    let neg = y.len() as f64 - pos;
    let (hi, lo) = ((pos + 1.0) / (pos + 2.0), 1.0 / (neg + 2.0));
    y.iter().map(|&v| if v { hi } else { lo }).collect()
}

fn objective(scores: &[f64], t: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(t)
        .map(|(s, ti)| {
            let z = a * s + b;
            softplus(z) - ti * z
        })
        .sum()
}

/// Fits `(a, b)` minimizing the cross-entropy of `σ(a·s + b)` against the
/// smoothed targets.
pub fn platt_calibrate(scores: &[f64], y: &[bool]) -> Result<Calibration> {
    if scores.len() != y.len() {
        return Err(Error::InvalidInput(
            "scores and labels differ in length".into(),
        ));
    }
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels(
            "calibration needs both classes".into(),
        ));
    }
    let t = targets(y);
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd.is_nan() || sd <= 0.0 || sd.is_infinite() {
        // Constant scores carry no signal; fit the prior.
        let tbar = t.iter().sum::<f64>() / n;
        return Ok(Calibration {
            a: 0.0,
            b: (tbar / (1.0 - tbar)).ln(),
        });
    }
    let z: Vec<f64> = scores.iter().map(|s| (s - mean) / sd).collect();
    let (a, b) = fit_standardized(&z, &t, pos, y.len() - pos)?;
    Ok(Calibration {
        a: a / sd,
        b: b - a * mean / sd,
    })
}

fn fit_standardized(scores: &[f64], t: &[f64], pos: usize, neg: usize) -> Result<(f64, f64)> {
    let (mut a, mut b) = (0.0, ((pos as f64 + 1.0) / (neg as f64 + 1.0)).ln());
    let mut f = objective(scores, t, a, b);

    for _ in 0..MAX_ITER {
        let (mut g1, mut g2) = (0.0, 0.0);
        let (mut h11, mut h22, mut h21) = (HESSIAN_RIDGE, HESSIAN_RIDGE, 0.0);
        for (s, ti) in scores.iter().zip(t) {
            let p = sigmoid(a * s + b);
            let d = p - ti;
            let w = p * (1.0 - p);
            g1 += d * s;
            g2 += d;
            h11 += w * s * s;
            h22 += w;
            h21 += w * s;
        }
        if g1.hypot(g2) < GRAD_TOL {
            return Ok((a, b));
        }
        let det = h11 * h22 - h21 * h21;
        let (da, db) = (-(h22 * g1 - h21 * g2) / det, -(-h21 * g1 + h11 * g2) / det);
        let slope = g1 * da + g2 * db;

        let mut step = 1.0;
        let mut accepted = false;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(scores, t, na, nb);
            if nf < f + 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            // No representable decrease left: accept when the Newton
            // decrement says the remaining gain is below the resolution of
            // the objective.
            if -slope <= 1e-12 * (1.0 + f.abs()) {
                return Ok((a, b));
            }
            return Err(Error::CalibrationFailed(format!(
                "line search stalled with gradient ({g1:e}, {g2:e})"
            )));
        }
    }
    Err(Error::CalibrationFailed(format!(
        "no convergence in {MAX_ITER} iterations"
    )))
}
