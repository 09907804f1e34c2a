//! Base classifiers of the ensemble. Each one yields P(met) for a label's
//! sparse feature vector.

mod gbdt;
mod logreg;
mod platt;
mod svm;

use serde::{Deserialize, Serialize};

pub use gbdt::{train_gbdt, GbdtModel, GbdtParams, RegressionTree, TreeNode};
pub use logreg::{logreg_gradient, logreg_loss, train_logreg, LogregParams};
pub use platt::{platt_calibrate, Calibration};
pub use svm::{pegasos, train_linear_svm, SvmParams};

use crate::error::{Error, Result};
use crate::sparse::SparseVec;
use crate::util::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logreg,
    Svm,
}

/// Dense weights over a label's feature space plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, dim: usize) -> Self {
        LinearModel {
            kind,
            weights: vec![0.0; dim],
            bias: 0.0,
            calibration: None,
        }
    }

    /// `w·x + b`; feature ids beyond the weight vector are ignored.
    pub fn decision_value(&self, x: &SparseVec) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, x: &SparseVec) -> f64 {
        let s = self.decision_value(x);
        match (self.kind, self.calibration) {
            (LinearKind::Svm, Some(c)) => c.apply(s),
            _ => sigmoid(s),
        }
    }
}

/// Any trained base model.
pub trait ProbabilisticClassifier {
    fn predict_proba(&self, x: &SparseVec) -> f64;
}

impl ProbabilisticClassifier for LinearModel {
    fn predict_proba(&self, x: &SparseVec) -> f64 {
        LinearModel::predict_proba(self, x)
    }
}

impl ProbabilisticClassifier for GbdtModel {
    fn predict_proba(&self, x: &SparseVec) -> f64 {
        GbdtModel::predict_proba(self, x)
    }
}

pub fn predict_proba(model: &dyn ProbabilisticClassifier, x: &SparseVec) -> f64 {
    model.predict_proba(x)
}

pub(crate) fn check_training_set(x: &[SparseVec], y: &[bool]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature vectors but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two training examples".into(),
        ));
    }
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels(format!(
            "{pos} positives out of {} examples",
            y.len()
        )));
    }
    Ok(())
}

pub(crate) fn dimension(x: &[SparseVec]) -> usize {
    x.iter()
        .filter_map(|v| v.max_id())
        .max()
        .map_or(0, |m| m as usize + 1)
}
