//! Ensemble text classification for clinical-trial cohort selection.
//!
//! Every document gets one met / not-met decision per eligibility
//! criterion. Each criterion has its own soft-voting ensemble of logistic
//! regression, a calibrated linear SVM and gradient-boosted trees over
//! TF-IDF, entity keyword, gazetteer, context-window and doc-classifier
//! features.

pub mod cli;
pub mod corpus;
pub mod doclevel_clf;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod learners;
pub mod pipeline;
pub mod sparse;
pub mod tuner_eval;
pub mod util;

pub use error::{Error, Result};
