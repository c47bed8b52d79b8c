//! Downstream evaluation of embeddings.
//!
//! * node classification: multinomial logistic regression trained on a small
//!   labelled fraction, accuracy averaged over many seeded splits;
//! * hyperedge prediction: a binary logistic classifier on the per-dimension
//!   variance of member embeddings, scored by ROC AUC against sampled
//!   negative tuples.

mod classify;
mod hyperedge;
mod metrics;

pub use classify::{
    cross_entropy, evaluate_classification, train_classifier, ClassificationReport, LogisticModel,
    LogisticParams, Scaling, Split,
};
pub use hyperedge::{
    evaluate_hyperedge_prediction, hide_hyperedges, hyperedge_feature, sample_negatives,
    sample_negatives_for, HiddenSplit, LinkParams, LinkReport,
};
pub use metrics::{accuracy, auc_rank, auc_trapezoid, mean_std};
