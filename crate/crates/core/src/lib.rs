//! Relearning-based ensemble selection (RES) for bagged RBF-SVM pools.
//!
//! Each pool member is retrained with a probe object injected under both
//! labels; the resulting score drift feeds a per-member second-level model
//! that predicts whether the member will classify the probe correctly.
//! Members predicted to be right are combined with the sum rule.

pub mod counter;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod pool;
pub mod relearn;
pub mod res;
pub mod svm;

pub use counter::{TrainingCounter, TrainingCounts};
pub use data::{Dataset, Label, LabeledSample};
pub use error::{Error, Result};
