//! Lane-change intention recognition from lane-aligned vehicle trajectories.
//!
//! The pipeline runs `ingest` -> `preprocess` -> `kinematics` -> `features`
//! -> `dataset`, after which any of the four classifiers (`gbdt` with exact or
//! histogram split finding, `svm`, `lstm`) can be trained and scored with
//! `eval`. `synthgen` produces deterministic freeway corpora for desk-scale
//! experiments.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod ingest;
pub mod kinematics;
pub mod lstm;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod standardize;
pub mod svm;
pub mod synthgen;

pub use dataset::Class;
pub use error::{Error, Result};
pub use matrix::Matrix;
