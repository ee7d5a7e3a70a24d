//! Word-frequency profiles of national news media and the classifiers that
//! separate higher-peace from lower-peace countries.
//!
//! Pipeline: [`corpus`] counts words per country, [`preprocess`] filters and
//! normalizes them, [`dataset`] builds the log-frequency matrix, [`models`]
//! and [`evaluation`] train and score classifiers with leave-one-out
//! validation, [`features`] turns model attributions into word clouds, and
//! [`semantic`] projects word embeddings to 2-D and clusters them.
//! [`synth`] generates labeled corpora with planted marker words.

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod label;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod semantic;
pub mod synth;

pub use error::{Error, Result};
pub use label::{Class, PeaceLabel};
