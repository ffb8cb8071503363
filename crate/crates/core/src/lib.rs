//! Team rankings, decay-weighted historical rankings, underdog achievement
//! scores, a quantified randomness-factor model, and the supporting
//! statistics (PCA, correlation, Kruskal-Wallis, Dunn, Laney p'-chart) over
//! match-score corpora, plus a seeded tournament simulator that doubles as a
//! brute-force oracle for the pipeline.

pub mod cli;
pub mod data_model;
pub mod error;
pub mod factors;
pub mod ingest;
pub mod multivariate;
pub mod ranking;
pub mod simulate;
pub mod stats;
pub mod underdog;

pub use error::{Error, Result};
