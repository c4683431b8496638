//! From-scratch binary classification for tabular clinical data.
//!
//! The crate covers the whole workflow for the 14-column heart-disease
//! table: CSV ingestion and seeded splitting ([`data`]), train-only
//! imputation and standardization ([`preprocess`]), three classifier
//! families ([`linear_model`], [`neighbors`], [`forest`]), cross-validated
//! hyperparameter search ([`tuning`]) and the metric/report suite
//! ([`evaluation`]). Every stochastic step draws from the splitmix64
//! generator in [`rng`], so results are reproducible bit for bit.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod linear_model;
pub mod neighbors;
pub mod preprocess;
pub mod rng;
pub mod tuning;

pub use error::{Error, Result};

/// Row-major feature matrix.
pub type Matrix = Vec<Vec<f64>>;

/// Shared prediction contract of every fitted model.
pub trait Classifier {
    /// Probability-like score for class 1.
    fn predict_proba(&self, x: &[f64]) -> Result<f64>;

    fn predict(&self, x: &[f64]) -> Result<u8>;

    fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    fn predict_proba_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }
}
