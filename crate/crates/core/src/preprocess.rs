//! Median imputation and z-score standardization.
//!
//! Parameters are fitted on a training set only and then frozen; applying
//! them to another split never touches the fitted values.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerParams {
    pub medians: Vec<f64>,
    pub fitted_on: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub imputer: ImputerParams,
    pub scaler: ScalerParams,
    pub fingerprint: String,
}

/// Median of a non-empty slice; averages the two middle order statistics
/// for even counts.
fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

pub fn fit_imputer(train: &Dataset) -> Result<ImputerParams> {
    let medians = (0..train.n_features())
        .map(|j| {
            let mut present: Vec<f64> = train.column(j).filter(|v| !v.is_nan()).collect();
            if present.is_empty() {
                Err(Error::data(format!(
                    "column {} has no non-missing values",
                    train.schema.columns[j].name
                )))
            } else {
                Ok(median(&mut present))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImputerParams {
        medians,
        fitted_on: train.len(),
    })
}

fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::shape(format!(
            "parameters cover {expected} columns, data has {found}"
        )));
    }
    Ok(())
}

impl ImputerParams {
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_width(self.medians.len(), row.len())?;
        Ok(row
            .iter()
            .zip(&self.medians)
            .map(|(&v, &m)| if v.is_nan() { m } else { v })
            .collect())
    }
}

pub fn apply_imputer(params: &ImputerParams, ds: &Dataset) -> Result<Dataset> {
    check_width(params.medians.len(), ds.n_features())?;
    let mut out = ds.clone();
    for row in &mut out.features {
        *row = params.apply_row(row)?;
    }
    Ok(out)
}

/// Per-column mean and population standard deviation.
pub fn fit_scaler(train: &Dataset) -> Result<ScalerParams> {
    if train.is_empty() {
        return Err(Error::data("cannot fit a scaler on an empty dataset"));
    }
    if train.missing_count() > 0 {
        return Err(Error::data("scaler input still has missing cells; impute first"));
    }
    let n = train.len() as f64;
    let mut means = Vec::with_capacity(train.n_features());
    let mut stds = Vec::with_capacity(train.n_features());
    for j in 0..train.n_features() {
        let mean = train.column(j).sum::<f64>() / n;
        let var = train.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        means.push(mean);
        stds.push(var.sqrt());
    }
    Ok(ScalerParams { means, stds })
}

impl ScalerParams {
    /// `(x - mean) / std`, or 0 for zero-variance columns.
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_width(self.means.len(), row.len())?;
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| if s == 0.0 { 0.0 } else { (x - m) / s })
            .collect())
    }
}

pub fn apply_scaler(params: &ScalerParams, ds: &Dataset) -> Result<Dataset> {
    check_width(params.means.len(), ds.n_features())?;
    let mut out = ds.clone();
    for row in &mut out.features {
        *row = params.apply_row(row)?;
    }
    Ok(out)
}

impl PipelineParams {
    /// Fits the imputer, then the scaler on the imputed training rows.
    pub fn fit(train: &Dataset) -> Result<Self> {
        let imputer = fit_imputer(train)?;
        let scaler = fit_scaler(&apply_imputer(&imputer, train)?)?;
        Ok(PipelineParams {
            imputer,
            scaler,
            fingerprint: train.schema.fingerprint(),
        })
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.schema.fingerprint() != self.fingerprint {
            return Err(Error::data("dataset schema differs from the fitted pipeline"));
        }
        apply_scaler(&self.scaler, &apply_imputer(&self.imputer, ds)?)
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.scaler.apply_row(&self.imputer.apply_row(row)?)
    }
}
