//! L2-regularized binary logistic regression fitted by full-batch gradient
//! descent.

use serde::{Deserialize, Serialize};

use crate::{Classifier, Error, Result};

/// Floor applied to probabilities inside logarithms.
const LOG_FLOOR: f64 = 1e-12;
/// Maximum step halvings before a step is declared stationary.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2_lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient's infinity norm falls below this.
    pub tol: f64,
    pub learning_rate: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2_lambda: 1.0,
            max_iter: 5000,
            tol: 1e-6,
            learning_rate: 0.5,
        }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::param("l2_lambda", "must be a finite value >= 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be > 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LogRegConfig,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Logistic function, evaluated without ever exponentiating a large
/// positive argument.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    pub grad_b: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(x: &[Vec<f64>], y: &[u8], width: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::shape("no rows"));
    }
    if let Some(i) = x.iter().position(|r| r.len() != width) {
        return Err(Error::shape(format!(
            "row {i} has {} values, expected {width}",
            x[i].len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&t| t > 1) {
        return Err(Error::data(format!("label {bad} is not binary")));
    }
    Ok(())
}

/// Data term of the objective: mean negative log-likelihood and its
/// gradient, without the penalty.
fn data_loss_gradient(w: &[f64], b: f64, x: &[Vec<f64>], y: &[u8]) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; w.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let p = sigmoid(dot(w, row) + b);
        let t = label as f64;
        loss -= t * p.max(LOG_FLOOR).ln() + (1.0 - t) * (1.0 - p).max(LOG_FLOOR).ln();
        let residual = p - t;
        for (g, &v) in grad_w.iter_mut().zip(row) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    grad_w.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad_w, grad_b / n)
}

fn penalty(w: &[f64], lambda: f64, n: usize) -> f64 {
    lambda / (2.0 * n as f64) * dot(w, w)
}

/// Regularized loss
/// `-(1/n) Σ [y ln p + (1-y) ln(1-p)] + λ/(2n) ‖w‖²` and its gradient.
/// The bias is not penalized.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
    x: &[Vec<f64>],
    y: &[u8],
) -> Result<LossGradient> {
    check_inputs(x, y, weights.len())?;
    let n = x.len();
    let (data_loss, mut grad_w, grad_b) = data_loss_gradient(weights, bias, x, y);
    let scale = l2_lambda / n as f64;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g += scale * w;
    }
    Ok(LossGradient {
        loss: data_loss + penalty(weights, l2_lambda, n),
        grad_w,
        grad_b,
    })
}

/// Fits from zero initialization. See [`fit_traced`] for the step rule.
pub fn fit(config: &LogRegConfig, x: &[Vec<f64>], y: &[u8]) -> Result<LogRegModel> {
    fit_traced(config, x, y).map(|(model, _)| model)
}

/// Fits and also returns the regularized loss after every accepted step,
/// starting with the loss at the zero initialization.
///
/// Each iteration takes a gradient step on the data term and applies the
/// L2 penalty in closed form, `w ← (w − η·∇data) / (1 + η·λ/n)`, which has
/// the same fixed point as a plain gradient step but stays stable for large
/// λ. The step starts at `learning_rate`; if it would raise the objective
/// it is halved until it does not.
pub fn fit_traced(
    config: &LogRegConfig,
    x: &[Vec<f64>],
    y: &[u8],
) -> Result<(LogRegModel, Vec<f64>)> {
    config.validate()?;
    let width = x.first().map_or(0, |r| r.len());
    check_inputs(x, y, width)?;
    if x.len() < 2 {
        return Err(Error::data("logistic regression needs at least 2 rows"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("feature matrix contains NaN or infinite values"));
    }
    let ones = y.iter().filter(|&&t| t == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::data("training labels contain a single class"));
    }

    let n = x.len();
    let shrink = config.l2_lambda / n as f64;
    let mut w = vec![0.0; width];
    let mut b = 0.0;
    let (data_loss, mut grad_w, mut grad_b) = data_loss_gradient(&w, b, x, y);
    let mut objective = data_loss + penalty(&w, config.l2_lambda, n);
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let grad_norm = grad_w
            .iter()
            .zip(&w)
            .map(|(g, wj)| (g + shrink * wj).abs())
            .fold(grad_b.abs(), f64::max);
        if grad_norm < config.tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }

        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let denom = 1.0 + step * shrink;
            let w_next: Vec<f64> = w
                .iter()
                .zip(&grad_w)
                .map(|(wj, g)| (wj - step * g) / denom)
                .collect();
            let b_next = b - step * grad_b;
            let (l, gw, gb) = data_loss_gradient(&w_next, b_next, x, y);
            let obj = l + penalty(&w_next, config.l2_lambda, n);
            if obj <= objective {
                accepted = Some((w_next, b_next, gw, gb, obj));
                break;
            }
            step /= 2.0;
        }
        // No descent direction left at floating-point resolution.
        let Some((w_next, b_next, gw, gb, obj)) = accepted else {
            converged = true;
            break;
        };
        w = w_next;
        b = b_next;
        grad_w = gw;
        grad_b = gb;
        objective = obj;
        trace.push(objective);
        iterations += 1;
    }

    Ok((
        LogRegModel {
            weights: w,
            bias: b,
            config: config.clone(),
            iterations_run: iterations,
            converged,
        },
        trace,
    ))
}

impl LogRegModel {
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::shape(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.weights.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("input contains NaN or infinite values"));
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    /// Signed weights paired with feature names, in column order.
    pub fn coefficients<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<(String, f64)>> {
        if names.len() != self.weights.len() {
            return Err(Error::shape(format!(
                "{} names for {} weights",
                names.len(),
                self.weights.len()
            )));
        }
        Ok(names
            .iter()
            .map(|n| n.as_ref().to_string())
            .zip(self.weights.iter().copied())
            .collect())
    }
}

impl Classifier for LogRegModel {
    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.decision_value(x)?))
    }

    /// Class 1 iff the probability is at least 0.5.
    fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= 0.5))
    }
}
