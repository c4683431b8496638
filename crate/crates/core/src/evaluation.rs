//! Binary classification metrics: confusion matrix, per-class report,
//! accuracy and ROC/AUC.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Decimal places in the rendered text report.
pub const REPORT_DIGITS: usize = 2;

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn to_csv(&self) -> String {
        let c = &self.counts;
        format!(
            "true_label,predicted_0,predicted_1\n0,{},{}\n1,{},{}\n",
            c[0][0], c[0][1], c[1][0], c[1][1]
        )
    }
}

fn check_binary(values: &[u8], what: &str) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(v) => Err(Error::data(format!("{what} contains non-binary value {v}"))),
        None => Ok(()),
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{a} true labels but {b} predictions")));
    }
    Ok(())
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    check_lengths(y_true.len(), y_pred.len())?;
    check_binary(y_true, "y_true")?;
    check_binary(y_pred, "y_pred")?;
    let mut counts = [[0u64; 2]; 2];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[t as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(Error::invalid("accuracy of an empty prediction set"));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total_support: u64,
}

/// `num / den`, or 0 when the denominator is 0.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn class_report(cm: &ConfusionMatrix) -> Result<ClassReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("class report of an empty confusion matrix"));
    }
    let c = &cm.counts;
    let metrics = |k: usize| {
        let tp = c[k][k] as f64;
        let predicted = (c[0][k] + c[1][k]) as f64;
        let support = c[k][0] + c[k][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support as f64);
        ClassMetrics {
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
            support,
        }
    };
    let classes = [metrics(0), metrics(1)];
    let macro_avg = Averages {
        precision: (classes[0].precision + classes[1].precision) / 2.0,
        recall: (classes[0].recall + classes[1].recall) / 2.0,
        f1: (classes[0].f1 + classes[1].f1) / 2.0,
    };
    let weight = |f: fn(&ClassMetrics) -> f64| {
        classes.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    let weighted_avg = Averages {
        precision: weight(|m| m.precision),
        recall: weight(|m| m.recall),
        f1: weight(|m| m.f1),
    };
    Ok(ClassReport {
        classes,
        accuracy: (c[0][0] + c[1][1]) as f64 / total as f64,
        macro_avg,
        weighted_avg,
        total_support: total,
    })
}

const LABEL_WIDTH: usize = "weighted avg".len();

impl ClassReport {
    /// Plain-text table: one row per class, then accuracy, macro and
    /// weighted averages, at two decimals.
    pub fn render(&self) -> String {
        let w = LABEL_WIDTH;
        let d = REPORT_DIGITS;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>w$}  {:>9} {:>9} {:>9} {:>9}\n",
            "", "precision", "recall", "f1-score", "support"
        );
        for (k, m) in self.classes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>w$}  {:>9.d$} {:>9.d$} {:>9.d$} {:>9}",
                k, m.precision, m.recall, m.f1, m.support
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:>w$}  {:>9} {:>9} {:>9.d$} {:>9}",
            "accuracy", "", "", self.accuracy, self.total_support
        );
        for (label, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:>w$}  {:>9.d$} {:>9.d$} {:>9.d$} {:>9}",
                label, a.precision, a.recall, a.f1, self.total_support
            );
        }
        out
    }
}

/// Numbers read back from a rendered report, at printed precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    /// `(label, values)`; values are `[precision, recall, f1, support]`, or
    /// `[accuracy, support]` for the accuracy row.
    pub rows: Vec<(String, Vec<f64>)>,
}

pub fn parse_report(text: &str) -> Result<ParsedReport> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.split_whitespace().collect::<Vec<_>>() != ["precision", "recall", "f1-score", "support"] {
        return Err(Error::data(format!("unexpected report header {header:?}")));
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let numeric_from = tokens
            .iter()
            .position(|t| t.parse::<f64>().is_ok())
            .filter(|&i| i > 0 || tokens.len() == 5)
            .ok_or_else(|| Error::data(format!("no values in report row {line:?}")))?;
        // Class rows start with a numeric label.
        let split = if tokens.len() == 5 { 1 } else { numeric_from };
        let label = tokens[..split].join(" ");
        let values = tokens[split..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::data(format!("bad number {t:?} in {line:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((label, values));
    }
    Ok(ParsedReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false-positive rate, true-positive rate)` from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    /// Score threshold that produces each point; +inf for the origin.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for (&(fpr, tpr), thr) in self.points.iter().zip(&self.thresholds) {
            let _ = writeln!(out, "{fpr},{tpr},{thr}");
        }
        out
    }
}

/// ROC curve swept over every distinct score, highest first. Samples with
/// equal scores enter the positive set together.
pub fn roc_points(y_true: &[u8], scores: &[f64]) -> Result<RocCurve> {
    check_lengths(y_true.len(), scores.len())?;
    check_binary(y_true, "y_true")?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::data("scores must be finite"));
    }
    let positives = y_true.iter().filter(|&&t| t == 1).count();
    let negatives = y_true.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("ROC needs both classes present; AUC is undefined"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if y_true[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(score);
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
        thresholds.push(f64::NEG_INFINITY);
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve {
        points,
        thresholds,
        auc,
    })
}
