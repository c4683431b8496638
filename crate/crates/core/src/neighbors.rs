//! Brute-force k-nearest-neighbors classification with a total tie order.

use serde::{Deserialize, Serialize};

use crate::{Classifier, Error, Result};

pub const DEFAULT_K: usize = 5;

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train_features: Vec<Vec<f64>>,
    pub train_labels: Vec<u8>,
    /// Original row ids, used to order equidistant neighbors.
    pub train_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    pub id: usize,
    pub label: u8,
}

impl KnnModel {
    /// Stores the training rows with ids `0..n`.
    pub fn fit(k: usize, x: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        Self::fit_with_ids(k, x, y, (0..y.len()).collect())
    }

    pub fn fit_with_ids(k: usize, x: &[Vec<f64>], y: &[u8], ids: Vec<usize>) -> Result<Self> {
        if x.len() != y.len() || ids.len() != y.len() {
            return Err(Error::shape(format!(
                "{} rows, {} labels, {} ids",
                x.len(),
                y.len(),
                ids.len()
            )));
        }
        if k == 0 || k > y.len() {
            return Err(Error::param("k", format!("must lie in 1..={}, got {k}", y.len())));
        }
        if let Some(&bad) = y.iter().find(|&&t| t > 1) {
            return Err(Error::data(format!("label {bad} is not binary")));
        }
        if let Some(w) = x.first().map(|r| r.len()) {
            if x.iter().any(|r| r.len() != w) {
                return Err(Error::shape("training rows have differing widths"));
            }
        }
        Ok(KnnModel {
            k,
            train_features: x.to_vec(),
            train_labels: y.to_vec(),
            train_ids: ids,
        })
    }

    /// The `k` closest training rows by `(distance, id)`, in that order.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<Neighbor>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("query contains NaN or infinite values"));
        }
        let mut all = self
            .train_features
            .iter()
            .zip(&self.train_labels)
            .zip(&self.train_ids)
            .map(|((row, &label), &id)| {
                Ok(Neighbor {
                    distance: euclidean_distance(row, x)?,
                    id,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let order = |a: &Neighbor, b: &Neighbor| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id));
        if self.k < all.len() {
            all.select_nth_unstable_by(self.k - 1, order);
            all.truncate(self.k);
        }
        all.sort_unstable_by(order);
        Ok(all)
    }
}

/// Majority vote; an even split goes to the class with the smaller summed
/// distance, and a full tie to class 0.
fn vote(neighbors: &[Neighbor]) -> u8 {
    let ones = neighbors.iter().filter(|n| n.label == 1).count();
    let zeros = neighbors.len() - ones;
    if ones != zeros {
        return u8::from(ones > zeros);
    }
    let sum = |class: u8| -> f64 {
        neighbors
            .iter()
            .filter(|n| n.label == class)
            .map(|n| n.distance)
            .sum()
    };
    u8::from(sum(1) < sum(0))
}

impl Classifier for KnnModel {
    /// Fraction of the `k` neighbors labeled 1.
    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        let nb = self.neighbors(x)?;
        Ok(nb.iter().filter(|n| n.label == 1).count() as f64 / nb.len() as f64)
    }

    fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(vote(&self.neighbors(x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepResult {
    pub ks: Vec<usize>,
    pub train_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
}

impl KSweepResult {
    /// `k,train_score,test_score` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,train_score,test_score\n");
        for ((k, tr), te) in self.ks.iter().zip(&self.train_scores).zip(&self.test_scores) {
            out.push_str(&format!("{k},{tr},{te}\n"));
        }
        out
    }
}

fn accuracy_of(model: &KnnModel, x: &[Vec<f64>], y: &[u8]) -> Result<f64> {
    let hits = x
        .iter()
        .zip(y)
        .map(|(row, &t)| Ok(u8::from(model.predict(row)? == t) as usize))
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / y.len() as f64)
}

/// Train and test accuracy for each `k` in `ks`, always fitting on the
/// training rows.
pub fn k_sweep(
    train: (&[Vec<f64>], &[u8], &[usize]),
    test: (&[Vec<f64>], &[u8]),
    ks: &[usize],
) -> Result<KSweepResult> {
    if ks.is_empty() {
        return Err(Error::invalid("k sweep needs a non-empty range"));
    }
    if test.1.is_empty() {
        return Err(Error::invalid("k sweep needs a non-empty test set"));
    }
    let mut result = KSweepResult {
        ks: ks.to_vec(),
        train_scores: Vec::with_capacity(ks.len()),
        test_scores: Vec::with_capacity(ks.len()),
    };
    for &k in ks {
        let model = KnnModel::fit_with_ids(k, train.0, train.1, train.2.to_vec())?;
        result.train_scores.push(accuracy_of(&model, train.0, train.1)?);
        result.test_scores.push(accuracy_of(&model, test.0, test.1)?);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn padded(a: f64, b: f64) -> Vec<f64> {
        let mut v = vec![0.0; 13];
        v[0] = a;
        v[1] = b;
        v
    }

    #[test]
    fn distance_basics() {
        let a = padded(0.0, 0.0);
        let b = padded(3.0, 4.0);
        assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&a, &b).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&b, &a).unwrap(), 5.0);
        assert!(euclidean_distance(&a, &b[..12]).is_err());
    }

    #[test]
    fn one_neighbor_returns_own_label() {
        let x = vec![padded(0.0, 0.0), padded(1.0, 0.0), padded(5.0, 5.0)];
        let model = KnnModel::fit(1, &x, &[0, 1, 1]).unwrap();
        for (row, label) in x.iter().zip([0, 1, 1]) {
            assert_eq!(model.predict(row).unwrap(), label);
        }
    }

    #[test]
    fn even_vote_goes_to_closer_class() {
        let x = vec![vec![1.0], vec![-2.0]];
        let model = KnnModel::fit(2, &x, &[0, 1]).unwrap();
        assert_eq!(model.predict(&[0.0]).unwrap(), 0);
        assert_eq!(model.predict_proba(&[0.0]).unwrap(), 0.5);

        let model = KnnModel::fit(2, &[vec![1.0], vec![-1.0]], &[1, 0]).unwrap();
        assert_eq!(model.predict(&[0.0]).unwrap(), 0, "full tie goes to class 0");
    }

    #[test]
    fn equidistant_rows_ordered_by_id() {
        let x = vec![vec![1.0], vec![-1.0], vec![1.0]];
        let model = KnnModel::fit_with_ids(1, &x, &[1, 0, 0], vec![7, 3, 5]).unwrap();
        assert_eq!(model.neighbors(&[0.0]).unwrap()[0].id, 3);
        assert_eq!(model.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn invalid_k() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(KnnModel::fit(0, &x, &[0, 1]).is_err());
        assert!(KnnModel::fit(3, &x, &[0, 1]).is_err());
    }

    #[test]
    fn permuting_training_rows_keeps_predictions() {
        let mut rng = SplitMix64::new(12);
        let mut draw = || (rng.gen_below(5).unwrap() as f64) - 2.0;
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![draw(), draw()]).collect();
        let y: Vec<u8> = (0..30).map(|i| (i % 3 == 0) as u8).collect();
        let ids: Vec<usize> = (0..30).collect();
        let mut order: Vec<usize> = (0..30).collect();
        SplitMix64::new(99).shuffle(&mut order);
        let px: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let py: Vec<u8> = order.iter().map(|&i| y[i]).collect();
        for k in 1..=10 {
            let a = KnnModel::fit_with_ids(k, &x, &y, ids.clone()).unwrap();
            let b = KnnModel::fit_with_ids(k, &px, &py, order.clone()).unwrap();
            for q in -2..=2 {
                for r in -2..=2 {
                    let query = [q as f64 * 0.9, r as f64];
                    assert_eq!(a.predict(&query).unwrap(), b.predict(&query).unwrap());
                    assert_eq!(a.predict_proba(&query).unwrap(), b.predict_proba(&query).unwrap());
                }
            }
        }
    }

    #[test]
    fn sweep_edges() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
        let y = vec![0, 0, 1, 1];
        let ids = vec![0, 1, 2, 3];
        let sweep = k_sweep((&x, &y, &ids), (&x, &y), &[1, 4]).unwrap();
        assert_eq!(sweep.train_scores[0], 1.0);
        // k = n with a strict majority: every prediction is that class.
        let all_k = KnnModel::fit(4, &x, &[0, 1, 1, 1]).unwrap();
        assert!(x.iter().all(|r| all_k.predict(r).unwrap() == 1));
        assert!(k_sweep((&x, &y, &ids), (&x, &y), &[]).is_err());
        assert_eq!(sweep.to_csv().lines().count(), 3);
    }
}
