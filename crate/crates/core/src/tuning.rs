//! Grid and randomized hyperparameter search scored by stratified k-fold
//! cross-validation, with refit of the winning candidate.
//!
//! Preprocessing is refitted on the training folds of every split, so a
//! held-out fold never influences the medians, means or deviations used to
//! transform it.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_kfold, Dataset};
use crate::evaluation::accuracy;
use crate::forest::{ForestConfig, Parallelism, RandomForestModel};
use crate::linear_model::{self, LogRegConfig, LogRegModel};
use crate::neighbors::{KnnModel, DEFAULT_K};
use crate::preprocess::PipelineParams;
use crate::rng::SplitMix64;
use crate::{Classifier, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    /// Absent option, e.g. unbounded `max_depth`.
    Null,
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Null => f.write_str("null"),
        }
    }
}

/// One candidate: parameter name to value, names in lexicographic order.
pub type ParamSet = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamGrid {
    pub entries: BTreeMap<String, Vec<ParamValue>>,
}

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.entries.insert(name.to_string(), values);
        self
    }

    pub fn size(&self) -> usize {
        self.entries.values().map(Vec::len).product()
    }
}

/// Cartesian product of the grid. Names are taken in lexicographic order
/// and the last name varies fastest; values keep their listed order.
pub fn expand_grid(grid: &ParamGrid) -> Result<Vec<ParamSet>> {
    if grid.entries.is_empty() {
        return Err(Error::invalid("parameter grid is empty"));
    }
    if let Some((name, _)) = grid.entries.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::param(name.as_str(), "value list is empty"));
    }
    let mut out = vec![ParamSet::new()];
    for (name, values) in &grid.entries {
        out = out
            .into_iter()
            .flat_map(|partial| {
                values.iter().map(move |v| {
                    let mut next = partial.clone();
                    next.insert(name.clone(), *v);
                    next
                })
            })
            .collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { k: 5, seed: 42 }
    }
}

/// Settings passed to every fit during a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitContext {
    /// Seed for stochastic learners unless a candidate sets its own.
    pub seed: u64,
    pub parallelism: Parallelism,
}

/// A model family that can be fitted from a parameter assignment.
pub trait Learner: Sync {
    type Model: Classifier + Send;

    /// Rejects unknown names and out-of-range values.
    fn validate(&self, params: &ParamSet) -> Result<()>;

    fn fit(
        &self,
        params: &ParamSet,
        x: &[Vec<f64>],
        y: &[u8],
        row_ids: &[usize],
        ctx: FitContext,
    ) -> Result<Self::Model>;

    /// Candidates with equal keys may be fitted together by
    /// [`Learner::fit_group`]. `None` keeps a candidate on its own.
    fn group_key(&self, _params: &ParamSet) -> Option<ParamSet> {
        None
    }

    /// Fits every candidate of a group; the result must equal fitting each
    /// one separately.
    fn fit_group(
        &self,
        group: &[&ParamSet],
        x: &[Vec<f64>],
        y: &[u8],
        row_ids: &[usize],
        ctx: FitContext,
    ) -> Result<Vec<Self::Model>> {
        group.iter().map(|p| self.fit(p, x, y, row_ids, ctx)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Logreg,
    Knn,
    Forest,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Logreg, Family::Knn, Family::Forest];

    pub fn name(self) -> &'static str {
        match self {
            Family::Logreg => "logreg",
            Family::Knn => "knn",
            Family::Forest => "forest",
        }
    }

    /// Search space used when no grid file is given.
    pub fn default_grid(self) -> ParamGrid {
        let ints = |v: &[i64]| v.iter().map(|&i| ParamValue::Int(i)).collect::<Vec<_>>();
        match self {
            Family::Knn => ParamGrid::new().with("k", ints(&(1..=20).collect::<Vec<_>>())),
            Family::Logreg => ParamGrid::new().with(
                "l2_lambda",
                (0..20)
                    .map(|i| ParamValue::Real(10f64.powf(-4.0 + 8.0 * i as f64 / 19.0)))
                    .collect(),
            ),
            Family::Forest => {
                let mut depth = vec![ParamValue::Null];
                depth.extend(ints(&[3, 5, 10]));
                ParamGrid::new()
                    .with("n_trees", ints(&[10, 100, 200, 500, 1000]))
                    .with("max_depth", depth)
                    .with("min_samples_split", ints(&[2, 4, 6]))
                    .with("min_samples_leaf", ints(&[1, 2, 4]))
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(Family::Logreg),
            "knn" => Ok(Family::Knn),
            "forest" => Ok(Family::Forest),
            other => Err(Error::param("family", format!("unknown family {other:?}"))),
        }
    }
}

fn positive_int(name: &str, value: &ParamValue) -> Result<usize> {
    match value {
        ParamValue::Int(v) if *v >= 0 => Ok(*v as usize),
        other => Err(Error::param(name, format!("expected a non-negative integer, got {other}"))),
    }
}

fn real(name: &str, value: &ParamValue) -> Result<f64> {
    match value {
        ParamValue::Int(v) => Ok(*v as f64),
        ParamValue::Real(v) => Ok(*v),
        ParamValue::Null => Err(Error::param(name, "expected a number, got null")),
    }
}

fn unknown(family: Family, name: &str) -> Error {
    Error::param(name, format!("not a parameter of the {family} family"))
}

impl Family {
    pub fn logreg_config(params: &ParamSet) -> Result<LogRegConfig> {
        let mut cfg = LogRegConfig::default();
        for (name, value) in params {
            match name.as_str() {
                "l2_lambda" => cfg.l2_lambda = real(name, value)?,
                "learning_rate" => cfg.learning_rate = real(name, value)?,
                "tol" => cfg.tol = real(name, value)?,
                "max_iter" => cfg.max_iter = positive_int(name, value)?,
                _ => return Err(unknown(Family::Logreg, name)),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn knn_k(params: &ParamSet) -> Result<usize> {
        let mut k = DEFAULT_K;
        for (name, value) in params {
            match name.as_str() {
                "k" => k = positive_int(name, value)?,
                _ => return Err(unknown(Family::Knn, name)),
            }
        }
        if k == 0 {
            return Err(Error::param("k", "must be >= 1"));
        }
        Ok(k)
    }

    pub fn forest_config(params: &ParamSet, seed: u64) -> Result<ForestConfig> {
        let mut cfg = ForestConfig {
            seed,
            ..ForestConfig::default()
        };
        for (name, value) in params {
            match name.as_str() {
                "n_trees" => cfg.n_trees = positive_int(name, value)?,
                "max_depth" => {
                    cfg.max_depth = match value {
                        ParamValue::Null => None,
                        v => Some(positive_int(name, v)?),
                    }
                }
                "min_samples_split" => cfg.min_samples_split = positive_int(name, value)?,
                "min_samples_leaf" => cfg.min_samples_leaf = positive_int(name, value)?,
                "max_features" => cfg.max_features = positive_int(name, value)?,
                "seed" => cfg.seed = positive_int(name, value)? as u64,
                _ => return Err(unknown(Family::Forest, name)),
            }
        }
        Ok(cfg)
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "lowercase")]
pub enum FittedModel {
    Logreg(LogRegModel),
    Knn(KnnModel),
    Forest(RandomForestModel),
}

impl FittedModel {
    pub fn family(&self) -> Family {
        match self {
            FittedModel::Logreg(_) => Family::Logreg,
            FittedModel::Knn(_) => Family::Knn,
            FittedModel::Forest(_) => Family::Forest,
        }
    }
}

impl Classifier for FittedModel {
    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Logreg(m) => m.predict_proba(x),
            FittedModel::Knn(m) => m.predict_proba(x),
            FittedModel::Forest(m) => m.predict_proba(x),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<u8> {
        match self {
            FittedModel::Logreg(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::Forest(m) => m.predict(x),
        }
    }
}

impl Learner for Family {
    type Model = FittedModel;

    fn validate(&self, params: &ParamSet) -> Result<()> {
        match self {
            Family::Logreg => Family::logreg_config(params).map(drop),
            Family::Knn => Family::knn_k(params).map(drop),
            Family::Forest => Family::forest_config(params, 0)?.validate(crate::data::FeatureSchema::heart().n_features()),
        }
    }

    fn fit(
        &self,
        params: &ParamSet,
        x: &[Vec<f64>],
        y: &[u8],
        row_ids: &[usize],
        ctx: FitContext,
    ) -> Result<FittedModel> {
        Ok(match self {
            Family::Logreg => FittedModel::Logreg(linear_model::fit(&Family::logreg_config(params)?, x, y)?),
            Family::Knn => {
                FittedModel::Knn(KnnModel::fit_with_ids(Family::knn_k(params)?, x, y, row_ids.to_vec())?)
            }
            Family::Forest => FittedModel::Forest(RandomForestModel::fit_with(
                &Family::forest_config(params, ctx.seed)?,
                x,
                y,
                ctx.parallelism,
            )?),
        })
    }

    /// Forests differing only in `n_trees` share a key: the smaller ones
    /// are prefixes of the largest.
    fn group_key(&self, params: &ParamSet) -> Option<ParamSet> {
        (*self == Family::Forest).then(|| {
            let mut key = params.clone();
            key.remove("n_trees");
            key
        })
    }

    fn fit_group(
        &self,
        group: &[&ParamSet],
        x: &[Vec<f64>],
        y: &[u8],
        row_ids: &[usize],
        ctx: FitContext,
    ) -> Result<Vec<FittedModel>> {
        if *self != Family::Forest || group.len() < 2 {
            return group.iter().map(|p| self.fit(p, x, y, row_ids, ctx)).collect();
        }
        let configs = group
            .iter()
            .map(|p| Family::forest_config(p, ctx.seed))
            .collect::<Result<Vec<_>>>()?;
        let largest = configs.iter().max_by_key(|c| c.n_trees).expect("group is non-empty");
        let full = RandomForestModel::fit_with(largest, x, y, ctx.parallelism)?;
        configs
            .iter()
            .map(|c| Ok(FittedModel::Forest(full.truncated(c.n_trees)?)))
            .collect()
    }
}

/// Transformed train/held-out data of one fold.
struct Fold {
    train: Dataset,
    held: Dataset,
}

/// Preprocessing parameters fitted on the training folds of each split.
pub fn fold_pipelines(ds: &Dataset, cv: CvConfig) -> Result<Vec<PipelineParams>> {
    let plan = stratified_kfold(&ds.target, cv.k, cv.seed)?;
    (0..cv.k)
        .map(|f| PipelineParams::fit(&ds.select(&plan.split(f).0)))
        .collect()
}

fn prepare_folds(ds: &Dataset, cv: CvConfig) -> Result<Vec<Fold>> {
    let plan = stratified_kfold(&ds.target, cv.k, cv.seed)?;
    (0..cv.k)
        .map(|f| {
            let (train_pos, held_pos) = plan.split(f);
            let train = ds.select(&train_pos);
            let held = ds.select(&held_pos);
            let pipeline = PipelineParams::fit(&train)?;
            Ok(Fold {
                train: pipeline.transform(&train)?,
                held: pipeline.transform(&held)?,
            })
        })
        .collect()
}

/// Fold scores of each candidate in `group`, in group order.
fn score_group<L: Learner>(
    learner: &L,
    group: &[&ParamSet],
    folds: &[Fold],
    ctx: FitContext,
) -> Result<Vec<Vec<f64>>> {
    let mut scores = vec![Vec::with_capacity(folds.len()); group.len()];
    for fold in folds {
        let t = &fold.train;
        let models = learner.fit_group(group, &t.features, &t.target, &t.row_ids, ctx)?;
        for (model, out) in models.iter().zip(scores.iter_mut()) {
            let preds = model.predict_many(&fold.held.features)?;
            out.push(accuracy(&fold.held.target, &preds)?);
        }
    }
    Ok(scores)
}

fn score_folds<L: Learner>(
    learner: &L,
    params: &ParamSet,
    folds: &[Fold],
    ctx: FitContext,
) -> Result<Vec<f64>> {
    Ok(score_group(learner, &[params], folds, ctx)?.remove(0))
}

/// Held-out accuracy of each fold of `stratified_kfold(cv.k, cv.seed)`.
pub fn cross_val_score<L: Learner>(
    learner: &L,
    params: &ParamSet,
    ds: &Dataset,
    cv: CvConfig,
    ctx: FitContext,
) -> Result<Vec<f64>> {
    learner.validate(params)?;
    score_folds(learner, params, &prepare_folds(ds, cv)?, ctx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: ParamSet,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold scores.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<M> {
    pub candidates: Vec<CandidateScore>,
    pub best_index: usize,
    pub best_model: M,
    /// Preprocessing refitted on the full search dataset.
    pub pipeline: PipelineParams,
}

impl<M> SearchResult<M> {
    pub fn best(&self) -> &CandidateScore {
        &self.candidates[self.best_index]
    }

    /// One row per candidate: index, parameters, fold scores, mean, std.
    pub fn candidates_csv(&self) -> String {
        let names: Vec<&String> = self
            .candidates
            .iter()
            .flat_map(|c| c.params.keys())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let k = self.candidates.first().map_or(0, |c| c.fold_scores.len());
        let mut header: Vec<String> = vec!["index".into()];
        header.extend(names.iter().map(|n| n.to_string()));
        header.extend((0..k).map(|i| format!("fold_{i}")));
        header.extend(["mean".into(), "std".into(), "best".into()]);
        let mut out = header.join(",") + "\n";
        for (i, c) in self.candidates.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(names.iter().map(|n| c.params.get(*n).map_or(String::new(), |v| v.to_string())));
            row.extend(c.fold_scores.iter().map(|s| s.to_string()));
            row.push(c.mean.to_string());
            row.push(c.std.to_string());
            row.push(u8::from(i == self.best_index).to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn summarize(params: ParamSet, fold_scores: Vec<f64>) -> CandidateScore {
    let k = fold_scores.len() as f64;
    let mean = fold_scores.iter().sum::<f64>() / k;
    let std = (fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k).sqrt();
    CandidateScore {
        params,
        fold_scores,
        mean,
        std,
    }
}

/// Scores `candidates` in order, picks the highest mean (earliest wins a
/// tie) and refits it on all of `ds`.
pub fn search_candidates<L: Learner>(
    learner: &L,
    candidates: Vec<ParamSet>,
    ds: &Dataset,
    cv: CvConfig,
    ctx: FitContext,
) -> Result<SearchResult<L::Model>> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to search"));
    }
    for c in &candidates {
        learner.validate(c)?;
    }
    let folds = prepare_folds(ds, cv)?;

    // Groups in order of first appearance.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut keyed: Vec<(ParamSet, usize)> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        match learner.group_key(c) {
            Some(key) => match keyed.iter().find(|(k, _)| *k == key) {
                Some(&(_, g)) => groups[g].push(i),
                None => {
                    keyed.push((key, groups.len()));
                    groups.push(vec![i]);
                }
            },
            None => groups.push(vec![i]),
        }
    }
    let run = |members: &Vec<usize>| {
        let params: Vec<&ParamSet> = members.iter().map(|&i| &candidates[i]).collect();
        score_group(learner, &params, &folds, ctx)
    };
    let grouped: Vec<Vec<Vec<f64>>> = match ctx.parallelism {
        Parallelism::Sequential => groups.iter().map(run).collect::<Result<_>>()?,
        Parallelism::Rayon => groups.par_iter().map(run).collect::<Result<_>>()?,
    };
    let mut scores = vec![Vec::new(); candidates.len()];
    for (members, group_scores) in groups.iter().zip(grouped) {
        for (&i, s) in members.iter().zip(group_scores) {
            scores[i] = s;
        }
    }
    let candidates: Vec<CandidateScore> = candidates
        .into_iter()
        .zip(scores)
        .map(|(p, s)| summarize(p, s))
        .collect();
    let mut best_index = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.mean > candidates[best_index].mean {
            best_index = i;
        }
    }

    let pipeline = PipelineParams::fit(ds)?;
    let full = pipeline.transform(ds)?;
    let best_model = learner.fit(
        &candidates[best_index].params,
        &full.features,
        &full.target,
        &full.row_ids,
        ctx,
    )?;
    Ok(SearchResult {
        candidates,
        best_index,
        best_model,
        pipeline,
    })
}

/// Exhaustive search over the expanded grid.
pub fn grid_search<L: Learner>(
    learner: &L,
    grid: &ParamGrid,
    ds: &Dataset,
    cv: CvConfig,
    ctx: FitContext,
) -> Result<SearchResult<L::Model>> {
    search_candidates(learner, expand_grid(grid)?, ds, cv, ctx)
}

/// Candidates picked by `sample_without_replacement(min(n_iter, size))`
/// over the expanded grid with `SplitMix64::new(seed)`, in sampler order.
pub fn randomized_candidates(grid: &ParamGrid, n_iter: usize, seed: u64) -> Result<Vec<ParamSet>> {
    if n_iter == 0 {
        return Err(Error::param("n_iter", "must be >= 1"));
    }
    let all = expand_grid(grid)?;
    let picks = SplitMix64::new(seed).sample_without_replacement(n_iter.min(all.len()), all.len())?;
    Ok(picks.into_iter().map(|i| all[i].clone()).collect())
}

pub fn randomized_search<L: Learner>(
    learner: &L,
    grid: &ParamGrid,
    n_iter: usize,
    ds: &Dataset,
    cv: CvConfig,
    seed: u64,
    ctx: FitContext,
) -> Result<SearchResult<L::Model>> {
    search_candidates(learner, randomized_candidates(grid, n_iter, seed)?, ds, cv, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<ParamValue> {
        v.iter().map(|&i| ParamValue::Int(i)).collect()
    }

    #[test]
    fn grid_order_rightmost_fastest() {
        let grid = ParamGrid::new().with("b", ints(&[10, 20])).with("a", ints(&[1, 2]));
        let got: Vec<(i64, i64)> = expand_grid(&grid)
            .unwrap()
            .iter()
            .map(|c| match (c["a"], c["b"]) {
                (ParamValue::Int(a), ParamValue::Int(b)) => (a, b),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got, vec![(1, 10), (1, 20), (2, 10), (2, 20)]);
    }

    #[test]
    fn grid_edge_cases() {
        assert_eq!(expand_grid(&ParamGrid::new().with("k", ints(&[5]))).unwrap().len(), 1);
        assert!(expand_grid(&ParamGrid::new()).is_err());
        assert!(expand_grid(&ParamGrid::new().with("k", vec![])).is_err());
    }

    #[test]
    fn default_grid_sizes() {
        assert_eq!(Family::Knn.default_grid().size(), 20);
        assert_eq!(Family::Logreg.default_grid().size(), 20);
        assert_eq!(Family::Forest.default_grid().size(), 180);
        let lambdas = &Family::Logreg.default_grid().entries["l2_lambda"];
        assert_eq!(lambdas[0], ParamValue::Real(1e-4));
        assert_eq!(lambdas[19], ParamValue::Real(1e4));
    }

    #[test]
    fn params_are_validated() {
        let mut p = ParamSet::new();
        p.insert("n_neighbors".into(), ParamValue::Int(3));
        let err = Family::Knn.validate(&p).unwrap_err().to_string();
        assert!(err.contains("n_neighbors"), "{err}");
        let mut p = ParamSet::new();
        p.insert("max_depth".into(), ParamValue::Null);
        let cfg = Family::forest_config(&p, 7).unwrap();
        assert_eq!((cfg.max_depth, cfg.seed), (None, 7));
        p.insert("max_depth".into(), ParamValue::Real(2.5));
        assert!(Family::Forest.validate(&p).is_err());
    }

    #[test]
    fn randomized_candidates_subset() {
        let grid = Family::Forest.default_grid();
        let all = expand_grid(&grid).unwrap();
        let picks = randomized_candidates(&grid, 10, 3).unwrap();
        assert_eq!(picks.len(), 10);
        assert_eq!(picks, randomized_candidates(&grid, 10, 3).unwrap());
        for p in &picks {
            assert!(all.contains(p));
        }
        assert_eq!(randomized_candidates(&grid, 1000, 3).unwrap().len(), 180);
        assert!(randomized_candidates(&grid, 0, 3).is_err());
    }

    use crate::data::{load_csv, FeatureSchema};

    fn heart() -> Dataset {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/heart-disease.csv");
        load_csv(&path, &FeatureSchema::heart()).unwrap()
    }

    fn ctx() -> FitContext {
        FitContext {
            seed: 42,
            parallelism: Parallelism::Sequential,
        }
    }

    /// Predicts the training majority, ignoring every parameter.
    struct Majority;

    struct Constant(u8);

    impl Classifier for Constant {
        fn predict_proba(&self, _: &[f64]) -> Result<f64> {
            Ok(self.0 as f64)
        }
        fn predict(&self, _: &[f64]) -> Result<u8> {
            Ok(self.0)
        }
    }

    impl Learner for Majority {
        type Model = Constant;
        fn validate(&self, _: &ParamSet) -> Result<()> {
            Ok(())
        }
        fn fit(&self, _: &ParamSet, _: &[Vec<f64>], y: &[u8], _: &[usize], _: FitContext) -> Result<Constant> {
            let ones = y.iter().filter(|&&t| t == 1).count();
            Ok(Constant(u8::from(2 * ones > y.len())))
        }
    }

    /// Family without candidate grouping, for comparison.
    struct Ungrouped(Family);

    impl Learner for Ungrouped {
        type Model = FittedModel;
        fn validate(&self, p: &ParamSet) -> Result<()> {
            self.0.validate(p)
        }
        fn fit(&self, p: &ParamSet, x: &[Vec<f64>], y: &[u8], ids: &[usize], ctx: FitContext) -> Result<FittedModel> {
            self.0.fit(p, x, y, ids, ctx)
        }
    }

    #[test]
    fn majority_scores_match_fold_priors() {
        let ds = heart();
        let cv = CvConfig { k: 5, seed: 3 };
        let grid = ParamGrid::new().with("unused", ints(&[1, 2, 3]));
        let result = grid_search(&Majority, &grid, &ds, cv, ctx()).unwrap();
        let plan = stratified_kfold(&ds.target, 5, 3).unwrap();
        for (f, &score) in result.candidates[0].fold_scores.iter().enumerate() {
            let held = plan.split(f).1;
            let ones = held.iter().filter(|&&i| ds.target[i] == 1).count();
            assert_eq!(score, ones as f64 / held.len() as f64);
        }
        // Equal means everywhere: the first candidate wins.
        assert_eq!(result.best_index, 0);
        assert_eq!(result.candidates_csv().lines().count(), 4);
    }

    #[test]
    fn grouped_forest_search_matches_separate_fits() {
        let ds = heart().select(&(0..303).step_by(3).collect::<Vec<_>>());
        let grid = ParamGrid::new()
            .with("n_trees", ints(&[3, 8, 5]))
            .with("max_depth", vec![ParamValue::Null, ParamValue::Int(2)]);
        let cv = CvConfig { k: 3, seed: 1 };
        let grouped = grid_search(&Family::Forest, &grid, &ds, cv, ctx()).unwrap();
        let separate = grid_search(&Ungrouped(Family::Forest), &grid, &ds, cv, ctx()).unwrap();
        assert_eq!(grouped.candidates, separate.candidates);
        assert_eq!(grouped.best_model, separate.best_model);
        let parallel = grid_search(
            &Family::Forest,
            &grid,
            &ds,
            cv,
            FitContext {
                parallelism: Parallelism::Rayon,
                ..ctx()
            },
        )
        .unwrap();
        assert_eq!(parallel.candidates, grouped.candidates);
    }

    #[test]
    fn fold_pipelines_ignore_held_out_rows() {
        let ds = heart();
        let cv = CvConfig { k: 5, seed: 0 };
        let plan = stratified_kfold(&ds.target, 5, 0).unwrap();
        let pipelines = fold_pipelines(&ds, cv).unwrap();
        for (f, p) in pipelines.iter().enumerate() {
            let (train, held) = plan.split(f);
            // Perturbing held-out rows leaves the fold's parameters alone.
            let mut changed = ds.clone();
            for &i in &held {
                for v in changed.features[i].iter_mut() {
                    *v += 1000.0;
                }
            }
            assert_eq!(&PipelineParams::fit(&changed.select(&train)).unwrap(), p);
            assert_ne!(&PipelineParams::fit(&changed).unwrap(), p);
        }
    }

    #[test]
    fn cross_val_score_is_deterministic() {
        let ds = heart();
        let mut p = ParamSet::new();
        p.insert("k".into(), ParamValue::Int(7));
        let cv = CvConfig { k: 5, seed: 11 };
        let a = cross_val_score(&Family::Knn, &p, &ds, cv, ctx()).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, cross_val_score(&Family::Knn, &p, &ds, cv, ctx()).unwrap());
        assert!(a.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn refit_uses_full_dataset_pipeline() {
        let ds = heart();
        let grid = ParamGrid::new().with("k", ints(&[3, 9]));
        let result = grid_search(&Family::Knn, &grid, &ds, CvConfig::default(), ctx()).unwrap();
        assert_eq!(result.pipeline, PipelineParams::fit(&ds).unwrap());
        match &result.best_model {
            FittedModel::Knn(m) => assert_eq!(m.train_labels.len(), ds.len()),
            other => panic!("unexpected model {:?}", other.family()),
        }
    }
}
