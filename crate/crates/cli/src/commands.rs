use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use heartml::data::{
    fingerprint_columns, load_csv, load_inputs, parse_predictors, read_header, train_test_split, Dataset,
    FeatureSchema,
};
use heartml::evaluation::{accuracy, class_report, confusion, roc_points, ClassReport, ConfusionMatrix, RocCurve};
use heartml::forest::{Parallelism, RandomForestModel};
use heartml::neighbors::k_sweep;
use heartml::preprocess::PipelineParams;
use heartml::tuning::{
    expand_grid, randomized_candidates, search_candidates, CvConfig, Family, FitContext, FittedModel, Learner,
    ParamGrid, ParamSet, ParamValue, SearchResult,
};
use heartml::Classifier;
use serde::Deserialize;

use crate::error::{at, CliError, CliResult};
use crate::model_file::{Metadata, ModelFile};
use crate::write_file;

#[derive(Debug, Parser)]
#[command(name = "heartml", version, about = "Heart-disease classification workflow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one family with default hyperparameters and report on the test split.
    Train(TrainArgs),
    /// Cross-validated search on the training split, then refit the winner.
    Tune(TuneArgs),
    /// Re-score a saved model on its test split.
    Evaluate(EvaluateArgs),
    /// Predict rows from a CSV file or a single comma-separated row.
    Predict(PredictArgs),
    /// Export the figure data series.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Logreg,
    Knn,
    Forest,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Logreg => Family::Logreg,
            FamilyArg::Knn => Family::Knn,
            FamilyArg::Forest => Family::Forest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TuneFamilyArg {
    Logreg,
    Knn,
    Forest,
    All,
}

impl TuneFamilyArg {
    /// The single family requested, or `None` for all of them.
    pub fn family(self) -> Option<Family> {
        match self {
            TuneFamilyArg::Logreg => Some(Family::Logreg),
            TuneFamilyArg::Knn => Some(Family::Knn),
            TuneFamilyArg::Forest => Some(Family::Forest),
            TuneFamilyArg::All => None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_enum, default_value = "forest")]
    pub family: FamilyArg,
    /// Model file path; defaults to `<out>/model.json`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Grow forest trees on one thread.
    #[arg(long)]
    pub no_parallel: bool,
    /// Record the current time in the model metadata.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub family: TuneFamilyArg,
    /// JSON grid: {"family": .., "params": {name: [values]}, "n_iter"?, "cv_k"?, "seed"?}.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Switch to randomized search over this many grid points.
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub cv_k: usize,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub no_parallel: bool,
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides the split seed stored in the model.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Directory for report files; stdout only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the 13 predictor columns (a trailing target column is ignored).
    #[arg(long, conflicts_with = "row", required_unless_present = "row")]
    pub input: Option<PathBuf>,
    /// One row of 13 comma-separated predictor values.
    #[arg(long)]
    pub row: Option<String>,
    /// Write predictions here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value = "out/report")]
    pub out: PathBuf,
    #[arg(long)]
    pub no_parallel: bool,
}

fn parallelism(no_parallel: bool) -> Parallelism {
    if no_parallel {
        Parallelism::Sequential
    } else {
        Parallelism::Rayon
    }
}

fn now_timestamp(enabled: bool) -> Option<u64> {
    enabled.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::config("output", e.to_string()))
}

pub fn load_dataset(path: &Path) -> CliResult<Dataset> {
    load_csv(path, &FeatureSchema::heart()).map_err(at("data"))
}

/// Train and test rows of the seeded split.
pub fn split_dataset(ds: &Dataset, seed: u64, test_fraction: f64) -> CliResult<(Dataset, Dataset)> {
    let split = train_test_split(ds.len(), test_fraction, seed).map_err(at("split"))?;
    Ok((ds.select(&split.train_rows), ds.select(&split.test_rows)))
}

/// Fits preprocessing and one model on `train`.
pub fn fit_model(
    family: Family,
    params: &ParamSet,
    train: &Dataset,
    ctx: FitContext,
) -> CliResult<(PipelineParams, FittedModel)> {
    let pipeline = PipelineParams::fit(train).map_err(at("preprocess"))?;
    let t = pipeline.transform(train).map_err(at("preprocess"))?;
    let model = family
        .fit(params, &t.features, &t.target, &t.row_ids, ctx)
        .map_err(at("fit"))?;
    Ok((pipeline, model))
}

/// Scores of a model on a labeled split.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<u8>,
    pub probabilities: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub report: ClassReport,
    /// Absent when the split holds a single class.
    pub roc: Option<RocCurve>,
}

pub fn evaluate(pipeline: &PipelineParams, model: &FittedModel, test: &Dataset) -> CliResult<Evaluation> {
    let t = pipeline.transform(test).map_err(at("evaluate"))?;
    let predictions = model.predict_many(&t.features).map_err(at("evaluate"))?;
    let probabilities = model.predict_proba_many(&t.features).map_err(at("evaluate"))?;
    let cm = confusion(&t.target, &predictions).map_err(at("evaluate"))?;
    let report = class_report(&cm).map_err(at("evaluate"))?;
    let roc = roc_points(&t.target, &probabilities).ok();
    Ok(Evaluation {
        predictions,
        probabilities,
        confusion: cm,
        report,
        roc,
    })
}

impl Evaluation {
    pub fn report_json(&self) -> String {
        let value = serde_json::json!({
            "report": self.report,
            "confusion": self.confusion.counts,
            "auc": self.roc.as_ref().map(|r| r.auc),
        });
        serde_json::to_string_pretty(&value).expect("report serializes") + "\n"
    }

    /// Writes report.txt, report.json, confusion.csv and roc.csv.
    pub fn write(&self, dir: &Path, prefix: &str) -> CliResult<()> {
        let name = |base: &str, ext: &str| dir.join(format!("{prefix}{base}.{ext}"));
        write_file("output", &name("report", "txt"), &self.report.render())?;
        write_file("output", &name("report", "json"), &self.report_json())?;
        write_file("output", &name("confusion", "csv"), &self.confusion.to_csv())?;
        if let Some(roc) = &self.roc {
            write_file("output", &name("roc", "csv"), &roc.to_csv())?;
        }
        Ok(())
    }
}

fn metadata(split: &SplitArgs, rows: usize, params: ParamSet, cv_mean: Option<f64>, stamp: bool) -> Metadata {
    Metadata {
        seed: split.seed,
        test_fraction: split.test_fraction,
        timestamp: now_timestamp(stamp),
        dataset_rows: rows,
        params,
        cv_mean,
    }
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let ds = load_dataset(&args.split.data)?;
    let (train, test) = split_dataset(&ds, args.split.seed, args.split.test_fraction)?;
    let family = Family::from(args.family);
    let ctx = FitContext {
        seed: args.split.seed,
        parallelism: parallelism(args.no_parallel),
    };
    let params = ParamSet::new();
    let (pipeline, model) = fit_model(family, &params, &train, ctx)?;
    let eval = evaluate(&pipeline, &model, &test)?;
    let file = ModelFile {
        schema_fingerprint: ds.schema.fingerprint(),
        metadata: metadata(&args.split, ds.len(), params, None, args.timestamp),
        pipeline,
        model,
    };
    let model_path = args.model.clone().unwrap_or_else(|| args.out.join("model.json"));
    file.save(&model_path)?;
    eval.write(&args.out, "")?;
    emit(out, &format!("{family} model written to {}\n\n", model_path.display()))?;
    emit(out, &eval.report.render())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    family: String,
    params: serde_json::Map<String, serde_json::Value>,
    n_iter: Option<usize>,
    cv_k: Option<usize>,
    seed: Option<u64>,
}

/// A resolved search request for one family.
#[derive(Debug, Clone)]
pub struct SearchPlan {
    pub family: Family,
    pub grid: ParamGrid,
    pub n_iter: Option<usize>,
}

impl SearchPlan {
    pub fn candidates(&self, seed: u64) -> heartml::Result<Vec<ParamSet>> {
        match self.n_iter {
            Some(n) => randomized_candidates(&self.grid, n, seed),
            None => expand_grid(&self.grid),
        }
    }
}

fn grid_value(key: &str, v: &serde_json::Value) -> Result<ParamValue, String> {
    match v {
        serde_json::Value::Null => Ok(ParamValue::Null),
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(ParamValue::Int)
            .or_else(|| n.as_f64().map(ParamValue::Real))
            .ok_or_else(|| format!("grid key {key:?}: number {n} out of range")),
        other => Err(format!("grid key {key:?}: expected numbers or null, found {other}")),
    }
}

/// Parses a grid file, naming the offending key on error.
pub fn parse_grid(text: &str) -> Result<(SearchPlan, Option<usize>, Option<u64>), String> {
    let file: GridFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let family: Family = file
        .family
        .parse()
        .map_err(|_| format!("grid key \"family\": unknown family {:?}", file.family))?;
    let mut grid = ParamGrid::new();
    for (key, values) in &file.params {
        let list = values
            .as_array()
            .ok_or_else(|| format!("grid key {key:?}: expected a list of values"))?;
        if list.is_empty() {
            return Err(format!("grid key {key:?}: value list is empty"));
        }
        let parsed = list.iter().map(|v| grid_value(key, v)).collect::<Result<Vec<_>, _>>()?;
        grid = grid.with(key, parsed);
    }
    if grid.entries.is_empty() {
        return Err("grid key \"params\": no parameters given".into());
    }
    for candidate in expand_grid(&grid).map_err(|e| e.to_string())? {
        family.validate(&candidate).map_err(|e| match e {
            heartml::Error::InvalidParam { name, reason } => format!("grid key {name:?}: {reason}"),
            other => other.to_string(),
        })?;
    }
    let plan = SearchPlan {
        family,
        grid,
        n_iter: file.n_iter,
    };
    Ok((plan, file.cv_k, file.seed))
}

/// Outcome of searching every requested family on one training split.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub searches: Vec<(Family, SearchResult<FittedModel>)>,
    /// Index into `searches` of the highest cross-validation mean; the
    /// earlier family wins a tie.
    pub best: usize,
}

impl TuneOutcome {
    pub fn best_search(&self) -> &(Family, SearchResult<FittedModel>) {
        &self.searches[self.best]
    }
}

pub fn tune_families(
    train: &Dataset,
    plans: &[SearchPlan],
    cv: CvConfig,
    sampler_seed: u64,
    ctx: FitContext,
) -> CliResult<TuneOutcome> {
    let mut searches = Vec::with_capacity(plans.len());
    for plan in plans {
        let candidates = plan.candidates(sampler_seed).map_err(at("tune"))?;
        let result = search_candidates(&plan.family, candidates, train, cv, ctx).map_err(at("tune"))?;
        searches.push((plan.family, result));
    }
    let mut best = 0;
    for (i, (_, r)) in searches.iter().enumerate() {
        if r.best().mean > searches[best].1.best().mean {
            best = i;
        }
    }
    Ok(TuneOutcome { searches, best })
}

fn format_params(params: &ParamSet) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_tune(args: &TuneArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cv_k = args.cv_k;
    let mut search_seed = args.split.seed;
    let plans: Vec<SearchPlan> = match &args.grid {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io("config", path, e))?;
            let (mut plan, file_k, file_seed) =
                parse_grid(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
            if args.family.family().is_some_and(|f| f != plan.family) {
                return Err(CliError::config(
                    "config",
                    format!("--family conflicts with grid family {}", plan.family),
                ));
            }
            plan.n_iter = args.n_iter.or(plan.n_iter);
            cv_k = file_k.unwrap_or(cv_k);
            search_seed = file_seed.unwrap_or(search_seed);
            vec![plan]
        }
        None => {
            let families: Vec<Family> = match args.family.family() {
                Some(f) => vec![f],
                None => Family::ALL.to_vec(),
            };
            families
                .into_iter()
                .map(|family| SearchPlan {
                    family,
                    grid: family.default_grid(),
                    n_iter: args.n_iter,
                })
                .collect()
        }
    };
    if cv_k < 2 {
        return Err(CliError::config("config", format!("cv_k must be >= 2, got {cv_k}")));
    }

    let ds = load_dataset(&args.split.data)?;
    let (train, test) = split_dataset(&ds, args.split.seed, args.split.test_fraction)?;
    let ctx = FitContext {
        seed: search_seed,
        parallelism: parallelism(args.no_parallel),
    };
    let cv = CvConfig {
        k: cv_k,
        seed: search_seed,
    };
    let outcome = tune_families(&train, &plans, cv, search_seed, ctx)?;

    let mut summary = String::from("family,candidates,best_index,cv_mean,cv_std,params\n");
    for (family, result) in &outcome.searches {
        write_file(
            "output",
            &args.out.join(format!("candidates_{family}.csv")),
            &result.candidates_csv(),
        )?;
        let best = result.best();
        let _ = writeln!(
            summary,
            "{family},{},{},{},{},{}",
            result.candidates.len(),
            result.best_index,
            best.mean,
            best.std,
            format_params(&best.params)
        );
    }
    write_file("output", &args.out.join("search_summary.csv"), &summary)?;

    let (family, result) = outcome.best_search();
    let eval = evaluate(&result.pipeline, &result.best_model, &test)?;
    let file = ModelFile {
        schema_fingerprint: ds.schema.fingerprint(),
        metadata: metadata(
            &args.split,
            ds.len(),
            result.best().params.clone(),
            Some(result.best().mean),
            args.timestamp,
        ),
        pipeline: result.pipeline.clone(),
        model: result.best_model.clone(),
    };
    let model_path = args.model.clone().unwrap_or_else(|| args.out.join("model.json"));
    file.save(&model_path)?;
    eval.write(&args.out, "")?;

    emit(out, &summary)?;
    emit(
        out,
        &format!(
            "\nselected {family} ({}), test accuracy {:.4}; model written to {}\n\n",
            format_params(&result.best().params),
            eval.report.accuracy,
            model_path.display()
        ),
    )?;
    emit(out, &eval.report.render())
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let file = ModelFile::load(&args.model)?;
    let header = read_header(&args.data).map_err(at("data"))?;
    if fingerprint_columns(&header) != file.schema_fingerprint {
        return Err(CliError::validation(
            "schema",
            format!(
                "columns of {} ({}) do not match the model's training schema; refusing to evaluate",
                args.data.display(),
                header.join(",")
            ),
        ));
    }
    let ds = load_dataset(&args.data)?;
    let seed = args.seed.unwrap_or(file.metadata.seed);
    let fraction = args.test_fraction.unwrap_or(file.metadata.test_fraction);
    let (_, test) = split_dataset(&ds, seed, fraction)?;
    let eval = evaluate(&file.pipeline, &file.model, &test)?;
    if let Some(dir) = &args.out {
        eval.write(dir, "")?;
    }
    emit(out, &eval.report.render())
}

fn cmd_predict(args: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let file = ModelFile::load(&args.model)?;
    let schema = FeatureSchema::heart();
    if schema.fingerprint() != file.schema_fingerprint {
        return Err(CliError::validation("schema", "model was trained on a different schema"));
    }
    let rows: Vec<(usize, usize, heartml::Result<Vec<f64>>)> = match (&args.input, &args.row) {
        (Some(path), _) => load_inputs(path, &schema)
            .map_err(at("data"))?
            .into_iter()
            .map(|r| (r.row_id, r.line, r.values))
            .collect(),
        (None, Some(row)) => {
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            let values = if fields.len() != schema.n_features() {
                Err(heartml::Error::FieldCount {
                    row: 1,
                    expected: schema.n_features(),
                    found: fields.len(),
                })
            } else {
                parse_predictors(&schema, &fields, 1)
            };
            vec![(0, 1, values)]
        }
        (None, None) => return Err(CliError::config("config", "pass --input or --row")),
    };

    let mut text = String::from("row_id,class,probability\n");
    let mut failed = 0;
    for (row_id, _, values) in &rows {
        match values.as_ref().map_err(|e| e.to_string()).and_then(|v| {
            file.predict_raw(v).map_err(|e| e.to_string())
        }) {
            Ok((class, p)) => {
                let _ = writeln!(text, "{row_id},{class},{p}");
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(err, "predict stage: row_id {row_id}: {e}");
            }
        }
    }
    match &args.out {
        Some(path) => write_file("output", path, &text)?,
        None => emit(out, &text)?,
    }
    if failed > 0 {
        return Err(CliError::validation(
            "predict",
            format!("{failed} of {} rows failed validation", rows.len()),
        ));
    }
    Ok(())
}

fn csv_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let ds = load_dataset(&args.split.data)?;
    let schema = &ds.schema;
    let dir = &args.out;
    let col = |name: &str| schema.index_of(name).expect("schema column");

    // Age against maximum heart rate, by class.
    let (age, thalach) = (col("age"), col("thalach"));
    let mut scatter = String::from("age,thalach,target\n");
    for (row, t) in ds.features.iter().zip(&ds.target) {
        let _ = writeln!(scatter, "{},{},{t}", csv_value(row[age]), csv_value(row[thalach]));
    }
    write_file("output", &dir.join("scatter.csv"), &scatter)?;

    // Logistic-regression coefficients on the full standardized dataset.
    let ctx = FitContext {
        seed: args.split.seed,
        parallelism: parallelism(args.no_parallel),
    };
    let (_, full_lr) = fit_model(Family::Logreg, &ParamSet::new(), &ds, ctx)?;
    let FittedModel::Logreg(lr) = &full_lr else {
        unreachable!("logreg family fits a logistic model")
    };
    let mut coefs = String::from("feature,coefficient\n");
    for (name, w) in lr.coefficients(&schema.predictor_names()).map_err(at("report"))? {
        let _ = writeln!(coefs, "{name},{w}");
    }
    write_file("output", &dir.join("coefficients.csv"), &coefs)?;

    // Default-configuration comparison on the held-out split.
    let (train, test) = split_dataset(&ds, args.split.seed, args.split.test_fraction)?;
    let mut comparison = String::from("model,test_accuracy\n");
    let mut summary = String::new();
    for family in Family::ALL {
        let (pipeline, model) = fit_model(family, &ParamSet::new(), &train, ctx)?;
        let eval = evaluate(&pipeline, &model, &test)?;
        let _ = writeln!(comparison, "{family},{}", eval.report.accuracy);
        let _ = writeln!(summary, "{family}: test accuracy {:.4}", eval.report.accuracy);
        eval.write(dir, &format!("{family}_"))?;
        if let FittedModel::Forest(forest) = &model {
            write_file("output", &dir.join("feature_importance.csv"), &importance_csv(forest, schema))?;
        }
    }
    write_file("output", &dir.join("model_comparison.csv"), &comparison)?;

    // k sweep, fitted on the training split.
    let pipeline = PipelineParams::fit(&train).map_err(at("preprocess"))?;
    let tr = pipeline.transform(&train).map_err(at("preprocess"))?;
    let te = pipeline.transform(&test).map_err(at("preprocess"))?;
    let ks: Vec<usize> = (1..=20).collect();
    let sweep = k_sweep(
        (&tr.features, &tr.target, &tr.row_ids),
        (&te.features, &te.target),
        &ks,
    )
    .map_err(at("report"))?;
    write_file("output", &dir.join("k_sweep.csv"), &sweep.to_csv())?;

    emit(out, &summary)?;
    emit(out, &format!("figure data written to {}\n", dir.display()))
}

fn importance_csv(forest: &RandomForestModel, schema: &FeatureSchema) -> String {
    let mut text = String::from("feature,importance\n");
    for (name, v) in schema.predictor_names().iter().zip(forest.feature_importance()) {
        let _ = writeln!(text, "{name},{v}");
    }
    text
}

/// Runs one parsed command, writing normal output to `out` and per-row
/// diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Tune(a) => cmd_tune(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Predict(a) => cmd_predict(a, out, err),
        Command::Report(a) => cmd_report(a, out),
    }
}

/// Test-split accuracy of `model` after `pipeline`.
pub fn test_accuracy(pipeline: &PipelineParams, model: &FittedModel, test: &Dataset) -> CliResult<f64> {
    let t = pipeline.transform(test).map_err(at("evaluate"))?;
    let preds = model.predict_many(&t.features).map_err(at("evaluate"))?;
    accuracy(&t.target, &preds).map_err(at("evaluate"))
}
