//! Versioned JSON persistence of a fitted pipeline and model.

use std::fs;
use std::path::Path;

use heartml::forest::RandomForestModel;
use heartml::linear_model::LogRegModel;
use heartml::neighbors::KnnModel;
use heartml::preprocess::PipelineParams;
use heartml::tuning::{Family, FittedModel, ParamSet};
use heartml::Classifier;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub test_fraction: f64,
    /// Unix seconds; only recorded on request so reruns stay byte-identical.
    pub timestamp: Option<u64>,
    pub dataset_rows: usize,
    /// Hyperparameters the model was fitted with.
    pub params: ParamSet,
    /// Mean cross-validation accuracy when the model came from a search.
    pub cv_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub schema_fingerprint: String,
    pub metadata: Metadata,
    pub pipeline: PipelineParams,
    pub model: FittedModel,
}

#[derive(Serialize)]
struct Stored<'a, M> {
    format_version: u32,
    family: Family,
    schema_fingerprint: &'a str,
    metadata: &'a Metadata,
    pipeline: &'a PipelineParams,
    model: &'a M,
}

#[derive(Deserialize)]
struct VersionOnly {
    format_version: u32,
}

#[derive(Deserialize)]
struct Loaded<'a> {
    family: Family,
    schema_fingerprint: String,
    metadata: Metadata,
    pipeline: PipelineParams,
    #[serde(borrow)]
    model: &'a RawValue,
}

/// Deserializes without serde_json's nesting limit; deep trees are handled
/// by growing the stack on demand (serialization does the same).
fn from_deep_str<T: DeserializeOwned>(text: &str) -> serde_json::Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = T::deserialize(serde_stacker::Deserializer::new(&mut de))?;
    de.end()?;
    Ok(value)
}

impl ModelFile {
    pub fn family(&self) -> Family {
        self.model.family()
    }

    pub fn to_json(&self) -> String {
        fn encode<M: Serialize>(file: &ModelFile, model: &M) -> String {
            let stored = Stored {
                format_version: FORMAT_VERSION,
                family: file.family(),
                schema_fingerprint: &file.schema_fingerprint,
                metadata: &file.metadata,
                pipeline: &file.pipeline,
                model,
            };
            let mut buf = Vec::new();
            let mut ser = serde_json::Serializer::new(&mut buf);
            stored
                .serialize(serde_stacker::Serializer::new(&mut ser))
                .expect("model types serialize infallibly");
            String::from_utf8(buf).expect("serde_json writes UTF-8") + "\n"
        }
        match &self.model {
            FittedModel::Logreg(m) => encode(self, m),
            FittedModel::Knn(m) => encode(self, m),
            FittedModel::Forest(m) => encode(self, m),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let version: VersionOnly = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if version.format_version != FORMAT_VERSION {
            return Err(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                version.format_version
            ));
        }
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let loaded = Loaded::deserialize(&mut de).map_err(|e| e.to_string())?;
        let payload = loaded.model.get();
        let model = match loaded.family {
            Family::Logreg => from_deep_str::<LogRegModel>(payload).map(FittedModel::Logreg),
            Family::Knn => from_deep_str::<KnnModel>(payload).map(FittedModel::Knn),
            Family::Forest => from_deep_str::<RandomForestModel>(payload).map(FittedModel::Forest),
        }
        .map_err(|e| format!("{} model payload: {e}", loaded.family))?;
        Ok(ModelFile {
            schema_fingerprint: loaded.schema_fingerprint,
            metadata: loaded.metadata,
            pipeline: loaded.pipeline,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        crate::write_file("save", path, &self.to_json())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io("load", path, e))?;
        Self::from_json(&text).map_err(|e| CliError::config("load", format!("{}: {e}", path.display())))
    }

    /// Class and class-1 probability for one raw (untransformed) row.
    pub fn predict_raw(&self, row: &[f64]) -> heartml::Result<(u8, f64)> {
        let x = self.pipeline.transform_row(row)?;
        Ok((self.model.predict(&x)?, self.model.predict_proba(&x)?))
    }
}
