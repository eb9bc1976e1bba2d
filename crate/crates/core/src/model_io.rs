//! Model files: the fused partition by level names, the coefficients, the
//! schema needed to encode new data, and run metadata.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{PartitionError, PartitionModel, SetPartition};
use crate::schema::{encode_rows, FactorKind, Layout, PredictorSchema, SchemaError, UnseenLevels};
use crate::table::RawTable;

pub const FORMAT: &str = "catfuse-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format `{0}` version {1}")]
    Format(String, u32),
    #[error("model file does not match its schema: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config_hash: String,
}

/// A selected model ready for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub schema: PredictorSchema,
    pub response: String,
    pub layout: Layout,
    pub model: PartitionModel,
    pub beta: Vec<f64>,
    pub meta: Meta,
    /// Free-form fit summary carried through unchanged.
    pub summary: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    meta: Meta,
    response: String,
    schema: PredictorSchema,
    factors: Vec<FactorEntry>,
    continuous: Vec<ContinuousEntry>,
    coefficients: BTreeMap<String, Coefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FactorEntry {
    name: String,
    clusters: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContinuousEntry {
    name: String,
    included: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Coefficient {
    Scalar(f64),
    Levels(BTreeMap<String, f64>),
}

impl FittedModel {
    pub fn new(
        schema: PredictorSchema,
        response: impl Into<String>,
        model: PartitionModel,
        beta: Vec<f64>,
        meta: Meta,
    ) -> Result<Self, ModelIoError> {
        let layout = Layout::from_schema(&schema)?;
        model.check(&layout)?;
        if beta.len() != layout.p() {
            return Err(ModelIoError::Mismatch(format!(
                "{} coefficients for {} columns",
                beta.len(),
                layout.p()
            )));
        }
        Ok(Self {
            schema,
            response: response.into(),
            layout,
            model,
            beta,
            meta,
            summary: None,
        })
    }

    pub fn with_summary(mut self, summary: serde_json::Value) -> Self {
        self.summary = Some(summary);
        self
    }

    pub fn to_json(&self) -> Result<String, ModelIoError> {
        let layout = &self.layout;
        let mut factors = Vec::new();
        let mut continuous = Vec::new();
        let mut coefficients = BTreeMap::new();
        for (k, f) in layout.factors().iter().enumerate() {
            let part = self.model.factor(k);
            match f.kind {
                FactorKind::Continuous => {
                    continuous.push(ContinuousEntry {
                        name: f.name.clone(),
                        included: part.n_blocks() == 2,
                    });
                    coefficients.insert(f.name.clone(), Coefficient::Scalar(layout.level_value(&self.beta, k, 1)));
                }
                FactorKind::Categorical | FactorKind::Intercept => {
                    factors.push(FactorEntry {
                        name: f.name.clone(),
                        clusters: part
                            .blocks()
                            .into_iter()
                            .map(|b| b.into_iter().map(|j| f.levels[j].clone()).collect())
                            .collect(),
                    });
                    let levels = (0..f.n_levels())
                        .filter(|&j| layout.column(k, j).is_some())
                        .map(|j| (f.levels[j].clone(), layout.level_value(&self.beta, k, j)))
                        .collect();
                    coefficients.insert(f.name.clone(), Coefficient::Levels(levels));
                }
            }
        }
        let file = ModelFile {
            format: FORMAT.to_owned(),
            version: FORMAT_VERSION,
            meta: self.meta.clone(),
            response: self.response.clone(),
            schema: self.schema.clone(),
            factors,
            continuous,
            coefficients,
            summary: self.summary.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelIoError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT || file.version != FORMAT_VERSION {
            return Err(ModelIoError::Format(file.format, file.version));
        }
        let layout = Layout::from_schema(&file.schema)?;
        let by_name: BTreeMap<&str, &FactorEntry> = file.factors.iter().map(|e| (e.name.as_str(), e)).collect();
        let flags: BTreeMap<&str, bool> = file.continuous.iter().map(|e| (e.name.as_str(), e.included)).collect();
        if by_name.len() + flags.len() != layout.r() {
            return Err(ModelIoError::Mismatch("factor lists do not cover the schema".into()));
        }
        let mut parts = Vec::with_capacity(layout.r());
        let mut beta = vec![0.0; layout.p()];
        for (k, f) in layout.factors().iter().enumerate() {
            let coef = file
                .coefficients
                .get(&f.name)
                .ok_or_else(|| ModelIoError::Mismatch(format!("no coefficients for `{}`", f.name)))?;
            match f.kind {
                FactorKind::Continuous => {
                    let included = *flags
                        .get(f.name.as_str())
                        .ok_or_else(|| ModelIoError::Mismatch(format!("no flag for `{}`", f.name)))?;
                    parts.push(if included { SetPartition::discrete(2) } else { SetPartition::single(2) });
                    let Coefficient::Scalar(v) = coef else {
                        return Err(ModelIoError::Mismatch(format!("`{}` needs a single coefficient", f.name)));
                    };
                    beta[f.first_column] = *v;
                }
                FactorKind::Categorical | FactorKind::Intercept => {
                    let entry = by_name
                        .get(f.name.as_str())
                        .ok_or_else(|| ModelIoError::Mismatch(format!("no clusters for `{}`", f.name)))?;
                    let index: BTreeMap<&str, usize> =
                        f.levels.iter().enumerate().map(|(j, l)| (l.as_str(), j)).collect();
                    let blocks = entry
                        .clusters
                        .iter()
                        .map(|b| {
                            b.iter()
                                .map(|l| {
                                    index.get(l.as_str()).copied().ok_or_else(|| {
                                        ModelIoError::Mismatch(format!("unknown level `{l}` of `{}`", f.name))
                                    })
                                })
                                .collect::<Result<Vec<usize>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    parts.push(
                        SetPartition::from_blocks(f.n_levels(), &blocks)
                            .map_err(|e| ModelIoError::Mismatch(format!("`{}`: {e}", f.name)))?,
                    );
                    let Coefficient::Levels(values) = coef else {
                        return Err(ModelIoError::Mismatch(format!("`{}` needs level coefficients", f.name)));
                    };
                    for (level, v) in values {
                        let j = *index
                            .get(level.as_str())
                            .ok_or_else(|| ModelIoError::Mismatch(format!("unknown level `{level}`")))?;
                        let c = layout
                            .column(k, j)
                            .ok_or_else(|| ModelIoError::Mismatch(format!("`{level}` is a reference level")))?;
                        beta[c] = *v;
                    }
                }
            }
        }
        let model = PartitionModel::new(&layout, parts)?;
        if !model.contains(&layout, &beta, 1e-9) {
            return Err(ModelIoError::Mismatch("coefficients differ within a cluster".into()));
        }
        Ok(Self {
            schema: file.schema,
            response: file.response,
            layout,
            model,
            beta,
            meta: file.meta,
            summary: file.summary,
        })
    }

    /// `x_iᵀβ` for every row of `table`.
    pub fn predict(&self, table: &RawTable, unseen: UnseenLevels) -> Result<Vec<f64>, SchemaError> {
        let rows = encode_rows(table, &self.layout, unseen)?;
        Ok(rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * self.beta[c]).sum())
            .collect())
    }
}
