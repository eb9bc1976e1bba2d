//! Predictor schemas, dummy encoding and the column bookkeeping shared by
//! every other module.
//!
//! Factors are indexed from 0. Factor 0 always carries the intercept: all of
//! its levels (including the reference level 0) get a column. Every other
//! categorical factor drops its reference level, and a continuous predictor
//! is treated as a two-element factor `{absent, present}` with one column.
//! If the first predictor is not categorical, a synthetic one-level factor
//! named [`INTERCEPT_NAME`] is prepended.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::table::RawTable;

pub const INTERCEPT_NAME: &str = "(intercept)";
const NO_LEVEL: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("schema has no predictors")]
    NoPredictors,
    #[error("categorical predictor `{0}` needs at least two levels")]
    TooFewLevels(String),
    #[error("level `{level}` listed twice for predictor `{predictor}`")]
    DuplicateLevel { predictor: String, level: String },
    #[error("predictor `{0}` listed twice")]
    DuplicatePredictor(String),
    #[error("unknown predictor kind `{0}` (expected categorical or continuous)")]
    UnknownKind(String),
    #[error("column `{0}` not found")]
    UnknownColumn(String),
    #[error("value `{value}` is not a level of predictor `{predictor}`")]
    UnknownLevel { predictor: String, value: String },
    #[error("level `{level}` of `{factor}` never occurs (zero-norm column)")]
    EmptyColumn { factor: String, level: String },
    #[error("response value `{value}` in row {row} is not numeric")]
    NonNumericResponse { row: usize, value: String },
    #[error("value `{value}` of continuous predictor `{predictor}` in row {row} is not numeric")]
    NonNumericPredictor {
        predictor: String,
        row: usize,
        value: String,
    },
    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table has no data rows")]
    EmptyTable,
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
}

// ---------------------------------------------------------------------------
// Schema

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorKind {
    Categorical { levels: Vec<String> },
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predictor {
    pub name: String,
    pub kind: PredictorKind,
}

impl Predictor {
    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: PredictorKind::Categorical { levels },
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: PredictorKind::Continuous,
        }
    }
}

/// Ordered predictor list. The first listed level of a categorical
/// predictor is its reference level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct PredictorSchema {
    predictors: Vec<Predictor>,
}

impl PredictorSchema {
    pub fn new(predictors: Vec<Predictor>) -> Result<Self, SchemaError> {
        if predictors.is_empty() {
            return Err(SchemaError::NoPredictors);
        }
        let mut names = BTreeSet::new();
        for p in &predictors {
            if !names.insert(p.name.as_str()) || p.name == INTERCEPT_NAME {
                return Err(SchemaError::DuplicatePredictor(p.name.clone()));
            }
            if let PredictorKind::Categorical { levels } = &p.kind {
                if levels.len() < 2 {
                    return Err(SchemaError::TooFewLevels(p.name.clone()));
                }
                let mut seen = BTreeSet::new();
                for l in levels {
                    if !seen.insert(l.as_str()) {
                        return Err(SchemaError::DuplicateLevel {
                            predictor: p.name.clone(),
                            level: l.clone(),
                        });
                    }
                }
            }
        }
        Ok(Self { predictors })
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    /// Every non-response column becomes a predictor: numeric columns are
    /// continuous, anything else categorical with levels in sorted order.
    pub fn infer(table: &RawTable, response: &str) -> Result<Self, SchemaError> {
        let resp = table.column_index(response)?;
        let mut predictors = Vec::new();
        for (idx, name) in table.header.iter().enumerate() {
            if idx == resp {
                continue;
            }
            let numeric = table.column(idx).all(|v| v.parse::<f64>().is_ok());
            if numeric {
                predictors.push(Predictor::continuous(name.clone()));
            } else {
                let levels: BTreeSet<&str> = table.column(idx).collect();
                predictors.push(Predictor::categorical(
                    name.clone(),
                    levels.into_iter().map(str::to_owned).collect(),
                ));
            }
        }
        Self::new(predictors)
    }

    /// Parse a schema file. Categorical entries may omit `levels`, in which
    /// case they are filled from `table` in sorted order.
    pub fn from_json(text: &str, table: Option<&RawTable>) -> Result<Self, SchemaError> {
        let mut file: SchemaFile =
            serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
        for entry in &mut file.predictors {
            if entry.kind == "categorical" && entry.levels.is_none() {
                let table = table.ok_or_else(|| {
                    SchemaError::Json(format!("levels of `{}` missing and no data given", entry.name))
                })?;
                let idx = table.column_index(&entry.name)?;
                let levels: BTreeSet<&str> = table.column(idx).collect();
                entry.levels = Some(levels.into_iter().map(str::to_owned).collect());
            }
        }
        Self::try_from(file)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    predictors: Vec<SchemaEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaEntry {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
}

impl TryFrom<SchemaFile> for PredictorSchema {
    type Error = SchemaError;

    fn try_from(file: SchemaFile) -> Result<Self, Self::Error> {
        let predictors = file
            .predictors
            .into_iter()
            .map(|e| match e.kind.as_str() {
                "categorical" => Ok(Predictor::categorical(e.name, e.levels.unwrap_or_default())),
                "continuous" => Ok(Predictor::continuous(e.name)),
                other => Err(SchemaError::UnknownKind(other.to_owned())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(predictors)
    }
}

impl From<PredictorSchema> for SchemaFile {
    fn from(s: PredictorSchema) -> Self {
        SchemaFile {
            predictors: s
                .predictors
                .into_iter()
                .map(|p| match p.kind {
                    PredictorKind::Categorical { levels } => SchemaEntry {
                        name: p.name,
                        kind: "categorical".into(),
                        levels: Some(levels),
                    },
                    PredictorKind::Continuous => SchemaEntry {
                        name: p.name,
                        kind: "continuous".into(),
                        levels: None,
                    },
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Layout

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    /// Synthetic single-level factor holding only the intercept column.
    Intercept,
    Categorical,
    Continuous,
}

/// One predictor as seen by the design: its partition elements ("levels")
/// and the span of design columns it owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub name: String,
    pub kind: FactorKind,
    /// Level labels; for continuous predictors `["(absent)", name]`.
    pub levels: Vec<String>,
    pub first_column: usize,
    pub n_columns: usize,
}

impl Factor {
    /// Number of elements partitioned by a model: `p_k + 1`.
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Column tag `(factor, level)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnTag {
    pub factor: usize,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    factors: Vec<Factor>,
    tags: Vec<ColumnTag>,
}

impl Layout {
    /// Build from `(name, kind, levels)` triples; `levels` is ignored for
    /// continuous factors.
    pub fn new(specs: Vec<(String, FactorKind, Vec<String>)>) -> Result<Self, SchemaError> {
        if specs.is_empty() {
            return Err(SchemaError::NoPredictors);
        }
        let mut factors = Vec::with_capacity(specs.len());
        let mut tags = Vec::new();
        for (k, (name, kind, levels)) in specs.into_iter().enumerate() {
            let levels = match kind {
                FactorKind::Continuous => {
                    if k == 0 {
                        return Err(SchemaError::InvalidDesign(
                            "factor 0 must be categorical or the intercept".into(),
                        ));
                    }
                    vec!["(absent)".to_owned(), name.clone()]
                }
                FactorKind::Intercept => {
                    if k != 0 {
                        return Err(SchemaError::InvalidDesign(
                            "only factor 0 may be the intercept".into(),
                        ));
                    }
                    vec![INTERCEPT_NAME.to_owned()]
                }
                FactorKind::Categorical => {
                    if levels.len() < 2 {
                        return Err(SchemaError::TooFewLevels(name));
                    }
                    levels
                }
            };
            let first = tags.len();
            let start = if k == 0 { 0 } else { 1 };
            for level in start..levels.len() {
                tags.push(ColumnTag { factor: k, level });
            }
            factors.push(Factor {
                name,
                kind,
                n_columns: tags.len() - first,
                first_column: first,
                levels,
            });
        }
        Ok(Self { factors, tags })
    }

    pub fn from_schema(schema: &PredictorSchema) -> Result<Self, SchemaError> {
        let mut specs = Vec::new();
        let first_categorical = matches!(
            schema.predictors[0].kind,
            PredictorKind::Categorical { .. }
        );
        if !first_categorical {
            specs.push((INTERCEPT_NAME.to_owned(), FactorKind::Intercept, vec![]));
        }
        for p in &schema.predictors {
            match &p.kind {
                PredictorKind::Categorical { levels } => {
                    specs.push((p.name.clone(), FactorKind::Categorical, levels.clone()))
                }
                PredictorKind::Continuous => {
                    specs.push((p.name.clone(), FactorKind::Continuous, vec![]))
                }
            }
        }
        Self::new(specs)
    }

    /// Purely categorical layout: factor `k` has `levels[k]` levels named
    /// `"0".."levels-1"`. Handy for tests and toy problems.
    pub fn categorical(levels: &[usize]) -> Result<Self, SchemaError> {
        Self::new(
            levels
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    (
                        format!("f{k}"),
                        FactorKind::Categorical,
                        (0..l).map(|j| j.to_string()).collect(),
                    )
                })
                .collect(),
        )
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, k: usize) -> &Factor {
        &self.factors[k]
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn r(&self) -> usize {
        self.factors.len()
    }

    pub fn p(&self) -> usize {
        self.tags.len()
    }

    pub fn tags(&self) -> &[ColumnTag] {
        &self.tags
    }

    /// Design column of level `j` of factor `k`, `None` for a dropped
    /// reference level.
    pub fn column(&self, k: usize, j: usize) -> Option<usize> {
        let f = &self.factors[k];
        if j >= f.n_levels() {
            return None;
        }
        if k == 0 {
            Some(f.first_column + j)
        } else if j == 0 {
            None
        } else {
            Some(f.first_column + j - 1)
        }
    }

    pub fn group(&self, k: usize) -> std::ops::Range<usize> {
        let f = &self.factors[k];
        f.first_column..f.first_column + f.n_columns
    }

    /// `p_k` per factor, with factor 0 reporting its column count `p_1 + 1`.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.n_columns).collect()
    }

    /// Coefficient of level `j` of factor `k`, with 0 for dropped references.
    pub fn level_value<F: Scalar>(&self, beta: &[F], k: usize, j: usize) -> F {
        self.column(k, j).map_or(F::zero(), |c| beta[c])
    }
}

// ---------------------------------------------------------------------------
// Design

/// Row access for one factor.
#[derive(Debug, Clone, PartialEq)]
enum FactorAccess {
    /// Level index per row (`NO_LEVEL` when factor 0 has no active column)
    /// and the column offset within the group (`u32::MAX` when none).
    Levels(Vec<u32>, Vec<u32>),
    /// Single continuous column.
    Column(usize),
}

/// Dense dummy-expanded design with per-factor level indices kept alongside,
/// so group products cost `O(n)` for categorical factors.
#[derive(Debug, Clone)]
pub struct DesignMatrix<F> {
    layout: Layout,
    values: Array2<F>,
    norms: Vec<F>,
    access: Vec<FactorAccess>,
    counts: Vec<Vec<usize>>,
}

impl<F: Scalar> DesignMatrix<F> {
    /// Validate a raw matrix against `layout`: categorical entries must be
    /// 0/1 with at most one active level per row and factor, and every
    /// column must have positive norm.
    pub fn new(layout: Layout, values: Array2<F>) -> Result<Self, SchemaError> {
        let (n, p) = values.dim();
        if p != layout.p() {
            return Err(SchemaError::InvalidDesign(format!(
                "{p} columns for a layout of {}",
                layout.p()
            )));
        }
        if n == 0 {
            return Err(SchemaError::EmptyTable);
        }
        let mut access = Vec::with_capacity(layout.r());
        let mut counts = Vec::with_capacity(layout.r());
        for (k, f) in layout.factors().iter().enumerate() {
            match f.kind {
                FactorKind::Continuous => {
                    access.push(FactorAccess::Column(f.first_column));
                    counts.push(vec![]);
                }
                FactorKind::Categorical | FactorKind::Intercept => {
                    let mut lv = vec![if k == 0 { NO_LEVEL } else { 0 }; n];
                    let mut cnt = vec![0usize; f.n_levels()];
                    for i in 0..n {
                        for j in 0..f.n_levels() {
                            let Some(c) = layout.column(k, j) else { continue };
                            let v = values[[i, c]];
                            if v == F::one() {
                                if lv[i] != NO_LEVEL && (k == 0 || lv[i] != 0) {
                                    return Err(SchemaError::InvalidDesign(format!(
                                        "row {i} has two active levels of `{}`",
                                        f.name
                                    )));
                                }
                                lv[i] = j as u32;
                            } else if v != F::zero() {
                                return Err(SchemaError::InvalidDesign(format!(
                                    "non-binary entry in row {i} of `{}`",
                                    f.name
                                )));
                            }
                        }
                        if lv[i] != NO_LEVEL {
                            cnt[lv[i] as usize] += 1;
                        }
                    }
                    let shift = u32::from(k != 0);
                    let slot = lv
                        .iter()
                        .map(|&l| if l == NO_LEVEL || l < shift { u32::MAX } else { l - shift })
                        .collect();
                    access.push(FactorAccess::Levels(lv, slot));
                    counts.push(cnt);
                }
            }
        }
        let mut norms = Vec::with_capacity(p);
        for c in 0..p {
            let nrm = values.column(c).iter().map(|&v| v * v).sum::<F>().sqrt();
            if !(nrm > F::zero()) {
                let tag = layout.tags()[c];
                let f = layout.factor(tag.factor);
                return Err(SchemaError::EmptyColumn {
                    factor: f.name.clone(),
                    level: f.levels[tag.level].clone(),
                });
            }
            norms.push(nrm);
        }
        Ok(Self {
            layout,
            values,
            norms,
            access,
            counts,
        })
    }

    /// Build a purely categorical design from level indices
    /// (`levels[i][k]`, with level 0 the reference).
    pub fn from_levels(layout: Layout, levels: &[Vec<usize>]) -> Result<Self, SchemaError> {
        let n = levels.len();
        let mut values = Array2::zeros((n, layout.p()));
        for (i, row) in levels.iter().enumerate() {
            if row.len() != layout.r() {
                return Err(SchemaError::InvalidDesign(format!("row {i} has wrong length")));
            }
            for (k, &j) in row.iter().enumerate() {
                if j >= layout.factor(k).n_levels() {
                    return Err(SchemaError::InvalidDesign(format!("level {j} out of range")));
                }
                if let Some(c) = layout.column(k, j) {
                    values[[i, c]] = F::one();
                }
            }
        }
        Self::new(layout, values)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &Array2<F> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn r(&self) -> usize {
        self.layout.r()
    }

    pub fn column_norms(&self) -> &[F] {
        &self.norms
    }

    pub fn column_tags(&self) -> &[ColumnTag] {
        self.layout.tags()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.layout.group_sizes()
    }

    /// Observations per level for a categorical factor (empty for continuous).
    pub fn level_counts(&self, k: usize) -> &[usize] {
        &self.counts[k]
    }

    /// Active level of factor `k` in row `i` (0 is the reference for k ≥ 1).
    pub fn row_level(&self, k: usize, i: usize) -> Option<usize> {
        match &self.access[k] {
            FactorAccess::Levels(lv, _) => (lv[i] != NO_LEVEL).then_some(lv[i] as usize),
            FactorAccess::Column(_) => None,
        }
    }

    /// Entry of the continuous column of factor `k` in row `i`.
    pub fn row_value(&self, k: usize, i: usize) -> Option<F> {
        match &self.access[k] {
            FactorAccess::Column(c) => Some(self.values[[i, *c]]),
            FactorAccess::Levels(..) => None,
        }
    }

    pub fn is_continuous(&self, k: usize) -> bool {
        matches!(self.access[k], FactorAccess::Column(_))
    }

    /// `out = X_kᵀ v`.
    pub fn group_xt(&self, k: usize, v: &[F], out: &mut [F]) {
        let f = self.layout.factor(k);
        debug_assert_eq!(out.len(), f.n_columns);
        match &self.access[k] {
            FactorAccess::Levels(_, slot) => {
                out.iter_mut().for_each(|o| *o = F::zero());
                for (&s, &x) in slot.iter().zip(v) {
                    if let Some(o) = out.get_mut(s as usize) {
                        *o += x;
                    }
                }
            }
            FactorAccess::Column(c) => {
                out[0] = self.values.column(*c).iter().zip(v).map(|(&x, &y)| x * y).sum();
            }
        }
    }

    /// `acc += X_k delta`.
    pub fn group_axpy(&self, k: usize, delta: &[F], acc: &mut [F]) {
        match &self.access[k] {
            FactorAccess::Levels(_, slot) => {
                for (a, &s) in acc.iter_mut().zip(slot) {
                    if let Some(d) = delta.get(s as usize) {
                        *a += *d;
                    }
                }
            }
            FactorAccess::Column(c) => {
                let d = delta[0];
                for (a, &x) in acc.iter_mut().zip(self.values.column(*c)) {
                    *a += d * x;
                }
            }
        }
    }

    /// Gram block `X_kᵀ X_k`, row-major.
    pub fn group_gram(&self, k: usize) -> Vec<F> {
        let range = self.layout.group(k);
        let m = range.len();
        let mut g = vec![F::zero(); m * m];
        match &self.access[k] {
            FactorAccess::Levels(..) => {
                for (a, c) in range.enumerate() {
                    g[a * m + a] = self.norms[c] * self.norms[c];
                }
            }
            FactorAccess::Column(c) => g[0] = self.norms[*c] * self.norms[*c],
        }
        g
    }

    pub fn matvec(&self, beta: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.n()];
        for k in 0..self.r() {
            self.group_axpy(k, &beta[self.layout.group(k)], &mut out);
        }
        out
    }

    pub fn t_matvec(&self, v: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.p()];
        for k in 0..self.r() {
            let range = self.layout.group(k);
            self.group_xt(k, v, &mut out[range]);
        }
        out
    }

    /// Level labels of the active categorical columns of row `i`; `None`
    /// for continuous predictors and for a row without a factor-0 level.
    pub fn decode_row(&self, i: usize) -> Vec<Option<&str>> {
        (0..self.r())
            .map(|k| {
                self.row_level(k, i)
                    .map(|j| self.layout.factor(k).levels[j].as_str())
            })
            .collect()
    }
}

/// Design plus response.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    pub design: DesignMatrix<F>,
    pub response: Vec<F>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(design: DesignMatrix<F>, response: Vec<F>) -> Result<Self, SchemaError> {
        if response.len() != design.n() {
            return Err(SchemaError::InvalidDesign(format!(
                "response has {} entries, design has {} rows",
                response.len(),
                design.n()
            )));
        }
        Ok(Self { design, response })
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn layout(&self) -> &Layout {
        self.design.layout()
    }

    /// Same design, different response.
    pub fn with_response(&self, response: Vec<F>) -> Result<Self, SchemaError> {
        Self::new(self.design.clone(), response)
    }
}

// ---------------------------------------------------------------------------
// Encoding

/// Sparse encoded row: `(design column, value)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// Policy for categorical values missing from the layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnseenLevels {
    #[default]
    Reject,
    /// Treat the value as the reference level (for factor 0: its level 0).
    AsReference,
}

fn predictor_columns(
    table: &RawTable,
    layout: &Layout,
) -> Result<Vec<Option<usize>>, SchemaError> {
    layout
        .factors()
        .iter()
        .map(|f| match f.kind {
            FactorKind::Intercept => Ok(None),
            _ => table.column_index(&f.name).map(Some),
        })
        .collect()
}

/// Encode every row of `table` into sparse design rows without requiring
/// level coverage; used for prediction on new data.
pub fn encode_rows(
    table: &RawTable,
    layout: &Layout,
    unseen: UnseenLevels,
) -> Result<Vec<SparseRow>, SchemaError> {
    let cols = predictor_columns(table, layout)?;
    let lookups: Vec<HashMap<&str, usize>> = layout
        .factors()
        .iter()
        .map(|f| {
            f.levels
                .iter()
                .enumerate()
                .map(|(j, l)| (l.as_str(), j))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(table.n_rows());
    for (i, row) in table.rows.iter().enumerate() {
        let mut enc = Vec::with_capacity(layout.r());
        for (k, f) in layout.factors().iter().enumerate() {
            match f.kind {
                FactorKind::Intercept => enc.push((0, 1.0)),
                FactorKind::Categorical => {
                    let raw = row[cols[k].expect("categorical column")].as_str();
                    let j = match lookups[k].get(raw) {
                        Some(&j) => j,
                        None => match unseen {
                            UnseenLevels::Reject => {
                                return Err(SchemaError::UnknownLevel {
                                    predictor: f.name.clone(),
                                    value: raw.to_owned(),
                                })
                            }
                            UnseenLevels::AsReference => 0,
                        },
                    };
                    if let Some(c) = layout.column(k, j) {
                        enc.push((c, 1.0));
                    }
                }
                FactorKind::Continuous => {
                    let raw = row[cols[k].expect("continuous column")].as_str();
                    let v: f64 = raw.parse().map_err(|_| SchemaError::NonNumericPredictor {
                        predictor: f.name.clone(),
                        row: i,
                        value: raw.to_owned(),
                    })?;
                    enc.push((f.first_column, v));
                }
            }
        }
        out.push(enc);
    }
    Ok(out)
}

/// Encode a raw table into the dummy design and response.
pub fn encode<F: Scalar>(
    table: &RawTable,
    schema: &PredictorSchema,
    response: &str,
) -> Result<Dataset<F>, SchemaError> {
    if table.n_rows() == 0 {
        return Err(SchemaError::EmptyTable);
    }
    let layout = Layout::from_schema(schema)?;
    let resp = table.column_index(response)?;
    let y = table
        .column(resp)
        .enumerate()
        .map(|(i, v)| {
            v.parse::<f64>()
                .map(F::of)
                .map_err(|_| SchemaError::NonNumericResponse {
                    row: i,
                    value: v.to_owned(),
                })
        })
        .collect::<Result<Vec<F>, _>>()?;
    let rows = encode_rows(table, &layout, UnseenLevels::Reject)?;
    let mut values = Array2::zeros((rows.len(), layout.p()));
    for (i, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            values[[i, c]] = F::of(v);
        }
    }
    let design = DesignMatrix::new(layout, values)?;
    Dataset::new(design, y)
}

/// `x_M`, `x_m` and `x_W` of a design under given column weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats<F> {
    pub x_max: F,
    pub x_min: F,
    pub x_w: F,
}

pub fn column_stats<F: Scalar>(design: &DesignMatrix<F>, weights: &[F]) -> ColumnStats<F> {
    let norms = design.column_norms();
    let x_max = norms.iter().fold(F::zero(), |m, &v| m.max(v));
    let x_min = norms.iter().fold(F::infinity(), |m, &v| m.min(v));
    let x_w = norms
        .iter()
        .zip(weights)
        .fold(F::zero(), |m, (&x, &w)| m.max(x / w));
    ColumnStats { x_max, x_min, x_w }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable::new(
            header.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
        .unwrap()
    }

    fn levels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn smallest_schema_has_two_columns() {
        let t = table(&["y", "a"], &[&["1", "u"], &["2", "u"], &["3", "v"], &["4", "v"]]);
        let schema = PredictorSchema::new(vec![Predictor::categorical("a", levels(&["u", "v"]))]).unwrap();
        let d: Dataset<f64> = encode(&t, &schema, "y").unwrap();
        assert_eq!(d.p(), 2);
        let x = d.design.values();
        assert_eq!(x.column(0).to_vec(), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(x.column(1).to_vec(), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn factor_plus_continuous_balanced() {
        let t = table(
            &["y", "a", "z"],
            &[
                &["1", "p", "0.5"],
                &["2", "q", "1.5"],
                &["3", "r", "2.5"],
                &["4", "p", "3.5"],
                &["5", "q", "4.5"],
                &["6", "r", "5.5"],
            ],
        );
        let schema = PredictorSchema::infer(&t, "y").unwrap();
        let d: Dataset<f64> = encode(&t, &schema, "y").unwrap();
        assert_eq!(d.p(), 4);
        for c in 0..3 {
            assert!((d.design.column_norms()[c] - 2f64.sqrt()).abs() < 1e-15);
        }
        assert!(d.design.is_continuous(1));
    }

    #[test]
    fn continuous_first_gets_intercept_factor() {
        let t = table(&["y", "z", "a"], &[&["1", "0.1", "u"], &["2", "0.2", "v"]]);
        let schema = PredictorSchema::new(vec![
            Predictor::continuous("z"),
            Predictor::categorical("a", levels(&["u", "v"])),
        ])
        .unwrap();
        let d: Dataset<f64> = encode(&t, &schema, "y").unwrap();
        assert_eq!(d.layout().factor(0).kind, FactorKind::Intercept);
        assert_eq!(d.p(), 3);
        assert_eq!(d.design.values().column(0).to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn error_paths() {
        let schema = PredictorSchema::new(vec![Predictor::categorical("a", levels(&["u", "v", "w"]))]).unwrap();
        let t = table(&["y", "a"], &[&["1", "u"], &["2", "x"]]);
        assert!(matches!(
            encode::<f64>(&t, &schema, "y"),
            Err(SchemaError::UnknownLevel { .. })
        ));
        let t = table(&["y", "a"], &[&["1", "u"], &["2", "v"]]);
        assert_eq!(
            encode::<f64>(&t, &schema, "y").unwrap_err(),
            SchemaError::EmptyColumn {
                factor: "a".into(),
                level: "w".into()
            }
        );
        let t = table(&["y", "a"], &[&["1", "u"], &["oops", "v"], &["3", "w"]]);
        assert!(matches!(
            encode::<f64>(&t, &schema, "y"),
            Err(SchemaError::NonNumericResponse { row: 1, .. })
        ));
        assert!(matches!(
            PredictorSchema::new(vec![Predictor::categorical("a", levels(&["u"]))]),
            Err(SchemaError::TooFewLevels(_))
        ));
        assert!(matches!(
            PredictorSchema::new(vec![Predictor::categorical("a", levels(&["u", "u"]))]),
            Err(SchemaError::DuplicateLevel { .. })
        ));
    }

    #[test]
    fn column_stats_on_unbalanced_counts() {
        // level counts 1, 4, 9 on a single 3-level factor
        let layout = Layout::categorical(&[3]).unwrap();
        let mut rows = vec![vec![0]];
        rows.extend(std::iter::repeat(vec![1]).take(4));
        rows.extend(std::iter::repeat(vec![2]).take(9));
        let d = DesignMatrix::<f64>::from_levels(layout, &rows).unwrap();
        let s = column_stats(&d, &[1.0, 16.0, 81.0]); // q = 2 weights
        assert_eq!(s.x_min, 1.0);
        assert_eq!(s.x_max, 3.0);
        assert_eq!(s.x_w, 1.0);
        let s = column_stats(&d, d.column_norms());
        assert_eq!(s.x_w, 1.0);
    }

    #[test]
    fn schema_json_round_trip() {
        let text = r#"{"predictors":[{"name":"a","kind":"categorical","levels":["x","y"]},{"name":"z","kind":"continuous"}]}"#;
        let s = PredictorSchema::from_json(text, None).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), text);
        let bad = r#"{"predictors":[{"name":"a","kind":"ordinal"}]}"#;
        assert!(matches!(
            PredictorSchema::from_json(bad, None),
            Err(SchemaError::UnknownKind(_))
        ));
    }

    #[test]
    fn group_products_match_dense() {
        let layout = Layout::categorical(&[3, 4]).unwrap();
        let rows = vec![vec![0, 1], vec![1, 0], vec![2, 3], vec![1, 2], vec![0, 3], vec![2, 1]];
        let d = DesignMatrix::<f64>::from_levels(layout, &rows).unwrap();
        let v = [0.3, -1.0, 2.0, 0.5, 1.5, -0.25];
        let xt = d.t_matvec(&v);
        let dense = d.values().t().dot(&ndarray::arr1(&v));
        for c in 0..d.p() {
            assert!((xt[c] - dense[c]).abs() < 1e-14);
        }
        let beta: Vec<f64> = (0..d.p()).map(|c| c as f64 * 0.7 - 1.0).collect();
        let xb = d.matvec(&beta);
        let dense = d.values().dot(&ndarray::arr1(&beta));
        for i in 0..d.n() {
            assert!((xb[i] - dense[i]).abs() < 1e-14);
        }
    }
}
