//! Fused models as per-factor set partitions, the constraint algebra that
//! describes them as linear subspaces, and least-squares refits on the
//! collapsed design.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::cholesky;
use crate::scalar::{dot, Scalar};
use crate::schema::{ColumnTag, Dataset, DesignMatrix, Layout};
use crate::theory::combinatorics::bell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("model has {model} factors / levels that do not match the layout ({layout})")]
    DimensionMismatch { model: String, layout: String },
    #[error("collapsed design has {m} columns but rank {rank}")]
    RankDeficient { m: usize, rank: usize },
    #[error("model size {m} exceeds sample size {n}")]
    Overparameterized { m: usize, n: usize },
    #[error("{count} submodels exceed the limit {limit}")]
    Exploded { count: u128, limit: u128 },
    #[error("invalid partition: {0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Set partitions

/// A set partition of `{0, …, n-1}` as a restricted-growth string: block id
/// per element, first occurrences in increasing order, so element 0 is
/// always in block 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct SetPartition(Vec<u32>);

impl TryFrom<Vec<u32>> for SetPartition {
    type Error = PartitionError;

    fn try_from(rgs: Vec<u32>) -> Result<Self, PartitionError> {
        Self::from_rgs(rgs)
    }
}

impl From<SetPartition> for Vec<u32> {
    fn from(p: SetPartition) -> Vec<u32> {
        p.0
    }
}

impl SetPartition {
    /// Every element in its own block.
    pub fn discrete(n: usize) -> Self {
        Self((0..n as u32).collect())
    }

    /// One block.
    pub fn single(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Canonical form of arbitrary labels.
    pub fn from_labels<T: Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut ids: HashMap<&T, u32> = HashMap::new();
        let rgs = labels
            .iter()
            .map(|l| {
                let next = ids.len() as u32;
                *ids.entry(l).or_insert(next)
            })
            .collect();
        Self(rgs)
    }

    /// Accept an already canonical restricted-growth string.
    pub fn from_rgs(rgs: Vec<u32>) -> Result<Self, PartitionError> {
        let mut next = 0;
        for &b in &rgs {
            if b > next {
                return Err(PartitionError::Invalid(format!("{rgs:?} is not restricted growth")));
            }
            if b == next {
                next += 1;
            }
        }
        Ok(Self(rgs))
    }

    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self, PartitionError> {
        let mut labels = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(PartitionError::Invalid("empty block".into()));
            }
            for &j in block {
                if j >= n || labels[j] != usize::MAX {
                    return Err(PartitionError::Invalid(format!("element {j} repeated or out of range")));
                }
                labels[j] = b;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(PartitionError::Invalid("blocks do not cover the set".into()));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rgs(&self) -> &[u32] {
        &self.0
    }

    pub fn block_of(&self, j: usize) -> usize {
        self.0[j] as usize
    }

    pub fn n_blocks(&self) -> usize {
        self.0.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Blocks in canonical order (by smallest member), members ascending.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (j, &b) in self.0.iter().enumerate() {
            out[b as usize].push(j);
        }
        out
    }

    /// Merge the blocks containing `a` and `b`.
    pub fn merged(&self, a: usize, b: usize) -> Self {
        let (ba, bb) = (self.0[a], self.0[b]);
        if ba == bb {
            return self.clone();
        }
        let labels: Vec<u32> = self
            .0
            .iter()
            .map(|&x| if x == bb { ba } else { x })
            .collect();
        Self::from_labels(&labels)
    }

    /// True when every block of `finer` lies inside a block of `self`.
    pub fn is_coarsening_of(&self, finer: &SetPartition) -> bool {
        if self.len() != finer.len() {
            return false;
        }
        let mut image = vec![u32::MAX; finer.n_blocks()];
        for (j, &b) in finer.0.iter().enumerate() {
            let slot = &mut image[b as usize];
            if *slot == u32::MAX {
                *slot = self.0[j];
            } else if *slot != self.0[j] {
                return false;
            }
        }
        true
    }

    /// Compose with a partition of this partition's blocks.
    fn coarsen_by(&self, of_blocks: &[u32]) -> Self {
        let labels: Vec<u32> = self.0.iter().map(|&b| of_blocks[b as usize]).collect();
        Self::from_labels(&labels)
    }

    /// All set partitions of `n` elements as restricted-growth strings, in
    /// lexicographic order.
    pub fn all(n: usize) -> AllPartitions {
        AllPartitions {
            current: if n == 0 { None } else { Some(vec![0; n]) },
            max_prefix: vec![0; n],
            first: true,
        }
    }
}

/// Iterator over the restricted-growth strings of a fixed length.
pub struct AllPartitions {
    current: Option<Vec<u32>>,
    max_prefix: Vec<u32>,
    first: bool,
}

impl Iterator for AllPartitions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let cur = self.current.as_mut()?;
        let n = cur.len();
        if self.first {
            self.first = false;
            return Some(cur.clone());
        }
        // max_prefix[i] = max(cur[0..i])
        for i in 1..n {
            self.max_prefix[i] = self.max_prefix[i - 1].max(cur[i - 1]);
        }
        let mut i = n;
        while i > 1 {
            i -= 1;
            if cur[i] <= self.max_prefix[i] {
                cur[i] += 1;
                for t in cur.iter_mut().skip(i + 1) {
                    *t = 0;
                }
                return Some(cur.clone());
            }
        }
        self.current = None;
        None
    }
}

// ---------------------------------------------------------------------------
// Models

/// A fused model: one set partition of the levels `0..=p_k` per factor.
/// Continuous predictors use the two-element partition `{absent, present}`:
/// `[0, 1]` means included, `[0, 0]` excluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionModel {
    parts: Vec<SetPartition>,
}

impl PartitionModel {
    pub fn new(layout: &Layout, parts: Vec<SetPartition>) -> Result<Self, PartitionError> {
        let model = Self { parts };
        model.check(layout)?;
        Ok(model)
    }

    /// Every level separate: the largest model on `layout`.
    pub fn full(layout: &Layout) -> Self {
        Self {
            parts: layout
                .factors()
                .iter()
                .map(|f| SetPartition::discrete(f.n_levels()))
                .collect(),
        }
    }

    /// All factors fully merged: only the intercept column survives.
    pub fn intercept_only(layout: &Layout) -> Self {
        Self {
            parts: layout
                .factors()
                .iter()
                .map(|f| SetPartition::single(f.n_levels()))
                .collect(),
        }
    }

    /// Model induced by a coefficient vector: levels with coefficients
    /// within `tol · (1 + |β|∞)` of each other (reference levels of factors
    /// k ≥ 1 count as 0) share a block. Equality is chained over sorted
    /// values.
    pub fn from_coefficients<F: Scalar>(layout: &Layout, beta: &[F], tol: F) -> Self {
        let scale = tol * (F::one() + crate::scalar::max_abs(beta));
        let parts = (0..layout.r())
            .map(|k| {
                let nl = layout.factor(k).n_levels();
                let vals: Vec<F> = (0..nl).map(|j| layout.level_value(beta, k, j)).collect();
                let mut order: Vec<usize> = (0..nl).collect();
                order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
                let mut labels = vec![0usize; nl];
                let mut block = 0;
                for w in 0..nl {
                    if w > 0 && vals[order[w]] - vals[order[w - 1]] > scale {
                        block += 1;
                    }
                    labels[order[w]] = block;
                }
                SetPartition::from_labels(&labels)
            })
            .collect();
        Self { parts }
    }

    pub fn check(&self, layout: &Layout) -> Result<(), PartitionError> {
        let ok = self.parts.len() == layout.r()
            && self
                .parts
                .iter()
                .zip(layout.factors())
                .all(|(p, f)| p.len() == f.n_levels());
        if ok {
            Ok(())
        } else {
            Err(PartitionError::DimensionMismatch {
                model: format!("{:?}", self.parts.iter().map(|p| p.len()).collect::<Vec<_>>()),
                layout: format!(
                    "{:?}",
                    layout.factors().iter().map(|f| f.n_levels()).collect::<Vec<_>>()
                ),
            })
        }
    }

    pub fn parts(&self) -> &[SetPartition] {
        &self.parts
    }

    pub fn factor(&self, k: usize) -> &SetPartition {
        &self.parts[k]
    }

    pub fn r(&self) -> usize {
        self.parts.len()
    }

    /// `|M| = j_1 + Σ_{k≥2}(j_k − 1)`.
    pub fn size(&self) -> usize {
        1 + self.parts.iter().map(|p| p.n_blocks() - 1).sum::<usize>()
    }

    /// Factor kept in the model: it has a block other than the reference one
    /// (factor 0 counts as active when its levels are not all merged).
    pub fn is_active(&self, k: usize) -> bool {
        self.parts[k].n_blocks() > 1
    }

    pub fn merged(&self, k: usize, a: usize, b: usize) -> Self {
        let mut out = self.clone();
        out.parts[k] = self.parts[k].merged(a, b);
        out
    }

    /// `L_self ⊆ L_other`: every partition coarsens the other's.
    pub fn is_submodel_of(&self, other: &PartitionModel) -> bool {
        self.parts.len() == other.parts.len()
            && self
                .parts
                .iter()
                .zip(&other.parts)
                .all(|(s, o)| s.is_coarsening_of(o))
    }

    pub fn is_proper_submodel_of(&self, other: &PartitionModel) -> bool {
        self != other && self.is_submodel_of(other)
    }

    /// Whether `beta` lies in `L_M` (within `tol`, relative to `1 + |β|∞`).
    pub fn contains<F: Scalar>(&self, layout: &Layout, beta: &[F], tol: F) -> bool {
        let scale = tol * (F::one() + crate::scalar::max_abs(beta));
        self.parts.iter().enumerate().all(|(k, part)| {
            let blocks = part.blocks();
            blocks.iter().all(|b| {
                let v0 = layout.level_value(beta, k, b[0]);
                b.iter()
                    .all(|&j| (layout.level_value(beta, k, j) - v0).abs() <= scale)
            })
        })
    }
}

// ---------------------------------------------------------------------------
// Column maps

/// Mapping from `(factor, level)` to a column of the collapsed design.
/// Columns are ordered by `(factor, smallest level of the block)`; blocks
/// holding the reference level of factors k ≥ 1 have no column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub(crate) level_col: Vec<Vec<Option<usize>>>,
    pub(crate) columns: Vec<ColumnTag>,
}

impl ColumnMap {
    pub fn new(layout: &Layout, model: &PartitionModel) -> Self {
        let mut level_col = Vec::with_capacity(layout.r());
        let mut columns = Vec::new();
        for (k, part) in model.parts.iter().enumerate() {
            let mut map = vec![None; part.len()];
            for block in part.blocks() {
                if k != 0 && block[0] == 0 {
                    continue;
                }
                let c = columns.len();
                columns.push(ColumnTag {
                    factor: k,
                    level: block[0],
                });
                for j in block {
                    map[j] = Some(c);
                }
            }
            level_col.push(map);
        }
        Self { level_col, columns }
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnTag] {
        &self.columns
    }

    pub fn column_of(&self, k: usize, j: usize) -> Option<usize> {
        self.level_col[k][j]
    }

    /// `ZᵀZ` (row-major) and `Zᵀy` accumulated row by row: each row touches
    /// at most one collapsed column per factor.
    pub(crate) fn gram<F: Scalar>(&self, design: &DesignMatrix<F>, y: &[F]) -> (Vec<F>, Vec<F>) {
        let m = self.m();
        let mut g = vec![F::zero(); m * m];
        let mut b = vec![F::zero(); m];
        let touched: Vec<usize> = (0..self.level_col.len())
            .filter(|&k| self.level_col[k].iter().any(Option::is_some))
            .collect();
        let mut active: Vec<(usize, F)> = Vec::with_capacity(touched.len());
        for i in 0..design.n() {
            active.clear();
            for &k in &touched {
                if design.is_continuous(k) {
                    if let Some(c) = self.level_col[k][1] {
                        let v = design.row_value(k, i).unwrap();
                        if v != F::zero() {
                            active.push((c, v));
                        }
                    }
                } else if let Some(j) = design.row_level(k, i) {
                    if let Some(c) = self.level_col[k][j] {
                        active.push((c, F::one()));
                    }
                }
            }
            for (t, &(c1, v1)) in active.iter().enumerate() {
                b[c1] += v1 * y[i];
                for &(c2, v2) in &active[t..] {
                    let add = v1 * v2;
                    g[c1 * m + c2] += add;
                    if c1 != c2 {
                        g[c2 * m + c1] += add;
                    }
                }
            }
        }
        (g, b)
    }
}

// ---------------------------------------------------------------------------
// Constraint matrix

/// `A₀ₘ` with its coordinate ordering: the first `m` coordinates are the
/// block leaders (`β_{s_{j,k},k}`), the rest are the remaining coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    /// Design column of each coordinate, in matrix column order.
    pub coordinates: Vec<usize>,
    pub tags: Vec<ColumnTag>,
    /// `(p − m) × p`, of the form `(B_M, I_{p−m})`.
    pub matrix: Array2<f64>,
    pub m: usize,
}

impl ConstraintMatrix {
    /// Build with an explicit block order per factor. The block containing
    /// level 0 must come first within each factor.
    pub fn with_block_order(
        layout: &Layout,
        blocks: &[Vec<Vec<usize>>],
    ) -> Result<Self, PartitionError> {
        if blocks.len() != layout.r() {
            return Err(PartitionError::DimensionMismatch {
                model: format!("{} factors", blocks.len()),
                layout: format!("{} factors", layout.r()),
            });
        }
        for (k, fb) in blocks.iter().enumerate() {
            SetPartition::from_blocks(layout.factor(k).n_levels(), fb)?;
            if !fb[0].contains(&0) {
                return Err(PartitionError::Invalid(format!(
                    "first block of factor {k} must hold level 0"
                )));
            }
        }
        let p = layout.p();
        let mut leaders: Vec<(usize, ColumnTag)> = Vec::new();
        // (coordinate tag, leader tag of its block or None for reference)
        let mut rest: Vec<(usize, ColumnTag, Option<ColumnTag>)> = Vec::new();
        for (k, fb) in blocks.iter().enumerate() {
            for (b, block) in fb.iter().enumerate() {
                let s = *block.iter().min().unwrap();
                let leader_has_column = !(b == 0 && k != 0);
                if leader_has_column {
                    let c = layout.column(k, s).unwrap();
                    leaders.push((c, ColumnTag { factor: k, level: s }));
                }
                let mut members: Vec<usize> = block.iter().copied().filter(|&j| j != s).collect();
                members.sort_unstable();
                for j in members {
                    let c = layout.column(k, j).unwrap();
                    let lead = leader_has_column.then_some(ColumnTag { factor: k, level: s });
                    rest.push((c, ColumnTag { factor: k, level: j }, lead));
                }
            }
        }
        let m = leaders.len();
        debug_assert_eq!(m + rest.len(), p);
        let mut matrix = Array2::zeros((p - m, p));
        let leader_pos: HashMap<ColumnTag, usize> =
            leaders.iter().enumerate().map(|(i, (_, t))| (*t, i)).collect();
        for (t, (_, _, lead)) in rest.iter().enumerate() {
            matrix[[t, m + t]] = 1.0;
            if let Some(lead) = lead {
                matrix[[t, leader_pos[lead]]] = -1.0;
            }
        }
        let coordinates = leaders
            .iter()
            .map(|(c, _)| *c)
            .chain(rest.iter().map(|(c, _, _)| *c))
            .collect();
        let tags = leaders
            .iter()
            .map(|(_, t)| *t)
            .chain(rest.iter().map(|(_, t, _)| *t))
            .collect();
        Ok(Self {
            coordinates,
            tags,
            matrix,
            m,
        })
    }

    /// `A₀ₘ · β` with `β` given in design column order.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        let reordered: Vec<f64> = self.coordinates.iter().map(|&c| beta[c]).collect();
        self.matrix
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&reordered).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// `A₀ₘ` with blocks in canonical order.
pub fn constraint_matrix(
    model: &PartitionModel,
    layout: &Layout,
) -> Result<ConstraintMatrix, PartitionError> {
    model.check(layout)?;
    let blocks: Vec<Vec<Vec<usize>>> = model.parts.iter().map(SetPartition::blocks).collect();
    ConstraintMatrix::with_block_order(layout, &blocks)
}

// ---------------------------------------------------------------------------
// Collapse and refit

/// `Z_M = X A¹_M`: design columns summed within blocks, reference blocks of
/// factors k ≥ 1 dropped.
#[derive(Debug, Clone)]
pub struct CollapsedDesign<F> {
    pub z: Array2<F>,
    /// Collapsed column carrying each design column (`None` when absorbed
    /// into a reference block).
    pub carrier: Vec<Option<usize>>,
    pub map: ColumnMap,
}

impl<F: Scalar> CollapsedDesign<F> {
    pub fn m(&self) -> usize {
        self.map.m()
    }

    /// `ξ = A₁ₘ β`: the coefficient of each block leader.
    pub fn xi_of(&self, layout: &Layout, beta: &[F]) -> Vec<F> {
        self.map
            .columns
            .iter()
            .map(|t| beta[layout.column(t.factor, t.level).unwrap()])
            .collect()
    }

    /// `β = A¹ₘ ξ`.
    pub fn expand(&self, xi: &[F]) -> Vec<F> {
        self.carrier
            .iter()
            .map(|c| c.map_or(F::zero(), |c| xi[c]))
            .collect()
    }
}

pub fn collapse<F: Scalar>(
    model: &PartitionModel,
    design: &DesignMatrix<F>,
) -> Result<CollapsedDesign<F>, PartitionError> {
    let layout = design.layout();
    model.check(layout)?;
    let map = ColumnMap::new(layout, model);
    let mut z = Array2::zeros((design.n(), map.m()));
    let mut carrier = vec![None; design.p()];
    for (c, tag) in layout.tags().iter().enumerate() {
        if let Some(zc) = map.level_col[tag.factor][tag.level] {
            carrier[c] = Some(zc);
            let mut col = z.column_mut(zc);
            col += &design.values().column(c);
        }
    }
    Ok(CollapsedDesign { z, carrier, map })
}

/// Constrained least-squares fit on `L_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitResult<F> {
    pub xi_hat: Vec<F>,
    pub beta_hat: Vec<F>,
    /// `ℓ(β̂_M) = ‖Xβ̂‖²/2 − yᵀXβ̂`.
    pub loss: F,
    pub model: PartitionModel,
}

impl<F: Scalar> RefitResult<F> {
    /// `‖(I − H_M) y‖² = yᵀy + 2ℓ(β̂_M)`.
    pub fn rss(&self, y: &[F]) -> F {
        dot(y, y) + F::of(2.0) * self.loss
    }
}

pub fn refit<F: Scalar>(
    model: &PartitionModel,
    data: &Dataset<F>,
) -> Result<RefitResult<F>, PartitionError> {
    let layout = data.layout();
    model.check(layout)?;
    let map = ColumnMap::new(layout, model);
    let m = map.m();
    if m > data.n() {
        return Err(PartitionError::Overparameterized { m, n: data.n() });
    }
    let (g, b) = map.gram(&data.design, &data.response);
    let chol = cholesky(&g, m).map_err(|rank| PartitionError::RankDeficient { m, rank })?;
    let xi = chol.solve(&b);
    let loss = -F::of(0.5) * dot(&xi, &b);
    let beta_hat = layout
        .tags()
        .iter()
        .map(|t| map.level_col[t.factor][t.level].map_or(F::zero(), |c| xi[c]))
        .collect();
    Ok(RefitResult {
        xi_hat: xi,
        beta_hat,
        loss,
        model: model.clone(),
    })
}

/// Quadratic loss `ℓ(β) = ‖Xβ‖²/2 − yᵀXβ`.
pub fn loss<F: Scalar>(beta: &[F], data: &Dataset<F>) -> F {
    let xb = data.design.matvec(beta);
    xb.iter()
        .zip(&data.response)
        .map(|(&f, &y)| f * f * F::of(0.5) - y * f)
        .sum()
}

/// `ℓ̇(β) = Xᵀ(Xβ − y)`.
pub fn gradient<F: Scalar>(beta: &[F], data: &Dataset<F>) -> Vec<F> {
    let mut r = data.design.matvec(beta);
    for (ri, &y) in r.iter_mut().zip(&data.response) {
        *ri -= y;
    }
    data.design.t_matvec(&r)
}

// ---------------------------------------------------------------------------
// Submodel enumeration

/// Every proper submodel of a model: each factor's partition is coarsened by
/// an arbitrary partition of its blocks.
pub struct Submodels {
    base: PartitionModel,
    choices: Vec<Vec<Vec<u32>>>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for Submodels {
    type Item = PartitionModel;

    fn next(&mut self) -> Option<PartitionModel> {
        loop {
            if self.done {
                return None;
            }
            // advance mixed-radix counter
            let mut k = 0;
            loop {
                if k == self.digits.len() {
                    self.done = true;
                    return None;
                }
                self.digits[k] += 1;
                if self.digits[k] < self.choices[k].len() {
                    break;
                }
                self.digits[k] = 0;
                k += 1;
            }
            let parts = self
                .base
                .parts
                .iter()
                .zip(&self.digits)
                .zip(&self.choices)
                .map(|((p, &d), ch)| p.coarsen_by(&ch[d]))
                .collect();
            let model = PartitionModel { parts };
            if model != self.base {
                return Some(model);
            }
        }
    }
}

/// Number of proper submodels: `Π_k Bell(j_k) − 1`.
pub fn count_submodels(model: &PartitionModel) -> Option<u128> {
    model
        .parts
        .iter()
        .try_fold(1u128, |acc, p| acc.checked_mul(bell(p.n_blocks() as u32).ok()?))
        .map(|t| t - 1)
}

pub fn enumerate_submodels(
    model: &PartitionModel,
    max_count: u128,
) -> Result<Submodels, PartitionError> {
    let count = count_submodels(model).unwrap_or(u128::MAX);
    if count > max_count {
        return Err(PartitionError::Exploded {
            count,
            limit: max_count,
        });
    }
    let choices: Vec<Vec<Vec<u32>>> = model
        .parts
        .iter()
        .map(|p| SetPartition::all(p.n_blocks()).collect())
        .collect();
    // `SetPartition::all` ends with the discrete partition; rotate so that
    // index 0 is the identity coarsening and the first advance yields a
    // proper submodel.
    let choices = choices
        .into_iter()
        .map(|mut ch| {
            ch.rotate_right(1);
            ch
        })
        .collect();
    Ok(Submodels {
        digits: vec![0; model.parts.len()],
        base: model.clone(),
        choices,
        done: false,
    })
}
