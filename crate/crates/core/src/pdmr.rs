//! Partition selection after screening: complete-linkage clustering of the
//! screened coefficients, the nested family of cuts, information-criterion
//! selection and the final refit. Also the net-of-λ scheme.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouplasso::{FitOptions, GroupLassoError, GroupLassoFit, LambdaNet, Solver};
use crate::linalg::cholesky;
use crate::partition::{refit, ColumnMap, PartitionError, PartitionModel, RefitResult, SetPartition};
use crate::scalar::{dot, Scalar};
use crate::schema::{Dataset, Layout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdmrError {
    #[error("factor {0} was not retained by screening")]
    NotScreened(usize),
    #[error("no member of the family admits a full-rank refit")]
    AllInfeasible,
    #[error("every lambda failed: {0}")]
    AllLambdasFailed(String),
    #[error("invalid criterion: {0}")]
    InvalidCriterion(String),
    #[error(transparent)]
    GroupLasso(#[from] GroupLassoError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

// ---------------------------------------------------------------------------
// Clustering

/// One agglomeration: clusters whose smallest levels are `left < right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge<F> {
    pub height: F,
    pub left: usize,
    pub right: usize,
}

/// Complete-linkage dendrogram of one factor's level coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram<F> {
    pub factor: usize,
    /// Coefficient per level (0 for the dropped reference of factors k ≥ 1).
    pub leaves: Vec<F>,
    /// `leaves.len() − 1` merges with nondecreasing heights.
    pub merges: Vec<Merge<F>>,
}

impl<F: Scalar> Dendrogram<F> {
    pub fn cutting_heights(&self) -> Vec<F> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Partition after the first `t` merges.
    pub fn partition_after(&self, t: usize) -> SetPartition {
        let mut part = SetPartition::discrete(self.leaves.len());
        for m in &self.merges[..t] {
            part = part.merged(m.left, m.right);
        }
        part
    }

    /// Every cut from the discrete partition down to a single cluster.
    pub fn partitions(&self) -> Vec<SetPartition> {
        let mut out = Vec::with_capacity(self.merges.len() + 1);
        let mut part = SetPartition::discrete(self.leaves.len());
        out.push(part.clone());
        for m in &self.merges {
            part = part.merged(m.left, m.right);
            out.push(part.clone());
        }
        out
    }
}

/// Complete linkage of values on the line.
///
/// Clusters stay intervals of the `(value, level)` order, so only adjacent
/// clusters are candidates; their distance `max(B) − min(A)` never exceeds
/// that of a non-adjacent pair. Equal heights go to the pair holding the
/// lowest level.
pub fn complete_linkage<F: Scalar>(factor: usize, leaves: Vec<F>) -> Dendrogram<F> {
    let n = leaves.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        leaves[a]
            .partial_cmp(&leaves[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    // interval clusters in sorted order: (lo value, hi value, smallest level)
    let mut clusters: Vec<(F, F, usize)> = order.iter().map(|&j| (leaves[j], leaves[j], j)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while clusters.len() > 1 {
        let mut best: Option<(F, usize, usize, usize)> = None; // (height, min level, other level, position)
        for t in 0..clusters.len() - 1 {
            let (a, b) = (clusters[t], clusters[t + 1]);
            let h = b.1 - a.0;
            let key = (h, a.2.min(b.2), a.2.max(b.2), t);
            best = match best {
                None => Some(key),
                Some(cur) => {
                    let better = match key.0.partial_cmp(&cur.0).unwrap_or(Ordering::Equal) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => (key.1, key.2) < (cur.1, cur.2),
                    };
                    Some(if better { key } else { cur })
                }
            };
        }
        let (h, left, right, t) = best.expect("at least two clusters");
        debug_assert!(
            {
                // complete linkage over all pairs agrees on the height
                let mut min_all = F::infinity();
                for i in 0..clusters.len() {
                    for j in i + 1..clusters.len() {
                        let d = clusters[j].1.max(clusters[i].1) - clusters[j].0.min(clusters[i].0);
                        min_all = min_all.min(d);
                    }
                }
                min_all == h
            },
            "non-adjacent merge would be lower"
        );
        let (a, b) = (clusters[t], clusters[t + 1]);
        clusters[t] = (a.0, b.1, a.2.min(b.2));
        clusters.remove(t + 1);
        merges.push(Merge {
            height: h,
            left,
            right,
        });
    }
    Dendrogram {
        factor,
        leaves,
        merges,
    }
}

fn group_is_zero<F: Scalar>(layout: &Layout, beta: &[F], k: usize) -> bool {
    beta[layout.group(k)].iter().all(|&b| b == F::zero())
}

/// Dendrogram of factor `k` from screened coefficients `beta`.
pub fn cluster_factor<F: Scalar>(layout: &Layout, beta: &[F], k: usize) -> Result<Dendrogram<F>, PdmrError> {
    if group_is_zero(layout, beta, k) {
        return Err(PdmrError::NotScreened(k));
    }
    let leaves = (0..layout.factor(k).n_levels())
        .map(|j| layout.level_value(beta, k, j))
        .collect();
    Ok(complete_linkage(k, leaves))
}

// ---------------------------------------------------------------------------
// Nested family

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyStep<F> {
    pub factor: usize,
    pub height: F,
    pub left: usize,
    pub right: usize,
}

/// `M₀ ⊋ M₁ ⊋ … ⊋ {∅}`: the base model followed by one merge per member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedFamily<F> {
    pub base: PartitionModel,
    pub steps: Vec<FamilyStep<F>>,
    pub screened: Vec<usize>,
}

impl<F: Scalar> NestedFamily<F> {
    pub fn len(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(0, sorted cutting heights)`.
    pub fn heights(&self) -> Vec<F> {
        std::iter::once(F::zero())
            .chain(self.steps.iter().map(|s| s.height))
            .collect()
    }

    pub fn size(&self, j: usize) -> usize {
        self.base.size() - j
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.len()).map(|j| self.size(j)).collect()
    }

    pub fn model(&self, j: usize) -> PartitionModel {
        let mut m = self.base.clone();
        for s in &self.steps[..j] {
            m = m.merged(s.factor, s.left, s.right);
        }
        m
    }

    pub fn models(&self) -> Vec<PartitionModel> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = self.base.clone();
        out.push(m.clone());
        for s in &self.steps {
            m = m.merged(s.factor, s.left, s.right);
            out.push(m.clone());
        }
        out
    }

    /// Index of `model` in the family, if present.
    pub fn position(&self, model: &PartitionModel) -> Option<usize> {
        let size = model.size();
        if size > self.base.size() || !model.is_submodel_of(&self.base) {
            return None;
        }
        let j = self.base.size() - size;
        (self.model(j) == *model).then_some(j)
    }

    pub fn contains(&self, model: &PartitionModel) -> bool {
        self.position(model).is_some()
    }
}

#[derive(PartialEq)]
struct HeapItem<F> {
    height: F,
    left: usize,
    factor: usize,
}

impl<F: PartialOrd> Eq for HeapItem<F> {}

impl<F: PartialOrd> PartialOrd for HeapItem<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<F: PartialOrd> Ord for HeapItem<F> {
    // reversed for a min-heap on (height, left, factor)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .height
            .partial_cmp(&self.height)
            .unwrap_or(Ordering::Equal)
            .then(other.left.cmp(&self.left))
            .then(other.factor.cmp(&self.factor))
    }
}

/// Family from a coefficient vector: factors with a nonzero group form
/// `Ŝ`, every other factor is fully merged from the start.
pub fn build_family<F: Scalar>(layout: &Layout, beta: &[F]) -> NestedFamily<F> {
    let screened: Vec<usize> = (0..layout.r()).filter(|&k| !group_is_zero(layout, beta, k)).collect();
    let parts = layout
        .factors()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            if screened.contains(&k) {
                SetPartition::discrete(f.n_levels())
            } else {
                SetPartition::single(f.n_levels())
            }
        })
        .collect();
    let base = PartitionModel::new(layout, parts).expect("shapes follow the layout");
    let dendros: Vec<Dendrogram<F>> = screened
        .iter()
        .map(|&k| cluster_factor(layout, beta, k).expect("screened"))
        .collect();
    let mut next = vec![0usize; dendros.len()];
    let mut heap = BinaryHeap::new();
    for (d, den) in dendros.iter().enumerate() {
        if let Some(m) = den.merges.first() {
            heap.push((HeapItem { height: m.height, left: m.left, factor: den.factor }, d));
        }
    }
    let mut steps = Vec::new();
    while let Some((item, d)) = heap.pop() {
        let m = dendros[d].merges[next[d]];
        steps.push(FamilyStep {
            factor: item.factor,
            height: m.height,
            left: m.left,
            right: m.right,
        });
        next[d] += 1;
        if let Some(m) = dendros[d].merges.get(next[d]) {
            heap.push((HeapItem { height: m.height, left: m.left, factor: item.factor }, d));
        }
    }
    NestedFamily { base, steps, screened }
}

pub fn build_family_from_fit<F: Scalar>(layout: &Layout, fit: &GroupLassoFit<F>) -> NestedFamily<F> {
    build_family(layout, &fit.beta)
}

// ---------------------------------------------------------------------------
// Family evaluation

/// Refit loss of every family member (`None` when the member is
/// overparameterized or rank deficient).
///
/// Feasibility is monotone along the family (merging columns of a full-rank
/// `Z` keeps it full rank), so the first feasible member is located with a
/// few factorizations; later members follow by rank-one constraint updates
/// of `(ZᵀZ)⁻¹` and the solution, re-verified against the exact Gram matrix
/// at regular intervals.
pub fn family_losses<F: Scalar>(family: &NestedFamily<F>, data: &Dataset<F>) -> Vec<Option<F>> {
    let len = family.len();
    let mut out = vec![None; len];
    let n = data.n();
    let size0 = family.base.size();
    let mut j = size0.saturating_sub(n);
    let mut state = loop {
        if j >= len {
            return out;
        }
        match Downdater::start(&family.model(j), data) {
            Ok(s) => break s,
            Err(deficiency) => j += deficiency.max(1),
        }
    };
    out[j] = Some(state.loss);
    for t in j + 1..len {
        let step = family.steps[t - 1];
        state.apply(step);
        if (t - j) % 16 == 0 {
            state.verify();
        }
        out[t] = Some(state.loss);
    }
    out
}

struct Downdater<F> {
    model: PartitionModel,
    /// Column of each `(factor, level)`.
    map: ColumnMap,
    stride: usize,
    alive: Vec<usize>,
    h: Vec<F>,
    g: Vec<F>,
    b: Vec<F>,
    xi: Vec<F>,
    loss: F,
}

impl<F: Scalar> Downdater<F> {
    /// Factor the member; `Err` carries the rank deficiency `m − rank`.
    fn start(model: &PartitionModel, data: &Dataset<F>) -> Result<Self, usize> {
        let map = ColumnMap::new(data.layout(), model);
        let m = map.m();
        if m > data.n() {
            return Err(m - data.n());
        }
        let (h, b) = map.gram(&data.design, &data.response);
        let chol = cholesky(&h, m).map_err(|rank| m - rank)?;
        let xi = chol.solve(&b);
        let g = chol.inverse();
        let loss = -F::of(0.5) * dot(&xi, &b);
        Ok(Self {
            model: model.clone(),
            map,
            stride: m,
            alive: (0..m).collect(),
            h,
            g,
            b,
            xi,
            loss,
        })
    }

    fn apply(&mut self, step: FamilyStep<F>) {
        let k = step.factor;
        let ca = self.map.level_col[k][step.left];
        let cb = self.map.level_col[k][step.right];
        // constraint cᵀξ = 0 and the index to drop after imposing it
        let (coef, drop): (Vec<(usize, F)>, usize) = match (ca, cb) {
            (Some(a), Some(b)) if a == b => {
                self.model = self.model.merged(k, step.left, step.right);
                return;
            }
            (Some(a), Some(b)) => (vec![(a, F::one()), (b, -F::one())], b),
            (Some(a), None) => (vec![(a, F::one())], a),
            (None, Some(b)) => (vec![(b, F::one())], b),
            (None, None) => {
                self.model = self.model.merged(k, step.left, step.right);
                return;
            }
        };
        let s = self.stride;
        let gc: Vec<F> = self
            .alive
            .iter()
            .map(|&i| coef.iter().map(|&(c, v)| self.g[i * s + c] * v).sum())
            .collect();
        let cgc: F = coef.iter().map(|&(c, v)| v * gc[self.alive_pos(c)]).sum();
        let cxi: F = coef.iter().map(|&(c, v)| v * self.xi[c]).sum();
        let scale = coef.iter().map(|&(c, _)| self.g[c * s + c].abs()).fold(F::zero(), F::max);
        let stable = cgc > F::epsilon().sqrt() * scale;
        if stable {
            let t = cxi / cgc;
            for (p, &i) in self.alive.iter().enumerate() {
                self.xi[i] -= gc[p] * t;
            }
            self.loss += F::of(0.5) * cxi * t;
            for (p, &i) in self.alive.iter().enumerate() {
                let f = gc[p] / cgc;
                for (q, &l) in self.alive.iter().enumerate() {
                    self.g[i * s + l] -= f * gc[q];
                }
            }
        }
        // fold the merged column into its survivor in H and b
        if coef.len() == 2 {
            let (a, b) = (coef[0].0, coef[1].0);
            for &i in &self.alive {
                let v = self.h[i * s + b];
                self.h[i * s + a] += v;
            }
            for &i in &self.alive {
                let v = self.h[b * s + i];
                self.h[a * s + i] += v;
            }
            let bb = self.b[b];
            self.b[a] += bb;
        }
        let pos = self.alive_pos(drop);
        self.alive.remove(pos);
        self.xi[drop] = F::zero();
        self.model = self.model.merged(k, step.left, step.right);
        for slot in self.map.level_col[k].iter_mut() {
            if *slot == Some(drop) {
                *slot = if coef.len() == 2 { Some(coef[0].0) } else { None };
            }
        }
        if !stable {
            self.refresh();
        }
    }

    fn alive_pos(&self, c: usize) -> usize {
        self.alive.binary_search(&c).expect("alive column")
    }

    /// Normal-equation residual check; refactor when it has drifted.
    fn verify(&mut self) {
        let s = self.stride;
        let mut worst = F::zero();
        let mut scale = F::zero();
        for &i in &self.alive {
            let hx: F = self.alive.iter().map(|&l| self.h[i * s + l] * self.xi[l]).sum();
            worst = worst.max((hx - self.b[i]).abs());
            scale = scale.max(self.b[i].abs());
        }
        if worst > F::of(1e-9) * (F::one() + scale) {
            self.refresh();
        }
    }

    fn refresh(&mut self) {
        let s = self.stride;
        let m = self.alive.len();
        let mut h = vec![F::zero(); m * m];
        for (p, &i) in self.alive.iter().enumerate() {
            for (q, &l) in self.alive.iter().enumerate() {
                h[p * m + q] = self.h[i * s + l];
            }
        }
        let b: Vec<F> = self.alive.iter().map(|&i| self.b[i]).collect();
        match cholesky(&h, m) {
            Ok(chol) => {
                let xi = chol.solve(&b);
                let g = chol.inverse();
                for (p, &i) in self.alive.iter().enumerate() {
                    self.xi[i] = xi[p];
                    for (q, &l) in self.alive.iter().enumerate() {
                        self.g[i * s + l] = g[p * m + q];
                    }
                }
                self.loss = -F::of(0.5) * dot(&xi, &b);
            }
            Err(_) => {
                // cannot happen for a full-rank start; keep the updated state
                debug_assert!(false, "rank lost along the family");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Selection

/// Penalty level of the information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfoCriterion<F> {
    /// Given `λ_ic`.
    Fixed(F),
    /// `λ_ic² = 2σ² ln p`; σ² estimated when absent.
    Ric { sigma2: Option<F> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<F> {
    pub size: usize,
    pub loss: F,
    pub criterion: F,
    /// Net position the candidate came from (`None` for a single family).
    pub lambda_index: Option<usize>,
    pub lambda: Option<F>,
    pub member: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult<F> {
    pub chosen: PartitionModel,
    pub beta: Vec<F>,
    pub refit: RefitResult<F>,
    pub candidates: Vec<Candidate<F>>,
    pub chosen_index: usize,
    pub sigma2: Option<F>,
    pub lambda_ic: F,
}

/// `(I − H_M)y` based variance estimate from the largest candidate with
/// `|M| ≤ n/2`.
pub fn estimate_sigma2<F: Scalar>(candidates: &[(usize, F)], data: &Dataset<F>) -> Option<F> {
    let n = data.n();
    let yy = dot(&data.response, &data.response);
    candidates
        .iter()
        .filter(|(size, _)| 2 * size <= n && *size < n)
        .max_by_key(|(size, _)| *size)
        .map(|&(size, loss)| ((yy + F::of(2.0) * loss) / F::of((n - size) as f64)).max(F::zero()))
}

fn resolve_lambda_ic<F: Scalar>(
    criterion: InfoCriterion<F>,
    candidates: &[(usize, F)],
    data: &Dataset<F>,
) -> Result<(F, Option<F>), PdmrError> {
    match criterion {
        InfoCriterion::Fixed(l) => {
            if !(l >= F::zero()) {
                return Err(PdmrError::InvalidCriterion(format!("lambda_ic = {l}")));
            }
            Ok((l, None))
        }
        InfoCriterion::Ric { sigma2 } => {
            let s2 = match sigma2 {
                Some(s) if s > F::zero() => s,
                Some(s) => return Err(PdmrError::InvalidCriterion(format!("sigma2 = {s}"))),
                None => estimate_sigma2(candidates, data).ok_or_else(|| {
                    PdmrError::InvalidCriterion("no candidate small enough to estimate sigma".into())
                })?,
            };
            let p = F::of(data.p() as f64);
            Ok(((F::of(2.0) * s2 * p.ln()).sqrt(), Some(s2)))
        }
    }
}

/// Index of the smallest criterion, ties to the smaller model.
fn argmin_criterion<F: Scalar>(cands: &[Candidate<F>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cands.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cb = &cands[b];
                if c.criterion < cb.criterion || (c.criterion == cb.criterion && c.size < cb.size) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn finish_selection<F: Scalar>(
    mut candidates: Vec<Candidate<F>>,
    models: impl Fn(&Candidate<F>) -> PartitionModel,
    data: &Dataset<F>,
    lambda_ic: F,
    sigma2: Option<F>,
) -> Result<SelectionResult<F>, PdmrError> {
    let half = F::of(0.5) * lambda_ic * lambda_ic;
    for c in &mut candidates {
        c.criterion = c.loss + half * F::of(c.size as f64);
    }
    let idx = argmin_criterion(&candidates).ok_or(PdmrError::AllInfeasible)?;
    let chosen = models(&candidates[idx]);
    let fit = refit(&chosen, data)?;
    Ok(SelectionResult {
        beta: fit.beta_hat.clone(),
        chosen,
        refit: fit,
        candidates,
        chosen_index: idx,
        sigma2,
        lambda_ic,
    })
}

/// Minimize `ℓ(β̂_M) + λ_ic²/2 · |M|` over the feasible members of `family`.
pub fn select<F: Scalar>(
    family: &NestedFamily<F>,
    data: &Dataset<F>,
    criterion: InfoCriterion<F>,
) -> Result<SelectionResult<F>, PdmrError> {
    let losses = family_losses(family, data);
    let candidates: Vec<Candidate<F>> = losses
        .iter()
        .enumerate()
        .filter_map(|(j, l)| {
            l.map(|loss| Candidate {
                size: family.size(j),
                loss,
                criterion: F::zero(),
                lambda_index: None,
                lambda: None,
                member: j,
            })
        })
        .collect();
    if candidates.is_empty() {
        return Err(PdmrError::AllInfeasible);
    }
    let pairs: Vec<(usize, F)> = candidates.iter().map(|c| (c.size, c.loss)).collect();
    let (lambda_ic, sigma2) = resolve_lambda_ic(criterion, &pairs, data)?;
    finish_selection(candidates, |c| family.model(c.member), data, lambda_ic, sigma2)
}

// ---------------------------------------------------------------------------
// Pipelines

#[derive(Debug, Clone, PartialEq)]
pub struct PdmrResult<F> {
    pub fit: GroupLassoFit<F>,
    pub family: NestedFamily<F>,
    pub selection: SelectionResult<F>,
}

/// Screening at one λ followed by clustering, selection and refit.
pub fn pdmr_single<F: Scalar>(
    data: &Dataset<F>,
    lambda: F,
    opts: &FitOptions,
    criterion: InfoCriterion<F>,
) -> Result<PdmrResult<F>, PdmrError> {
    let solver = Solver::new(data, opts.clone())?;
    let fit = solver.fit(lambda, None)?;
    let family = build_family(data.layout(), &fit.beta);
    let selection = select(&family, data, criterion)?;
    Ok(PdmrResult {
        fit,
        family,
        selection,
    })
}

/// Per-λ outcome of the net scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPoint<F> {
    pub lambda: F,
    pub family: Option<NestedFamily<F>>,
    pub losses: Vec<Option<F>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetResult<F> {
    pub points: Vec<NetPoint<F>>,
    pub selection: SelectionResult<F>,
}

impl<F: Scalar> NetResult<F> {
    /// Whether `model` appears in the family of some λ.
    pub fn screened(&self, model: &PartitionModel) -> bool {
        self.points
            .iter()
            .any(|p| p.family.as_ref().is_some_and(|f| f.contains(model)))
    }
}

/// Net scheme: a family per λ, one candidate per dimension (smallest refit
/// loss, first in net order on ties), then the criterion over those.
pub fn pdmr_net<F: Scalar>(
    data: &Dataset<F>,
    net: &LambdaNet<F>,
    opts: &FitOptions,
    criterion: InfoCriterion<F>,
) -> Result<NetResult<F>, PdmrError> {
    let solver = Solver::new(data, opts.clone())?;
    let path = solver.fit_path(net);
    let betas: Vec<(F, Result<Vec<F>, String>)> = net
        .values
        .iter()
        .zip(path)
        .map(|(&l, r)| (l, r.map(|f| f.beta).map_err(|e| e.to_string())))
        .collect();
    net_from_coefficients(data, betas, criterion)
}

/// Steps two and three of the net scheme from given screening coefficients
/// per λ (the Group Lasso path, or any injected estimate).
pub fn net_from_coefficients<F: Scalar>(
    data: &Dataset<F>,
    betas: Vec<(F, Result<Vec<F>, String>)>,
    criterion: InfoCriterion<F>,
) -> Result<NetResult<F>, PdmrError> {
    let layout = data.layout();
    let points: Vec<NetPoint<F>> = betas
        .into_par_iter()
        .map(|(lambda, beta)| match beta {
            Ok(beta) => {
                let family = build_family(layout, &beta);
                let losses = family_losses(&family, data);
                NetPoint {
                    lambda,
                    family: Some(family),
                    losses,
                    error: None,
                }
            }
            Err(e) => NetPoint {
                lambda,
                family: None,
                losses: Vec::new(),
                error: Some(e),
            },
        })
        .collect();
    if points.iter().all(|p| p.family.is_none()) {
        let msg = points.iter().filter_map(|p| p.error.clone()).next().unwrap_or_default();
        return Err(PdmrError::AllLambdasFailed(msg));
    }
    // per-dimension winners, deterministic fold in net order
    let mut winners: BTreeMap<usize, Candidate<F>> = BTreeMap::new();
    for (li, p) in points.iter().enumerate() {
        let Some(family) = &p.family else { continue };
        for (j, loss) in p.losses.iter().enumerate() {
            let Some(loss) = *loss else { continue };
            let size = family.size(j);
            let cand = Candidate {
                size,
                loss,
                criterion: F::zero(),
                lambda_index: Some(li),
                lambda: Some(p.lambda),
                member: j,
            };
            match winners.get(&size) {
                Some(w) if !(loss < w.loss) => {}
                _ => {
                    winners.insert(size, cand);
                }
            }
        }
    }
    if winners.is_empty() {
        return Err(PdmrError::AllInfeasible);
    }
    // ascending dimension order
    let candidates: Vec<Candidate<F>> = winners.into_values().collect();
    let pairs: Vec<(usize, F)> = candidates.iter().map(|c| (c.size, c.loss)).collect();
    let (lambda_ic, sigma2) = resolve_lambda_ic(criterion, &pairs, data)?;
    let selection = finish_selection(
        candidates,
        |c| {
            points[c.lambda_index.unwrap()]
                .family
                .as_ref()
                .unwrap()
                .model(c.member)
        },
        data,
        lambda_ic,
        sigma2,
    )?;
    Ok(NetResult { points, selection })
}
