//! Computable versions of the screening and estimation theory: cone
//! constants, the weight-choice bound, Group Lasso `ℓ∞` coverage, the
//! separation constants `Δ` and `δ`, the screening condition and its
//! probability bound, and the combinatorics behind it.

pub mod combinatorics;
pub mod cone;

use rayon::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grouplasso::{FitOptions, Solver};
use crate::partition::{enumerate_submodels, refit, PartitionError, PartitionModel};
use crate::rng::{purpose, stream};
use crate::scalar::dot;
use crate::schema::{column_stats, Dataset, DesignMatrix, Layout};

pub use combinatorics::{bell, poisson_moment_bound, stirling2, touchard, PoissonMomentBound};
pub use cone::{cif_estimate, cone_constants, dense_gram, CifEstimate, ConeConstants, GroupCone, LassoCone};

/// `f(q) = x_m⁻² (x_M/x_m)^{max(0, |2q−3|−1)}`.
pub fn weight_bound_f(q: f64, x_min: f64, x_max: f64) -> f64 {
    let e = ((2.0 * q - 3.0).abs() - 1.0).max(0.0);
    x_min.powi(-2) * (x_max / x_min).powf(e)
}

/// Design whose rows each activate a single column, `per_column` rows per
/// column: groups are mutually orthogonal with diagonal Gram blocks.
pub fn orthogonal_design(levels: &[usize], per_column: &[usize]) -> Result<DesignMatrix<f64>, crate::schema::SchemaError> {
    let layout = Layout::categorical(levels)?;
    let p = layout.p();
    let n: usize = (0..p).map(|c| per_column[c % per_column.len()]).sum();
    let mut values = ndarray::Array2::zeros((n, p));
    let mut i = 0;
    for c in 0..p {
        for _ in 0..per_column[c % per_column.len()] {
            values[[i, c]] = 1.0;
            i += 1;
        }
    }
    DesignMatrix::new(layout, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub coverage: f64,
    pub lambda: f64,
    /// `(1+a)λ/x_m`.
    pub radius: f64,
    pub reps: usize,
}

/// Monte Carlo frequency of `|β̂ − β̊|∞ ≤ (1+a)λ/x_m` with
/// `λ² = 2a⁻²σ²x_W² log(2p/α)` under default weights.
pub fn lemma1_coverage(
    design: &DesignMatrix<f64>,
    beta_true: &[f64],
    sigma: f64,
    a: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Coverage {
    let opts = FitOptions::default();
    let w = opts.weights.resolve(design).expect("positive norms");
    let stats = column_stats(design, &w);
    let p = design.p() as f64;
    let lambda = (2.0 / (a * a) * sigma * sigma * stats.x_w * stats.x_w * (2.0 * p / alpha).ln()).sqrt();
    let radius = (1.0 + a) * lambda / stats.x_min;
    let mu = design.matvec(beta_true);
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, &[rep as u64, purpose::MONTE_CARLO]);
            let y: Vec<f64> = mu
                .iter()
                .map(|&m| m + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let data = Dataset::new(design.clone(), y).expect("lengths match");
            let solver = Solver::new(&data, opts.clone()).expect("valid weights");
            let beta = match solver.fit(lambda, None) {
                Ok(f) => f.beta,
                Err(crate::grouplasso::GroupLassoError::NoConvergence { best, .. }) => best.beta,
                Err(e) => panic!("{e}"),
            };
            let err = beta
                .iter()
                .zip(beta_true)
                .fold(0.0f64, |m, (b, t)| m.max((b - t).abs()));
            usize::from(err <= radius)
        })
        .sum();
    Coverage {
        coverage: hits as f64 / reps as f64,
        lambda,
        radius,
        reps,
    }
}

/// `Δ` and `δ_M̊` of a true coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// Smallest within-factor gap between unequal coefficients (levels 0
    /// included); `+∞` when no factor has two distinct values.
    pub delta_min_gap: f64,
    /// `min_M ‖(I − H_M)Xβ̊‖² / (|M̊| − |M|)` over proper submodels `M`;
    /// `+∞` when there are none.
    pub delta_kl: f64,
    pub submodels: usize,
}

pub fn min_gap(layout: &Layout, beta: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..layout.r() {
        let vals: Vec<f64> = (0..layout.factor(k).n_levels())
            .map(|j| layout.level_value(beta, k, j))
            .collect();
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                let d = (vals[i] - vals[j]).abs();
                if d > 0.0 {
                    best = best.min(d);
                }
            }
        }
    }
    best
}

pub fn delta_true(
    design: &DesignMatrix<f64>,
    beta_true: &[f64],
    model_true: &PartitionModel,
    max_submodels: u128,
) -> Result<Separation, PartitionError> {
    let mu = design.matvec(beta_true);
    let data = Dataset::new(design.clone(), mu.clone()).map_err(|e| PartitionError::Invalid(e.to_string()))?;
    let mm = mu.iter().map(|x| x * x).sum::<f64>();
    let size = model_true.size();
    let subs: Vec<PartitionModel> = enumerate_submodels(model_true, max_submodels)?.collect();
    let n_sub = subs.len();
    let delta = subs
        .par_iter()
        .map(|m| {
            let fit = refit(m, &data)?;
            let rss = (mm + 2.0 * fit.loss).max(0.0);
            Ok(rss / (size - m.size()) as f64)
        })
        .collect::<Result<Vec<f64>, PartitionError>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(Separation {
        delta_min_gap: min_gap(design.layout(), beta_true),
        delta_kl: delta,
        submodels: n_sub,
    })
}

/// The screening condition `lhs ≤ λ² < rhs` and its probability bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition9 {
    /// `2a⁻²σ² log(|M̊|²/(2 ln 2))`.
    pub lhs: f64,
    /// `min(Δ²ζ², 4δ) / (16(1+a)²)`.
    pub rhs: f64,
    pub lambda2: f64,
    /// Some λ satisfies the condition.
    pub satisfiable: bool,
    /// The given λ satisfies it.
    pub holds: bool,
    /// `(2p + |M̊|²) exp(−a²λ²/(2σ²))`.
    pub bound: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn theorem1_condition(
    lambda: f64,
    a: f64,
    sigma: f64,
    delta_min_gap: f64,
    zeta: f64,
    delta_kl: f64,
    size_true: usize,
    p: usize,
) -> Condition9 {
    let m2 = (size_true * size_true) as f64;
    let lhs = 2.0 / (a * a) * sigma * sigma * (m2 / (2.0 * std::f64::consts::LN_2)).ln();
    let rhs = (delta_min_gap * delta_min_gap * zeta * zeta).min(4.0 * delta_kl) / (16.0 * (1.0 + a).powi(2));
    let lambda2 = lambda * lambda;
    let bound = (2.0 * p as f64 + m2) * (-(a * a) * lambda2 / (2.0 * sigma * sigma)).exp();
    Condition9 {
        lhs,
        rhs,
        lambda2,
        satisfiable: lhs < rhs,
        holds: lhs <= lambda2 && lambda2 < rhs,
        bound,
    }
}

/// Theory diagnostics for one design and true coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub p: usize,
    pub n: usize,
    pub model_size: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub x_w: f64,
    pub a: f64,
    pub sigma: f64,
    /// Sampled upper estimate of the cone invertibility factor; condition
    /// checks that use it are optimistic.
    pub zeta_upper: f64,
    pub f_q: f64,
    pub delta_min_gap: f64,
    /// Absent when the submodel enumeration exceeded its limit.
    pub delta_kl: Option<f64>,
    pub submodels: Option<usize>,
    pub lambda: f64,
    pub condition9: Option<Condition9>,
    pub coverage: Option<Coverage>,
    /// Empirical frequencies from the PDMR replications, when run.
    pub empirical: Option<Empirical>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Empirical {
    pub reps: usize,
    /// Frequency of the true model missing from the nested family.
    pub not_in_family: f64,
    /// Frequency of a proper submodel of the truth being selected.
    pub submodel_selected: f64,
}

/// Monte Carlo standard error of a frequency.
pub fn frequency_se(freq: f64, reps: usize) -> f64 {
    (freq * (1.0 - freq) / reps as f64).sqrt()
}

/// Sum of squared residuals `‖(I−H_M)y‖²` from a refit loss.
pub fn rss_from_loss(y: &[f64], loss: f64) -> f64 {
    dot(y, y) + 2.0 * loss
}
