//! Weighted Group Lasso: `min ℓ(β) + λ Σ_k ‖W_k β_k‖` with one group per
//! factor, solved by cyclic block coordinate descent.
//!
//! The solver works in the scaled coordinates `c_k = W_k β_k`, where the
//! penalty is a plain group norm. Each block step minimizes the quadratic
//! majorizer with curvature `L_k = λ_max(W_k⁻¹ X_kᵀ X_k W_k⁻¹)`, which is a
//! group soft-threshold. With default weights on one-hot factors the block
//! Hessian is the identity and the step is an exact block minimization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::power_iteration;
use crate::scalar::{dot, max_abs, norm2, Scalar};
use crate::schema::{Dataset, DesignMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupLassoError {
    #[error("no convergence after {max_iter} cycles (kkt gap {kkt_gap})")]
    NoConvergence {
        max_iter: usize,
        kkt_gap: f64,
        best: Box<GroupLassoFit<f64>>,
    },
    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("initial point has {found} coefficients, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Column weights `w_{j,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSpec {
    /// `w_{j,k} = ‖x_{j,k}‖^q`.
    Exponent(f64),
    Explicit(Vec<f64>),
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self::Exponent(1.0)
    }
}

impl WeightSpec {
    pub fn resolve<F: Scalar>(&self, design: &DesignMatrix<F>) -> Result<Vec<F>, GroupLassoError> {
        let w: Vec<F> = match self {
            Self::Exponent(q) => {
                if !q.is_finite() {
                    return Err(GroupLassoError::InvalidWeights(format!("exponent {q}")));
                }
                design
                    .column_norms()
                    .iter()
                    .map(|&x| x.powf(F::of(*q)))
                    .collect()
            }
            Self::Explicit(w) => {
                if w.len() != design.p() {
                    return Err(GroupLassoError::InvalidWeights(format!(
                        "{} weights for {} columns",
                        w.len(),
                        design.p()
                    )));
                }
                w.iter().map(|&v| F::of(v)).collect()
            }
        };
        if w.iter().any(|&v| !(v > F::zero()) || !v.is_finite()) {
            return Err(GroupLassoError::InvalidWeights("weights must be positive".into()));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub weights: WeightSpec,
    /// Penalize the factor-0 group, whose levels carry the intercept.
    pub penalize_intercept: bool,
    /// Relative KKT tolerance: converged when `kkt_gap ≤ kkt_tol · λ`.
    pub kkt_tol: f64,
    /// Coordinate change threshold relative to `1 + ‖β‖∞`.
    pub change_tol: f64,
    /// Maximum number of full cycles.
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weights: WeightSpec::default(),
            penalize_intercept: true,
            kkt_tol: 1e-5,
            change_tol: 1e-7,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLassoFit<F> {
    pub lambda: F,
    pub beta: Vec<F>,
    /// Factors with a nonzero coefficient group, ascending.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub kkt_gap: F,
    pub objective: F,
}

impl<F: Scalar> GroupLassoFit<F> {
    fn widen(&self) -> GroupLassoFit<f64> {
        GroupLassoFit {
            lambda: self.lambda.as_f64(),
            beta: self.beta.iter().map(|v| v.as_f64()).collect(),
            active_set: self.active_set.clone(),
            iterations: self.iterations,
            kkt_gap: self.kkt_gap.as_f64(),
            objective: self.objective.as_f64(),
        }
    }
}

/// Decreasing geometric grid of penalty levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaNet<F> {
    pub values: Vec<F>,
    pub lambda_max: F,
    pub ratio: F,
}

impl<F: Scalar> LambdaNet<F> {
    pub fn geometric(lambda_max: F, length: usize, ratio: F) -> Self {
        let values = match length {
            0 => Vec::new(),
            1 => vec![lambda_max],
            _ => {
                let step = ratio.ln() / F::of((length - 1) as f64);
                (0..length)
                    .map(|i| {
                        if i == length - 1 {
                            lambda_max * ratio
                        } else {
                            lambda_max * (step * F::of(i as f64)).exp()
                        }
                    })
                    .collect()
            }
        };
        Self {
            values,
            lambda_max,
            ratio,
        }
    }

    /// Ratio `0.01` when `n < p`, else `1e-4`.
    pub fn default_ratio(n: usize, p: usize) -> F {
        F::of(if n < p { 0.01 } else { 1e-4 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Prepared solver for one dataset and weight choice.
#[derive(Debug, Clone)]
pub struct Solver<'a, F> {
    data: &'a Dataset<F>,
    opts: FitOptions,
    weights: Vec<F>,
    /// Block curvature in scaled coordinates.
    lipschitz: Vec<F>,
    penalized: Vec<bool>,
}

impl<'a, F: Scalar> Solver<'a, F> {
    pub fn new(data: &'a Dataset<F>, opts: FitOptions) -> Result<Self, GroupLassoError> {
        let design = &data.design;
        let weights = opts.weights.resolve(design)?;
        let layout = design.layout();
        let lipschitz = (0..layout.r())
            .map(|k| {
                let range = layout.group(k);
                let m = range.len();
                let mut g = design.group_gram(k);
                let w = &weights[range];
                for a in 0..m {
                    for b in 0..m {
                        g[a * m + b] /= w[a] * w[b];
                    }
                }
                let diagonal = (0..m).all(|a| (0..m).all(|b| a == b || g[a * m + b] == F::zero()));
                if diagonal {
                    (0..m).map(|a| g[a * m + a]).fold(F::zero(), F::max)
                } else {
                    power_iteration(&g, m, F::of(1e-6), 10_000) * F::of(1.0 + 1e-6)
                }
            })
            .collect();
        let penalized = (0..layout.r())
            .map(|k| k != 0 || opts.penalize_intercept)
            .collect();
        Ok(Self {
            data,
            opts,
            weights,
            lipschitz,
            penalized,
        })
    }

    pub fn data(&self) -> &Dataset<F> {
        self.data
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn options(&self) -> &FitOptions {
        &self.opts
    }

    /// Smallest λ at which every penalized group is zero:
    /// `max_k ‖W_k⁻¹ X_kᵀ r‖` with `r` the residual of the unpenalized fit.
    pub fn lambda_max(&self) -> F {
        let beta = self.null_fit();
        let mut r = self.data.design.matvec(&beta);
        for (ri, &y) in r.iter_mut().zip(&self.data.response) {
            *ri -= y;
        }
        let layout = self.data.design.layout();
        let mut best = F::zero();
        let mut buf = Vec::new();
        for k in (0..layout.r()).filter(|&k| self.penalized[k]) {
            best = best.max(self.scaled_gradient_norm(k, &r, &mut buf));
        }
        best
    }

    pub fn default_net(&self, length: usize) -> LambdaNet<F> {
        let ratio = LambdaNet::<F>::default_ratio(self.data.n(), self.data.p());
        LambdaNet::geometric(self.lambda_max(), length, ratio)
    }

    fn scaled_gradient_norm(&self, k: usize, r: &[F], buf: &mut Vec<F>) -> F {
        let range = self.data.design.layout().group(k);
        buf.resize(range.len(), F::zero());
        self.data.design.group_xt(k, r, buf);
        buf.iter()
            .zip(&self.weights[range])
            .map(|(&g, &w)| (g / w) * (g / w))
            .sum::<F>()
            .sqrt()
    }

    /// Least-squares fit of the unpenalized groups alone.
    fn null_fit(&self) -> Vec<F> {
        let p = self.data.p();
        let mut beta = vec![F::zero(); p];
        if self.penalized.iter().all(|&b| b) {
            return beta;
        }
        let mut r: Vec<F> = self.data.response.iter().map(|&y| -y).collect();
        let groups: Vec<usize> = (0..self.penalized.len()).filter(|&k| !self.penalized[k]).collect();
        let mut scratch = Scratch::default();
        for _ in 0..self.opts.max_iter {
            let mut change = F::zero();
            for &k in &groups {
                change = change.max(self.block_step(k, F::zero(), &mut beta, &mut r, &mut scratch));
            }
            if change <= F::of(self.opts.change_tol) * (F::one() + max_abs(&beta)) {
                break;
            }
        }
        beta
    }

    /// One block update; returns the largest coefficient change.
    fn block_step(
        &self,
        k: usize,
        lambda: F,
        beta: &mut [F],
        r: &mut [F],
        s: &mut Scratch<F>,
    ) -> F {
        let design = &self.data.design;
        let range = design.layout().group(k);
        let m = range.len();
        let w = &self.weights[range.clone()];
        let lk = self.lipschitz[k];
        if lk == F::zero() {
            return F::zero();
        }
        s.g.resize(m, F::zero());
        s.u.resize(m, F::zero());
        s.delta.resize(m, F::zero());
        design.group_xt(k, r, &mut s.g);
        for a in 0..m {
            let c = w[a] * beta[range.start + a];
            s.u[a] = c - s.g[a] / (w[a] * lk);
        }
        let shrink = if self.penalized[k] && lambda > F::zero() {
            let nu = norm2(&s.u);
            if nu * lk <= lambda {
                F::zero()
            } else {
                F::one() - lambda / (lk * nu)
            }
        } else {
            F::one()
        };
        let mut change = F::zero();
        let mut moved = false;
        for a in 0..m {
            let new = shrink * s.u[a] / w[a];
            let d = new - beta[range.start + a];
            s.delta[a] = d;
            if d != F::zero() {
                moved = true;
                change = change.max(d.abs());
                beta[range.start + a] = new;
            }
        }
        if moved {
            design.group_axpy(k, &s.delta, r);
        }
        change
    }

    fn penalty(&self, beta: &[F]) -> F {
        let layout = self.data.design.layout();
        (0..layout.r())
            .filter(|&k| self.penalized[k])
            .map(|k| {
                let range = layout.group(k);
                beta[range.clone()]
                    .iter()
                    .zip(&self.weights[range])
                    .map(|(&b, &w)| (b * w) * (b * w))
                    .sum::<F>()
                    .sqrt()
            })
            .sum()
    }

    /// `ℓ(β) + λ Σ_k ‖W_k β_k‖` with `r = Xβ − y`.
    fn objective_from_residual(&self, beta: &[F], r: &[F], lambda: F) -> F {
        // ℓ = ½‖Xβ‖² − yᵀXβ = ½‖r‖² − ½‖y‖²
        let y = &self.data.response;
        F::of(0.5) * (dot(r, r) - dot(y, y)) + lambda * self.penalty(beta)
    }

    pub fn objective(&self, beta: &[F], lambda: F) -> F {
        let r = self.residual(beta);
        self.objective_from_residual(beta, &r, lambda)
    }

    fn residual(&self, beta: &[F]) -> Vec<F> {
        let mut r = self.data.design.matvec(beta);
        for (ri, &y) in r.iter_mut().zip(&self.data.response) {
            *ri -= y;
        }
        r
    }

    /// Largest KKT violation over groups, in scaled coordinates.
    pub fn kkt_gap(&self, beta: &[F], lambda: F) -> F {
        let r = self.residual(beta);
        self.kkt_gap_from_residual(beta, &r, lambda)
    }

    fn kkt_gap_from_residual(&self, beta: &[F], r: &[F], lambda: F) -> F {
        let layout = self.data.design.layout();
        let mut gap = F::zero();
        let mut g = Vec::new();
        for k in 0..layout.r() {
            let range = layout.group(k);
            g.resize(range.len(), F::zero());
            self.data.design.group_xt(k, r, &mut g);
            let w = &self.weights[range.clone()];
            let b = &beta[range];
            let wb: F = b.iter().zip(w).map(|(&b, &w)| (b * w) * (b * w)).sum::<F>().sqrt();
            let v = if !self.penalized[k] {
                g.iter().zip(w).map(|(&g, &w)| (g / w) * (g / w)).sum::<F>().sqrt()
            } else if wb == F::zero() {
                let s = g.iter().zip(w).map(|(&g, &w)| (g / w) * (g / w)).sum::<F>().sqrt();
                (s - lambda).max(F::zero())
            } else {
                g.iter()
                    .zip(w)
                    .zip(b)
                    .map(|((&g, &w), &b)| {
                        let e = g / w + lambda * w * b / wb;
                        e * e
                    })
                    .sum::<F>()
                    .sqrt()
            };
            gap = gap.max(v);
        }
        gap
    }

    fn active_set(&self, beta: &[F]) -> Vec<usize> {
        let layout = self.data.design.layout();
        (0..layout.r())
            .filter(|&k| beta[layout.group(k)].iter().any(|&b| b != F::zero()))
            .collect()
    }

    fn kkt_threshold(&self, lambda: F) -> F {
        let scale = if lambda > F::zero() {
            lambda
        } else {
            // λ = 0: relative to the gradient scale at zero
            let mut buf = Vec::new();
            let r: Vec<F> = self.data.response.iter().map(|&y| -y).collect();
            (0..self.data.design.r())
                .map(|k| self.scaled_gradient_norm(k, &r, &mut buf))
                .fold(F::one(), F::max)
        };
        F::of(self.opts.kkt_tol) * scale
    }

    /// Solve at one λ, starting from `init` (zero when absent).
    pub fn fit(&self, lambda: F, init: Option<&[F]>) -> Result<GroupLassoFit<F>, GroupLassoError> {
        if !(lambda >= F::zero()) || !lambda.is_finite() {
            return Err(GroupLassoError::InvalidLambda(lambda.as_f64()));
        }
        let p = self.data.p();
        let mut beta = match init {
            Some(b) if b.len() != p => {
                return Err(GroupLassoError::DimensionMismatch {
                    expected: p,
                    found: b.len(),
                })
            }
            Some(b) => b.to_vec(),
            None => vec![F::zero(); p],
        };
        let mut r = self.residual(&beta);
        let r_groups = self.data.design.r();
        let threshold = self.kkt_threshold(lambda);
        let change_tol = F::of(self.opts.change_tol);
        let mut scratch = Scratch::default();
        let mut last_obj = self.objective_from_residual(&beta, &r, lambda);
        let mut gap = F::infinity();
        let mut cycles = 0;
        while cycles < self.opts.max_iter {
            // full sweep
            cycles += 1;
            let mut change = F::zero();
            for k in 0..r_groups {
                change = change.max(self.block_step(k, lambda, &mut beta, &mut r, &mut scratch));
            }
            self.debug_check_descent(&beta, &r, lambda, &mut last_obj);
            // sweeps over the active groups until they settle
            let active = self.active_set(&beta);
            let mut inner_change = change;
            while inner_change > change_tol * (F::one() + max_abs(&beta)) && cycles < self.opts.max_iter {
                cycles += 1;
                inner_change = F::zero();
                for &k in &active {
                    inner_change =
                        inner_change.max(self.block_step(k, lambda, &mut beta, &mut r, &mut scratch));
                }
                self.debug_check_descent(&beta, &r, lambda, &mut last_obj);
            }
            if change <= change_tol * (F::one() + max_abs(&beta)) {
                // refresh the residual to shed accumulated drift before certifying
                r = self.residual(&beta);
                gap = self.kkt_gap_from_residual(&beta, &r, lambda);
                if gap <= threshold {
                    return Ok(self.finish(lambda, beta, &r, cycles, gap));
                }
            }
        }
        let r = self.residual(&beta);
        gap = gap.min(self.kkt_gap_from_residual(&beta, &r, lambda));
        let best = self.finish(lambda, beta, &r, cycles, gap);
        Err(GroupLassoError::NoConvergence {
            max_iter: self.opts.max_iter,
            kkt_gap: gap.as_f64(),
            best: Box::new(best.widen()),
        })
    }

    fn finish(&self, lambda: F, beta: Vec<F>, r: &[F], iterations: usize, kkt_gap: F) -> GroupLassoFit<F> {
        GroupLassoFit {
            lambda,
            active_set: self.active_set(&beta),
            objective: self.objective_from_residual(&beta, r, lambda),
            beta,
            iterations,
            kkt_gap,
        }
    }

    #[inline]
    fn debug_check_descent(&self, beta: &[F], r: &[F], lambda: F, last: &mut F) {
        if cfg!(debug_assertions) {
            let obj = self.objective_from_residual(beta, r, lambda);
            let slack = F::of(1e-9) * (F::one() + last.abs()) + F::epsilon().sqrt() * F::of(1e-3) * last.abs();
            debug_assert!(
                obj <= *last + slack,
                "objective increased from {} to {}",
                *last,
                obj
            );
            *last = obj;
        }
    }

    /// Warm-started fits along `net`. A failed point keeps its best iterate
    /// as the next warm start.
    pub fn fit_path(&self, net: &LambdaNet<F>) -> Vec<Result<GroupLassoFit<F>, GroupLassoError>> {
        let mut warm: Option<Vec<F>> = None;
        net.values
            .iter()
            .map(|&lambda| {
                let out = self.fit(lambda, warm.as_deref());
                warm = Some(match &out {
                    Ok(f) => f.beta.clone(),
                    Err(GroupLassoError::NoConvergence { best, .. }) => {
                        best.beta.iter().map(|&v| F::of(v)).collect()
                    }
                    Err(_) => vec![F::zero(); self.data.p()],
                });
                out
            })
            .collect()
    }
}

#[derive(Debug, Default)]
struct Scratch<F> {
    g: Vec<F>,
    u: Vec<F>,
    delta: Vec<F>,
}

/// Closed-form solution for designs whose groups are mutually orthogonal
/// with diagonal within-group Gram matrices.
pub fn orthogonal_solution<F: Scalar>(data: &Dataset<F>, weights: &[F], lambda: F, penalized: &[bool]) -> Vec<F> {
    let design = &data.design;
    let layout = design.layout();
    let mut beta = vec![F::zero(); data.p()];
    let mut z = Vec::new();
    for k in 0..layout.r() {
        let range = layout.group(k);
        z.resize(range.len(), F::zero());
        design.group_xt(k, &data.response, &mut z);
        let w = &weights[range.clone()];
        let d: Vec<F> = range.clone().map(|c| design.column_norms()[c].powi(2)).collect();
        // minimize ½ cᵀ D̃ c − (W⁻¹z)ᵀc + λ‖c‖ with D̃ = W⁻¹DW⁻¹; closed form
        // when D̃ is a multiple of the identity, bisection on ‖c‖ otherwise
        let dt: Vec<F> = d.iter().zip(w).map(|(&d, &w)| d / (w * w)).collect();
        let b: Vec<F> = z.iter().zip(w).map(|(&z, &w)| z / w).collect();
        let nb = norm2(&b);
        let lam = if penalized[k] { lambda } else { F::zero() };
        if nb <= lam {
            continue;
        }
        // c_a = b_a / (dt_a + λ/t) where t = ‖c‖ solves Σ b_a²/(dt_a t + λ)² = 1
        let c: Vec<F> = if lam == F::zero() {
            b.iter().zip(&dt).map(|(&b, &d)| b / d).collect()
        } else {
            let phi = |t: F| -> F {
                b.iter()
                    .zip(&dt)
                    .map(|(&b, &d)| (b / (d * t + lam)).powi(2))
                    .sum::<F>()
                    - F::one()
            };
            let mut lo = F::zero();
            let mut hi = F::one();
            while phi(hi) > F::zero() {
                hi = hi * F::of(2.0);
            }
            for _ in 0..200 {
                let mid = (lo + hi) * F::of(0.5);
                if phi(mid) > F::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = (lo + hi) * F::of(0.5);
            b.iter().zip(&dt).map(|(&b, &d)| b * t / (d * t + lam)).collect()
        };
        for (a, col) in range.enumerate() {
            beta[col] = c[a] / w[a];
        }
    }
    beta
}
