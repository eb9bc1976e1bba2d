//! Simulation benchmark: Gaussian-copula categorical designs, the six
//! coefficient settings, SNR-calibrated noise and RMSE relative to the
//! oracle refit on the true partition.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::grouplasso::{FitOptions, GroupLassoError, LambdaNet, Solver, WeightSpec};
use crate::partition::{refit, PartitionError, PartitionModel};
use crate::pdmr::{net_from_coefficients, pdmr_single, InfoCriterion};
use crate::rng::{purpose, stream};
use crate::schema::{column_stats, Dataset, DesignMatrix, Layout, Predictor, PredictorSchema, SchemaError};
use crate::theory::{
    cif_estimate, delta_true, dense_gram, min_gap, theorem1_condition, weight_bound_f, Empirical, GroupCone,
    TheoryReport,
};
use crate::table::RawTable;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("setting must be in 1..=6, got {0}")]
    UnknownSetting(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no design with full level coverage after {0} draws")]
    Coverage(usize),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub setting: usize,
    pub rho: f64,
    pub snr: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub reps: usize,
    pub seed: u64,
    pub factors: usize,
    pub levels: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            setting: 1,
            rho: 0.0,
            snr: vec![1.0],
            n_train: 500,
            n_test: 10_000,
            reps: 20,
            seed: 0,
            factors: 100,
            levels: 24,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(1..=6).contains(&self.setting) {
            return Err(SimError::UnknownSetting(self.setting));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(SimError::InvalidConfig(format!("rho {} outside [0,1)", self.rho)));
        }
        if self.snr.is_empty() || self.snr.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(SimError::InvalidConfig("snr values must be positive".into()));
        }
        if self.levels < 24 || self.factors < active_factors(self.setting) {
            return Err(SimError::InvalidConfig(format!(
                "setting {} needs at least {} factors with 24 levels",
                self.setting,
                active_factors(self.setting)
            )));
        }
        if self.n_train < 2 || self.n_test == 0 || self.reps == 0 {
            return Err(SimError::InvalidConfig("empty sample sizes or reps".into()));
        }
        Ok(())
    }
}

/// Latent correlation giving rank correlation `rho` after `Φ`.
pub fn latent_correlation(rho: f64) -> f64 {
    2.0 * (std::f64::consts::PI * rho / 6.0).sin()
}

/// `n` rows of `r` categories in `1..=levels` from an equicorrelated
/// Gaussian copula.
pub fn gen_design(r: usize, levels: usize, rho: f64, n: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let rz = latent_correlation(rho);
    let (a, b) = (rz.sqrt(), (1.0 - rz).sqrt());
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    let l = levels as f64;
    (0..n)
        .map(|_| {
            let common: f64 = rng.sample(StandardNormal);
            (0..r)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    let u = phi.cdf(a * common + b * e);
                    ((l * u).ceil() as usize).clamp(1, levels)
                })
                .collect()
        })
        .collect()
}

fn covers_all_levels(rows: &[Vec<usize>], levels: usize) -> bool {
    let r = rows.first().map_or(0, Vec::len);
    (0..r).all(|k| {
        let mut seen = vec![false; levels];
        rows.iter().for_each(|row| seen[row[k] - 1] = true);
        seen.into_iter().all(|s| s)
    })
}

/// Patterns over levels `1..=23` of the active factors, with counts.
fn patterns(setting: usize) -> Vec<(usize, &'static [(f64, usize)])> {
    const A: &[(f64, usize)] = &[(0.0, 7), (2.0, 8), (4.0, 8)];
    const B: &[(f64, usize)] = &[(0.0, 15), (5.0, 8)];
    const C: &[(f64, usize)] = &[(0.0, 9), (2.0, 4), (4.0, 10)];
    const D: &[(f64, usize)] = &[(0.0, 5), (2.0, 6), (4.0, 6), (6.0, 6)];
    const E: &[(f64, usize)] = &[(0.0, 4), (1.0, 5), (2.0, 4), (3.0, 5), (4.0, 5)];
    const G: &[(f64, usize)] = &[(0.0, 3), (2.0, 12), (4.0, 8)];
    // (number of factors after the first, pattern); the first factor
    // repeats the pattern of the second with a 0 for its level 0
    match setting {
        1 => vec![(2, A), (3, B)],
        2 => vec![(2, A), (3, C)],
        3 => vec![(4, D)],
        4 => vec![(4, E)],
        5 => vec![(9, G)],
        6 => vec![(24, B)],
        _ => vec![],
    }
}

fn active_factors(setting: usize) -> usize {
    1 + patterns(setting).iter().map(|(c, _)| c).sum::<usize>()
}

/// Model dimension of each setting's true partition.
pub const SETTING_DIMENSIONS: [usize; 6] = [10, 13, 16, 21, 21, 26];

/// True coefficients on `Layout::categorical(&[levels; factors])`, with the
/// true partition they induce.
pub fn setting_beta(setting: usize, factors: usize, levels: usize) -> Result<(Layout, Vec<f64>, PartitionModel), SimError> {
    if !(1..=6).contains(&setting) {
        return Err(SimError::UnknownSetting(setting));
    }
    if levels < 24 || factors < active_factors(setting) {
        return Err(SimError::InvalidConfig("design too small for the setting".into()));
    }
    let layout = Layout::categorical(&vec![levels; factors])?;
    let mut beta = vec![0.0; layout.p()];
    let expand = |pat: &[(f64, usize)]| -> Vec<f64> {
        pat.iter().flat_map(|&(v, c)| std::iter::repeat(v).take(c)).collect()
    };
    let mut k = 1;
    let mut first = None;
    for (count, pat) in patterns(setting) {
        let vals = expand(pat);
        first.get_or_insert_with(|| vals.clone());
        for _ in 0..count {
            for (j, &v) in vals.iter().enumerate() {
                beta[layout.column(k, j + 1).expect("non-reference level")] = v;
            }
            k += 1;
        }
    }
    for (j, &v) in first.expect("non-empty setting").iter().enumerate() {
        beta[layout.column(0, j + 1).expect("factor 0 keeps all levels")] = v;
    }
    let model = PartitionModel::from_coefficients(&layout, &beta, 1e-9);
    Ok((layout, beta, model))
}

/// Schema forcing every column `x1..xr` to be categorical with levels
/// `"1".."levels"`.
pub fn design_schema(r: usize, levels: usize) -> PredictorSchema {
    let names: Vec<String> = (1..=levels).map(|l| l.to_string()).collect();
    PredictorSchema::new((1..=r).map(|k| Predictor::categorical(format!("x{k}"), names.clone())).collect())
        .expect("valid schema")
}

/// Rows of categories and a response as a raw table with columns
/// `x1..xr, y`.
pub fn design_table(rows: &[Vec<usize>], y: &[f64]) -> RawTable {
    let r = rows.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=r).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    let body = rows
        .iter()
        .zip(y)
        .map(|(row, v)| {
            let mut cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            cells.push(format!("{v}"));
            cells
        })
        .collect();
    RawTable::new(header, body).expect("rectangular")
}

/// Linear predictor from categories `1..=levels`.
pub fn predict_levels(layout: &Layout, beta: &[f64], rows: &[Vec<usize>]) -> Vec<f64> {
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &c)| layout.level_value(beta, k, c - 1))
                .sum()
        })
        .collect()
}

/// Sample variance.
fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// What a fitter sees for one replication.
pub struct FitContext<'a> {
    pub train: &'a Dataset<f64>,
    pub sigma: f64,
    pub beta_true: &'a [f64],
    pub model_true: &'a PartitionModel,
    pub seed: u64,
    pub rep: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub beta: Vec<f64>,
    pub dim: usize,
    /// True model in the nested family of some λ; PDMR only.
    pub screened: Option<bool>,
}

pub trait Fitter: Sync {
    fn name(&self) -> &str;
    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted, String>;
}

/// Net-scheme PDMR with RIC at the known noise level.
#[derive(Debug, Clone)]
pub struct Pdmr {
    pub net_length: usize,
    pub options: FitOptions,
    /// Replace every Group Lasso estimate by the true coefficients.
    pub oracle_screening: bool,
}

impl Default for Pdmr {
    fn default() -> Self {
        Self {
            net_length: 30,
            options: FitOptions::default(),
            oracle_screening: false,
        }
    }
}

impl Fitter for Pdmr {
    fn name(&self) -> &str {
        "pdmr"
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted, String> {
        let solver = Solver::new(ctx.train, self.options.clone()).map_err(|e| e.to_string())?;
        let net = solver.default_net(self.net_length);
        let betas: Vec<(f64, Result<Vec<f64>, String>)> = if self.oracle_screening {
            net.values.iter().map(|&l| (l, Ok(ctx.beta_true.to_vec()))).collect()
        } else {
            net.values
                .iter()
                .zip(solver.fit_path(&net))
                .map(|(&l, r)| (l, r.map(|f| f.beta).map_err(|e| e.to_string())))
                .collect()
        };
        let crit = InfoCriterion::Ric {
            sigma2: Some(ctx.sigma * ctx.sigma),
        };
        let res = net_from_coefficients(ctx.train, betas, crit).map_err(|e| e.to_string())?;
        Ok(Fitted {
            dim: res.selection.chosen.size(),
            screened: Some(res.screened(ctx.model_true)),
            beta: res.selection.beta,
        })
    }
}

/// Group Lasso alone, λ from K-fold cross-validation over the net.
#[derive(Debug, Clone)]
pub struct GroupLassoOnly {
    pub net_length: usize,
    pub folds: usize,
    pub options: FitOptions,
    /// Options for the fold fits, which only rank the λ values.
    pub cv_options: FitOptions,
}

impl Default for GroupLassoOnly {
    fn default() -> Self {
        Self {
            net_length: 30,
            folds: 5,
            options: FitOptions::default(),
            cv_options: FitOptions {
                kkt_tol: 1e-3,
                change_tol: 1e-5,
                ..FitOptions::default()
            },
        }
    }
}

impl Fitter for GroupLassoOnly {
    fn name(&self) -> &str {
        "grouplasso"
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted, String> {
        let data = ctx.train;
        let n = data.n();
        let solver = Solver::new(data, self.options.clone()).map_err(|e| e.to_string())?;
        let net = solver.default_net(self.net_length);
        let path: Vec<Vec<f64>> = solver
            .fit_path(&net)
            .into_iter()
            .map(|r| match r {
                Ok(fit) => Ok(fit.beta),
                Err(GroupLassoError::NoConvergence { best, .. }) => Ok(best.beta),
                Err(e) => Err(e.to_string()),
            })
            .collect::<Result<_, _>>()?;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream(ctx.seed, &[ctx.rep as u64, purpose::METHOD]);
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut cv = vec![0.0; net.len()];
        let mut used = 0;
        for f in 0..self.folds {
            let held: Vec<bool> = {
                let mut h = vec![false; n];
                order.iter().skip(f).step_by(self.folds).for_each(|&i| h[i] = true);
                h
            };
            let keep: Vec<usize> = (0..n).filter(|&i| !held[i]).collect();
            let values = data.design.values().select(ndarray::Axis(0), &keep);
            // a level absent from the training part makes the fold unusable
            let Ok(design) = DesignMatrix::new(data.layout().clone(), values) else { continue };
            let y: Vec<f64> = keep.iter().map(|&i| data.response[i]).collect();
            let fold = Dataset::new(design, y).map_err(|e| e.to_string())?;
            let fs = Solver::new(&fold, self.cv_options.clone()).map_err(|e| e.to_string())?;
            let scale = (keep.len() as f64 / n as f64).sqrt();
            let fnet = LambdaNet {
                values: net.values.iter().map(|l| l * scale).collect(),
                lambda_max: net.lambda_max * scale,
                ratio: net.ratio,
            };
            for (t, r) in fs.fit_path(&fnet).into_iter().enumerate() {
                let beta = match r {
                    Ok(fit) => fit.beta,
                    Err(GroupLassoError::NoConvergence { best, .. }) => best.beta,
                    Err(e) => return Err(e.to_string()),
                };
                let pred = data.design.matvec(&beta);
                cv[t] += (0..n).filter(|&i| held[i]).map(|i| (pred[i] - data.response[i]).powi(2)).sum::<f64>();
            }
            used += 1;
        }
        if used == 0 {
            return Err("no usable cross-validation fold".into());
        }
        let best = (0..cv.len()).fold(0, |b, t| if cv[t] < cv[b] { t } else { b });
        let beta = path[best].clone();
        let model = PartitionModel::from_coefficients(data.layout(), &beta, 1e-9);
        Ok(Fitted {
            dim: model.size(),
            screened: None,
            beta,
        })
    }
}

/// Least squares on the true partition.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle;

impl Fitter for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted, String> {
        let r = refit(ctx.model_true, ctx.train).map_err(|e| e.to_string())?;
        Ok(Fitted {
            dim: ctx.model_true.size(),
            screened: None,
            beta: r.beta_hat,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub setting: usize,
    pub rho: f64,
    pub snr: f64,
    pub rep: usize,
    pub sigma: f64,
    pub rmse: Option<f64>,
    pub rmse_oracle: f64,
    pub dim_selected: Option<usize>,
    pub screened: Option<bool>,
    pub error: Option<String>,
}

impl RepRecord {
    pub fn relative(&self) -> Option<f64> {
        self.rmse.map(|r| r / self.rmse_oracle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub snr: f64,
    pub completed: usize,
    pub failed: usize,
    pub mean_relative_rmse: f64,
    pub se_relative_rmse: f64,
    pub mean_dim: f64,
    /// Fraction of completed reps whose family held the true model.
    pub screening_frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub method: String,
    pub records: Vec<RepRecord>,
    pub aggregates: Vec<Aggregate>,
}

fn aggregate(snr: f64, recs: &[&RepRecord]) -> Aggregate {
    let rel: Vec<f64> = recs.iter().filter_map(|r| r.relative()).collect();
    let m = rel.len();
    let mean = rel.iter().sum::<f64>() / m as f64;
    let se = if m > 1 {
        (rel.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0) / m as f64).sqrt()
    } else {
        f64::NAN
    };
    let dims: Vec<f64> = recs.iter().filter_map(|r| r.dim_selected.map(|d| d as f64)).collect();
    let scr: Vec<bool> = recs.iter().filter_map(|r| r.screened).collect();
    Aggregate {
        snr,
        completed: m,
        failed: recs.len() - m,
        mean_relative_rmse: mean,
        se_relative_rmse: se,
        mean_dim: dims.iter().sum::<f64>() / dims.len().max(1) as f64,
        screening_frequency: (!scr.is_empty()).then(|| scr.iter().filter(|&&s| s).count() as f64 / scr.len() as f64),
    }
}

/// One replication's data, shared across SNR values: the noise is drawn
/// once at unit scale and multiplied by each σ.
pub struct Replication {
    pub train_levels: Vec<Vec<usize>>,
    pub design: DesignMatrix<f64>,
    pub mu: Vec<f64>,
    pub noise: Vec<f64>,
    pub test_mu: Vec<f64>,
    pub test_noise: Vec<f64>,
    pub test_levels: Vec<Vec<usize>>,
}

const MAX_COVERAGE_DRAWS: usize = 100;

pub fn replication(cfg: &SimConfig, layout: &Layout, beta: &[f64], rep: usize) -> Result<Replication, SimError> {
    let rep = rep as u64;
    let mut train = None;
    for attempt in 0..MAX_COVERAGE_DRAWS {
        let mut rng = stream(cfg.seed, &[rep, purpose::TRAIN_DESIGN, attempt as u64]);
        let rows = gen_design(cfg.factors, cfg.levels, cfg.rho, cfg.n_train, &mut rng);
        if covers_all_levels(&rows, cfg.levels) {
            train = Some(rows);
            break;
        }
    }
    let train_levels = train.ok_or(SimError::Coverage(MAX_COVERAGE_DRAWS))?;
    let zero_based: Vec<Vec<usize>> = train_levels.iter().map(|r| r.iter().map(|c| c - 1).collect()).collect();
    let design = DesignMatrix::from_levels(layout.clone(), &zero_based)?;
    let mu = predict_levels(layout, beta, &train_levels);
    let mut rng = stream(cfg.seed, &[rep, purpose::TRAIN_NOISE]);
    let noise = (0..cfg.n_train).map(|_| rng.sample(StandardNormal)).collect();
    let mut rng = stream(cfg.seed, &[rep, purpose::TEST_DESIGN]);
    let test_levels = gen_design(cfg.factors, cfg.levels, cfg.rho, cfg.n_test, &mut rng);
    let test_mu = predict_levels(layout, beta, &test_levels);
    let mut rng = stream(cfg.seed, &[rep, purpose::TEST_NOISE]);
    let test_noise = (0..cfg.n_test).map(|_| rng.sample(StandardNormal)).collect();
    Ok(Replication {
        train_levels,
        design,
        mu,
        noise,
        test_mu,
        test_noise,
        test_levels,
    })
}

/// RMSE of predictions against the noisy test response.
fn test_rmse(layout: &Layout, beta: &[f64], rep: &Replication, sigma: f64) -> f64 {
    let pred = predict_levels(layout, beta, &rep.test_levels);
    let ss: f64 = pred
        .iter()
        .zip(&rep.test_mu)
        .zip(&rep.test_noise)
        .map(|((p, m), e)| (p - m - sigma * e).powi(2))
        .sum();
    (ss / pred.len() as f64).sqrt()
}

/// Run every (rep, SNR) pair; records come back in (SNR, rep) order.
pub fn run(cfg: &SimConfig, method: &dyn Fitter) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let (layout, beta, truth) = setting_beta(cfg.setting, cfg.factors, cfg.levels)?;
    let per_rep: Vec<Vec<RepRecord>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| -> Result<Vec<RepRecord>, SimError> {
            let data = replication(cfg, &layout, &beta, rep)?;
            let var = variance(&data.mu);
            cfg.snr
                .iter()
                .map(|&snr| {
                    let sigma = (var / snr).sqrt();
                    let y: Vec<f64> = data.mu.iter().zip(&data.noise).map(|(m, e)| m + sigma * e).collect();
                    let train = Dataset::new(data.design.clone(), y)?;
                    let ctx = FitContext {
                        train: &train,
                        sigma,
                        beta_true: &beta,
                        model_true: &truth,
                        seed: cfg.seed,
                        rep,
                    };
                    let oracle = Oracle.fit(&ctx).map_err(SimError::InvalidConfig)?;
                    let rmse_oracle = test_rmse(&layout, &oracle.beta, &data, sigma);
                    let (rmse, dim, screened, error) = match method.fit(&ctx) {
                        Ok(f) => (Some(test_rmse(&layout, &f.beta, &data, sigma)), Some(f.dim), f.screened, None),
                        Err(e) => (None, None, None, Some(e)),
                    };
                    Ok(RepRecord {
                        setting: cfg.setting,
                        rho: cfg.rho,
                        snr,
                        rep,
                        sigma,
                        rmse,
                        rmse_oracle,
                        dim_selected: dim,
                        screened,
                        error,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut records = Vec::with_capacity(cfg.reps * cfg.snr.len());
    for s in 0..cfg.snr.len() {
        records.extend(per_rep.iter().map(|r| r[s].clone()));
    }
    let aggregates = cfg
        .snr
        .iter()
        .map(|&snr| {
            let recs: Vec<&RepRecord> = records.iter().filter(|r| r.snr == snr).collect();
            aggregate(snr, &recs)
        })
        .collect();
    Ok(SimResult {
        config: cfg.clone(),
        method: method.name().to_owned(),
        records,
        aggregates,
    })
}

/// Per-rep CSV with columns setting, rho, snr, rep, rmse, rmse_oracle,
/// dim_selected, screened; missing values are empty cells.
pub fn write_records<W: std::io::Write>(records: &[RepRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["setting", "rho", "snr", "rep", "rmse", "rmse_oracle", "dim_selected", "screened"])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        w.write_record([
            r.setting.to_string(),
            r.rho.to_string(),
            r.snr.to_string(),
            r.rep.to_string(),
            opt(r.rmse.map(|v| format!("{v:.12e}"))),
            format!("{:.12e}", r.rmse_oracle),
            opt(r.dim_selected.map(|d| d.to_string())),
            opt(r.screened.map(|s| s.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    pub a: f64,
    /// λ for screening and the criterion; default picks the middle of the
    /// admissible range when there is one, else `σ√(2 log p)`.
    pub lambda: Option<f64>,
    pub cone_budget: usize,
    pub cone_sweeps: usize,
    pub max_submodels: u128,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            a: 0.5,
            lambda: None,
            cone_budget: 8,
            cone_sweeps: 10,
            max_submodels: 100_000,
        }
    }
}

/// Theory diagnostics on the first training design of `cfg` at its first
/// SNR, with `cfg.reps` PDMR runs on fresh noise.
pub fn diagnose(cfg: &SimConfig, opts: &DiagnoseOptions) -> Result<TheoryReport, SimError> {
    cfg.validate()?;
    let (layout, beta, truth) = setting_beta(cfg.setting, cfg.factors, cfg.levels)?;
    let data = replication(cfg, &layout, &beta, 0)?;
    let design = data.design;
    let sigma = (variance(&data.mu) / cfg.snr[0]).sqrt();
    let w = WeightSpec::default()
        .resolve(&design)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let stats = column_stats(&design, &w);
    let cone = GroupCone {
        weights: w.clone(),
        groups: (0..layout.r()).map(|k| layout.group(k)).collect(),
        support: (0..layout.r()).map(|k| truth.is_active(k)).collect(),
        a: opts.a,
    };
    let zeta = cif_estimate(&dense_gram(&design), &cone, opts.cone_budget, cfg.seed, opts.cone_sweeps).zeta_upper;
    let gap = min_gap(&layout, &beta);
    let (delta_kl, submodels) = match delta_true(&design, &beta, &truth, opts.max_submodels) {
        Ok(sep) => (Some(sep.delta_kl), Some(sep.submodels)),
        Err(PartitionError::Exploded { .. }) => (None, None),
        Err(e) => return Err(SimError::InvalidConfig(e.to_string())),
    };
    let p = layout.p();
    let size = truth.size();
    let condition = |lambda: f64| {
        delta_kl.map(|d| theorem1_condition(lambda, opts.a, sigma, gap, zeta, d, size, p))
    };
    let lambda = opts.lambda.unwrap_or_else(|| match condition(1.0) {
        Some(c) if c.satisfiable => (0.5 * (c.lhs + c.rhs)).sqrt(),
        _ => sigma * (2.0 * (p as f64).ln()).sqrt(),
    });
    let fit_opts = FitOptions::default();
    let outcomes: Vec<Option<(bool, bool)>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(cfg.seed, &[rep as u64, purpose::MONTE_CARLO]);
            let y: Vec<f64> = data.mu.iter().map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
            let train = Dataset::new(design.clone(), y).ok()?;
            let res = pdmr_single(&train, lambda, &fit_opts, InfoCriterion::Fixed(lambda)).ok()?;
            Some((
                !res.family.contains(&truth),
                res.selection.chosen.is_proper_submodel_of(&truth),
            ))
        })
        .collect();
    let done: Vec<(bool, bool)> = outcomes.into_iter().flatten().collect();
    let freq = |f: fn(&(bool, bool)) -> bool| done.iter().filter(|o| f(o)).count() as f64 / done.len().max(1) as f64;
    Ok(TheoryReport {
        p,
        n: design.n(),
        model_size: size,
        x_min: stats.x_min,
        x_max: stats.x_max,
        x_w: stats.x_w,
        a: opts.a,
        sigma,
        zeta_upper: zeta,
        f_q: weight_bound_f(1.0, stats.x_min, stats.x_max),
        delta_min_gap: gap,
        delta_kl,
        submodels,
        lambda,
        condition9: condition(lambda),
        coverage: None,
        empirical: Some(Empirical {
            reps: done.len(),
            not_in_family: freq(|o| o.0),
            submodel_selected: freq(|o| o.1),
        }),
    })
}
