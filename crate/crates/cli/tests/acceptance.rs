//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
//! criterion fails.

use std::process::Command;
use std::time::Instant;

use catfuse::grouplasso::{FitOptions, Solver};
use catfuse::partition::{collapse, ConstraintMatrix};
use catfuse::pdmr::{pdmr_single, InfoCriterion};
use catfuse::rng::stream;
use catfuse::schema::{encode, FactorKind};
use catfuse::simbench::{self, design_schema, design_table, gen_design, setting_beta, GroupLassoOnly, Pdmr, SimConfig};
use catfuse::theory::{
    bell, delta_true, frequency_se, lemma1_coverage, orthogonal_design, poisson_moment_bound, stirling2,
    theorem1_condition, touchard, weight_bound_f,
};
use catfuse::{Dataset, DesignMatrix, Layout, PartitionModel, SetPartition};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, start: Instant, limit_s: Option<f64>, out: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit_s.map_or(true, |l| secs < l);
    let pass = out.pass && in_time;
    let limit = limit_s.map(|l| format!(" (limit {l:.0} s)")).unwrap_or_default();
    println!(
        "[{}] criterion {id} {name}: {}; {secs:.1} s{limit}",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------------------
// 1

fn dense(design: &DesignMatrix<f64>) -> Array2<f64> {
    design.values().to_owned()
}

/// Group soft-thresholding in coordinates scaled by the column norms, where
/// orthogonal single-column rows make every scaled group orthonormal.
fn closed_form(x: &Array2<f64>, y: &[f64], groups: &[std::ops::Range<usize>], lambda: f64, penalized: &[bool]) -> Vec<f64> {
    let p = x.ncols();
    let norms: Vec<f64> = (0..p).map(|c| x.column(c).dot(&x.column(c)).sqrt()).collect();
    let xty: Vec<f64> = (0..p).map(|c| x.column(c).iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let mut beta = vec![0.0; p];
    for (k, g) in groups.iter().enumerate() {
        let b: Vec<f64> = g.clone().map(|c| xty[c] / norms[c]).collect();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lam = if penalized[k] { lambda } else { 0.0 };
        if nb <= lam {
            continue;
        }
        let shrink = 1.0 - lam / nb;
        for (i, c) in g.clone().enumerate() {
            beta[c] = shrink * b[i] / norms[c];
        }
    }
    beta
}

fn kkt_residual(x: &Array2<f64>, y: &[f64], groups: &[std::ops::Range<usize>], beta: &[f64], lambda: f64) -> f64 {
    let p = x.ncols();
    let w: Vec<f64> = (0..p).map(|c| x.column(c).dot(&x.column(c)).sqrt()).collect();
    let r: Vec<f64> = x.rows().into_iter().zip(y).map(|(row, yi)| row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() - yi).collect();
    let grad: Vec<f64> = (0..p).map(|c| x.column(c).iter().zip(&r).map(|(a, b)| a * b).sum()).collect();
    let mut worst = 0.0f64;
    for g in groups {
        let wb = g.clone().map(|c| (w[c] * beta[c]).powi(2)).sum::<f64>().sqrt();
        let v = if wb == 0.0 {
            (g.clone().map(|c| (grad[c] / w[c]).powi(2)).sum::<f64>().sqrt() - lambda).max(0.0)
        } else {
            g.clone()
                .map(|c| (grad[c] / w[c] + lambda * w[c] * beta[c] / wb).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        worst = worst.max(v);
    }
    worst
}

fn groups_of(layout: &Layout) -> Vec<std::ops::Range<usize>> {
    (0..layout.r()).map(|k| layout.group(k)).collect()
}

fn criterion1() -> Outcome {
    let mut max_diff = 0.0f64;
    for case in 0..50u64 {
        let mut rng = stream(101, &[case]);
        let r = rng.gen_range(1..6);
        let levels: Vec<usize> = (0..r).map(|_| rng.gen_range(2..9)).collect();
        let per_column: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(2..12)).collect();
        let design = orthogonal_design(&levels, &per_column).unwrap();
        assert!(design.p() <= 60);
        let y: Vec<f64> = (0..design.n()).map(|_| 2.0 * normal(&mut rng) + 1.0).collect();
        let exempt = case % 5 == 0;
        let opts = FitOptions {
            penalize_intercept: !exempt,
            ..FitOptions::default()
        };
        let data = Dataset::new(design, y.clone()).unwrap();
        let solver = Solver::new(&data, opts).unwrap();
        let lambda = solver.lambda_max() * rng.gen_range(0.05..0.95);
        let fit = solver.fit(lambda, None).unwrap();
        let mut penalized = vec![true; r];
        penalized[0] = !exempt;
        let x = dense(&data.design);
        let oracle = closed_form(&x, &y, &groups_of(data.layout()), lambda, &penalized);
        for (a, b) in fit.beta.iter().zip(&oracle) {
            max_diff = max_diff.max((a - b).abs());
        }
    }
    let mut max_kkt = 0.0f64;
    for case in 0..50u64 {
        let mut rng = stream(202, &[case]);
        let r = rng.gen_range(2..6);
        let levels: Vec<usize> = (0..r).map(|_| rng.gen_range(2..7)).collect();
        let layout = Layout::categorical(&levels).unwrap();
        let n = rng.gen_range(30..120);
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                // correlated levels: the second factor copies the first half the time
                let first = rng.gen_range(0..levels[0]);
                (0..r)
                    .map(|k| {
                        if k > 0 && rng.gen_bool(0.5) {
                            first % levels[k]
                        } else {
                            rng.gen_range(0..levels[k])
                        }
                    })
                    .collect()
            })
            .collect();
        let design = DesignMatrix::from_levels(layout, &rows).unwrap();
        if design.column_norms().iter().any(|&v| v == 0.0) {
            continue;
        }
        let beta: Vec<f64> = (0..design.p()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = design.matvec(&beta).iter().map(|m| m + normal(&mut rng)).collect();
        let data = Dataset::new(design, y.clone()).unwrap();
        let solver = Solver::new(&data, FitOptions::default()).unwrap();
        let lambda = solver.lambda_max() * rng.gen_range(0.02..0.9);
        let fit = solver.fit(lambda, None).unwrap();
        let x = dense(&data.design);
        let res = kkt_residual(&x, &y, &groups_of(data.layout()), &fit.beta, lambda);
        max_kkt = max_kkt.max(res / lambda);
    }
    Outcome {
        pass: max_diff < 1e-8 && max_kkt <= 1e-5,
        detail: format!("max |Δβ|∞ {max_diff:.2e} (tol 1e-8), max KKT residual / λ {max_kkt:.2e} (tol 1e-5)"),
    }
}

// ---------------------------------------------------------------------------
// 2

fn criterion2() -> Outcome {
    let bell6 = bell(6).unwrap();
    let mut recurrence = stirling2(0, 0).unwrap() == 1;
    for n in 1..=20u32 {
        recurrence &= stirling2(n, 0).unwrap() == 0;
        for k in 1..=n {
            let lhs = stirling2(n, k).unwrap();
            let rhs = k as u128 * stirling2(n - 1, k).unwrap() + stirling2(n - 1, k - 1).unwrap();
            recurrence &= lhs == rhs;
        }
    }
    let mut worst_rel = 0.0f64;
    for (i, &x) in [2.0, 5.0, 10.0, 20.0].iter().enumerate() {
        let pois = Poisson::new(x).unwrap();
        let mut rng = stream(303, &[i as u64]);
        let mut sums = [0.0f64; 4];
        let draws = 1_000_000;
        for _ in 0..draws {
            let k: f64 = pois.sample(&mut rng);
            let mut pow = 1.0;
            for s in sums.iter_mut() {
                pow *= k;
                *s += pow;
            }
        }
        for n in 1..=4u32 {
            let mc = sums[n as usize - 1] / draws as f64;
            let exact = touchard(n, x);
            worst_rel = worst_rel.max((mc - exact).abs() / exact);
        }
    }
    let mut chain = true;
    for n in 2..=10u32 {
        for x in [0.5, 1.0, 5.0, 20.0] {
            chain &= poisson_moment_bound(n, x).chain_holds();
        }
    }
    Outcome {
        pass: bell6 == 203 && recurrence && worst_rel < 0.01 && chain,
        detail: format!(
            "bell(6) = {bell6}, recurrence n ≤ 20 {}, touchard vs Monte Carlo max relative error {worst_rel:.2e} (tol 1e-2), moment chain {}",
            if recurrence { "holds" } else { "broken" },
            if chain { "holds" } else { "broken" }
        ),
    }
}

// ---------------------------------------------------------------------------
// 3

fn criterion3() -> Outcome {
    let layout = Layout::categorical(&[8, 7]).unwrap();
    let blocks = vec![
        vec![vec![0, 2, 6], vec![3, 4, 5], vec![1, 7]],
        vec![vec![0, 4], vec![1, 2, 6], vec![3, 5]],
    ];
    let a = ConstraintMatrix::with_block_order(&layout, &blocks).unwrap();
    let order = [(0, 0), (0, 3), (0, 1), (1, 1), (1, 3), (0, 2), (0, 6), (0, 4), (0, 5), (0, 7), (1, 4), (1, 2), (1, 6), (1, 5)];
    let leader = [Some(0), Some(0), Some(1), Some(1), Some(2), None, Some(3), Some(3), Some(4)];
    let mut expected = Array2::<f64>::zeros((9, 14));
    for (row, l) in leader.iter().enumerate() {
        expected[[row, 5 + row]] = 1.0;
        if let Some(c) = l {
            expected[[row, *c]] = -1.0;
        }
    }
    let tags_ok = a.tags.iter().map(|t| (t.factor, t.level)).eq(order.iter().copied());
    let example_ok = tags_ok && a.matrix == expected;

    let mut max_err = 0.0f64;
    let mut sizes_ok = true;
    for case in 0..100u64 {
        let mut rng = stream(404, &[case]);
        let r = rng.gen_range(1..5);
        let specs: Vec<(String, FactorKind, Vec<String>)> = (0..r)
            .map(|k| {
                if k > 0 && rng.gen_bool(0.25) {
                    (format!("x{k}"), FactorKind::Continuous, vec!["(absent)".into(), format!("x{k}")])
                } else {
                    let l = rng.gen_range(2..7);
                    (format!("f{k}"), FactorKind::Categorical, (0..l).map(|j| j.to_string()).collect())
                }
            })
            .collect();
        let layout = Layout::new(specs).unwrap();
        let n = 30;
        let mut values = Array2::zeros((n, layout.p()));
        for i in 0..n {
            for (k, f) in layout.factors().iter().enumerate() {
                if f.kind == FactorKind::Continuous {
                    values[[i, f.first_column]] = rng.gen_range(-2.0..2.0);
                } else if let Some(c) = layout.column(k, if i < f.n_levels() { i } else { rng.gen_range(0..f.n_levels()) }) {
                    values[[i, c]] = 1.0;
                }
            }
        }
        let design = DesignMatrix::new(layout.clone(), values).unwrap();
        let parts: Vec<SetPartition> = layout
            .factors()
            .iter()
            .map(|f| SetPartition::from_labels(&(0..f.n_levels()).map(|_| rng.gen_range(0..f.n_levels())).collect::<Vec<_>>()))
            .collect();
        let model = PartitionModel::new(&layout, parts).unwrap();
        let mut beta = vec![0.0; layout.p()];
        for k in 0..layout.r() {
            let part = model.factor(k);
            let vals: Vec<f64> = (0..part.n_blocks()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for j in 0..part.len() {
                if let Some(c) = layout.column(k, j) {
                    let b = part.block_of(j);
                    beta[c] = if k > 0 && b == part.block_of(0) { 0.0 } else { vals[b] };
                }
            }
        }
        let cd = collapse(&model, &design).unwrap();
        sizes_ok &= cd.z.ncols() == model.size();
        let xi = cd.xi_of(&layout, &beta);
        let xb = design.values().dot(&ndarray::Array1::from(beta));
        let zx = cd.z.dot(&ndarray::Array1::from(xi));
        for (u, v) in xb.iter().zip(zx.iter()) {
            max_err = max_err.max((u - v).abs());
        }
    }
    Outcome {
        pass: example_ok && max_err <= 1e-12 && sizes_ok,
        detail: format!(
            "9×14 example {}, max |Xβ − Zξ| {max_err:.2e} over 100 models (tol 1e-12), size = columns(Z) {}",
            if example_ok { "reproduced" } else { "differs" },
            if sizes_ok { "always" } else { "violated" }
        ),
    }
}

// ---------------------------------------------------------------------------
// 4

fn criterion4() -> Outcome {
    let mut rng = stream(505, &[0]);
    let rows = gen_design(100, 24, 0.0, 200, &mut rng);
    let y = vec![0.0; rows.len()];
    let table = design_table(&rows, &y);
    let schema = design_schema(100, 24);
    let data = encode::<f64>(&table, &schema, "y").unwrap();
    let p = data.p();
    let dims: Vec<usize> = (1..=6).map(|s| setting_beta(s, 100, 24).unwrap().2.size()).collect();
    let ok = p == 2301 && dims == [10, 13, 16, 21, 21, 26];
    Outcome {
        pass: ok,
        detail: format!("p = {p} (paper 2301), model dimensions {dims:?} (paper [10, 13, 16, 21, 21, 26])"),
    }
}

// ---------------------------------------------------------------------------
// 5, 6

fn shared_config(snr: Vec<f64>) -> SimConfig {
    SimConfig {
        setting: 1,
        rho: 0.0,
        snr,
        n_train: 500,
        n_test: 10_000,
        reps: 20,
        seed: 7,
        ..SimConfig::default()
    }
}

fn criterion5() -> Outcome {
    let cfg = shared_config(vec![4.0]);
    let res = simbench::run(&cfg, &Pdmr::default()).unwrap();
    let agg = &res.aggregates[0];
    let freq = agg.screening_frequency.unwrap_or(0.0);
    let in_range = res
        .records
        .iter()
        .filter(|r| r.dim_selected.is_some_and(|d| (8..=14).contains(&d)))
        .count();
    let oracle = simbench::run(
        &cfg,
        &Pdmr {
            oracle_screening: true,
            ..Pdmr::default()
        },
    )
    .unwrap();
    let oracle_freq = oracle.aggregates[0].screening_frequency.unwrap_or(0.0);
    Outcome {
        pass: freq >= 0.9 && oracle_freq == 1.0 && agg.failed == 0,
        detail: format!(
            "screening frequency {freq:.2} (need ≥ 0.90), with oracle coefficients {oracle_freq:.2} (need 1.00), {} failed reps; selected size in [8, 14] in {in_range}/20 reps",
            agg.failed
        ),
    }
}

fn criterion6() -> Outcome {
    let cfg = shared_config(vec![0.5, 1.0, 2.0, 4.0]);
    let pdmr = simbench::run(&cfg, &Pdmr::default()).unwrap();
    let gl = simbench::run(&cfg, &GroupLassoOnly::default()).unwrap();
    let mut below = true;
    let mut parts = Vec::new();
    for (a, b) in pdmr.aggregates.iter().zip(&gl.aggregates) {
        below &= a.mean_relative_rmse < b.mean_relative_rmse && a.failed == 0 && b.failed == 0;
        parts.push(format!(
            "SNR {}: {:.3} ± {:.3} vs {:.3} ± {:.3}",
            a.snr, a.mean_relative_rmse, a.se_relative_rmse, b.mean_relative_rmse, b.se_relative_rmse
        ));
    }
    let monotone = pdmr.aggregates.windows(2).all(|w| {
        let tol = w[0].se_relative_rmse.max(w[1].se_relative_rmse);
        w[1].mean_relative_rmse <= w[0].mean_relative_rmse + tol
    });
    let pooled = |aggs: &[simbench::Aggregate]| aggs.iter().map(|a| a.mean_relative_rmse).sum::<f64>() / aggs.len() as f64;
    Outcome {
        pass: below && monotone,
        detail: format!(
            "PDMR vs Group Lasso relative RMSE [{}]; PDMR below at every SNR {}, pooled {:.3} vs {:.3}, non-increasing within 1 s.e. {}",
            parts.join("; "),
            below,
            pooled(&pdmr.aggregates),
            pooled(&gl.aggregates),
            monotone
        ),
    }
}

// ---------------------------------------------------------------------------
// 7

fn criterion7() -> Outcome {
    let levels = [4, 5, 5, 5, 5, 5, 5, 5, 5, 5];
    let design = orthogonal_design(&levels, &[5]).unwrap();
    let mut rng = stream(707, &[0]);
    let beta: Vec<f64> = (0..design.p())
        .map(|c| if c < 12 { rng.gen_range(-3.0..3.0) } else { 0.0 })
        .collect();
    let cov = lemma1_coverage(&design, &beta, 1.0, 0.5, 0.1, 500, 7);
    Outcome {
        pass: design.p() == 40 && design.n() == 200 && cov.coverage >= 0.9,
        detail: format!(
            "p = {}, n = {}, coverage {:.3} over {} reps (need ≥ 0.90), λ = {:.3}, radius {:.3}",
            design.p(),
            design.n(),
            cov.coverage,
            cov.reps,
            cov.lambda,
            cov.radius
        ),
    }
}

// ---------------------------------------------------------------------------
// 8

fn criterion8() -> Outcome {
    let mut ok = true;
    let mut found = Vec::new();
    for (xm, xmax) in [(1.0, 2.0), (0.5, 3.0), (2.0, 2.5), (3.0, 30.0)] {
        let grid: Vec<f64> = (0..=500).map(|i| (i as f64 - 100.0) / 100.0).collect();
        let values: Vec<f64> = grid.iter().map(|&q| weight_bound_f(q, xm, xmax)).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let minimizers: Vec<f64> = grid
            .iter()
            .zip(&values)
            .filter(|(_, &v)| v <= min * (1.0 + 1e-12))
            .map(|(&q, _)| q)
            .collect();
        ok &= minimizers.iter().all(|&q| (1.0..=2.0).contains(&q));
        ok &= (min - xm.powi(-2)).abs() <= 1e-12 * min;
        found.push(format!(
            "[{:.2}, {:.2}]",
            minimizers.first().unwrap(),
            minimizers.last().unwrap()
        ));
    }
    ok &= (weight_bound_f(0.0, 1.0, 2.0) - 4.0).abs() < 1e-12;
    Outcome {
        pass: ok,
        detail: format!("minimizer ranges {} (need inside [1, 2])", found.join(", ")),
    }
}

// ---------------------------------------------------------------------------
// 9

fn criterion9() -> Outcome {
    let g = 400;
    let sigma = 1.0;
    let a = 0.5;
    let lambda = 80f64.sqrt();
    let design = orthogonal_design(&[3], &[g]).unwrap();
    let beta = vec![0.0, 3.0, 6.0];
    let layout = design.layout().clone();
    let truth = PartitionModel::from_coefficients(&layout, &beta, 1e-9);
    let sep = delta_true(&design, &beta, &truth, 1000).unwrap();
    let zeta = design.column_norms().iter().copied().fold(f64::INFINITY, f64::min);
    let cond = theorem1_condition(lambda, a, sigma, sep.delta_min_gap, zeta, sep.delta_kl, truth.size(), design.p());
    let mu = design.matvec(&beta);
    let reps = 200;
    let mut under = 0;
    let mut missing = 0;
    for rep in 0..reps as u64 {
        let mut rng = stream(909, &[rep]);
        let y: Vec<f64> = mu.iter().map(|m| m + sigma * normal(&mut rng)).collect();
        let data = Dataset::new(design.clone(), y).unwrap();
        let res = pdmr_single(&data, lambda, &FitOptions::default(), InfoCriterion::Fixed(lambda)).unwrap();
        if res.selection.chosen.is_proper_submodel_of(&truth) {
            under += 1;
        }
        if !res.family.contains(&truth) {
            missing += 1;
        }
    }
    let freq = under as f64 / reps as f64;
    let se = frequency_se(freq, reps);
    let exact_ok = sep.delta_min_gap == 3.0 && (sep.delta_kl - g as f64 * 9.0 / 2.0).abs() < 1e-6;
    Outcome {
        pass: exact_ok && cond.holds && freq <= cond.bound + 3.0 * se,
        detail: format!(
            "Δ = {}, δ = {:.1}, ζ = {zeta}, condition {:.2} ≤ λ² = {:.0} < {:.2} {}; submodel frequency {freq:.3} (true model missing from family {missing}/{reps}) vs bound {:.2e} + 3 s.e. {:.2e}",
            sep.delta_min_gap,
            sep.delta_kl,
            cond.lhs,
            cond.lambda2,
            cond.rhs,
            if cond.holds { "holds" } else { "fails" },
            cond.bound,
            3.0 * se
        ),
    }
}

// ---------------------------------------------------------------------------
// 10

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_catfuse"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn criterion10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_str().unwrap().to_owned();

    let (layout, beta, _) = setting_beta(1, 12, 24).unwrap();
    let mut rng = stream(1010, &[0]);
    let rows = gen_design(12, 24, 0.3, 400, &mut rng);
    let mu = simbench::predict_levels(&layout, &beta, &rows);
    let y: Vec<f64> = mu.iter().map(|m| m + 2.0 * normal(&mut rng)).collect();
    let mut csv: String = (1..=12).map(|k| format!("x{k},")).collect();
    csv.push_str("y\n");
    for (row, v) in rows.iter().zip(&y) {
        for c in row {
            csv.push_str(&format!("{c},"));
        }
        csv.push_str(&format!("{v}\n"));
    }
    std::fs::write(d.join("data.csv"), csv).unwrap();

    let run_all = |threads: &str, tag: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let model = p(&format!("model-{tag}.json"));
        let results = p(&format!("results-{tag}.csv"));
        cli(&[
            "--threads", threads, "pdmr", "--input", &p("data.csv"), "--response", "y", "--seed", "5", "--nlambda", "20",
            "--output", &model,
        ])?;
        cli(&[
            "--threads", threads, "simulate", "--setting", "2", "--factors", "10", "--reps", "4", "--snr", "1,2",
            "--n-train", "300", "--n-test", "1000", "--seed", "5", "--out", &results,
        ])?;
        Ok((std::fs::read(&model).unwrap(), std::fs::read(&results).unwrap()))
    };
    match (run_all("1", "a"), run_all("1", "b"), run_all("3", "c")) {
        (Ok(a), Ok(b), Ok(c)) => {
            let same = a == b && a == c;
            Outcome {
                pass: same,
                detail: format!(
                    "model.json and results.csv {} across repeated runs and 1 vs 3 threads",
                    if same { "byte-identical" } else { "differ" }
                ),
            }
        }
        (a, b, c) => Outcome {
            pass: false,
            detail: format!("cli failed: {:?}", [a.err(), b.err(), c.err()]),
        },
    }
}

fn main() {
    // the test harness passes flags such as --nocapture; none apply here
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: Vec<(usize, &str, Option<f64>, fn() -> Outcome)> = vec![
        (1, "solver correctness", Some(30.0), criterion1),
        (2, "combinatorics", Some(60.0), criterion2),
        (3, "collapse algebra", None, criterion3),
        (4, "dimension bookkeeping", None, criterion4),
        (5, "screening property", Some(600.0), criterion5),
        (6, "prediction quality", Some(2400.0), criterion6),
        (7, "coverage of the error bound", Some(300.0), criterion7),
        (8, "weight exponent bound", None, criterion8),
        (9, "submodel probability bound", Some(300.0), criterion9),
        (10, "determinism", None, criterion10),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|s| s == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        if !report(id, name, start, limit, f()) {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
