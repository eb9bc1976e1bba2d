use catfuse::partition::{collapse, constraint_matrix, ConstraintMatrix};
use catfuse::schema::{ColumnTag, FactorKind};
use catfuse::{DesignMatrix, Layout, PartitionModel, SetPartition};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tag(factor: usize, level: usize) -> ColumnTag {
    ColumnTag { factor, level }
}

/// Two factors with 8 and 7 levels, partitions
/// {0,2,6} {3,4,5} {1,7} and {0,4} {1,2,6} {3,5}.
#[test]
fn worked_nine_by_fourteen_example() {
    let layout = Layout::categorical(&[8, 7]).unwrap();
    assert_eq!(layout.p(), 14);
    let blocks = vec![
        vec![vec![0, 2, 6], vec![3, 4, 5], vec![1, 7]],
        vec![vec![0, 4], vec![1, 2, 6], vec![3, 5]],
    ];
    let a = ConstraintMatrix::with_block_order(&layout, &blocks).unwrap();
    assert_eq!(a.m, 5);
    let order = [
        (0, 0),
        (0, 3),
        (0, 1),
        (1, 1),
        (1, 3),
        (0, 2),
        (0, 6),
        (0, 4),
        (0, 5),
        (0, 7),
        (1, 4),
        (1, 2),
        (1, 6),
        (1, 5),
    ];
    let expected_tags: Vec<ColumnTag> = order.iter().map(|&(k, j)| tag(k, j)).collect();
    assert_eq!(a.tags, expected_tags);

    // leader column hit by each remaining coordinate (None: reference block)
    let leader = [Some(0), Some(0), Some(1), Some(1), Some(2), None, Some(3), Some(3), Some(4)];
    let mut expected = Array2::<f64>::zeros((9, 14));
    for (row, l) in leader.iter().enumerate() {
        expected[[row, 5 + row]] = 1.0;
        if let Some(c) = l {
            expected[[row, *c]] = -1.0;
        }
    }
    assert_eq!(a.matrix, expected);

    // A₀ₘβ = 0 exactly for β in the model space
    let model = PartitionModel::new(
        &layout,
        blocks.iter().enumerate().map(|(k, b)| SetPartition::from_blocks([8, 7][k], b).unwrap()).collect(),
    )
    .unwrap();
    let mut beta = vec![0.0; 14];
    for (k, values) in [(0, [1.5, -2.0, 0.25]), (1, [0.0, 3.0, -1.0])] {
        for (b, block) in blocks[k].iter().enumerate() {
            for &j in block {
                if let Some(c) = layout.column(k, j) {
                    beta[c] = values[b];
                }
            }
        }
    }
    assert!(model.contains(&layout, &beta, 0.0));
    assert!(a.apply(&beta).iter().all(|&v| v == 0.0));
    let mut off = beta.clone();
    off[layout.column(0, 7).unwrap()] += 1.0;
    assert_eq!(a.apply(&off).iter().filter(|&&v| v != 0.0).count(), 1);
}

#[test]
fn canonical_order_has_same_rows_up_to_permutation() {
    let layout = Layout::categorical(&[8, 7]).unwrap();
    let model = PartitionModel::new(
        &layout,
        vec![
            SetPartition::from_labels(&[0, 2, 0, 1, 1, 1, 0, 2]),
            SetPartition::from_labels(&[0, 1, 1, 2, 0, 2, 1]),
        ],
    )
    .unwrap();
    let a = constraint_matrix(&model, &layout).unwrap();
    assert_eq!(a.m, model.size());
    assert_eq!(a.matrix.nrows() + a.m, layout.p());
    let mut sorted = a.coordinates.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..14).collect::<Vec<_>>());
}

fn random_layout(rng: &mut ChaCha8Rng) -> Layout {
    let r = rng.gen_range(1..5);
    let mut specs = Vec::new();
    for k in 0..r {
        if k > 0 && rng.gen_bool(0.25) {
            specs.push((format!("x{k}"), FactorKind::Continuous, vec!["(absent)".into(), format!("x{k}")]));
        } else {
            let l = rng.gen_range(2..7);
            specs.push((format!("f{k}"), FactorKind::Categorical, (0..l).map(|j| j.to_string()).collect()));
        }
    }
    Layout::new(specs).unwrap()
}

fn random_design(layout: &Layout, n: usize, rng: &mut ChaCha8Rng) -> DesignMatrix<f64> {
    let mut values = Array2::zeros((n, layout.p()));
    for i in 0..n {
        for (k, f) in layout.factors().iter().enumerate() {
            match f.kind {
                FactorKind::Continuous => {
                    values[[i, f.first_column]] = rng.gen_range(-2.0..2.0);
                }
                _ => {
                    // the first rows see every level
                    let j = if i < f.n_levels() { i } else { rng.gen_range(0..f.n_levels()) };
                    if let Some(c) = layout.column(k, j) {
                        values[[i, c]] = 1.0;
                    }
                }
            }
        }
    }
    DesignMatrix::new(layout.clone(), values).unwrap()
}

#[test]
fn x_beta_equals_z_xi_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let layout = random_layout(&mut rng);
        let design = random_design(&layout, 40, &mut rng);
        let parts = layout
            .factors()
            .iter()
            .map(|f| {
                let labels: Vec<usize> = (0..f.n_levels()).map(|_| rng.gen_range(0..f.n_levels())).collect();
                SetPartition::from_labels(&labels)
            })
            .collect();
        let model = PartitionModel::new(&layout, parts).unwrap();

        // a point of Lₘ: one value per block, zero on reference blocks of k ≥ 1
        let mut beta = vec![0.0; layout.p()];
        for k in 0..layout.r() {
            let part = model.factor(k);
            let values: Vec<f64> = (0..part.n_blocks()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for j in 0..part.len() {
                if let Some(c) = layout.column(k, j) {
                    let b = part.block_of(j);
                    beta[c] = if k > 0 && b == part.block_of(0) { 0.0 } else { values[b] };
                }
            }
        }
        assert!(model.contains(&layout, &beta, 0.0), "case {case}");

        let cd = collapse(&model, &design).unwrap();
        assert_eq!(cd.z.ncols(), model.size(), "case {case}");
        let xi = cd.xi_of(&layout, &beta);
        assert_eq!(cd.expand(&xi), beta, "case {case}");
        let xb = design.values().dot(&ndarray::Array1::from(beta.clone()));
        let zx = cd.z.dot(&ndarray::Array1::from(xi));
        for (u, v) in xb.iter().zip(zx.iter()) {
            assert!((u - v).abs() <= 1e-12, "case {case}: {u} vs {v}");
        }
        let a = constraint_matrix(&model, &layout).unwrap();
        assert_eq!(a.m, model.size());
        assert!(a.apply(&beta).iter().all(|v| v.abs() <= 1e-12));
    }
}
