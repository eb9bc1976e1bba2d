use catfuse::grouplasso::WeightSpec;
use catfuse::theory::{cif_estimate, dense_gram, GroupCone};
use catfuse::{DesignMatrix, Layout};

/// Two factors (3 and 2 levels, p = 4) with unequal, dependent cell counts.
fn toy() -> DesignMatrix<f64> {
    let cells = [((0, 0), 5), ((0, 1), 2), ((1, 0), 1), ((1, 1), 4), ((2, 0), 3), ((2, 1), 3)];
    let rows: Vec<Vec<usize>> = cells
        .iter()
        .flat_map(|&((a, b), n)| std::iter::repeat(vec![a, b]).take(n))
        .collect();
    DesignMatrix::from_levels(Layout::categorical(&[3, 2]).unwrap(), &rows).unwrap()
}

fn in_cone(v: &[f64; 4], w: &[f64]) -> bool {
    // support = first factor (columns 0..3), a = 0.5
    let on = (0..3).map(|c| (w[c] * v[c]).powi(2)).sum::<f64>().sqrt();
    let off = (w[3] * v[3]).abs();
    let l1: f64 = (0..4).map(|c| (w[c] * v[c]).abs()).sum();
    off <= on + 0.5 * l1
}

fn ratio(g: &[f64], w: &[f64], v: &[f64; 4]) -> f64 {
    let num = (0..4)
        .map(|i| ((0..4).map(|j| g[i * 4 + j] * v[j]).sum::<f64>() / w[i]).abs())
        .fold(0.0, f64::max);
    num / v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimum of the ratio over the cone's `|v|∞ = 1` slice: a 0.01 grid on
/// every face, then a 0.001 grid around the best coarse points.
fn grid_minimum(g: &[f64], w: &[f64]) -> f64 {
    let coarse: Vec<f64> = (0..=200).map(|i| -1.0 + 0.01 * i as f64).collect();
    let mut best: Vec<(f64, [f64; 4])> = Vec::new();
    for face in 0..4 {
        let others: Vec<usize> = (0..4).filter(|&i| i != face).collect();
        for &a in &coarse {
            for &b in &coarse {
                for &c in &coarse {
                    let mut v = [0.0; 4];
                    v[face] = 1.0;
                    v[others[0]] = a;
                    v[others[1]] = b;
                    v[others[2]] = c;
                    if !in_cone(&v, w) {
                        continue;
                    }
                    best.push((ratio(g, w, &v), v));
                }
            }
        }
    }
    best.sort_by(|x, y| x.0.total_cmp(&y.0));
    best.truncate(20);
    let mut min = best[0].0;
    for (_, centre) in &best {
        let face = (0..4).find(|&i| centre[i] == 1.0).unwrap();
        let others: Vec<usize> = (0..4).filter(|&i| i != face).collect();
        for da in -10..=10 {
            for db in -10..=10 {
                for dc in -10..=10 {
                    let mut v = *centre;
                    v[others[0]] = (v[others[0]] + 0.001 * da as f64).clamp(-1.0, 1.0);
                    v[others[1]] = (v[others[1]] + 0.001 * db as f64).clamp(-1.0, 1.0);
                    v[others[2]] = (v[others[2]] + 0.001 * dc as f64).clamp(-1.0, 1.0);
                    if in_cone(&v, w) {
                        min = min.min(ratio(g, w, &v));
                    }
                }
            }
        }
    }
    min
}

#[test]
fn cif_estimate_agrees_with_a_dense_grid() {
    let design = toy();
    let w = WeightSpec::default().resolve(&design).unwrap();
    let g = dense_gram(&design);
    let cone = GroupCone {
        weights: w.clone(),
        groups: vec![0..3, 3..4],
        support: vec![true, false],
        a: 0.5,
    };
    let est = cif_estimate(&g, &cone, 64, 11, 60);
    let grid = grid_minimum(&g, &w);
    assert!(grid > 0.0);
    assert!(cone.contains(&est.direction));
    let gap = (est.zeta_upper - grid).abs() / grid;
    assert!(gap < 0.05, "estimate {} grid {} gap {gap}", est.zeta_upper, grid);
}
