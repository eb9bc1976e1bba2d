//! Cone-restricted design constants: the cone invertibility factor of the
//! grouped problem and, for ungrouped problems, the restricted eigenvalue,
//! compatibility factor and `ℓ∞` invertibility factor.
//!
//! All of them are infima over a cone. They are estimated from above by
//! evaluating seeded random cone members and refining each one with a
//! coordinate-wise pattern search that never leaves the cone.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{purpose, stream};
use crate::schema::DesignMatrix;

/// Dense `XᵀX` accumulated from the sparse rows of a design.
pub fn dense_gram(design: &DesignMatrix<f64>) -> Vec<f64> {
    let p = design.p();
    let mut g = vec![0.0; p * p];
    let values = design.values();
    let mut nz: Vec<(usize, f64)> = Vec::new();
    for row in values.rows() {
        nz.clear();
        nz.extend(row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(c, &v)| (c, v)));
        for &(a, va) in &nz {
            for &(b, vb) in &nz {
                g[a * p + b] += va * vb;
            }
        }
    }
    g
}

/// Grouped cone `Σ_{k∉S} ‖W_k v_k‖ ≤ Σ_{k∈S} ‖W_k v_k‖ + a|Wv|₁`.
#[derive(Debug, Clone)]
pub struct GroupCone {
    pub weights: Vec<f64>,
    /// Column range per group.
    pub groups: Vec<std::ops::Range<usize>>,
    pub support: Vec<bool>,
    pub a: f64,
}

impl GroupCone {
    /// Right side minus left side; members have a non-negative slack.
    pub fn slack(&self, v: &[f64]) -> f64 {
        let mut on = 0.0;
        let mut off = 0.0;
        for (k, g) in self.groups.iter().enumerate() {
            let nrm = g
                .clone()
                .map(|c| (self.weights[c] * v[c]).powi(2))
                .sum::<f64>()
                .sqrt();
            if self.support[k] {
                on += nrm;
            } else {
                off += nrm;
            }
        }
        let l1: f64 = v.iter().zip(&self.weights).map(|(x, w)| (x * w).abs()).sum();
        on + self.a * l1 - off
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.slack(v) >= -1e-12 * (1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }

    fn support_columns(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(k, _)| self.support[*k])
            .flat_map(|(_, g)| g.clone())
            .collect()
    }
}

/// Ungrouped cone `|θ_{T'}|₁ ≤ (1+a)/(1−a) |θ_T|₁`.
#[derive(Debug, Clone)]
pub struct LassoCone {
    pub support: Vec<bool>,
    pub a: f64,
}

impl LassoCone {
    pub fn slack(&self, v: &[f64]) -> f64 {
        let (mut on, mut off) = (0.0, 0.0);
        for (x, &s) in v.iter().zip(&self.support) {
            if s {
                on += x.abs();
            } else {
                off += x.abs();
            }
        }
        (1.0 + self.a) / (1.0 - self.a) * on - off
    }
}

/// Pattern search for `inf f(v)` over a cone, starting from `starts`.
/// `f` receives `v` and `Gv`.
fn minimize_over_cone(
    gram: &[f64],
    p: usize,
    starts: Vec<Vec<f64>>,
    slack: &dyn Fn(&[f64]) -> f64,
    f: &dyn Fn(&[f64], &[f64]) -> f64,
    sweeps: usize,
) -> (f64, Vec<f64>) {
    let mut best = (f64::INFINITY, Vec::new());
    for mut v in starts {
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 || slack(&v) < 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= scale);
        let mut gv: Vec<f64> = (0..p).map(|i| (0..p).map(|j| gram[i * p + j] * v[j]).sum()).collect();
        let mut cur = f(&v, &gv);
        let mut step = 0.25;
        for _ in 0..sweeps {
            let mut improved = false;
            for j in 0..p {
                for dir in [1.0, -1.0] {
                    let d = dir * step;
                    v[j] += d;
                    if slack(&v) >= 0.0 {
                        for i in 0..p {
                            gv[i] += d * gram[i * p + j];
                        }
                        let val = f(&v, &gv);
                        if val < cur {
                            cur = val;
                            improved = true;
                            break;
                        }
                        for i in 0..p {
                            gv[i] -= d * gram[i * p + j];
                        }
                    }
                    v[j] -= d;
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-7 {
                    break;
                }
            }
        }
        if cur < best.0 {
            best = (cur, v);
        }
    }
    best
}

fn random_member(
    rng: &mut impl Rng,
    p: usize,
    on: &[bool],
    slack: &dyn Fn(&[f64]) -> f64,
) -> Option<Vec<f64>> {
    let base: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let mut t: f64 = rng.gen_range(0.0..1.0);
    for _ in 0..60 {
        let v: Vec<f64> = base
            .iter()
            .zip(on)
            .map(|(&x, &s)| if s { x } else { x * t })
            .collect();
        if slack(&v) >= 0.0 {
            return Some(v);
        }
        t *= 0.5;
    }
    None
}

/// Upper estimate of `ζ_{a,W}` with the minimizing direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CifEstimate {
    pub zeta_upper: f64,
    pub direction: Vec<f64>,
    pub restarts: usize,
}

/// `min |W⁻¹XᵀXv|∞ / |v|∞` over sampled and refined members of the cone.
/// Single-coordinate directions on the support are always tried.
pub fn cif_estimate(gram: &[f64], cone: &GroupCone, budget: usize, seed: u64, sweeps: usize) -> CifEstimate {
    let p = cone.weights.len();
    let w = &cone.weights;
    let slack = |v: &[f64]| cone.slack(v);
    let f = |v: &[f64], gv: &[f64]| {
        let num = gv.iter().zip(w).fold(0.0f64, |m, (g, w)| m.max((g / w).abs()));
        num / v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    };
    let on_cols = cone.support_columns();
    let mut on = vec![false; p];
    for &c in &on_cols {
        on[c] = true;
    }
    // coordinate directions are exact cone members; score them without search
    let mut best = (f64::INFINITY, Vec::new());
    for &c in &on_cols {
        let mut v = vec![0.0; p];
        v[c] = 1.0;
        let gv: Vec<f64> = (0..p).map(|i| gram[i * p + c]).collect();
        let val = f(&v, &gv);
        if val < best.0 {
            best = (val, v);
        }
    }
    let mut rng = stream(seed, &[purpose::CONE]);
    let mut starts = Vec::with_capacity(budget);
    if !best.1.is_empty() {
        starts.push(best.1.clone());
    }
    while starts.len() < budget {
        match random_member(&mut rng, p, &on, &slack) {
            Some(v) => starts.push(v),
            None => break,
        }
    }
    let restarts = starts.len();
    let refined = minimize_over_cone(gram, p, starts, &slack, &f, sweeps);
    if refined.0 < best.0 {
        best = refined;
    }
    CifEstimate {
        zeta_upper: best.0,
        direction: best.1,
        restarts,
    }
}

/// Sampled upper estimates of the ungrouped cone constants and the error
/// radii they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants {
    pub restricted_eigenvalue: f64,
    pub compatibility: f64,
    pub zeta_inf: f64,
    /// `2(1+a)|T|λ / ((1−a)K_a)`, the `ℓ₁` radius.
    pub r1: f64,
    /// `(1+a)|T|^{1/2}λ / RE_a`, the `ℓ₂` radius.
    pub r2: f64,
    /// `(1+a)λ / ζ_{a,∞}`, the `ℓ∞` radius.
    pub r3: f64,
}

pub fn cone_constants(
    gram: &[f64],
    cone: &LassoCone,
    lambda: f64,
    budget: usize,
    seed: u64,
    sweeps: usize,
) -> ConeConstants {
    let p = cone.support.len();
    let t = cone.support.iter().filter(|&&s| s).count() as f64;
    let slack = |v: &[f64]| cone.slack(v);
    let on = cone.support.clone();
    let mut rng = stream(seed, &[purpose::CONE, 1]);
    let mut starts: Vec<Vec<f64>> = vec![on.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect()];
    for c in (0..p).filter(|&c| on[c]) {
        let mut e = vec![0.0; p];
        e[c] = 1.0;
        starts.push(e);
    }
    while starts.len() < budget {
        match random_member(&mut rng, p, &on, &slack) {
            Some(v) => starts.push(v),
            None => break,
        }
    }
    let quad = |v: &[f64], gv: &[f64]| v.iter().zip(gv).map(|(a, b)| a * b).sum::<f64>();
    let re = |v: &[f64], gv: &[f64]| quad(v, gv) / v.iter().map(|x| x * x).sum::<f64>();
    let on_ref = &on;
    let k = move |v: &[f64], gv: &[f64]| {
        let l1: f64 = v.iter().zip(on_ref).filter(|(_, &s)| s).map(|(x, _)| x.abs()).sum();
        t * quad(v, gv) / (l1 * l1)
    };
    let z = |v: &[f64], gv: &[f64]| {
        gv.iter().fold(0.0f64, |m, x| m.max(x.abs())) / v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    };
    let (re_v, _) = minimize_over_cone(gram, p, starts.clone(), &slack, &re, sweeps);
    let (k_v, _) = minimize_over_cone(gram, p, starts.clone(), &slack, &k, sweeps);
    let (z_v, _) = minimize_over_cone(gram, p, starts, &slack, &z, sweeps);
    let a = cone.a;
    ConeConstants {
        restricted_eigenvalue: re_v,
        compatibility: k_v,
        zeta_inf: z_v,
        r1: 2.0 * (1.0 + a) * t * lambda / ((1.0 - a) * k_v),
        r2: (1.0 + a) * t.sqrt() * lambda / re_v,
        r3: (1.0 + a) * lambda / z_v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(p: usize) -> Vec<f64> {
        let mut g = vec![0.0; p * p];
        for i in 0..p {
            g[i * p + i] = 1.0;
        }
        g
    }

    #[test]
    fn identity_design_has_unit_cif() {
        let p = 6;
        let cone = GroupCone {
            weights: vec![1.0; p],
            groups: (0..3).map(|k| 2 * k..2 * k + 2).collect(),
            support: vec![true, false, false],
            a: 0.3,
        };
        let est = cif_estimate(&identity(p), &cone, 50, 1, 50);
        assert!(est.zeta_upper <= 1.0 + 1e-12);
        assert!(est.zeta_upper >= 1.0 - 1e-12);
        assert!(cone.contains(&est.direction));
    }

    #[test]
    fn random_members_satisfy_the_cone() {
        let p = 8;
        let cone = GroupCone {
            weights: (0..p).map(|i| 1.0 + i as f64 * 0.1).collect(),
            groups: vec![0..3, 3..5, 5..8],
            support: vec![false, true, false],
            a: 0.5,
        };
        let mut rng = stream(5, &[1]);
        let on: Vec<bool> = (0..p).map(|c| (3..5).contains(&c)).collect();
        for _ in 0..200 {
            let v = random_member(&mut rng, p, &on, &|v| cone.slack(v)).unwrap();
            assert!(cone.contains(&v));
        }
    }

    #[test]
    fn cone_constants_on_identity() {
        for t in [2usize, 5, 10] {
            let p = 2 * t + 3;
            let support: Vec<bool> = (0..p).map(|i| i < t).collect();
            let cone = LassoCone { support, a: 0.5 };
            let c = cone_constants(&identity(p), &cone, 1.0, 20, 3, 40);
            assert!((c.compatibility - 1.0).abs() < 1e-9);
            assert!((c.zeta_inf - 1.0).abs() < 1e-9);
            assert!(c.r1 > t as f64 * c.r3);
        }
    }
}
