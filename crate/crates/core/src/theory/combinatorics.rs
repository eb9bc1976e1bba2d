//! Stirling numbers of the second kind, Bell numbers, Touchard polynomials
//! and the Poisson moment bounds built on them.

use thiserror::Error;

/// Largest `n` evaluated in exact integer arithmetic.
pub const EXACT_MAX_N: u32 = 25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("n = {n} is outside the exact range (n <= {EXACT_MAX_N})")]
pub struct Overflow {
    pub n: u32,
}

fn stirling_row(n: u32) -> Result<Vec<u128>, Overflow> {
    if n > EXACT_MAX_N {
        return Err(Overflow { n });
    }
    let mut row = vec![1u128];
    for m in 1..=n as usize {
        let mut next = vec![0u128; m + 1];
        for k in 1..=m {
            let keep = if k < m { k as u128 * row[k] } else { 0 };
            next[k] = keep + row[k - 1];
        }
        row = next;
    }
    Ok(row)
}

/// `{n k}`: partitions of an `n`-set into `k` non-empty blocks.
pub fn stirling2(n: u32, k: u32) -> Result<u128, Overflow> {
    let row = stirling_row(n)?;
    Ok(row.get(k as usize).copied().unwrap_or(0))
}

/// Number of set partitions of an `n`-set.
pub fn bell(n: u32) -> Result<u128, Overflow> {
    Ok(stirling_row(n)?.iter().sum())
}

/// `T_n(x) = Σ_k {n k} x^k`, the `n`-th moment of a Poisson(`x`) variable.
/// Exact coefficients up to [`EXACT_MAX_N`], log-space Stirling numbers
/// beyond.
pub fn touchard(n: u32, x: f64) -> f64 {
    log_touchard(n, x).exp()
}

/// `ln T_n(x)` for `x > 0`.
pub fn log_touchard(n: u32, x: f64) -> f64 {
    let lx = x.ln();
    let logs: Vec<f64> = match stirling_row(n) {
        Ok(row) => row
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(k, &s)| (s as f64).ln() + k as f64 * lx)
            .collect(),
        Err(_) => log_stirling_row(n)
            .into_iter()
            .enumerate()
            .filter(|(_, s)| s.is_finite())
            .map(|(k, s)| s + k as f64 * lx)
            .collect(),
    };
    log_sum_exp(&logs)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

fn log_stirling_row(n: u32) -> Vec<f64> {
    let mut row = vec![0.0f64];
    for m in 1..=n as usize {
        let mut next = vec![f64::NEG_INFINITY; m + 1];
        for k in 1..=m {
            let a = if k < m { (k as f64).ln() + row[k] } else { f64::NEG_INFINITY };
            next[k] = log_sum_exp(&[a, row[k - 1]]);
        }
        row = next;
    }
    row
}

/// `E[(K/x)^n]` for `K ~ Poisson(x)` next to its two upper bounds
/// `((n/x)/ln(1+n/x))^n ≤ exp(n²/(2x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonMomentBound {
    pub exact: f64,
    pub bound1: f64,
    pub bound2: f64,
}

impl PoissonMomentBound {
    pub fn chain_holds(&self) -> bool {
        let slack = 1e-12;
        self.exact <= self.bound1 * (1.0 + slack) && self.bound1 <= self.bound2 * (1.0 + slack)
    }
}

pub fn poisson_moment_bound(n: u32, x: f64) -> PoissonMomentBound {
    if n == 0 {
        return PoissonMomentBound {
            exact: 1.0,
            bound1: 1.0,
            bound2: 1.0,
        };
    }
    let nf = n as f64;
    let exact = (log_touchard(n, x) - nf * x.ln()).exp();
    let t = nf / x;
    let bound1 = (nf * (t / t.ln_1p()).ln()).exp();
    let bound2 = (nf * nf / (2.0 * x)).exp();
    PoissonMomentBound {
        exact,
        bound1,
        bound2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(bell(0).unwrap(), 1);
        assert_eq!(bell(6).unwrap(), 203);
        assert_eq!(bell(25).unwrap(), 4_638_590_332_229_999_353);
        assert_eq!(stirling2(5, 2).unwrap(), 15);
        assert_eq!(stirling2(3, 5).unwrap(), 0);
        assert!(bell(26).is_err());
    }

    #[test]
    fn touchard_at_one_is_bell() {
        for n in 0..=12 {
            let b = bell(n).unwrap() as f64;
            assert!((touchard(n, 1.0) - b).abs() <= 1e-9 * b);
        }
        assert!((touchard(3, 2.0) - (2.0 + 3.0 * 4.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn log_space_matches_exact_at_the_boundary() {
        let exact = log_touchard(EXACT_MAX_N, 3.0);
        let row = log_stirling_row(EXACT_MAX_N);
        let logs: Vec<f64> = row.iter().enumerate().map(|(k, s)| s + k as f64 * 3f64.ln()).collect();
        assert!((exact - log_sum_exp(&logs)).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn moment_bounds_trivial_cases() {
        let b = poisson_moment_bound(1, 3.0);
        assert!((b.exact - 1.0).abs() < 1e-12);
        assert!(b.bound1 >= 1.0 && b.chain_holds());
    }
}
