//! Return probabilities of the one-dimensional lazy walk `Z_n(x)`.
//!
//! `Z_n(x)` stays put with probability `x` and moves `±1` with probability
//! `(1−x)/2` each. Conditioning on the number `j` of lazy steps,
//! `F_n(x) = Σ_j g_j(x) a_{n−j}` with `g_j(x) = C(n,j) x^j (1−x)^{n−j}` and
//! `a_k = C(k, k/2)/2^k` for even `k` (zero for odd `k`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::CompensatedSum;
use crate::walk::stirling::ln_factorial;

/// Above this `n` the binomials are evaluated in the log domain.
const LOG_DOMAIN_FROM: usize = 500;

/// Violations smaller than this are float noise.
pub const MONOTONE_TOL: f64 = 1e-14;

/// `F_n(x) = ℚ(Z_n(x) = 0)`.
pub fn lazy_return_prob(x: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("laziness x = {x} outside [0, 1]")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    if n > LOG_DOMAIN_FROM {
        return Ok(lazy_return_prob_log(x, n));
    }
    // a_k for k = 0..=n, via a_k = a_{k−2} (k−1)/k.
    let mut central = vec![0.0; n + 1];
    central[0] = 1.0;
    for k in (2..=n).step_by(2) {
        central[k] = central[k - 2] * (k - 1) as f64 / k as f64;
    }
    let mut acc = CompensatedSum::new();
    let mut binom = 1.0f64;
    for j in 0..=n {
        if j > 0 {
            binom = binom * (n - j + 1) as f64 / j as f64;
        }
        if (n - j) % 2 == 0 {
            acc.add(binom * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32) * central[n - j]);
        }
    }
    Ok(acc.value())
}

fn lazy_return_prob_log(x: f64, n: usize) -> f64 {
    let ln_x = x.ln();
    let ln_y = (1.0 - x).ln();
    let ln_fact: Vec<f64> = {
        let mut t = vec![0.0; n + 1];
        for k in 2..=n {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    };
    debug_assert!((ln_fact[n] - ln_factorial(n)).abs() < 1e-6 * ln_fact[n].max(1.0));
    let mut acc = CompensatedSum::new();
    for j in 0..=n {
        let k = n - j;
        if k % 2 == 1 {
            continue;
        }
        let ln_g = ln_fact[n] - ln_fact[j] - ln_fact[k]
            + if j == 0 { 0.0 } else { j as f64 * ln_x }
            + if k == 0 { 0.0 } else { k as f64 * ln_y };
        let ln_a = ln_fact[k] - 2.0 * ln_fact[k / 2] - k as f64 * std::f64::consts::LN_2;
        let term = (ln_g + ln_a).exp();
        if term.is_finite() {
            acc.add(term);
        }
    }
    acc.value()
}

/// Table `F_1(x), …, F_N(x)` at fixed `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LazyWalkTable {
    pub x: f64,
    pub values: Vec<f64>,
}

impl LazyWalkTable {
    pub fn new(x: f64, n_max: usize) -> Result<Self> {
        let values = (1..=n_max).map(|n| lazy_return_prob(x, n)).collect::<Result<_>>()?;
        Ok(Self { x, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneViolation {
    pub n: usize,
    pub x_low: f64,
    pub x_high: f64,
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub n_max: usize,
    pub grid: Vec<f64>,
    pub violations: Vec<MonotoneViolation>,
}

impl MonotoneReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The grid `{1/2, 1/2 + step, …}` capped at and including 1.
pub fn half_to_one_grid(step: f64) -> Result<Vec<f64>> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::Domain(format!("grid step must be positive, got {step}")));
    }
    let count = (0.5 / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| 0.5 + k as f64 * step).map(|x| x.min(1.0)).collect();
    if *grid.last().unwrap() < 1.0 {
        grid.push(1.0);
    }
    Ok(grid)
}

/// Scans `F_n` on the grid over `[1/2, 1]` for adjacent decreases.
pub fn check_fn_monotone(n_max: usize, grid_step: f64) -> Result<MonotoneReport> {
    let grid = half_to_one_grid(grid_step)?;
    let mut violations = Vec::new();
    for n in 1..=n_max {
        let values: Vec<f64> = grid.iter().map(|&x| lazy_return_prob(x, n)).collect::<Result<_>>()?;
        for (w, xs) in values.windows(2).zip(grid.windows(2)) {
            if w[0] - w[1] > MONOTONE_TOL {
                violations.push(MonotoneViolation {
                    n,
                    x_low: xs[0],
                    x_high: xs[1],
                    drop: w[0] - w[1],
                });
            }
        }
    }
    Ok(MonotoneReport {
        n_max,
        grid,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumerates all 3ⁿ step sequences of the lazy walk.
    fn enumerate(x: f64, n: usize) -> f64 {
        let mut total = 0.0;
        for code in 0..3usize.pow(n as u32) {
            let (mut c, mut pos, mut w) = (code, 0i64, 1.0);
            for _ in 0..n {
                match c % 3 {
                    0 => w *= x,
                    1 => {
                        pos += 1;
                        w *= (1.0 - x) / 2.0
                    }
                    _ => {
                        pos -= 1;
                        w *= (1.0 - x) / 2.0
                    }
                }
                c /= 3;
            }
            if pos == 0 {
                total += w;
            }
        }
        total
    }

    #[test]
    fn small_cases() {
        for x in [0.0, 0.3, 0.5, 0.77, 1.0] {
            assert!((lazy_return_prob(x, 1).unwrap() - x).abs() < 1e-15);
        }
        for n in [1, 2, 7, 40, 600] {
            assert!((lazy_return_prob(1.0, n).unwrap() - 1.0).abs() < 1e-12, "n={n}");
        }
        assert_eq!(lazy_return_prob(0.5, 2).unwrap(), 0.375);
        assert!(lazy_return_prob(1.5, 2).is_err());
    }

    #[test]
    fn matches_enumeration() {
        for n in 1..=8 {
            for x in [0.1, 0.5, 0.62, 0.9] {
                let a = lazy_return_prob(x, n).unwrap();
                let b = enumerate(x, n);
                assert!((a - b).abs() < 1e-14, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn log_domain_agrees_with_direct() {
        for x in [0.5, 0.7, 0.95] {
            let direct = lazy_return_prob(x, 500).unwrap();
            let logd = lazy_return_prob_log(x, 500);
            assert!((direct - logd).abs() < 1e-10 * direct.max(1e-300), "x={x}: {direct} vs {logd}");
        }
        let big = lazy_return_prob(0.6, 2000).unwrap();
        assert!(big > 0.0 && big < 1.0);
    }

    #[test]
    fn monotone_on_upper_half() {
        let rep = check_fn_monotone(50, 0.01).unwrap();
        assert!(rep.holds(), "{:?}", rep.violations.first());
        assert_eq!(rep.grid.len(), 51);
        assert_eq!(*rep.grid.last().unwrap(), 1.0);
        // n = 1: F₁(x) = x, strictly increasing.
        let vals: Vec<f64> = rep.grid.iter().map(|&x| lazy_return_prob(x, 1).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn below_half_is_not_monotone_in_general() {
        // F₂(x) = x² + (1−x)²/2 dips below x = 1/3, outside the lemma's domain.
        let f = |x| lazy_return_prob(x, 2).unwrap();
        assert!(f(0.0) > f(0.3));
    }
}
