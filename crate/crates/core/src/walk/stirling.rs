//! Multinomial maxima, Stirling bounds and the packed-vector bound chain.

use std::f64::consts::{E, PI};

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Brute force is attempted only up to this many compositions.
pub const MAX_BRUTE_COMPOSITIONS: u128 = 10_000_000;

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

/// `ln n!` by direct summation.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn binomial_u128(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Largest multinomial coefficient `(n; l₁,…,l_m)` over `l₁+⋯+l_m = n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMultinomial {
    pub n: usize,
    pub m: usize,
    /// Brute-force maximum, absent when the composition count is too large.
    pub exact: Option<BigUint>,
    /// `(jm+ℓ)! / ([(j+1)!]^ℓ (j!)^{m−ℓ})` with `n = jm + ℓ`.
    pub closed_form: BigUint,
}

pub fn max_multinomial(n: usize, m: usize) -> Result<MaxMultinomial> {
    if n == 0 || m == 0 {
        return Err(Error::Domain(format!("need n >= 1 and m >= 1, got n={n}, m={m}")));
    }
    let count = binomial_u128((n + m - 1) as u128, (m - 1) as u128);
    let exact = match count {
        Some(c) if c <= MAX_BRUTE_COMPOSITIONS => Some(brute_force_max(n, m)),
        _ => None,
    };
    Ok(MaxMultinomial {
        n,
        m,
        exact,
        closed_form: balanced_multinomial(n, m),
    })
}

/// The multinomial at the balanced composition.
pub fn balanced_multinomial(n: usize, m: usize) -> BigUint {
    let (j, l) = (n / m, n % m);
    let denom = factorial(j + 1).pow(l as u32) * factorial(j).pow((m - l) as u32);
    factorial(n) / denom
}

/// Minimizes `Π l_i!` over all compositions, then divides `n!` by it.
fn brute_force_max(n: usize, m: usize) -> BigUint {
    let facts: Vec<BigUint> = (0..=n).map(factorial).collect();
    let mut best: Option<BigUint> = None;
    let mut parts = vec![0usize; m];
    visit_compositions(n, 0, &mut parts, &mut |parts| {
        let denom = parts.iter().fold(BigUint::one(), |acc, &l| acc * &facts[l]);
        if best.as_ref().is_none_or(|b| &denom < b) {
            best = Some(denom);
        }
    });
    &facts[n] / best.expect("at least one composition")
}

fn visit_compositions(remaining: usize, slot: usize, parts: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if slot + 1 == parts.len() {
        parts[slot] = remaining;
        f(parts);
        return;
    }
    for take in 0..=remaining {
        parts[slot] = take;
        visit_compositions(remaining - take, slot + 1, parts, f);
    }
}

/// `(√(2πn)(n/e)ⁿ, √(2πn)(n/e)ⁿ e^{1/(12n)})`, bracketing `n!`.
pub fn stirling_bounds(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Domain("Stirling bounds need n >= 1".into()));
    }
    let nf = n as f64;
    let ln_lower = 0.5 * (2.0 * PI * nf).ln() + nf * (nf.ln() - 1.0);
    Ok((ln_lower.exp(), (ln_lower + 1.0 / (12.0 * nf)).exp()))
}

/// The pieces of the packed-vector bound `λ(q*) ≤ head + tail_factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QStarBound {
    pub m: usize,
    /// `1/m + 8/m²`, covering `n ≤ m`.
    pub head: f64,
    /// `e^{1/(12m)} m √m / (√(2π))^{m−1} · (1 + 2/(m−3))`, covering `n > m`.
    pub tail_factor: f64,
    pub total: f64,
    /// `10/m`.
    pub target: f64,
}

pub fn lambda_qstar_bound(m: usize) -> Result<QStarBound> {
    if m <= 3 {
        return Err(Error::Domain(format!(
            "m = {m}: for m <= 3 the collision series of q* diverges (lambda(q*) = infinity)"
        )));
    }
    let mf = m as f64;
    let head = 1.0 / mf + 8.0 / (mf * mf);
    let tail_factor = (1.0 / (12.0 * mf)).exp() * mf * mf.sqrt() / (2.0 * PI).sqrt().powi(m as i32 - 1)
        * (1.0 + 2.0 / (mf - 3.0));
    let total = head + tail_factor;
    let target = 10.0 / mf;
    if total > target {
        return Err(Error::Invariant(format!(
            "packed-vector bound {total} exceeds 10/m = {target} at m = {m}"
        )));
    }
    Ok(QStarBound {
        m,
        head,
        tail_factor,
        total,
        target,
    })
}

/// Upper bound on `Σ_{n>N} c_n(q*_m)` using `c_n ≤ max-multinomial(n,m)/mⁿ`.
///
/// Terms with `n < m` are summed from the closed form; each block
/// `n = jm, …, jm+m−1` with `j ≥ J` is bounded through the upper Stirling
/// factor and the blocks are summed with an integral bound. Requires `m ≥ 4`.
pub fn certified_tail(truncation: usize, m: usize) -> f64 {
    debug_assert!(m >= 4);
    let mf = m as f64;
    let first_block = ((truncation + 1) / m).max(1);
    let mut explicit = 0.0;
    for n in truncation + 1..first_block * m {
        let ln_term = ln_factorial_ratio_balanced(n, m) - n as f64 * mf.ln();
        explicit += ln_term.exp();
    }
    let s = (mf - 1.0) / 2.0;
    let jf = first_block as f64;
    let block_const =
        mf * E.powf(1.0 / (12.0 * jf * mf)) * mf.sqrt() / (2.0 * PI).powf(s);
    let j_sum = jf.powf(-s) + jf.powf(1.0 - s) / (s - 1.0);
    (explicit + block_const * j_sum) * (1.0 + 1e-12)
}

/// `ln` of the balanced multinomial.
fn ln_factorial_ratio_balanced(n: usize, m: usize) -> f64 {
    let (j, l) = (n / m, n % m);
    ln_factorial(n) - l as f64 * ln_factorial(j + 1) - (m - l) as f64 * ln_factorial(j)
}

/// Per-term Stirling bound `e^{1/(12n)} √m / (2πj)^{(m−1)/2}` on
/// `max-multinomial(n, m)/mⁿ` for `n = jm + ℓ`, `j ≥ 1`.
pub fn stirling_term_bound(n: usize, m: usize) -> Option<f64> {
    let j = n / m;
    if j == 0 {
        return None;
    }
    let mf = m as f64;
    Some((1.0 / (12.0 * n as f64)).exp() * mf.sqrt() / (2.0 * PI * j as f64).powf((mf - 1.0) / 2.0))
}

/// `max-multinomial(n,m)/mⁿ` evaluated from the closed form in floats.
pub fn balanced_ratio(n: usize, m: usize) -> f64 {
    (ln_factorial_ratio_balanced(n, m) - n as f64 * (m as f64).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_multinomial_examples() {
        let r = max_multinomial(5, 3).unwrap();
        assert_eq!(r.exact, Some(BigUint::from(30u32)));
        assert_eq!(r.closed_form, BigUint::from(30u32));
        let r = max_multinomial(4, 4).unwrap();
        assert_eq!(r.exact, Some(BigUint::from(24u32)));
        assert_eq!(r.closed_form, BigUint::from(24u32));
        let r = max_multinomial(6, 3).unwrap();
        assert_eq!(r.exact, Some(BigUint::from(90u32)));
        assert_eq!(r.closed_form, BigUint::from(90u32));
        assert!(max_multinomial(0, 3).is_err());
    }

    #[test]
    fn brute_force_skipped_when_too_large() {
        let r = max_multinomial(200, 12).unwrap();
        assert!(r.exact.is_none());
        assert_eq!(r.closed_form, balanced_multinomial(200, 12));
    }

    #[test]
    fn stirling_examples() {
        let (lo, hi) = stirling_bounds(1).unwrap();
        assert!((lo - 0.922_137_0).abs() < 1e-6, "{lo}");
        assert!((hi - 1.002_274_0).abs() < 1e-6, "{hi}");
        assert!(lo <= 1.0 && 1.0 <= hi);
        let (lo, hi) = stirling_bounds(2).unwrap();
        assert!(lo <= 2.0 && 2.0 <= hi);
        let (lo, hi) = stirling_bounds(10).unwrap();
        assert!(lo <= 3_628_800.0 && 3_628_800.0 <= hi);
    }

    #[test]
    fn qstar_bound_examples() {
        let b = lambda_qstar_bound(4).unwrap();
        assert_eq!(b.head, 0.75);
        // e^{1/48}·8/(2π)^{3/2}·3, evaluated independently.
        let expected_tail = (1.0f64 / 48.0).exp() * 8.0 / (2.0 * PI).powf(1.5) * 3.0;
        assert!((b.tail_factor - expected_tail).abs() < 1e-12);
        assert!((b.tail_factor - 1.5559).abs() < 1e-3, "{}", b.tail_factor);
        assert!((b.total - 2.3059).abs() < 1e-3 && b.total <= 2.5);
        assert!(lambda_qstar_bound(10).unwrap().total <= 1.0);
        assert!(matches!(lambda_qstar_bound(3), Err(Error::Domain(_))));
    }

    #[test]
    fn stirling_term_bound_dominates_closed_form() {
        for m in 4..=9 {
            for n in m..200 {
                let exact = balanced_ratio(n, m);
                let bound = stirling_term_bound(n, m).unwrap();
                assert!(exact <= bound * (1.0 + 1e-12), "n={n} m={m}: {exact} > {bound}");
            }
        }
    }

    #[test]
    fn certified_tail_dominates_direct_sum() {
        // Direct summation of the closed-form terms far past N.
        const LIMIT: usize = 200_000;
        let mut lnf = vec![0.0f64; LIMIT + 1];
        for k in 2..=LIMIT {
            lnf[k] = lnf[k - 1] + (k as f64).ln();
        }
        for m in [4usize, 5, 7] {
            let ratio = |n: usize| {
                let (j, l) = (n / m, n % m);
                (lnf[n] - l as f64 * lnf[j + 1] - (m - l) as f64 * lnf[j] - n as f64 * (m as f64).ln()).exp()
            };
            for n_trunc in [1usize, 3, 10, 50] {
                let direct: f64 = (n_trunc + 1..LIMIT).map(ratio).sum();
                let tail = certified_tail(n_trunc, m);
                assert!(direct <= tail, "m={m} N={n_trunc}: {direct} > {tail}");
            }
        }
    }
}
