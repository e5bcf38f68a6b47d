//! Two independent oriented random walks with step law `q`.
//!
//! `c_n(q) = ℚ(S¹ₙ = S²ₙ) = Σ_l multinomial(n; l)² Π q_i^{2 l_i}` is computed
//! by merging coordinates one at a time: if `q = (q', q_k)` with
//! `r = |q'| / (|q'| + q_k)` then
//! `c_n(q) = Σ_s Bin(n, s; r)² · c_s(q'/|q'|)`,
//! since both walks must spend the same number `s` of steps in the first
//! block. The float path builds each binomial row by the Pascal recurrence so
//! nothing overflows; the exact path multiplies the per-coordinate series
//! `Σ_l q_i^{2l} z^l / (l!)²` and rescales by `(n!)²`.

pub mod lazy;
pub mod stirling;

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{CompensatedSum, ProbVector};

pub use lazy::{check_fn_monotone, lazy_return_prob, LazyWalkTable, MonotoneReport};
pub use stirling::{lambda_qstar_bound, max_multinomial, stirling_bounds, MaxMultinomial, QStarBound};

/// Clamping window for renewal-inverted meeting probabilities.
pub const TAU_TOL: f64 = 1e-12;
/// Membership tolerance for `max q_i ≤ 1/m`.
pub const CAP_TOL: f64 = 1e-12;

fn require_probability(q: &ProbVector) -> Result<()> {
    if q.is_probability() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{q} is not a probability vector")))
    }
}

/// `c_0 = 1, c_1, …, c_{n_max}`.
pub fn collision_series(q: &ProbVector, n_max: usize) -> Result<Vec<f64>> {
    require_probability(q)?;
    Ok(collision_series_weights(&q.positive_entries(), n_max))
}

/// Same as [`collision_series`] for positive weights, normalizing on the fly.
pub(crate) fn collision_series_weights(weights: &[f64], n_max: usize) -> Vec<f64> {
    let mut series = vec![1.0; n_max + 1];
    let Some((&first, rest)) = weights.split_first() else {
        return series;
    };
    let mut mass = first;
    let mut row = Vec::with_capacity(n_max + 1);
    let mut next = vec![0.0; n_max + 1];
    for &w in rest {
        let total = mass + w;
        let (r, s) = (mass / total, w / total);
        row.clear();
        row.push(1.0);
        next[0] = 1.0;
        for n in 1..=n_max {
            row.push(0.0);
            for k in (1..=n).rev() {
                row[k] = row[k] * s + row[k - 1] * r;
            }
            row[0] *= s;
            next[n] = row
                .iter()
                .zip(&series)
                .map(|(b, c)| b * b * c)
                .collect::<CompensatedSum>()
                .value();
        }
        std::mem::swap(&mut series, &mut next);
        mass = total;
    }
    series
}

/// `c_n(q)` for a single `n ≥ 1`.
pub fn collision_prob(q: &ProbVector, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("collision step must be at least 1".into()));
    }
    Ok(collision_series(q, n)?[n])
}

/// Exact `c_0, …, c_{n_max}` as `(n!)² [zⁿ] Π_i Σ_l q_i^{2l} zˡ/(l!)²`.
pub fn collision_series_exact(q: &[BigRational], n_max: usize) -> Result<Vec<BigRational>> {
    let total: BigRational = q.iter().sum();
    if !total.is_one() {
        return Err(Error::Domain("exact collision series needs a probability vector".into()));
    }
    let inv_fact_sq: Vec<BigRational> = {
        let mut f = BigInt::one();
        (0..=n_max)
            .map(|l| {
                if l > 0 {
                    f *= BigInt::from(l);
                }
                BigRational::new(BigInt::one(), &f * &f)
            })
            .collect()
    };
    let mut poly = vec![BigRational::zero(); n_max + 1];
    poly[0] = BigRational::one();
    for qi in q.iter().filter(|x| !x.is_zero()) {
        let q2 = qi * qi;
        let mut pow = BigRational::one();
        let factor: Vec<BigRational> = (0..=n_max)
            .map(|l| {
                if l > 0 {
                    pow *= &q2;
                }
                &pow * &inv_fact_sq[l]
            })
            .collect();
        let mut prod = vec![BigRational::zero(); n_max + 1];
        for (i, a) in poly.iter().enumerate().filter(|(_, a)| !a.is_zero()) {
            for (j, b) in factor.iter().enumerate().take(n_max + 1 - i) {
                prod[i + j] += a * b;
            }
        }
        poly = prod;
    }
    Ok(poly
        .into_iter()
        .zip(inv_fact_sq)
        .map(|(coef, inv)| coef / inv)
        .collect())
}

/// First-meeting probabilities `ℚ(τ = 1), …, ℚ(τ = M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingDistribution {
    pub q: ProbVector,
    pub probs: Vec<f64>,
}

impl MeetingDistribution {
    pub fn truncation(&self) -> usize {
        self.probs.len()
    }

    pub fn to_csv(&self) -> String {
        series_csv(&self.probs)
    }
}

/// Inverts the renewal equation
/// `c_m = Σ_{n ≤ m} ℚ(τ = n) c_{m−n}` for `m = 1, …, M`.
pub fn tau_dist(q: &ProbVector, max_m: usize) -> Result<MeetingDistribution> {
    if max_m == 0 {
        return Err(Error::Domain("truncation M must be at least 1".into()));
    }
    let c = collision_series(q, max_m)?;
    let mut probs: Vec<f64> = Vec::with_capacity(max_m);
    for m in 1..=max_m {
        let mut acc = CompensatedSum::new();
        acc.add(c[m]);
        for (n, t) in probs.iter().enumerate() {
            acc.add(-t * c[m - n - 1]);
        }
        let value = acc.value();
        if !(-TAU_TOL..=1.0 + TAU_TOL).contains(&value) {
            return Err(Error::NumericalInstability(format!(
                "Q(tau = {m}) = {value} left [0, 1] beyond {TAU_TOL}"
            )));
        }
        probs.push(value.clamp(0.0, 1.0));
    }
    Ok(MeetingDistribution { q: q.clone(), probs })
}

/// Exact `ℚ(τ = 1), …, ℚ(τ = M)` for rational `q`.
pub fn tau_dist_exact(q: &[BigRational], max_m: usize) -> Result<Vec<BigRational>> {
    let c = collision_series_exact(q, max_m)?;
    let mut probs: Vec<BigRational> = Vec::with_capacity(max_m);
    for m in 1..=max_m {
        let mut value = c[m].clone();
        for (n, t) in probs.iter().enumerate() {
            value -= t * &c[m - n - 1];
        }
        probs.push(value);
    }
    Ok(probs)
}

/// Rebuilds `c_1, …, c_M` from a meeting distribution.
pub fn reconvolve(tau: &[f64], c: &[f64]) -> Vec<f64> {
    (1..=tau.len())
        .map(|m| {
            (1..=m)
                .map(|n| tau[n - 1] * c[m - n])
                .collect::<CompensatedSum>()
                .value()
        })
        .collect()
}

/// Upper bound on the discarded terms of a truncated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    Finite(f64),
    Unbounded,
}

impl TailBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            TailBound::Finite(v) => Some(*v),
            TailBound::Unbounded => None,
        }
    }
}

impl Serialize for TailBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TailBound::Finite(v) => s.serialize_f64(*v),
            TailBound::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for TailBound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(TailBound::Finite(v)),
            Raw::Str(s) if s == "unbounded" => Ok(TailBound::Unbounded),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unknown tail bound `{s}`"))),
        }
    }
}

/// Truncated `λ(q) = Σ c_n(q)` with an optional certified remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionSeries {
    pub q: ProbVector,
    /// `c_1, …, c_N`.
    pub terms: Vec<f64>,
    pub truncation: usize,
    pub tail_bound: TailBound,
    /// `m` behind the tail certificate; 0 when there is none.
    pub m_param: usize,
}

impl CollisionSeries {
    pub fn partial_sum(&self) -> f64 {
        self.terms.iter().copied().collect::<CompensatedSum>().value()
    }

    /// Rigorous upper estimate of `λ(q)`: partial sum, a rounding allowance
    /// for the float series, and the tail bound.
    pub fn upper_estimate(&self) -> Option<f64> {
        let partial = self.partial_sum();
        let rounding = 4.0 * self.truncation as f64 * f64::EPSILON * partial;
        self.tail_bound.value().map(|t| partial + rounding + t)
    }

    pub fn to_csv(&self) -> String {
        series_csv(&self.terms)
    }
}

fn series_csv(values: &[f64]) -> String {
    let mut out = String::from("n,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

/// Whether `max q_i ≤ 1/m` (exactly when `q` is exact).
pub fn capped_by(q: &ProbVector, m: usize) -> bool {
    if m == 0 {
        return false;
    }
    match q.exact() {
        Some(exact) => {
            let cap = BigRational::new(BigInt::one(), BigInt::from(m));
            exact.iter().all(|x| x <= &cap)
        }
        None => q.max_entry() <= 1.0 / m as f64 + CAP_TOL,
    }
}

/// `c_1, …, c_N`; the remainder is certified when `m ≥ 4` and `max q_i ≤ 1/m`,
/// via `c_n(q) ≤ c_n(q*_m) ≤ max-multinomial(n, m)/mⁿ`.
pub fn lambda_truncated(q: &ProbVector, truncation: usize, m: usize) -> Result<CollisionSeries> {
    if truncation == 0 {
        return Err(Error::Domain("truncation N must be at least 1".into()));
    }
    let series = collision_series(q, truncation)?;
    let certified = m >= 4 && capped_by(q, m);
    let tail_bound = if certified {
        TailBound::Finite(stirling::certified_tail(truncation, m))
    } else {
        TailBound::Unbounded
    };
    Ok(CollisionSeries {
        q: q.clone(),
        terms: series[1..].to_vec(),
        truncation,
        tail_bound,
        m_param: if certified { m } else { 0 },
    })
}

/// Both sides of the two-block projection identity at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub n: usize,
    pub left: f64,
    pub right: f64,
    pub abs_diff: f64,
    /// One block carries no mass; both sides coincide trivially.
    pub degenerate: bool,
}

/// `c_n(q)` against `Σ_{j+k=n} C(n,j)² a^{2j} b^{2k} c_j(q₁,q₂) c_k(q₃,…,q_d)`
/// with `a = q₁+q₂`, `b = q₃+⋯+q_d` and both blocks normalized.
pub fn projection_check(q: &ProbVector, n: usize) -> Result<ProjectionReport> {
    if q.dim() < 3 {
        return Err(Error::Domain(format!("projection needs d >= 3, got d = {}", q.dim())));
    }
    let left = collision_prob(q, n)?;
    let head = &q.entries()[..2];
    let rest = &q.entries()[2..];
    let a: f64 = head.iter().sum();
    let b = rest.iter().copied().collect::<CompensatedSum>().value();
    if a == 0.0 || b == 0.0 {
        return Ok(ProjectionReport {
            n,
            left,
            right: left,
            abs_diff: 0.0,
            degenerate: true,
        });
    }
    let c_head = collision_series(&ProbVector::new(head.to_vec())?.normalize()?, n)?;
    let c_rest = collision_series(&ProbVector::new(rest.to_vec())?.normalize()?, n)?;
    let (ln_a, ln_b) = (a.ln(), b.ln());
    let mut ln_binom = 0.0f64;
    let mut acc = CompensatedSum::new();
    for j in 0..=n {
        let k = n - j;
        if j > 0 {
            ln_binom += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        let ln_w = ln_binom + j as f64 * ln_a + k as f64 * ln_b;
        acc.add((2.0 * ln_w).exp() * c_head[j] * c_rest[k]);
    }
    let right = acc.value();
    Ok(ProjectionReport {
        n,
        left,
        right,
        abs_diff: (left - right).abs(),
        degenerate: false,
    })
}
