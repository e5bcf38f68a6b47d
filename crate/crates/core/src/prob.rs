//! Probability and weight vectors, edge parameters and their scalar statistics.
//!
//! Every vector carries a 64-bit float view and, when it was built from
//! rationals or parsed from text, an exact rational view. Decimal text such as
//! `0.1` parses to the exact fraction `1/10`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the entry sum of a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Sums within this distance of 1 are renormalized instead of rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Parses a decimal (`0.25`, `-3`, `1.5e-3`) or a fraction (`1/3`, `0.5/2`) exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_decimal(num)?;
        let den = parse_decimal(den)?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{text}`")));
        }
        return Ok(num / den);
    }
    parse_decimal(text)
}

fn parse_decimal(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let bad = || Error::Parse(format!("not a decimal number: `{text}`"));
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = text[pos + 1..].parse().map_err(|_| bad())?;
            (&text[..pos], exp)
        }
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if all_digits.is_empty() {
        BigInt::zero()
    } else {
        all_digits.parse().map_err(|_| bad())?
    };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// The exact rational named by the shortest decimal that round-trips to `x`.
///
/// `decimal_rational(0.1)` is `1/10`, not the binary value of the float.
pub fn decimal_rational(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite value {x}")));
    }
    parse_decimal(&format!("{x}"))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `a/b` form (or `a` when the denominator is one).
pub fn rational_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A nonnegative weight vector over `d` lattice directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    entries: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl ProbVector {
    /// Builds a positive vector: entries finite, nonnegative, not all zero.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        validate_floats(&entries)?;
        Ok(Self { entries, exact: None })
    }

    /// Builds a positive vector from exact rationals; the float view is derived.
    pub fn from_rationals(exact: Vec<BigRational>) -> Result<Self> {
        if exact.is_empty() {
            return Err(Error::Domain("vector must have at least one entry".into()));
        }
        if exact.iter().any(|r| r.is_negative()) {
            return Err(Error::Domain("entries must be nonnegative".into()));
        }
        if exact.iter().all(|r| r.is_zero()) {
            return Err(Error::Domain("at least one entry must be positive".into()));
        }
        let entries = exact.iter().map(rational_to_f64).collect();
        Ok(Self {
            entries,
            exact: Some(exact),
        })
    }

    /// Builds a probability vector. Sums within [`RENORMALIZE_TOL`] of one
    /// are renormalized, anything further away is rejected.
    pub fn probability(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries)?.into_probability()
    }

    /// Checks the probability-vector property, renormalizing small drift.
    pub fn into_probability(self) -> Result<Self> {
        if let Some(exact) = &self.exact {
            let total: BigRational = exact.iter().sum();
            if total.is_one() {
                return Ok(self);
            }
        }
        let s = self.sum();
        if (s - 1.0).abs() <= PROB_SUM_TOL && self.exact.is_none() {
            return Ok(self);
        }
        if (s - 1.0).abs() <= RENORMALIZE_TOL {
            return self.normalize();
        }
        Err(Error::Domain(format!(
            "entries sum to {s}, not a probability vector"
        )))
    }

    /// `d` copies of `value`.
    pub fn uniform(d: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; d])
    }

    /// The packed vector with `m` entries `1/m` followed by `d - m` zeros.
    pub fn packed(d: usize, m: usize) -> Result<Self> {
        if m == 0 || m > d {
            return Err(Error::Domain(format!("packed vector needs 1 <= m <= d, got m={m}, d={d}")));
        }
        let mut exact = vec![BigRational::zero(); d];
        for e in exact.iter_mut().take(m) {
            *e = BigRational::new(BigInt::one(), BigInt::from(m));
        }
        Self::from_rationals(exact)
    }

    /// Parses `a,b,c` or the shorthand `k x v` (e.g. `20x0.1`); items of both
    /// forms may be mixed, and fractions are accepted (`1/2,1/3,1/6`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut exact = Vec::new();
        for item in text.split(',') {
            let item = item.trim();
            if item.is_empty() {
                return Err(Error::Parse(format!("empty entry in `{text}`")));
            }
            match item.split_once(['x', 'X']) {
                Some((count, value)) => {
                    let count: usize = count
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad repeat count in `{item}`")))?;
                    let value = parse_rational(value)?;
                    exact.extend(std::iter::repeat_n(value, count));
                }
                None => exact.push(parse_rational(item)?),
            }
        }
        Self::from_rationals(exact)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    /// Exact entries, falling back to the shortest decimal of each float.
    pub fn exact_or_decimal(&self) -> Result<Vec<BigRational>> {
        match &self.exact {
            Some(e) => Ok(e.clone()),
            None => self.entries.iter().map(|&x| decimal_rational(x)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(&self.entries)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_probability(&self) -> bool {
        match &self.exact {
            Some(exact) => exact.iter().sum::<BigRational>().is_one(),
            None => (self.sum() - 1.0).abs() <= PROB_SUM_TOL,
        }
    }

    /// `p_i / sum p_j`, order preserved. Errors on an all-zero vector.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.sum();
        if total <= 0.0 {
            return Err(Error::Domain("cannot normalize an all-zero vector".into()));
        }
        match &self.exact {
            Some(exact) => {
                let t: BigRational = exact.iter().sum();
                Self::from_rationals(exact.iter().map(|e| e / &t).collect())
            }
            None => Self::new(self.entries.iter().map(|&x| x / total).collect()),
        }
    }

    /// Entries in `range`, as a new (unnormalized) vector.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        match &self.exact {
            Some(exact) => Self::from_rationals(exact[range].to_vec()),
            None => Self::new(self.entries[range].to_vec()),
        }
    }

    pub fn positive_entries(&self) -> Vec<f64> {
        self.entries.iter().copied().filter(|&x| x > 0.0).collect()
    }
}

fn validate_floats(entries: &[f64]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::Domain("vector must have at least one entry".into()));
    }
    if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Domain(format!("entries must be finite and nonnegative, got {bad}")));
    }
    if entries.iter().all(|&x| x == 0.0) {
        return Err(Error::Domain("at least one entry must be positive".into()));
    }
    Ok(())
}

impl FromStr for ProbVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for ProbVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = match &self.exact {
            Some(exact) => exact.iter().map(rational_string).collect(),
            None => self.entries.iter().map(|x| x.to_string()).collect(),
        };
        write!(f, "({})", parts.join(", "))
    }
}

impl Serialize for ProbVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<f64>::deserialize(deserializer)?;
        ProbVector::new(entries).map_err(serde::de::Error::custom)
    }
}

/// Per-direction edge-opening probabilities with their derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeParams {
    p: ProbVector,
    mu: f64,
    var_y0: f64,
}

impl EdgeParams {
    /// Every entry must lie in `[0, 1]`.
    pub fn new(p: ProbVector) -> Result<Self> {
        let over_one = match p.exact() {
            Some(exact) => exact.iter().any(|r| r > &BigRational::one()),
            None => p.entries().iter().any(|&x| x > 1.0),
        };
        if over_one {
            return Err(Error::Domain(format!("edge probabilities must lie in [0, 1], got {p}")));
        }
        let mu = p.sum();
        let var_y0 = p
            .entries()
            .iter()
            .map(|&x| x * (1.0 - x))
            .collect::<CompensatedSum>()
            .value();
        Ok(Self { p, mu, var_y0 })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(ProbVector::parse(text)?)
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn var_y0(&self) -> f64 {
        self.var_y0
    }

    /// Exact `mu`, when the entries are exact.
    pub fn mu_exact(&self) -> Option<BigRational> {
        self.p.exact().map(|e| e.iter().sum())
    }

    /// Exact `Var Y_0 = sum p_i (1 - p_i)`, when the entries are exact.
    pub fn var_y0_exact(&self) -> Option<BigRational> {
        self.p
            .exact()
            .map(|e| e.iter().map(|x| x * (BigRational::one() - x)).sum())
    }
}

/// `mu = p_1 + ... + p_d`.
pub fn mu(params: &EdgeParams) -> f64 {
    params.mu()
}

/// `Var Y_0 = sum p_i (1 - p_i)`, the variance of the out-degree of a vertex.
pub fn var_y0(params: &EdgeParams) -> f64 {
    params.var_y0()
}

/// See [`ProbVector::normalize`].
pub fn normalize(p: &ProbVector) -> Result<ProbVector> {
    p.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu(&EdgeParams::parse("20x0.1").unwrap()), 2.0);
        assert!((mu(&EdgeParams::parse("0.5,0.6").unwrap()) - 1.1).abs() < 1e-15);
        assert_eq!(mu(&EdgeParams::parse("1,0,0").unwrap()), 1.0);
    }

    #[test]
    fn var_y0_examples() {
        assert_eq!(var_y0(&EdgeParams::parse("1,1").unwrap()), 0.0);
        assert_eq!(var_y0(&EdgeParams::parse("0.5,0.5").unwrap()), 0.5);
        assert!((var_y0(&EdgeParams::parse("20x0.1").unwrap()) - 1.8).abs() < 1e-14);
        let exact = EdgeParams::parse("20x0.1").unwrap().var_y0_exact().unwrap();
        assert_eq!(exact, r(9, 5));
    }

    #[test]
    fn normalize_examples() {
        let n = ProbVector::new(vec![0.2, 0.2]).unwrap().normalize().unwrap();
        assert_eq!(n.entries(), &[0.5, 0.5]);
        let n = ProbVector::parse("3,1,0").unwrap().normalize().unwrap();
        assert_eq!(n.entries(), &[0.75, 0.25, 0.0]);
        assert!(ProbVector::new(vec![0.0, 0.0]).is_err());
        assert!(ProbVector::parse("0,0").is_err());
    }

    #[test]
    fn parses_shorthand_and_fractions() {
        let v = ProbVector::parse("20x0.1").unwrap();
        assert_eq!(v.dim(), 20);
        assert_eq!(v.exact().unwrap()[3], r(1, 10));
        let v = ProbVector::parse("1/2, 1/3 ,1/6").unwrap();
        assert!(v.is_probability());
        let v = ProbVector::parse("2x1/4,0.5").unwrap();
        assert_eq!(v.exact().unwrap(), &[r(1, 4), r(1, 4), r(1, 2)]);
        assert_eq!(parse_rational("1.5e-3").unwrap(), r(3, 2000));
        assert_eq!(parse_rational("-.5").unwrap(), r(-1, 2));
        assert!(ProbVector::parse("0.1,,0.2").is_err());
        assert!(ProbVector::parse("abc").is_err());
        assert!(ProbVector::parse("-0.5,1").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn probability_renormalizes_small_drift_only() {
        let p = ProbVector::probability(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-15);
        assert!(ProbVector::probability(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::parse("1/3,1/3,1/3").unwrap().into_probability().is_ok());
    }

    #[test]
    fn decimal_rational_uses_shortest_repr() {
        assert_eq!(decimal_rational(0.1).unwrap(), r(1, 10));
        assert_eq!(decimal_rational(0.2).unwrap(), r(1, 5));
        assert_eq!(decimal_rational(1e-20).unwrap(), BigRational::new(1.into(), num_traits::pow(BigInt::from(10), 20)));
    }

    #[test]
    fn edge_params_reject_entries_above_one() {
        assert!(EdgeParams::parse("1.5,0.2").is_err());
        assert!(EdgeParams::new(ProbVector::new(vec![1.0 + 1e-9]).unwrap()).is_err());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs: Vec<f64> = std::iter::once(1e16).chain(std::iter::repeat_n(1.0, 1000)).chain(std::iter::once(-1e16)).collect();
        assert_eq!(compensated_sum(&xs), 1000.0);
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..12).prop_filter("positive", |v| v.iter().any(|&x| x > 1e-6))
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in weights()) {
            let once = ProbVector::new(v).unwrap().normalize().unwrap();
            let twice = once.normalize().unwrap();
            for (a, b) in once.entries().iter().zip(twice.entries()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }

        #[test]
        fn mu_dominates_var_y0(v in weights()) {
            let params = EdgeParams::new(ProbVector::new(v).unwrap()).unwrap();
            prop_assert!(params.var_y0() >= 0.0);
            prop_assert!(params.mu() >= params.var_y0());
        }

        #[test]
        fn normalize_commutes_with_permutation(v in weights(), rot in 0usize..12) {
            let k = rot % v.len();
            let mut rotated = v.clone();
            rotated.rotate_left(k);
            let a = ProbVector::new(v).unwrap().normalize().unwrap();
            let b = ProbVector::new(rotated).unwrap().normalize().unwrap();
            let mut a_rot = a.entries().to_vec();
            a_rot.rotate_left(k);
            for (x, y) in a_rot.iter().zip(b.entries()) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }
}
