//! Percolation certificates.
//!
//! Three routes produce verdicts: the explicit dimension/mean/cap conditions
//! (`theorem1`), the collision-series criterion `λ(q) ≤ μ − 1`
//! (`numeric_lambda`), and the branching bound `μ < 1` (`subcritical`).
//! Inequalities are decided in exact rationals wherever the inputs allow it.

use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{decimal_rational, rational_string, rational_to_f64, EdgeParams, ProbVector};
use crate::walk::lambda_truncated;

/// Informational only, never used in a verdict.
pub const LOWER_BOUND_NOTE: &str =
    "context: the known lower bound p_c(d) >= 1/d + 1/(2d^3) (Cox and Durrett) is not used in any verdict";

/// Reading of the cap condition used by the explicit route.
pub const CAP_READING_NOTE: &str =
    "cap condition applied as max q_i < 1/ceil(10/eps); the variant q_i <= ceil(eps/10)^(-1) is treated as a misprint";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Percolates,
    NoPercolation,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Percolates => "percolates",
            Verdict::NoPercolation => "no_percolation",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Theorem1,
    NumericLambda,
    Subcritical,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Theorem1 => "theorem1",
            Route::NumericLambda => "numeric_lambda",
            Route::Subcritical => "subcritical",
        })
    }
}

/// One inequality `left ⋚ right` with both operands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub description: String,
    pub left: f64,
    pub right: f64,
    /// Exact operands, when the comparison was made in rationals.
    pub left_exact: Option<String>,
    pub right_exact: Option<String>,
    pub pass: bool,
}

impl Check {
    fn exact(description: &str, left: &BigRational, right: &BigRational, pass: bool) -> Self {
        Self {
            description: description.into(),
            left: rational_to_f64(left),
            right: rational_to_f64(right),
            left_exact: Some(rational_string(left)),
            right_exact: Some(rational_string(right)),
            pass,
        }
    }

    fn float(description: &str, left: f64, right: f64, pass: bool) -> Self {
        Self {
            description: description.into(),
            left,
            right,
            left_exact: None,
            right_exact: None,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationCertificate {
    pub verdict: Verdict,
    pub route: Route,
    pub mu: f64,
    /// `μ − 1` when positive, or the user's `ε` on the explicit route.
    pub epsilon: Option<f64>,
    pub m: Option<u64>,
    pub checks: Vec<Check>,
    /// Upper estimate of `λ(q)` including the tail bound.
    pub lambda_value: Option<f64>,
    pub notes: Vec<String>,
}

impl PercolationCertificate {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invariant(format!("serializing certificate: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("certificate record: {e}")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "route: {}", self.route);
        let _ = writeln!(out, "verdict: {}", self.verdict);
        let _ = writeln!(out, "mu: {}", self.mu);
        if let Some(eps) = self.epsilon {
            let _ = writeln!(out, "epsilon: {eps}");
        }
        if let Some(m) = self.m {
            let _ = writeln!(out, "m: {m}");
        }
        if let Some(l) = self.lambda_value {
            let _ = writeln!(out, "lambda upper estimate: {l}");
        }
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            match (&c.left_exact, &c.right_exact) {
                (Some(l), Some(r)) => {
                    let _ = writeln!(out, "[{mark}] {}: left = {l} ({}), right = {r} ({})", c.description, c.left, c.right);
                }
                _ => {
                    let _ = writeln!(out, "[{mark}] {}: left = {}, right = {}", c.description, c.left, c.right);
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

fn exact_entries(p: &ProbVector) -> Result<Vec<BigRational>> {
    p.exact_or_decimal()
}

fn ceil_rational(r: &BigRational) -> BigInt {
    let (q, rem) = r.numer().div_rem(r.denom());
    if rem.is_positive() {
        q + 1
    } else {
        q
    }
}

fn positive_epsilon(mu: &BigRational) -> Option<f64> {
    let e = mu - BigRational::one();
    e.is_positive().then(|| rational_to_f64(&e))
}

/// The explicit sufficient conditions: `d ≥ 4`, `Σp_i ≥ 1 + ε` and
/// `max p_i / Σp_j < 1/⌈10/ε⌉`.
pub fn check_theorem1(p: &ProbVector, epsilon: f64) -> Result<PercolationCertificate> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Domain(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let eps = decimal_rational(epsilon)?;
    theorem1_exact(p, &eps)
}

/// [`check_theorem1`] with `ε = μ − 1`, computed exactly.
pub fn check_theorem1_auto(p: &ProbVector) -> Result<PercolationCertificate> {
    let params = EdgeParams::new(p.clone())?;
    let mu: BigRational = exact_entries(params.p())?.iter().sum();
    let eps = &mu - BigRational::one();
    if !eps.is_positive() {
        return Err(Error::Domain(format!(
            "epsilon = mu - 1 = {} is not positive",
            rational_string(&eps)
        )));
    }
    theorem1_exact(p, &eps)
}

fn theorem1_exact(p: &ProbVector, eps: &BigRational) -> Result<PercolationCertificate> {
    let params = EdgeParams::new(p.clone())?;
    let exact = exact_entries(params.p())?;
    let mu: BigRational = exact.iter().sum();
    let one = BigRational::one();

    let d = exact.len();
    let dim = Check::float("d >= 4", d as f64, 4.0, d >= 4);

    let rhs = &one + eps;
    let mean = Check::exact("sum p_i >= 1 + eps", &mu, &rhs, mu >= rhs);

    let ten = BigRational::from_integer(BigInt::from(10));
    let m_big = ceil_rational(&(ten / eps));
    let m = m_big
        .to_u64()
        .ok_or_else(|| Error::Domain(format!("ceil(10/eps) = {m_big} is out of range")))?;
    let max_p = exact.iter().cloned().fold(BigRational::zero(), |a, b| if b > a { b } else { a });
    let max_q = &max_p / &mu;
    let cap = BigRational::new(BigInt::one(), m_big);
    let cap_check = Check::exact("max p_i / sum p_j < 1/ceil(10/eps)", &max_q, &cap, max_q < cap);

    let checks = vec![dim, mean, cap_check];
    let verdict = if checks.iter().all(|c| c.pass) {
        Verdict::Percolates
    } else {
        Verdict::Inconclusive
    };
    Ok(PercolationCertificate {
        verdict,
        route: Route::Theorem1,
        mu: rational_to_f64(&mu),
        epsilon: Some(rational_to_f64(eps)),
        m: Some(m),
        checks,
        lambda_value: None,
        notes: vec![CAP_READING_NOTE.into(), LOWER_BOUND_NOTE.into()],
    })
}

/// `no_percolation` exactly when `Σp_i < 1`.
pub fn check_subcritical(p: &ProbVector) -> Result<PercolationCertificate> {
    let params = EdgeParams::new(p.clone())?;
    let mu: BigRational = exact_entries(params.p())?.iter().sum();
    let one = BigRational::one();
    let pass = mu < one;
    Ok(PercolationCertificate {
        verdict: if pass { Verdict::NoPercolation } else { Verdict::Inconclusive },
        route: Route::Subcritical,
        mu: rational_to_f64(&mu),
        epsilon: positive_epsilon(&mu),
        m: None,
        checks: vec![Check::exact("sum p_i < 1", &mu, &one, pass)],
        lambda_value: None,
        notes: vec![LOWER_BOUND_NOTE.into()],
    })
}

/// `1/d + 10/d²`, the isotropic threshold bound.
pub fn isotropic_bound(d: usize) -> Result<f64> {
    if d < 4 {
        return Err(Error::Domain(format!("isotropic bound needs d >= 4, got {d}")));
    }
    let df = d as f64;
    // One correctly rounded division.
    Ok((df + 10.0) / (df * df))
}

pub fn isotropic_bound_exact(d: usize) -> Result<BigRational> {
    if d < 4 {
        return Err(Error::Domain(format!("isotropic bound needs d >= 4, got {d}")));
    }
    let d = BigInt::from(d);
    Ok(BigRational::new(&d + 10, &d * &d))
}

/// `percolates` when the certified upper estimate of `λ(q)` is at most `μ − 1`.
///
/// The comparison is exact: the float upper estimate is converted to the
/// rational it represents and compared with the exact `μ − 1`.
pub fn numeric_certificate(p: &ProbVector, m: usize, truncation: usize) -> Result<PercolationCertificate> {
    if m < 4 {
        return Err(Error::Domain(format!(
            "m = {m}: the collision series of the packed vector diverges for m <= 3"
        )));
    }
    if truncation == 0 {
        return Err(Error::Domain("truncation N must be at least 1".into()));
    }
    let params = EdgeParams::new(p.clone())?;
    let exact = exact_entries(params.p())?;
    let mu: BigRational = exact.iter().sum();
    let q = ProbVector::from_rationals(exact.iter().map(|x| x / &mu).collect())?;
    let series = lambda_truncated(&q, truncation, m)?;

    let cap = 1.0 / m as f64;
    let mut checks = vec![Check::float(
        "max q_i <= 1/m (certified tail)",
        q.max_entry(),
        cap,
        series.upper_estimate().is_some(),
    )];
    let rhs = &mu - BigRational::one();
    let mut notes = vec!["inequality applied: lambda(q) <= mu - 1 (non-strict)".to_string()];
    let lambda_value = series.upper_estimate();
    if let Some(upper) = lambda_value {
        let left = BigRational::from_float(upper)
            .ok_or_else(|| Error::NumericalInstability(format!("lambda estimate {upper} is not finite")))?;
        let mut check = Check::exact("lambda upper estimate <= mu - 1", &left, &rhs, left <= rhs);
        check.right = downward(&rhs);
        checks.push(check);
    } else {
        notes.push("tail not certified: no verdict from the truncated series".into());
    }
    notes.push(LOWER_BOUND_NOTE.into());
    let verdict = if checks.iter().all(|c| c.pass) {
        Verdict::Percolates
    } else {
        Verdict::Inconclusive
    };
    Ok(PercolationCertificate {
        verdict,
        route: Route::NumericLambda,
        mu: rational_to_f64(&mu),
        epsilon: positive_epsilon(&mu),
        m: Some(m as u64),
        checks,
        lambda_value,
        notes,
    })
}

/// Largest float not above `r`.
fn downward(r: &BigRational) -> f64 {
    let mut x = rational_to_f64(r);
    while x.is_finite() && BigRational::from_float(x).is_some_and(|v| &v > r) {
        x = x.next_down();
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(text: &str) -> ProbVector {
        ProbVector::parse(text).unwrap()
    }

    #[test]
    fn theorem1_examples() {
        let c = check_theorem1(&pv("20x0.1"), 1.0).unwrap();
        assert_eq!(c.verdict, Verdict::Percolates);
        assert_eq!(c.m, Some(10));
        assert_eq!(c.mu, 2.0);
        assert_eq!(c.checks[2].left_exact.as_deref(), Some("1/20"));

        let c = check_theorem1(&pv("4x0.3"), 0.2).unwrap();
        assert_eq!(c.m, Some(50));
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(!c.checks[2].pass);
        assert_eq!(c.checks[2].left, 0.25);

        let c = check_theorem1(&pv("3x0.9"), 0.5).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(!c.checks[0].pass);

        assert!(matches!(check_theorem1(&pv("20x0.1"), 0.0), Err(Error::Domain(_))));
        assert!(matches!(check_theorem1(&pv("20x0.1"), -1.0), Err(Error::Domain(_))));
        assert!(check_theorem1(&pv("1.5,0.5"), 1.0).is_err());
    }

    #[test]
    fn theorem1_float_inputs_use_decimal_reading() {
        let p = ProbVector::new(vec![0.1; 20]).unwrap();
        let c = check_theorem1(&p, 1.0).unwrap();
        assert_eq!(c.verdict, Verdict::Percolates);
        assert_eq!(c.checks[1].left_exact.as_deref(), Some("2"));
        let c = check_theorem1(&pv("4x0.3"), 0.2).unwrap();
        assert_eq!(c.m, Some(50));
    }

    #[test]
    fn theorem1_auto_epsilon() {
        let c = check_theorem1_auto(&pv("20x0.1")).unwrap();
        assert_eq!(c.epsilon, Some(1.0));
        assert_eq!(c.verdict, Verdict::Percolates);
        assert!(check_theorem1_auto(&pv("0.5,0.5")).is_err());
    }

    #[test]
    fn subcritical_examples() {
        let c = check_subcritical(&pv("0.2,0.2,0.2,0.3")).unwrap();
        assert_eq!(c.verdict, Verdict::NoPercolation);
        assert_eq!(c.checks[0].left_exact.as_deref(), Some("9/10"));
        assert_eq!(check_subcritical(&pv("0.5,0.5")).unwrap().verdict, Verdict::Inconclusive);
        assert_eq!(check_subcritical(&pv("1,0,0")).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn isotropic_examples() {
        assert_eq!(isotropic_bound(10).unwrap(), 0.2);
        assert_eq!(isotropic_bound(100).unwrap(), 0.011);
        assert_eq!(isotropic_bound(4).unwrap(), 0.875);
        assert!(matches!(isotropic_bound(3), Err(Error::Domain(_))));
        assert_eq!(isotropic_bound_exact(10).unwrap(), BigRational::new(1.into(), 5.into()));
        for d in 4..500 {
            assert!(isotropic_bound(d).unwrap() > 1.0 / d as f64);
        }
    }

    #[test]
    fn numeric_examples() {
        let c = numeric_certificate(&pv("20x0.1"), 10, 500).unwrap();
        assert_eq!(c.verdict, Verdict::Percolates);
        let lam = c.lambda_value.unwrap();
        assert!(lam <= 1.0 && lam > 0.05, "{lam}");

        let c = numeric_certificate(&pv("0.2,0.2,0.2,0.3"), 4, 50).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);

        assert!(matches!(numeric_certificate(&pv("20x0.1"), 3, 50), Err(Error::Domain(_))));

        // Cap fails: q_1 = 1/2 > 1/4.
        let c = numeric_certificate(&pv("1,0.5,0.5"), 4, 50).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(c.lambda_value.is_none());
    }

    #[test]
    fn numeric_d8_outcome_is_computed() {
        let c = numeric_certificate(&pv("8x0.2"), 4, 500).unwrap();
        let lam = c.lambda_value.unwrap();
        let expected = if lam <= 0.6 { Verdict::Percolates } else { Verdict::Inconclusive };
        assert_eq!(c.verdict, expected);
    }

    #[test]
    fn downward_never_exceeds() {
        let r = BigRational::new(1.into(), 10.into());
        let x = downward(&r);
        assert!(BigRational::from_float(x).unwrap() <= r);
        assert_eq!(downward(&BigRational::one()), 1.0);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let c = numeric_certificate(&pv("20x0.1"), 10, 100).unwrap();
        let text = c.to_json().unwrap();
        let back = PercolationCertificate::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
        let report = c.to_text();
        assert!(report.contains("verdict: percolates"));
        assert!(report.contains("[PASS]"));
    }

    fn weights() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (prop::collection::vec(1.0f64..1.5, 16..40), 2.0f64..3.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn route_consistency((w, mu) in weights()) {
            let total: f64 = w.iter().sum();
            let p = ProbVector::new(w.iter().map(|x| x / total * mu).collect()).unwrap();
            let t1 = check_theorem1(&p, 1.0).unwrap();
            if t1.verdict == Verdict::Percolates {
                let num = numeric_certificate(&p, 10, 200).unwrap();
                prop_assert_eq!(num.verdict, Verdict::Percolates);
            }
            prop_assert_eq!(check_subcritical(&p).unwrap().verdict, Verdict::Inconclusive);
        }

        #[test]
        fn cap_condition_is_scale_free((w, mu) in weights(), scale in 0.3f64..1.0) {
            let total: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / total * mu).collect();
            let a = check_theorem1(&ProbVector::new(p.clone()).unwrap(), 1.0).unwrap();
            let scaled: Vec<f64> = p.iter().map(|x| x * scale).collect();
            let b = check_theorem1(&ProbVector::new(scaled).unwrap(), 1.0).unwrap();
            // Decimal readings of the scaled floats can move the ratio by one ulp.
            if (a.checks[2].left - a.checks[2].right).abs() > 1e-12 {
                prop_assert_eq!(a.checks[2].pass, b.checks[2].pass);
            }
        }

        #[test]
        fn subcritical_excludes_percolation(w in prop::collection::vec(0.0f64..0.2, 4..12)) {
            prop_assume!(w.iter().any(|&x| x > 0.0));
            let p = ProbVector::new(w).unwrap();
            let sub = check_subcritical(&p).unwrap();
            if sub.verdict == Verdict::NoPercolation {
                prop_assert_ne!(check_theorem1(&p, 0.5).unwrap().verdict, Verdict::Percolates);
                prop_assert_ne!(numeric_certificate(&p, 4, 40).unwrap().verdict, Verdict::Percolates);
            }
        }
    }
}
