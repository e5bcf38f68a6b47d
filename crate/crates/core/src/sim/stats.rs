//! Goodness-of-fit and interval helpers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Minimum expected count per pooled bin.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareBin {
    /// Smallest and largest category pooled into the bin.
    pub from: u64,
    pub to: u64,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub bins: Vec<ChiSquareBin>,
    /// Samples outside the support of the reference law.
    pub off_support: u64,
}

/// Pearson test of integer samples against a law on `u64` categories.
/// Adjacent categories are pooled until each bin expects at least
/// [`MIN_EXPECTED`] samples; any sample off the support gives `p = 0`.
pub fn chi_square_gof(samples: &[u64], law: &[(u64, f64)]) -> Result<ChiSquareReport> {
    if samples.is_empty() {
        return Err(Error::Domain("chi-square test needs samples".into()));
    }
    let total = samples.len() as f64;
    let mut observed: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in samples {
        *observed.entry(s).or_default() += 1;
    }
    let support: BTreeMap<u64, f64> = law.iter().copied().filter(|(_, p)| *p > 0.0).collect();
    let off_support: u64 = observed
        .iter()
        .filter(|(k, _)| !support.contains_key(k))
        .map(|(_, c)| *c)
        .sum();

    let mut bins: Vec<ChiSquareBin> = Vec::new();
    let mut open: Option<ChiSquareBin> = None;
    for (&k, &p) in &support {
        let bin = open.get_or_insert(ChiSquareBin {
            from: k,
            to: k,
            observed: 0,
            expected: 0.0,
        });
        bin.to = k;
        bin.observed += observed.get(&k).copied().unwrap_or(0);
        bin.expected += p * total;
        if bin.expected >= MIN_EXPECTED {
            bins.push(open.take().unwrap());
        }
    }
    if let Some(rest) = open {
        match bins.last_mut() {
            Some(last) => {
                last.to = rest.to;
                last.observed += rest.observed;
                last.expected += rest.expected;
            }
            None => bins.push(rest),
        }
    }
    let statistic: f64 = bins
        .iter()
        .map(|b| (b.observed as f64 - b.expected).powi(2) / b.expected)
        .sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if off_support > 0 {
        0.0
    } else if df == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(df as f64).map_err(|e| Error::Invariant(format!("chi-square law: {e}")))?;
        dist.sf(statistic)
    };
    Ok(ChiSquareReport {
        statistic,
        df,
        p_value,
        bins,
        off_support,
    })
}

/// Sample mean and unbiased variance (zero for a single sample).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = crate::prob::compensated_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, crate::prob::compensated_sum(&ss) / (n - 1) as f64)
}
