//! The packing map on `𝒜 = {q : 0 ≤ q_i ≤ 1/m, Σ q_i = 1}`.
//!
//! Each step merges two fractional entries (entries outside `{0, 1/m}`),
//! keeping their sum and pushing one of them onto `{0, 1/m}`. Iterating reaches
//! the packed vector `q* = (1/m, …, 1/m, 0, …, 0)` in at most `d` steps, and
//! no step decreases any collision probability `c_n`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{CompensatedSum, ProbVector, PROB_SUM_TOL};
use crate::walk::{collision_series, lazy_return_prob};

/// Entries this close to `0` or `1/m` count as members of `{0, 1/m}`.
pub const MEMBERSHIP_TOL: f64 = 1e-12;
/// Allowed float slack in the termwise series comparison.
pub const TERMWISE_TOL: f64 = 1e-12;

/// A vector of `𝒜` for a fixed `m`, with its fractional-entry count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingState {
    pub q: Vec<f64>,
    pub m: usize,
    pub b_count: usize,
}

impl PackingState {
    pub fn new(q: &ProbVector, m: usize) -> Result<Self> {
        let entries = check_membership(q.entries(), m)?;
        let b_count = fractional_indices(&entries, m).len();
        Ok(Self { q: entries, m, b_count })
    }

    fn from_entries(q: Vec<f64>, m: usize) -> Self {
        let b_count = fractional_indices(&q, m).len();
        Self { q, m, b_count }
    }

    pub fn to_prob_vector(&self) -> Result<ProbVector> {
        ProbVector::new(self.q.clone())
    }
}

fn cap(m: usize) -> f64 {
    1.0 / m as f64
}

fn is_member(x: f64, m: usize) -> bool {
    x.abs() <= MEMBERSHIP_TOL || (x - cap(m)).abs() <= MEMBERSHIP_TOL
}

/// Validates `q ∈ 𝒜` and snaps near-members onto `{0, 1/m}`.
fn check_membership(q: &[f64], m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let c = cap(m);
    if let Some(bad) = q.iter().find(|&&x| x < -MEMBERSHIP_TOL || x > c + MEMBERSHIP_TOL) {
        return Err(Error::Domain(format!("entry {bad} outside [0, 1/{m}]")));
    }
    let total = q.iter().copied().collect::<CompensatedSum>().value();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::Domain(format!("entries sum to {total}, not 1")));
    }
    let snapped: Vec<f64> = q.iter().map(|&x| snap(x, m)).collect();
    if fractional_indices(&snapped, m).len() == 1 {
        return Err(Error::Domain(
            "exactly one entry outside {0, 1/m}; the entries cannot sum to 1".into(),
        ));
    }
    Ok(snapped)
}

fn snap(x: f64, m: usize) -> f64 {
    if x.abs() <= MEMBERSHIP_TOL {
        0.0
    } else if (x - cap(m)).abs() <= MEMBERSHIP_TOL {
        cap(m)
    } else {
        x
    }
}

fn fractional_indices(q: &[f64], m: usize) -> Vec<usize> {
    q.iter()
        .enumerate()
        .filter(|(_, &x)| !is_member(x, m))
        .map(|(i, _)| i)
        .collect()
}

/// `B(q) = #{i : q_i ∉ {0, 1/m}}`.
pub fn b_count(q: &ProbVector, m: usize) -> Result<usize> {
    Ok(PackingState::new(q, m)?.b_count)
}

/// The canonical packed vector: `m` entries `1/m` first, zeros after.
pub fn packed_vector(d: usize, m: usize) -> Vec<f64> {
    (0..d).map(|i| if i < m { cap(m) } else { 0.0 }).collect()
}

/// Which case of the merge was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeKind {
    /// `q_i + q_j ≤ 1/m`: everything moves to `i`.
    Absorb,
    /// `q_i + q_j > 1/m`: `j` is filled to `1/m`.
    Fill,
    /// `B(q) = 0`: the vector is replaced by `q*`.
    Canonicalize,
}

/// One application of the packing map, with the merged pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackStep {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub pair: Option<(usize, usize)>,
    pub kind: MergeKind,
}

fn step_entries(q: &[f64], m: usize) -> PackStep {
    let frac = fractional_indices(q, m);
    if frac.is_empty() {
        return PackStep {
            before: q.to_vec(),
            after: packed_vector(q.len(), m),
            pair: None,
            kind: MergeKind::Canonicalize,
        };
    }
    let (i, j) = (frac[0], frac[1]);
    let mut after = q.to_vec();
    let total = q[i] + q[j];
    let kind = if total <= cap(m) + MEMBERSHIP_TOL {
        after[i] = total;
        after[j] = 0.0;
        MergeKind::Absorb
    } else {
        after[i] = total - cap(m);
        after[j] = cap(m);
        MergeKind::Fill
    };
    after[i] = snap(after[i], m);
    PackStep {
        before: q.to_vec(),
        after,
        pair: Some((i, j)),
        kind,
    }
}

/// One application of the packing map `A`.
pub fn pack_step(q: &ProbVector, m: usize) -> Result<ProbVector> {
    let state = PackingState::new(q, m)?;
    let step = step_entries(&state.q, m);
    let next = PackingState::from_entries(step.after, m);
    if state.b_count > 0 && next.b_count >= state.b_count {
        return Err(Error::Invariant(format!(
            "packing step did not reduce B: {} -> {}",
            state.b_count, next.b_count
        )));
    }
    next.to_prob_vector()
}

/// The orbit `q, A(q), A²(q), …` up to `q*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingOrbit {
    pub m: usize,
    pub steps: Vec<PackStep>,
    pub result: Vec<f64>,
}

impl PackingOrbit {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// One CSV row per vector along the orbit.
    pub fn to_csv(&self) -> String {
        let d = self.result.len();
        let mut out = String::from("step");
        for i in 1..=d {
            let _ = write!(out, ",q{i}");
        }
        out.push('\n');
        let mut rows: Vec<&[f64]> = Vec::new();
        if let Some(first) = self.steps.first() {
            rows.push(&first.before);
        }
        rows.extend(self.steps.iter().map(|s| s.after.as_slice()));
        for (k, row) in rows.iter().enumerate() {
            let _ = write!(out, "{k}");
            for x in *row {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Iterates [`pack_step`] until `B = 0`, then canonicalizes.
pub fn pack_orbit(q: &ProbVector, m: usize) -> Result<PackingOrbit> {
    let mut state = PackingState::new(q, m)?;
    let d = state.q.len();
    let mut steps = Vec::new();
    loop {
        if steps.len() >= d {
            return Err(Error::Invariant(format!("packing did not reach q* within d = {d} steps")));
        }
        let step = step_entries(&state.q, m);
        let done = step.kind == MergeKind::Canonicalize;
        let next = PackingState::from_entries(step.after.clone(), m);
        if !done && next.b_count >= state.b_count {
            return Err(Error::Invariant("packing step did not reduce B".into()));
        }
        steps.push(step);
        state = next;
        if done {
            break;
        }
    }
    Ok(PackingOrbit {
        m,
        result: state.q,
        steps,
    })
}

/// `A^k(q) = q*` with the number of steps `k ≤ d`.
pub fn pack_full(q: &ProbVector, m: usize) -> Result<(ProbVector, usize)> {
    let orbit = pack_orbit(q, m)?;
    Ok((ProbVector::new(orbit.result.clone())?, orbit.step_count()))
}

/// Laziness of the difference walk of a two-coordinate block.
pub fn laziness(a: f64, b: f64) -> f64 {
    (a * a + b * b) / ((a + b) * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermComparison {
    pub n: usize,
    pub before: f64,
    pub after: f64,
    pub holds: bool,
}

/// Evidence that one packing step does not decrease `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackMonotoneReport {
    pub m: usize,
    pub pair: (usize, usize),
    pub x: f64,
    pub x_after: f64,
    pub laziness_ordered: bool,
    /// `F_j(x) ≤ F_j(x')` for `j ≤ N`, the block-level inequality.
    pub block_monotone: bool,
    pub terms: Vec<TermComparison>,
}

impl PackMonotoneReport {
    pub fn holds(&self) -> bool {
        self.laziness_ordered && self.block_monotone && self.terms.iter().all(|t| t.holds)
    }
}

/// Compares `q` with `A(q)`: the merged pair's laziness `x' ≥ x ≥ 1/2`,
/// `F_j(x) ≤ F_j(x')`, and `c_n(A(q)) ≥ c_n(q) − 1e−12` for `n ≤ N`.
pub fn verify_pack_monotone(q: &ProbVector, m: usize, n_max: usize) -> Result<PackMonotoneReport> {
    let state = PackingState::new(q, m)?;
    if state.b_count == 0 {
        return Err(Error::Domain("B(q) = 0: the packing step is the canonical relabeling".into()));
    }
    let step = step_entries(&state.q, m);
    let (i, j) = step.pair.expect("fractional pair");
    let x = laziness(state.q[i], state.q[j]);
    let x_after = laziness(step.after[i], step.after[j]);
    let laziness_ordered = x_after >= x - MEMBERSHIP_TOL && x >= 0.5 - MEMBERSHIP_TOL;
    let mut block_monotone = true;
    for n in 1..=n_max {
        if lazy_return_prob(x, n)? > lazy_return_prob(x_after.min(1.0), n)? + TERMWISE_TOL {
            block_monotone = false;
        }
    }
    let before = collision_series(&ProbVector::probability(state.q.clone())?, n_max)?;
    let after = collision_series(&ProbVector::probability(step.after.clone())?, n_max)?;
    let terms = (1..=n_max)
        .map(|n| TermComparison {
            n,
            before: before[n],
            after: after[n],
            holds: after[n] >= before[n] - TERMWISE_TOL,
        })
        .collect();
    Ok(PackMonotoneReport {
        m,
        pair: (i, j),
        x,
        x_after,
        laziness_ordered,
        block_monotone,
        terms,
    })
}

/// Water-fills positive weights `w` into `𝒜`: `min(t w_i, 1/m)` with `t`
/// chosen so the entries sum to one. Needs at least `m` positive weights.
pub fn clip_to_cap(w: &[f64], m: usize) -> Vec<f64> {
    let c = 1.0 / m as f64;
    let mass = |t: f64| w.iter().map(|x| (t * x).min(c)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while mass(hi) < 1.0 && hi < 1e300 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v: Vec<f64> = w.iter().map(|x| (hi * x).min(c)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| (x / s).min(c)).collect()
}
