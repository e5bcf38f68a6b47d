//! Brute-force enumeration of oriented path pairs in exact rational arithmetic.
//!
//! For a level `n` every ordered pair `(γ₁, γ₂)` of the `dⁿ` oriented paths
//! from the origin is visited once. Each pair contributes the probability that
//! both paths are open, the product of `p_i` over the union of their edges.
//! Pair weights are grouped by the multiset of edge directions, so the exact
//! rational arithmetic only happens once per distinct monomial.

use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{rational_string, EdgeParams};

/// Default limit on the number of ordered pairs `d^{2n}` visited.
pub const DEFAULT_PAIR_CAP: u128 = 100_000_000;

/// An oriented path from the origin, stored as 0-based direction indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrientedPath {
    steps: Vec<usize>,
    d: usize,
}

impl OrientedPath {
    pub fn new(steps: Vec<usize>, d: usize) -> Result<Self> {
        if let Some(&bad) = steps.iter().find(|&&s| s >= d) {
            return Err(Error::Domain(format!("step direction {bad} out of range for d={d}")));
        }
        Ok(Self { steps, d })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// The vertex after `i` steps (`i = 0` is the origin).
    pub fn vertex(&self, i: usize) -> Vec<u32> {
        let mut v = vec![0u32; self.d];
        for &s in &self.steps[..i] {
            v[s] += 1;
        }
        v
    }

    pub fn final_vertex(&self) -> Vec<u32> {
        self.vertex(self.steps.len())
    }

    /// Edges as `(tail vertex, direction)` keys.
    pub fn edges(&self) -> Vec<(Vec<u32>, usize)> {
        let mut v = vec![0u32; self.d];
        let mut out = Vec::with_capacity(self.steps.len());
        for &s in &self.steps {
            out.push((v.clone(), s));
            v[s] += 1;
        }
        out
    }
}

/// Two equal-length paths and the steps at which they share a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    pub first: OrientedPath,
    pub second: OrientedPath,
    /// Sorted indices `i ∈ {1, …, n}` with `i(γ₁) = i(γ₂)`.
    pub meeting_set: Vec<usize>,
}

impl PathPair {
    pub fn new(first: OrientedPath, second: OrientedPath) -> Result<Self> {
        if first.len() != second.len() || first.dim() != second.dim() {
            return Err(Error::Domain("paths in a pair must share length and dimension".into()));
        }
        let mut a = vec![0u32; first.dim()];
        let mut b = vec![0u32; first.dim()];
        let mut meeting_set = Vec::new();
        for (i, (&s, &t)) in first.steps().iter().zip(second.steps()).enumerate() {
            a[s] += 1;
            b[t] += 1;
            if a == b {
                meeting_set.push(i + 1);
            }
        }
        Ok(Self {
            first,
            second,
            meeting_set,
        })
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn same_endpoint(&self) -> bool {
        self.is_empty() || self.meeting_set.last() == Some(&self.len())
    }

    /// Membership in `A_m`: the paths meet at step `m = n` and nowhere before.
    pub fn first_meets_at_end(&self) -> bool {
        !self.is_empty() && self.meeting_set == [self.len()]
    }
}

/// `ℙ(γ₁, γ₂ open)`: product of `p` over the union of both edge sets.
pub fn pair_open_prob(pair: &PathPair, params: &EdgeParams) -> Result<BigRational> {
    if pair.first.dim() != params.dim() {
        return Err(Error::Domain(format!(
            "paths live in d={}, parameters in d={}",
            pair.first.dim(),
            params.dim()
        )));
    }
    let p = params.p().exact_or_decimal()?;
    let union: HashSet<(Vec<u32>, usize)> = pair
        .first
        .edges()
        .into_iter()
        .chain(pair.second.edges())
        .collect();
    Ok(union
        .iter()
        .fold(BigRational::one(), |acc, (_, dir)| acc * &p[*dir]))
}

/// Unnormalized pair sums at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSums {
    pub n: usize,
    /// `𝔼[Xₙ²]`: sum over all ordered pairs.
    pub all_pairs: BigRational,
    /// Pairs with `f(γ₁) = f(γ₂)`.
    pub same_endpoint: BigRational,
    /// Pairs in `A_n`.
    pub first_meet: BigRational,
}

type MonomialCounts = HashMap<Vec<u16>, u64>;

#[derive(Default)]
struct Tally {
    all: MonomialCounts,
    same: MonomialCounts,
    first: MonomialCounts,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for (dst, src) in [
            (&mut self.all, other.all),
            (&mut self.same, other.same),
            (&mut self.first, other.first),
        ] {
            for (k, v) in src {
                *dst.entry(k).or_insert(0) += v;
            }
        }
        self
    }
}

/// Exhaustive enumerator over ordered path pairs with exact `p`.
#[derive(Debug, Clone)]
pub struct PathOracle {
    p: Vec<BigRational>,
    mu: BigRational,
    var_y0: BigRational,
    pair_cap: u128,
}

impl PathOracle {
    pub fn new(params: &EdgeParams) -> Result<Self> {
        Self::with_cap(params, DEFAULT_PAIR_CAP)
    }

    pub fn with_cap(params: &EdgeParams, pair_cap: u128) -> Result<Self> {
        let p = params.p().exact_or_decimal()?;
        let mu: BigRational = p.iter().sum();
        let var_y0 = p.iter().map(|x| x * (BigRational::one() - x)).sum();
        Ok(Self {
            p,
            mu,
            var_y0,
            pair_cap,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn mu(&self) -> &BigRational {
        &self.mu
    }

    pub fn var_y0(&self) -> &BigRational {
        &self.var_y0
    }

    fn check_cap(&self, n: usize) -> Result<()> {
        let d = self.dim() as u128;
        let pairs = d.checked_pow(2 * n as u32);
        match pairs {
            Some(count) if count <= self.pair_cap => Ok(()),
            _ => Err(Error::Resource(format!(
                "enumerating d^(2n) = {}^{} = {} path pairs exceeds the cap of {}",
                d,
                2 * n,
                pairs.map_or_else(|| "more than 2^128".to_string(), |c| c.to_string()),
                self.pair_cap
            ))),
        }
    }

    fn mu_power(&self, n: usize) -> BigRational {
        num_traits::pow(self.mu.clone(), 2 * n)
    }

    /// Visits every ordered pair of length-`n` paths.
    pub fn level_sums(&self, n: usize) -> Result<LevelSums> {
        if n == 0 {
            return Err(Error::Domain("level must be at least 1".into()));
        }
        self.check_cap(n)?;
        let d = self.dim();
        let paths = all_paths(d, n);
        // Intern vertices so that equality is an integer comparison.
        let mut ids: HashMap<Vec<u32>, u32> = HashMap::new();
        let vertex_ids: Vec<Vec<u32>> = paths
            .iter()
            .map(|steps| {
                let mut v = vec![0u32; d];
                let mut out = Vec::with_capacity(n + 1);
                out.push(0);
                for &s in steps {
                    v[s as usize] += 1;
                    let next = ids.len() as u32 + 1;
                    out.push(*ids.entry(v.clone()).or_insert(next));
                }
                out
            })
            .collect();

        let tally = (0..paths.len())
            .into_par_iter()
            .fold(Tally::default, |mut tally, a| {
                let (pa, va) = (&paths[a], &vertex_ids[a]);
                let mut key: Vec<u16> = Vec::with_capacity(2 * n);
                for (pb, vb) in paths.iter().zip(&vertex_ids) {
                    key.clear();
                    let mut meets_early = false;
                    for i in 0..n {
                        key.push(pa[i]);
                        // Edges at step i leave level i; they coincide only when
                        // both tails and directions agree.
                        if !(va[i] == vb[i] && pa[i] == pb[i]) {
                            key.push(pb[i]);
                        }
                        if i + 1 < n && va[i + 1] == vb[i + 1] {
                            meets_early = true;
                        }
                    }
                    key.sort_unstable();
                    *tally.all.entry(key.clone()).or_insert(0) += 1;
                    if va[n] == vb[n] {
                        *tally.same.entry(key.clone()).or_insert(0) += 1;
                        if !meets_early {
                            *tally.first.entry(key.clone()).or_insert(0) += 1;
                        }
                    }
                }
                tally
            })
            .reduce(Tally::default, Tally::merge);

        Ok(LevelSums {
            n,
            all_pairs: self.evaluate(&tally.all),
            same_endpoint: self.evaluate(&tally.same),
            first_meet: self.evaluate(&tally.first),
        })
    }

    fn evaluate(&self, counts: &MonomialCounts) -> BigRational {
        // Sort for a reproducible summation order (the sum is exact anyway).
        let mut keys: Vec<_> = counts.iter().collect();
        keys.sort();
        keys.into_iter().fold(BigRational::zero(), |acc, (dirs, &count)| {
            let term = dirs
                .iter()
                .fold(BigRational::from_integer(BigInt::from(count)), |t, &dir| t * &self.p[dir as usize]);
            acc + term
        })
    }

    /// `aₙ = μ^{-2n} Σ_{f(γ₁)=f(γ₂)} ℙ(γ₁, γ₂ open)`.
    pub fn a_n(&self, n: usize) -> Result<BigRational> {
        Ok(self.level_sums(n)?.same_endpoint / self.mu_power(n))
    }

    /// `b_m = μ^{-2m} Σ_{A_m} ℙ(γ₁, γ₂ open)`.
    pub fn b_m(&self, m: usize) -> Result<BigRational> {
        Ok(self.level_sums(m)?.first_meet / self.mu_power(m))
    }

    /// `𝔼[W_n²]` directly from all pairs, and via the recursion
    /// `𝔼[W₁²] + (Var Y₀/μ²) Σ_{j<n} a_j`.
    pub fn second_moment(&self, n: usize) -> Result<SecondMoment> {
        if n == 0 {
            return Err(Error::Domain("level must be at least 1".into()));
        }
        self.check_cap(n)?;
        let mu2 = &self.mu * &self.mu;
        let direct = self.level_sums(n)?.all_pairs / self.mu_power(n);
        let mut recursion = (&self.var_y0 + &mu2) / &mu2;
        for j in 1..n {
            recursion += &self.var_y0 / &mu2 * self.a_n(j)?;
        }
        Ok(SecondMoment {
            n,
            w2_direct: direct,
            w2_recursion: recursion,
        })
    }

    /// Compares `a_M` with `Σ_{compositions (m₁,…,m_j) of M} Π b_{m_k}`.
    pub fn partition_identity(&self, level: usize) -> Result<PartitionReport> {
        if level == 0 {
            return Err(Error::Domain("level must be at least 1".into()));
        }
        self.check_cap(level)?;
        let b: Vec<BigRational> = (1..=level).map(|m| self.b_m(m)).collect::<Result<_>>()?;
        let left = self.a_n(level)?;
        let mut right = BigRational::zero();
        let mut compositions = 0usize;
        for parts in compositions_of(level) {
            compositions += 1;
            right += parts
                .iter()
                .fold(BigRational::one(), |acc, &m| acc * &b[m - 1]);
        }
        Ok(PartitionReport {
            level,
            equal: left == right,
            left,
            right,
            compositions,
            b,
        })
    }
}

/// All `dⁿ` step sequences, lexicographic.
fn all_paths(d: usize, n: usize) -> Vec<Vec<u16>> {
    let total = d.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut steps = vec![0u16; n];
            for slot in steps.iter_mut().rev() {
                *slot = (code % d) as u16;
                code /= d;
            }
            steps
        })
        .collect()
}

/// Ordered compositions of `total` into positive parts.
pub fn compositions_of(total: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![Vec::new()];
    }
    // Bit i of the mask cuts after position i+1.
    (0u64..1 << (total - 1))
        .map(|mask| {
            let mut parts = Vec::new();
            let mut run = 1;
            for i in 0..total - 1 {
                if mask >> i & 1 == 1 {
                    parts.push(run);
                    run = 1;
                } else {
                    run += 1;
                }
            }
            parts.push(run);
            parts
        })
        .collect()
}

/// Both sides of the second-moment identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    pub n: usize,
    pub w2_direct: BigRational,
    pub w2_recursion: BigRational,
}

impl SecondMoment {
    pub fn agree(&self) -> bool {
        self.w2_direct == self.w2_recursion
    }
}

/// Outcome of the level-`M` partition identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub level: usize,
    pub left: BigRational,
    pub right: BigRational,
    pub equal: bool,
    pub compositions: usize,
    /// `b_1, …, b_M` used on the right side.
    pub b: Vec<BigRational>,
}

/// Machine-readable form of oracle output, values as exact fraction strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub p: Vec<String>,
    pub mu: String,
    pub var_y0: String,
    pub levels: Vec<LevelRecord>,
    pub identity: Option<IdentityRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: usize,
    pub a_n: String,
    pub b_n: String,
    pub w2_direct: String,
    pub w2_recursion: String,
    pub second_moment_equal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub level: usize,
    pub left: String,
    pub right: String,
    pub compositions: usize,
    pub equal: bool,
}

impl PathOracle {
    /// Tabulates `a_n`, `b_n` and both second moments for `n = 1..=levels`,
    /// plus the partition identity at `identity_level` if requested.
    pub fn record(&self, levels: usize, identity_level: Option<usize>) -> Result<OracleRecord> {
        let mut rows = Vec::with_capacity(levels);
        for n in 1..=levels {
            let sm = self.second_moment(n)?;
            rows.push(LevelRecord {
                n,
                a_n: rational_string(&self.a_n(n)?),
                b_n: rational_string(&self.b_m(n)?),
                second_moment_equal: sm.agree(),
                w2_direct: rational_string(&sm.w2_direct),
                w2_recursion: rational_string(&sm.w2_recursion),
            });
        }
        let identity = identity_level
            .map(|m| self.partition_identity(m))
            .transpose()?
            .map(|rep| IdentityRecord {
                level: rep.level,
                left: rational_string(&rep.left),
                right: rational_string(&rep.right),
                compositions: rep.compositions,
                equal: rep.equal,
            });
        Ok(OracleRecord {
            p: self.p.iter().map(rational_string).collect(),
            mu: rational_string(&self.mu),
            var_y0: rational_string(&self.var_y0),
            levels: rows,
            identity,
        })
    }
}

pub fn a_n_exact(params: &EdgeParams, n: usize) -> Result<BigRational> {
    PathOracle::new(params)?.a_n(n)
}

pub fn b_m_exact(params: &EdgeParams, m: usize) -> Result<BigRational> {
    PathOracle::new(params)?.b_m(m)
}

pub fn verify_partition_identity(params: &EdgeParams, level: usize) -> Result<PartitionReport> {
    PathOracle::new(params)?.partition_identity(level)
}

pub fn second_moment_exact(params: &EdgeParams, n: usize) -> Result<SecondMoment> {
    PathOracle::new(params)?.second_moment(n)
}
