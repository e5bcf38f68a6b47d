//! Sparse level frontiers of the open cluster.

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::prob::EdgeParams;
use crate::sim::rng::EdgeStream;

pub type Vertex = Box<[u16]>;

/// Open-path count at a vertex; promoted to a big integer on overflow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathCount {
    Small(u64),
    Big(Box<BigUint>),
}

impl PathCount {
    pub fn one() -> Self {
        PathCount::Small(1)
    }

    pub fn add_assign(&mut self, other: &PathCount) {
        match (&mut *self, other) {
            (PathCount::Small(a), PathCount::Small(b)) => match a.checked_add(*b) {
                Some(s) => *a = s,
                None => *self = PathCount::Big(Box::new(BigUint::from(*a) + *b)),
            },
            (PathCount::Big(a), PathCount::Small(b)) => **a += *b,
            (PathCount::Small(a), PathCount::Big(b)) => {
                *self = PathCount::Big(Box::new(b.as_ref() + *a));
            }
            (PathCount::Big(a), PathCount::Big(b)) => **a += b.as_ref(),
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        match self {
            PathCount::Small(a) => BigUint::from(*a),
            PathCount::Big(b) => b.as_ref().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Counts {
    /// `N_x` for every reachable `x` at the level.
    Tracked(HashMap<Vertex, PathCount>),
    /// Reachable vertices only.
    Occupied(HashSet<Vertex>),
}

/// Reachable part of `V_n`, with open-path counts when tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierState {
    level: usize,
    dim: usize,
    counts: Counts,
    /// Set once vertices have been dropped; the state is then a subset of
    /// the true frontier.
    pruned: bool,
}

/// Approximate heap footprint of one frontier entry.
pub fn bytes_per_entry(d: usize, tracked: bool) -> u64 {
    64 + 2 * d as u64 + if tracked { 16 } else { 0 }
}

impl FrontierState {
    pub fn origin(d: usize, track_counts: bool) -> Self {
        let o: Vertex = vec![0u16; d].into_boxed_slice();
        let counts = if track_counts {
            Counts::Tracked(HashMap::from([(o, PathCount::one())]))
        } else {
            Counts::Occupied(HashSet::from([o]))
        };
        Self {
            level: 0,
            dim: d,
            counts,
            pruned: false,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &Counts {
        &self.counts
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned
    }

    pub fn len(&self) -> usize {
        match &self.counts {
            Counts::Tracked(m) => m.len(),
            Counts::Occupied(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices(&self) -> Vec<&[u16]> {
        match &self.counts {
            Counts::Tracked(m) => m.keys().map(|v| &v[..]).collect(),
            Counts::Occupied(s) => s.iter().map(|v| &v[..]).collect(),
        }
    }

    /// `N_x`; `None` when counts are not tracked.
    pub fn count(&self, x: &[u16]) -> Option<BigUint> {
        match &self.counts {
            Counts::Tracked(m) => Some(m.get(x).map_or_else(BigUint::zero, PathCount::to_biguint)),
            Counts::Occupied(_) => None,
        }
    }

    /// `X_n = Σ N_x`; `None` when counts are not tracked.
    pub fn total(&self) -> Option<BigUint> {
        match &self.counts {
            Counts::Tracked(m) => {
                let mut small: u128 = 0;
                let mut big = BigUint::zero();
                for c in m.values() {
                    match c {
                        PathCount::Small(a) => match small.checked_add(*a as u128) {
                            Some(s) => small = s,
                            None => {
                                big += small;
                                small = *a as u128;
                            }
                        },
                        PathCount::Big(b) => big += b.as_ref(),
                    }
                }
                Some(big + small)
            }
            Counts::Occupied(_) => None,
        }
    }

    /// Keeps the `cap` vertices of smallest prune rank.
    pub fn prune(&mut self, cap: usize, stream: &EdgeStream) {
        if self.len() <= cap {
            return;
        }
        let rank = |v: &[u16]| (stream.prune_rank(stream.vertex_key(v)), v.to_vec());
        match &mut self.counts {
            Counts::Tracked(m) => {
                let mut keys: Vec<_> = m.keys().map(|v| (rank(v), v.clone())).collect();
                keys.sort_unstable_by(|a, b| a.0.cmp(&b.0));
                for (_, v) in keys.into_iter().skip(cap) {
                    m.remove(&v);
                }
            }
            Counts::Occupied(s) => {
                let mut keys: Vec<_> = s.iter().map(|v| (rank(v), v.clone())).collect();
                keys.sort_unstable_by(|a, b| a.0.cmp(&b.0));
                for (_, v) in keys.into_iter().skip(cap) {
                    s.remove(&v);
                }
            }
        }
        self.pruned = true;
    }
}

fn over_cap(d: usize, tracked: bool, entries: usize, memory_cap: u64) -> bool {
    (entries as u64).saturating_mul(bytes_per_entry(d, tracked)) > memory_cap
}

/// Advances one level: each frontier vertex samples each outgoing edge once
/// and an open edge `⟨x, x + e_i⟩` adds `N_x` to the count at `x + e_i`.
pub fn grow_level(
    state: &FrontierState,
    params: &EdgeParams,
    stream: &EdgeStream,
    memory_cap: u64,
) -> Result<FrontierState> {
    let d = state.dim;
    if params.dim() != d {
        return Err(Error::Domain(format!(
            "frontier has dimension {d} but parameters have {}",
            params.dim()
        )));
    }
    if state.level >= u16::MAX as usize {
        return Err(Error::Domain(format!("level {} exceeds the coordinate range", state.level)));
    }
    let p = params.p().entries();
    let old = state.len();
    let tracked = matches!(state.counts, Counts::Tracked(_));
    let resource = |new: usize| {
        Error::Resource(format!(
            "frontier at level {} reached {} vertices (plus {old} at level {}); memory cap of {memory_cap} bytes exceeded",
            state.level + 1,
            new,
            state.level
        ))
    };
    let mut child = vec![0u16; d];
    let counts = match &state.counts {
        Counts::Tracked(m) => {
            let mut next: HashMap<Vertex, PathCount> = HashMap::new();
            for (x, n_x) in m {
                let key = stream.vertex_key(x);
                for (i, &pi) in p.iter().enumerate() {
                    if !stream.is_open(key, i, pi) {
                        continue;
                    }
                    child.copy_from_slice(x);
                    child[i] += 1;
                    match next.get_mut(&child[..]) {
                        Some(c) => c.add_assign(n_x),
                        None => {
                            if over_cap(d, true, old + next.len() + 1, memory_cap) {
                                return Err(resource(next.len() + 1));
                            }
                            next.insert(child.clone().into_boxed_slice(), n_x.clone());
                        }
                    }
                }
            }
            Counts::Tracked(next)
        }
        Counts::Occupied(s) => {
            let mut next: HashSet<Vertex> = HashSet::new();
            for x in s {
                let key = stream.vertex_key(x);
                for (i, &pi) in p.iter().enumerate() {
                    if !stream.is_open(key, i, pi) {
                        continue;
                    }
                    child.copy_from_slice(x);
                    child[i] += 1;
                    if !next.contains(&child[..]) {
                        if over_cap(d, false, old + next.len() + 1, memory_cap) {
                            return Err(resource(next.len() + 1));
                        }
                        next.insert(child.clone().into_boxed_slice());
                    }
                }
            }
            Counts::Occupied(next)
        }
    };
    debug_assert!(tracked == matches!(counts, Counts::Tracked(_)));
    Ok(FrontierState {
        level: state.level + 1,
        dim: d,
        counts,
        pruned: state.pruned,
    })
}

/// `X_n / μⁿ` without intermediate overflow.
pub fn normalized_count(x: &BigUint, mu: f64, n: usize) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let direct = x.to_f64().unwrap_or(f64::INFINITY) / mu.powi(n as i32);
    if direct.is_finite() && direct > 0.0 {
        return direct;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let mantissa = (x >> shift).to_f64().unwrap_or(0.0);
    (mantissa.ln() + shift as f64 * std::f64::consts::LN_2 - n as f64 * mu.ln()).exp()
}
