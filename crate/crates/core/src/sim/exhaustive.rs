//! Exact law of `X_n` by enumerating every edge configuration below level `n`.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::prob::EdgeParams;

/// Largest number of edges enumerated.
pub const MAX_EDGES: usize = 20;

/// `ℙ(X_n = k)` for each attainable `k`, in increasing `k`.
pub fn exact_count_distribution(params: &EdgeParams, n: usize) -> Result<Vec<(u64, BigRational)>> {
    let p = params.p().exact_or_decimal()?;
    let d = p.len();
    // Vertices of V_0, …, V_n, indexed level by level.
    let mut index: HashMap<Vec<u16>, usize> = HashMap::new();
    let mut levels: Vec<Vec<Vec<u16>>> = vec![vec![vec![0u16; d]]];
    index.insert(vec![0u16; d], 0);
    for _ in 0..n {
        let mut next = Vec::new();
        for x in levels.last().unwrap() {
            for i in 0..d {
                let mut y = x.clone();
                y[i] += 1;
                if !index.contains_key(&y) {
                    index.insert(y.clone(), index.len());
                    next.push(y);
                }
            }
        }
        levels.push(next);
    }
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for level in &levels[..n] {
        for x in level {
            for i in 0..d {
                let mut y = x.clone();
                y[i] += 1;
                edges.push((index[x], index[&y], i));
            }
        }
    }
    if edges.len() > MAX_EDGES {
        return Err(Error::Resource(format!(
            "{} edges below level {n}; exhaustive enumeration is limited to {MAX_EDGES}",
            edges.len()
        )));
    }
    let finals: Vec<usize> = levels[n].iter().map(|v| index[v]).collect();
    let one = BigRational::one();
    let open: Vec<&BigRational> = edges.iter().map(|e| &p[e.2]).collect();
    let closed: Vec<BigRational> = edges.iter().map(|e| &one - &p[e.2]).collect();

    let mut law: BTreeMap<u64, BigRational> = BTreeMap::new();
    let mut counts = vec![0u64; index.len()];
    for mask in 0u32..(1u32 << edges.len()) {
        let mut prob = one.clone();
        for k in 0..edges.len() {
            if mask >> k & 1 == 1 {
                prob *= open[k];
            } else {
                prob *= &closed[k];
            }
            if prob.is_zero() {
                break;
            }
        }
        if prob.is_zero() {
            continue;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        counts[0] = 1;
        // Edges are listed by source level, so sources are final before use.
        for (k, &(from, to, _)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                counts[to] += counts[from];
            }
        }
        let x: u64 = finals.iter().map(|&v| counts[v]).sum();
        *law.entry(x).or_insert_with(BigRational::zero) += prob;
    }
    Ok(law.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::rational_string;

    #[test]
    fn level_one_is_binomial() {
        let p = EdgeParams::parse("1/2,1/3").unwrap();
        let law = exact_count_distribution(&p, 1).unwrap();
        let strings: Vec<_> = law.iter().map(|(k, r)| (*k, rational_string(r))).collect();
        assert_eq!(strings, vec![(0, "1/3".into()), (1, "1/2".into()), (2, "1/6".into())]);
    }

    #[test]
    fn law_sums_to_one_with_mean_mu_n() {
        let p = EdgeParams::parse("1/2,1/2").unwrap();
        for n in 1..=3 {
            let law = exact_count_distribution(&p, n).unwrap();
            let total: BigRational = law.iter().map(|(_, r)| r.clone()).sum();
            assert!(total.is_one());
            let mean: BigRational = law.iter().map(|(k, r)| r * BigRational::from_integer((*k).into())).sum();
            assert!(mean.is_one(), "n={n}");
        }
    }

    #[test]
    fn too_many_edges_is_a_resource_error() {
        let p = EdgeParams::parse("1/2,1/2").unwrap();
        assert!(matches!(exact_count_distribution(&p, 5), Err(Error::Resource(_))));
    }
}
