//! Counter-based edge randomness.
//!
//! The uniform attached to the edge `⟨x, x + e_i⟩` in replica `r` is a pure
//! function of `(seed, r, x, i)`, so every code path that asks about the same
//! edge sees the same state, and runs with coupled seeds share uniforms.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const COORD_SALT: u64 = 0xd6e8_feb8_6659_fd93;
const DIR_SALT: u64 = 0xa076_1d64_78bd_642f;
const PRUNE_SALT: u64 = 0xe703_7ed1_a0b4_28db;

/// The splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Randomness of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeStream {
    key: u64,
}

impl EdgeStream {
    pub fn new(seed: u64, replica: u64) -> Self {
        let key = mix64(mix64(seed ^ GOLDEN).wrapping_add(replica.wrapping_mul(GOLDEN)) ^ replica);
        Self { key }
    }

    /// Digest of a vertex; feeds [`Self::uniform`].
    #[inline]
    pub fn vertex_key(&self, coords: &[u16]) -> u64 {
        let mut h = self.key;
        for (i, &c) in coords.iter().enumerate() {
            h = mix64(h ^ ((c as u64) << 16 | i as u64).wrapping_mul(COORD_SALT));
        }
        h
    }

    /// Uniform in `[0, 1)` with 53 random bits for direction `dir` at a vertex.
    #[inline]
    pub fn uniform(&self, vertex_key: u64, dir: usize) -> f64 {
        let h = mix64(vertex_key ^ (dir as u64 + 1).wrapping_mul(DIR_SALT));
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// The edge is open iff its uniform falls below `p`.
    #[inline]
    pub fn is_open(&self, vertex_key: u64, dir: usize, p: f64) -> bool {
        self.uniform(vertex_key, dir) < p
    }

    /// Rank used to choose which vertices survive frontier pruning.
    #[inline]
    pub fn prune_rank(&self, vertex_key: u64) -> u64 {
        mix64(vertex_key ^ PRUNE_SALT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_edge_same_uniform() {
        let s = EdgeStream::new(7, 3);
        let k = s.vertex_key(&[1, 2, 0]);
        assert_eq!(s.uniform(k, 1), EdgeStream::new(7, 3).uniform(s.vertex_key(&[1, 2, 0]), 1));
        assert_ne!(s.uniform(k, 1), s.uniform(k, 2));
        assert_ne!(k, s.vertex_key(&[2, 1, 0]));
        assert_ne!(s.vertex_key(&[1, 2]), EdgeStream::new(7, 4).vertex_key(&[1, 2]));
    }

    #[test]
    fn uniforms_look_uniform() {
        let s = EdgeStream::new(42, 0);
        let n = 200_000u32;
        let mut bins = [0u32; 10];
        let mut sum = 0.0;
        for v in 0..n {
            let k = s.vertex_key(&[(v % 300) as u16, (v / 300) as u16]);
            let u = s.uniform(k, 0);
            assert!((0.0..1.0).contains(&u));
            bins[(u * 10.0) as usize] += 1;
            sum += u;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
        for b in bins {
            assert!((b as f64 - 20_000.0).abs() < 800.0, "{bins:?}");
        }
    }

    #[test]
    fn extreme_probabilities() {
        let s = EdgeStream::new(1, 1);
        for v in 0..1000u16 {
            let k = s.vertex_key(&[v]);
            assert!(s.is_open(k, 0, 1.0));
            assert!(!s.is_open(k, 0, 0.0));
        }
    }
}
