//! Seeded Monte Carlo growth of the open cluster, level by level.
//!
//! Each replica draws its edges from an [`EdgeStream`] keyed on
//! `(seed, replica)`, so results do not depend on scheduling. Replicas run
//! in parallel and are aggregated in index order.

pub mod exhaustive;
pub mod frontier;
pub mod rng;
pub mod stats;

use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prob::EdgeParams;

pub use exhaustive::exact_count_distribution;
pub use frontier::{grow_level, FrontierState, PathCount};
pub use rng::EdgeStream;
pub use stats::{chi_square_gof, ChiSquareReport};

pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;
pub const DEFAULT_COUNT_LEVELS: usize = 40;
pub const DEFAULT_PRUNE_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: EdgeParams,
    /// Horizon `N`.
    pub max_level: usize,
    /// Replica count `R`.
    pub replicas: usize,
    pub seed: u64,
    /// Track open-path counts (for `W_n`) rather than occupancy only.
    pub track_counts: bool,
    /// Deepest level for which counts may be tracked.
    pub count_levels: usize,
    /// Per-replica frontier memory budget in bytes.
    pub memory_cap: u64,
    /// Occupancy frontiers larger than this are pruned; `None` disables.
    pub prune_cap: Option<usize>,
    /// Worker cap; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(params: EdgeParams, max_level: usize, replicas: usize, seed: u64, track_counts: bool) -> Result<Self> {
        let config = Self {
            params,
            max_level,
            replicas,
            seed,
            track_counts,
            count_levels: DEFAULT_COUNT_LEVELS,
            memory_cap: DEFAULT_MEMORY_CAP,
            prune_cap: Some(DEFAULT_PRUNE_CAP),
            threads: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_level == 0 {
            return Err(Error::Domain("max level N must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Domain("replica count R must be at least 1".into()));
        }
        if self.max_level >= u16::MAX as usize {
            return Err(Error::Domain(format!("max level {} is too deep", self.max_level)));
        }
        if self.track_counts && self.max_level > self.count_levels {
            return Err(Error::Domain(format!(
                "counts are tracked up to level {} but N = {}",
                self.count_levels, self.max_level
            )));
        }
        if self.prune_cap == Some(0) {
            return Err(Error::Domain("prune cap must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Domain("thread count must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 over every field that influences the result.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "p={};N={};R={};seed={};track={};count_levels={};memory_cap={};prune_cap={:?}",
            self.params.p(),
            self.max_level,
            self.replicas,
            self.seed,
            self.track_counts,
            self.count_levels,
            self.memory_cap,
            self.prune_cap.filter(|_| !self.track_counts),
        );
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// One replica's history at levels `0, …, N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaTrace {
    pub replica: usize,
    /// Frontier nonempty at each level.
    pub alive: Vec<bool>,
    /// `X_n` at each level, when tracked.
    pub counts: Option<Vec<BigUint>>,
    /// First level at which the frontier was pruned.
    pub pruned_at: Option<usize>,
}

impl ReplicaTrace {
    /// Deepest level with a nonempty frontier.
    pub fn survival_level(&self) -> usize {
        self.alive.iter().rposition(|&a| a).unwrap_or(0)
    }
}

/// Runs replica `r` to the horizon.
pub fn run_replica(config: &SimConfig, replica: usize) -> Result<ReplicaTrace> {
    let stream = EdgeStream::new(config.seed, replica as u64);
    let mut state = FrontierState::origin(config.params.dim(), config.track_counts);
    let mut alive = vec![true];
    let mut counts = config.track_counts.then(|| vec![BigUint::from(1u32)]);
    let mut pruned_at = None;
    for level in 1..=config.max_level {
        if state.is_empty() {
            alive.push(false);
            if let Some(c) = counts.as_mut() {
                c.push(BigUint::zero());
            }
            continue;
        }
        state = grow_level(&state, &config.params, &stream, config.memory_cap)?;
        if !config.track_counts {
            if let Some(cap) = config.prune_cap {
                if state.len() > cap {
                    state.prune(cap, &stream);
                    pruned_at.get_or_insert(level);
                }
            }
        }
        if state.is_empty() && state.is_pruned() {
            return Err(Error::Resource(format!(
                "replica {replica}: pruned frontier died at level {level}; rerun with a larger prune cap"
            )));
        }
        alive.push(!state.is_empty());
        if let Some(c) = counts.as_mut() {
            c.push(state.total().unwrap_or_default());
        }
    }
    Ok(ReplicaTrace {
        replica,
        alive,
        counts,
        pruned_at,
    })
}

/// All replicas in index order.
pub fn run_replicas(config: &SimConfig) -> Result<Vec<ReplicaTrace>> {
    config.validate()?;
    let work = || -> Result<Vec<ReplicaTrace>> {
        (0..config.replicas)
            .into_par_iter()
            .map(|r| run_replica(config, r))
            .collect()
    };
    match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Per-level statistics over replicas; index `n` is level `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub dim: usize,
    pub mu: f64,
    pub max_level: usize,
    pub replicas: usize,
    pub seed: u64,
    pub survival_frac: Vec<f64>,
    /// 95% normal half-width of the survival fraction.
    pub survival_ci: Vec<f64>,
    pub w: Option<MartingaleStats>,
    /// Replicas whose occupancy frontier was pruned.
    pub pruned_replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleStats {
    pub mean_w: Vec<f64>,
    pub var_w: Vec<f64>,
    /// 95% normal half-width of `mean_w`.
    pub ci_halfwidth: Vec<f64>,
    /// Sample `E[W_n²]` and the sample variance of `W_n²`.
    pub mean_w2: Vec<f64>,
    pub var_w2: Vec<f64>,
}

impl MartingaleStats {
    /// Standard error of `mean_w` at level `n`.
    pub fn std_error(&self, n: usize, replicas: usize) -> f64 {
        (self.var_w[n] / replicas as f64).sqrt()
    }

    /// Standard error of `mean_w2` at level `n`.
    pub fn std_error_w2(&self, n: usize, replicas: usize) -> f64 {
        (self.var_w2[n] / replicas as f64).sqrt()
    }
}

impl SimResult {
    /// Columns `level, mean_W, var_W, survival_frac, ci_halfwidth`. The
    /// half-width refers to `mean_W` when counts are tracked and to the
    /// survival fraction otherwise; untracked `W` columns are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,mean_W,var_W,survival_frac,ci_halfwidth\n");
        for n in 0..=self.max_level {
            match &self.w {
                Some(w) => {
                    let _ = writeln!(
                        out,
                        "{n},{},{},{},{}",
                        w.mean_w[n], w.var_w[n], self.survival_frac[n], w.ci_halfwidth[n]
                    );
                }
                None => {
                    let _ = writeln!(out, "{n},,,{},{}", self.survival_frac[n], self.survival_ci[n]);
                }
            }
        }
        out
    }
}

/// Combines traces in replica order.
pub fn aggregate(config: &SimConfig, traces: &[ReplicaTrace]) -> SimResult {
    let r = traces.len();
    let rf = r as f64;
    let mu = config.params.mu();
    let levels = config.max_level + 1;
    let mut survival_frac = Vec::with_capacity(levels);
    let mut survival_ci = Vec::with_capacity(levels);
    for n in 0..levels {
        let alive = traces.iter().filter(|t| t.alive[n]).count() as f64;
        let f = alive / rf;
        survival_frac.push(f);
        survival_ci.push(stats::Z95 * (f * (1.0 - f) / rf).sqrt());
    }
    let w = config.track_counts.then(|| {
        let mut s = MartingaleStats {
            mean_w: Vec::with_capacity(levels),
            var_w: Vec::with_capacity(levels),
            ci_halfwidth: Vec::with_capacity(levels),
            mean_w2: Vec::with_capacity(levels),
            var_w2: Vec::with_capacity(levels),
        };
        for n in 0..levels {
            let ws: Vec<f64> = traces
                .iter()
                .map(|t| frontier::normalized_count(&t.counts.as_ref().expect("tracked")[n], mu, n))
                .collect();
            let w2: Vec<f64> = ws.iter().map(|x| x * x).collect();
            let (m, v) = stats::mean_var(&ws);
            let (m2, v2) = stats::mean_var(&w2);
            s.mean_w.push(m);
            s.var_w.push(v);
            s.ci_halfwidth.push(stats::Z95 * (v / rf).sqrt());
            s.mean_w2.push(m2);
            s.var_w2.push(v2);
        }
        s
    });
    SimResult {
        dim: config.params.dim(),
        mu,
        max_level: config.max_level,
        replicas: r,
        seed: config.seed,
        survival_frac,
        survival_ci,
        w,
        pruned_replicas: traces.iter().filter(|t| t.pruned_at.is_some()).count(),
    }
}

/// Fraction of replicas with a nonempty frontier at each level `≤ N`.
/// The horizon is finite: this is survival to level `N`, not `|C₀| = ∞`.
pub fn estimate_survival(config: &SimConfig) -> Result<SimResult> {
    let traces = run_replicas(config)?;
    Ok(aggregate(config, &traces))
}

/// Per-level sample moments of `W_n = X_n/μⁿ`.
pub fn estimate_martingale(config: &SimConfig) -> Result<SimResult> {
    if !config.track_counts {
        return Err(Error::Domain("martingale estimates need tracked counts".into()));
    }
    if config.params.mu() <= 0.0 {
        return Err(Error::Domain("martingale estimates need mu > 0".into()));
    }
    let traces = run_replicas(config)?;
    Ok(aggregate(config, &traces))
}

/// Provenance of a run. Kept apart from [`SimResult`] so results stay
/// bit-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub wall_time_secs: f64,
    pub replicas: usize,
    pub max_level: usize,
    pub threads: Option<usize>,
}

/// Runs [`estimate_martingale`] or [`estimate_survival`] per the config and
/// times it.
pub fn simulate(config: &SimConfig) -> Result<(SimResult, RunMetadata)> {
    let start = Instant::now();
    let result = if config.track_counts {
        estimate_martingale(config)?
    } else {
        estimate_survival(config)?
    };
    let meta = RunMetadata {
        seed: config.seed,
        config_hash: config.config_hash(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        replicas: config.replicas,
        max_level: config.max_level,
        threads: config.threads,
    };
    Ok((result, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(p: &str, n: usize, r: usize, seed: u64, track: bool) -> SimConfig {
        SimConfig::new(EdgeParams::parse(p).unwrap(), n, r, seed, track).unwrap()
    }

    #[test]
    fn validation() {
        let p = EdgeParams::parse("0.5,0.5").unwrap();
        assert!(SimConfig::new(p.clone(), 0, 1, 0, false).is_err());
        assert!(SimConfig::new(p.clone(), 3, 0, 0, false).is_err());
        assert!(SimConfig::new(p.clone(), 41, 1, 0, true).is_err());
        assert!(SimConfig::new(p, 41, 1, 0, false).is_ok());
        let c = config("0.5,0.5", 3, 2, 0, false);
        assert!(estimate_martingale(&c).is_err());
    }

    #[test]
    fn degenerate_chain() {
        let c = config("1,0", 30, 5, 11, true);
        let r = estimate_martingale(&c).unwrap();
        let w = r.w.unwrap();
        assert!(w.mean_w.iter().all(|&m| m == 1.0));
        assert!(w.var_w.iter().all(|&v| v == 0.0));
        assert!(r.survival_frac.iter().all(|&f| f == 1.0));
    }

    #[test]
    fn all_open_gives_w_one() {
        let r = estimate_martingale(&config("3x1", 10, 3, 0, true)).unwrap();
        assert!(r.w.unwrap().mean_w.iter().all(|&m| (m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn survival_is_non_increasing() {
        let r = estimate_survival(&config("4x0.3", 40, 200, 3, false)).unwrap();
        assert!(r.survival_frac.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.survival_frac[0], 1.0);
    }

    #[test]
    fn mean_w_near_one() {
        let c = config("4x0.3", 8, 4000, 17, true);
        let r = estimate_martingale(&c).unwrap();
        let w = r.w.as_ref().unwrap();
        for n in 0..=8 {
            let se = w.std_error(n, r.replicas);
            assert!((w.mean_w[n] - 1.0).abs() <= 4.0 * se + 1e-12, "n={n}: {} ± {se}", w.mean_w[n]);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut a = config("5x0.3", 12, 64, 99, true);
        a.threads = Some(1);
        let mut b = a.clone();
        b.threads = Some(3);
        let ra = estimate_martingale(&a).unwrap();
        let rb = estimate_martingale(&b).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(ra.to_csv(), rb.to_csv());
        assert_eq!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn pruning_preserves_survival_when_supercritical() {
        let mut c = config("10x0.2", 14, 40, 5, false);
        c.prune_cap = Some(64);
        let pruned = estimate_survival(&c).unwrap();
        c.prune_cap = None;
        let full = estimate_survival(&c).unwrap();
        assert_eq!(pruned.survival_frac, full.survival_frac);
        assert!(pruned.pruned_replicas > 0);
    }

    #[test]
    fn csv_layout() {
        let r = estimate_survival(&config("0.5,0.5", 2, 4, 0, false)).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("level,mean_W,var_W,survival_frac,ci_halfwidth\n0,,,1,0\n"));
        assert_eq!(csv.lines().count(), 4);
        let (_, meta) = simulate(&config("0.5,0.5", 2, 4, 0, true)).unwrap();
        assert_eq!(meta.config_hash.len(), 64);
    }

    #[test]
    fn exhaustive_law_matches_simulation() {
        let p = EdgeParams::parse("1/2,1/2").unwrap();
        let c = SimConfig::new(p.clone(), 3, 20_000, 2024, true).unwrap();
        let traces = run_replicas(&c).unwrap();
        for n in 1..=3 {
            let law: Vec<(u64, f64)> = exact_count_distribution(&p, n)
                .unwrap()
                .iter()
                .map(|(k, r)| (*k, crate::prob::rational_to_f64(r)))
                .collect();
            let samples: Vec<u64> = traces
                .iter()
                .map(|t| t.counts.as_ref().unwrap()[n].iter_u64_digits().next().unwrap_or(0))
                .collect();
            let rep = chi_square_gof(&samples, &law).unwrap();
            assert!(rep.p_value > 1e-4, "n={n}: {rep:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn survival_monotone_in_p(
            base in prop::collection::vec(0.05f64..0.6, 2..6),
            bump in prop::collection::vec(0.0f64..0.4, 6),
            seed in any::<u64>(),
        ) {
            let low = EdgeParams::new(crate::prob::ProbVector::new(base.clone()).unwrap()).unwrap();
            let raised: Vec<f64> = base.iter().zip(&bump).map(|(b, u)| (b + u).min(1.0)).collect();
            let high = EdgeParams::new(crate::prob::ProbVector::new(raised).unwrap()).unwrap();
            let mut cl = SimConfig::new(low, 15, 20, seed, false).unwrap();
            cl.prune_cap = None;
            let mut ch = cl.clone();
            ch.params = high;
            let tl = run_replicas(&cl).unwrap();
            let th = run_replicas(&ch).unwrap();
            for (a, b) in tl.iter().zip(&th) {
                prop_assert!(b.survival_level() >= a.survival_level());
            }
        }
    }
}
