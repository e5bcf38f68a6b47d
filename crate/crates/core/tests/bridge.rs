//! Cross-module consistency between the exact oracle, the walk engine, the
//! packer and the simulator.

use num_rational::BigRational;
use num_traits::One;
use operc_core::oracle::{a_n_exact, b_m_exact, second_moment_exact};
use operc_core::packer::{pack_full, packed_vector};
use operc_core::prob::{rational_to_f64, EdgeParams, ProbVector};
use operc_core::sim::{self, SimConfig};
use operc_core::walk::{collision_series, collision_series_exact, lambda_truncated, tau_dist, tau_dist_exact};

#[test]
fn oracle_b_matches_first_meeting_law() {
    for text in ["1/2,1/2", "1/5,3/10,1/2", "1/4,1/4,1/4,1/4", "1/3,2/3"] {
        let params = EdgeParams::parse(text).unwrap();
        let q = params.p().exact().unwrap().to_vec();
        let tau = tau_dist_exact(&q, 4).unwrap();
        assert_eq!(b_m_exact(&params, 1).unwrap(), BigRational::one());
        for m in 2..=4 {
            assert_eq!(b_m_exact(&params, m).unwrap(), tau[m - 1], "{text} m={m}");
        }
    }
}

#[test]
fn oracle_a_dominates_collision_probability() {
    // With mu = 1, a_n is the same-endpoint mass of two walks after the
    // shared-edge correction; it is at least the collision probability.
    let params = EdgeParams::parse("1/2,1/3,1/6").unwrap();
    let c = collision_series_exact(params.p().exact().unwrap(), 4).unwrap();
    for n in 1..=4 {
        assert!(a_n_exact(&params, n).unwrap() >= c[n], "n={n}");
    }
}

#[test]
fn exact_and_float_tau_agree() {
    let pv = ProbVector::parse("1/7,2/7,4/7").unwrap();
    let exact = tau_dist_exact(pv.exact().unwrap(), 40).unwrap();
    let float = tau_dist(&pv, 40).unwrap();
    for (a, b) in exact.iter().zip(&float.probs) {
        assert!((rational_to_f64(a) - b).abs() < 1e-13);
    }
}

#[test]
fn packing_raises_lambda_to_the_packed_value() {
    let q = ProbVector::new(vec![0.2, 0.15, 0.1, 0.2, 0.05, 0.2, 0.1]).unwrap();
    let (packed, _) = pack_full(&q, 5).unwrap();
    assert_eq!(packed.entries(), packed_vector(7, 5).as_slice());
    let before = lambda_truncated(&q, 300, 5).unwrap();
    let after = lambda_truncated(&packed, 300, 5).unwrap();
    assert!(after.partial_sum() >= before.partial_sum());
    assert!(after.upper_estimate().unwrap() <= 10.0 / 5.0);
    let c = collision_series(&q, 10).unwrap();
    assert!(c.iter().all(|&x| (0.0..=1.0).contains(&x)));
}

#[test]
fn simulated_second_moment_tracks_exact_value() {
    let params = EdgeParams::parse("2/3,2/3").unwrap();
    let exact = rational_to_f64(&second_moment_exact(&params, 3).unwrap().w2_direct);
    let config = SimConfig::new(params, 3, 40_000, 77, true).unwrap();
    let r = sim::estimate_martingale(&config).unwrap();
    let w = r.w.unwrap();
    let se = w.std_error_w2(3, r.replicas);
    assert!((w.mean_w2[3] - exact).abs() <= 4.0 * se, "{} vs {exact} (se {se})", w.mean_w2[3]);
}
