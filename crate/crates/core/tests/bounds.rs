mod common;

use common::{channel, close, real_channel, rng, sigma};
use ifc_core::achievability::tin_sum_rate;
use ifc_core::construct::build_z_channel;
use ifc_core::gaussian_info::{build_joint, diff_entropy, x_label, y_label};
use ifc_core::model::Family;
use ifc_core::outer_bound::{
    count_terms, enumerate_terms, etw_term_min, etw_term_value, kra_term_min, kra_term_value, region,
    region_with_mode,
};
use ifc_core::{c, BoundTerm, ChannelMatrix, NoiseCorrelation, OptimizerConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn entropy(j: &ifc_core::JointGaussian, labels: &[String]) -> f64 {
    if labels.is_empty() {
        0.0
    } else {
        diff_entropy(j, labels).unwrap()
    }
}

/// I(A;B|C) = h(A,C) + h(B,C) - h(A,B,C) - h(C), all by determinants.
fn four_entropy_mi(j: &ifc_core::JointGaussian, a: &[String], b: &[String], cond: &[String]) -> f64 {
    let join = |parts: &[&[String]]| parts.iter().flat_map(|p| p.iter().cloned()).collect::<Vec<_>>();
    entropy(j, &join(&[a, cond])) + entropy(j, &join(&[b, cond])) - entropy(j, &join(&[a, b, cond]))
        - entropy(j, cond)
}

fn kra_oracle(h: &ChannelMatrix, s: &NoiseCorrelation, t: &BoundTerm) -> f64 {
    let k = h.k();
    let j = build_joint(h, s, &[]).unwrap();
    let outside: Vec<String> = (0..k).filter(|u| !t.subset.contains(u)).map(x_label).collect();
    let mut total = 0.0;
    for step in 0..t.perm.len() {
        let a = vec![y_label(t.perm[step])];
        let b: Vec<String> = t.perm[step..].iter().map(|&u| x_label(u)).collect();
        let mut cond: Vec<String> = t.perm[..step].iter().map(|&u| x_label(u)).collect();
        cond.extend(t.perm[..step].iter().map(|&u| y_label(u)));
        cond.extend(outside.iter().cloned());
        total += four_entropy_mi(&j, &a, &b, &cond);
    }
    total
}

fn random_term(r: &mut rand_chacha::ChaCha8Rng, k: usize) -> BoundTerm {
    let mut users: Vec<usize> = (0..k).collect();
    users.shuffle(r);
    let size = r.gen_range(1..=k);
    BoundTerm::new(users[..size].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kra_value_matches_entropy_identity(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let h = channel(&mut r, k);
        let s = sigma(&mut r, k);
        let t = random_term(&mut r, k);
        let fast = kra_term_value(&h, &s, &t).unwrap();
        let slow = kra_oracle(&h, &s, &t);
        prop_assert!(close(fast, slow, 1e-9), "{fast} vs {slow} for {t:?}");
    }

    #[test]
    fn etw_value_dominated_by_its_minimum(seed in any::<u64>(), k in 2usize..=3) {
        let mut r = rng(seed);
        let h = channel(&mut r, k);
        let t = random_term(&mut r, k);
        let zeros = vec![c(0.0, 0.0); t.perm.len()];
        let at_zero = etw_term_value(&h, &t, &zeros).unwrap();
        let min = etw_term_min(&h, &t, &OptimizerConfig::default()).unwrap();
        prop_assert!(min.value <= at_zero, "{} > {at_zero}", min.value);
        let again = etw_term_value(&h, &t, &min.rhos).unwrap();
        prop_assert!(close(again, min.value, 1e-9));
    }
}

#[test]
fn kra_minimum_never_exceeds_random_evaluations() {
    let mut r = rng(11);
    let cfg = OptimizerConfig::default();
    for k in [2, 3] {
        for _ in 0..4 {
            let h = channel(&mut r, k);
            let t = random_term(&mut r, k);
            let min = kra_term_min(&h, &t, &cfg).unwrap();
            for _ in 0..10 {
                let s = sigma(&mut r, k);
                let v = kra_term_value(&h, &s, &t).unwrap();
                assert!(min.value <= v + 1e-12, "{} > {v}", min.value);
            }
            let at_witness = kra_term_value(&h, &min.sigma, &t).unwrap();
            assert!(close(at_witness, min.value, 1e-9));
        }
    }
}

#[test]
fn singleton_terms_are_single_user_rates() {
    let mut r = rng(3);
    for k in 1..=4 {
        let h = channel(&mut r, k);
        let s = sigma(&mut r, k);
        for u in 0..k {
            let t = BoundTerm::new(vec![u]).unwrap();
            let expected = (1.0 + h.direct_gain(u).powi(2)).log2();
            assert!(close(kra_term_value(&h, &s, &t).unwrap(), expected, 1e-12));
        }
    }
}

#[test]
fn enumeration_covers_every_ordering_once() {
    for k in 1..=5 {
        let terms = enumerate_terms(k).unwrap();
        assert_eq!(terms.len() as u128, count_terms(k));
        let mut seen = std::collections::HashSet::new();
        for t in &terms {
            let mut sorted = t.perm.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, t.subset);
            assert!(seen.insert(t.perm.clone()));
        }
        for w in terms.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!((a.subset.len(), &a.subset, &a.perm) < (b.subset.len(), &b.subset, &b.perm));
        }
    }
}

#[test]
fn z_channel_region_meets_successive_decoding() {
    let mut r = rng(29);
    let cfg = OptimizerConfig::default();
    for k in [2, 3] {
        for _ in 0..3 {
            let s = sigma(&mut r, k);
            let gains: Vec<f64> = (0..k).map(|_| common::log_uniform(&mut r, 0.25, 4.0)).collect();
            let h = build_z_channel(&s, &gains).unwrap();
            let full = kra_term_value(&h, &s, &BoundTerm::full_identity(k)).unwrap();
            assert!(close(full, tin_sum_rate(&h), 1e-9));
            let report = region(&h, &cfg, &[Family::Kra, Family::Etw]).unwrap();
            assert!(close(report.sum_rate_upper, tin_sum_rate(&h), 1e-9), "{} vs {}", report.sum_rate_upper, tin_sum_rate(&h));
            assert!(report.consistent);
        }
    }
}

#[test]
fn etw_without_cross_gains_is_interference_free() {
    let mut r = rng(5);
    let cfg = OptimizerConfig::default();
    for _ in 0..10 {
        let g = [common::log_uniform(&mut r, 0.25, 4.0), common::log_uniform(&mut r, 0.25, 4.0)];
        let h = ChannelMatrix::from_real_rows(&[vec![g[0], 0.0], vec![0.0, g[1]]]).unwrap();
        let expected: f64 = g.iter().map(|x| (1.0 + x * x).log2()).sum();
        let report = region_with_mode(&h, &cfg, &[Family::Etw], true).unwrap();
        assert!(close(report.sum_rate_upper, expected, 1e-9));
    }
}

#[test]
fn sum_rate_upper_never_below_interference_as_noise() {
    let mut r = rng(41);
    let cfg = OptimizerConfig::default();
    for k in [2, 3] {
        for _ in 0..4 {
            let h = real_channel(&mut r, k);
            let report = region(&h, &cfg, &[Family::Kra, Family::Etw]).unwrap();
            assert!(report.sum_rate_upper >= report.lower_bounds.tin - 1e-9);
            assert!(report.consistent);
        }
    }
}

#[test]
fn region_is_deterministic_for_a_seed() {
    let mut r = rng(8);
    let h = channel(&mut r, 3);
    let cfg = OptimizerConfig {
        seed: 1234,
        ..OptimizerConfig::default()
    };
    let a = serde_json::to_string(&region(&h, &cfg, &[Family::Kra, Family::Etw]).unwrap()).unwrap();
    let b = serde_json::to_string(&region(&h, &cfg, &[Family::Kra, Family::Etw]).unwrap()).unwrap();
    assert_eq!(a, b);
}
