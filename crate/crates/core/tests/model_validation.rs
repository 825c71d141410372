mod common;

use common::*;
use ifc_core::linalg::{hermitian_eigenvalues, submatrix};
use ifc_core::model::{parse_channel, parse_channel_spec, parse_noise, validate_noise_correlation};
use ifc_core::{c, Spec, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

/// Builds the matrix column by column and checks `rho rho^H <= Sigma_{k-1}` at
/// every step. Returns the smallest eigenvalue seen across the steps.
fn recursive_margin(m: &DMatrix<C64>) -> f64 {
    let k = m.nrows();
    let mut margin = f64::INFINITY;
    for col in 1..k {
        let head: Vec<usize> = (0..col).collect();
        let block = submatrix(m, &head, &head);
        let rho = submatrix(m, &head, &[col]);
        let diff = block - &rho * rho.adjoint();
        margin = margin.min(hermitian_eigenvalues(&diff)[0]);
    }
    margin
}

#[test]
fn eigenvalue_test_agrees_with_recursive_constraint() {
    let mut r = rng(2024);
    let (mut accepted, mut rejected, mut checked) = (0, 0, 0);
    while checked < 1000 {
        let k = r.gen_range(2..=5);
        let radius = r.gen_range(0.1..0.9);
        let mut m = DMatrix::<C64>::identity(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                let z = C64::from_polar(radius * r.gen::<f64>().sqrt(), r.gen_range(0.0..std::f64::consts::TAU));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let margin = recursive_margin(&m);
        if margin.abs() < 1e-8 {
            continue;
        }
        checked += 1;
        let valid = validate_noise_correlation(m).is_ok();
        assert_eq!(valid, margin >= 0.0, "margin {margin}");
        if valid {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    // both outcomes must actually be exercised
    assert!(accepted > 100 && rejected > 100, "{accepted} accepted, {rejected} rejected");
}

proptest! {
    #[test]
    fn channel_round_trip_is_bit_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.gen_range(1..=5);
        let h = channel(&mut r, k);
        let text = serde_json::to_string(&h.to_json()).unwrap();
        prop_assert_eq!(parse_channel(&text).unwrap(), h);
    }

    #[test]
    fn noise_round_trip_is_bit_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.gen_range(1..=5);
        let s = sigma(&mut r, k);
        let text = serde_json::to_string(&s.to_json()).unwrap();
        prop_assert_eq!(parse_noise(&text).unwrap(), s);
    }
}

#[test]
fn spec_documents() {
    match parse_channel_spec(r#"{"K":2,"H":[[[1,0],[0.5,0]],[[0,0],[2,0]]]}"#).unwrap() {
        Spec::Channel(h) => {
            assert!(h.is_upper_triangular());
            assert_eq!(h.gain(0, 1), c(0.5, 0.0));
        }
        Spec::Noise(_) => panic!("expected a channel"),
    }
    let identity = r#"{"K":3,"Sigma":[[[1,0],[0,0],[0,0]],[[0,0],[1,0],[0,0]],[[0,0],[0,0],[1,0]]]}"#;
    assert_eq!(
        parse_channel_spec(identity).unwrap(),
        Spec::Noise(ifc_core::NoiseCorrelation::identity(3))
    );
}
