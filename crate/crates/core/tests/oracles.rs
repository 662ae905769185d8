//! Designers checked against independent numerical minimizers.

mod common;

use common::oracle::*;

fn check(name: &str, seeds: u64, f: fn(u64) -> (f64, f64)) {
    for seed in 0..seeds {
        let (got, oracle) = f(seed);
        assert!((got - oracle).abs() <= TOL, "{name} seed {seed}: {got} vs oracle {oracle}");
    }
}

#[test]
fn scalar_precoder_matches_golden_section() {
    check("scalar precoder", SCALAR_PRECODER_SEEDS, scalar_precoder);
}

#[test]
fn precoder_program_matches_dual() {
    check("precoder dual", PRECODER_DUAL_SEEDS, precoder_dual);
}

#[test]
fn forwarding_matches_projected_gradient() {
    for seed in 0..FORWARDING_SEEDS {
        let (got, oracle) = forwarding(seed);
        assert!(got <= oracle + TOL, "seed {seed}: closed form {got} worse than {oracle}");
    }
    check("forwarding", FORWARDING_SEEDS, forwarding);
}

#[test]
fn single_user_precoder_reduces_to_point_to_point() {
    check("point to point", POINT_TO_POINT_SEEDS, point_to_point);
}

#[test]
fn covariance_sdp_plus_constants_is_the_mse() {
    check("covariance sdp", COVARIANCE_SDP_SEEDS, covariance_sdp);
}
