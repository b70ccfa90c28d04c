mod common;

use common::{shaper_gradient_error, surrogate_gradient_error, GRAD_TOL};
use kgwalk_core::shaper::ShaperKind;

#[test]
fn distmult_loss_gradient_matches_central_differences() {
    for seed in 0..20 {
        let err = shaper_gradient_error(seed, ShaperKind::DistMult);
        assert!(err < GRAD_TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn complex_loss_gradient_matches_central_differences() {
    for seed in 0..20 {
        let err = shaper_gradient_error(seed, ShaperKind::ComplEx);
        assert!(err < GRAD_TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn surrogate_gradient_matches_central_differences() {
    for seed in 0..20 {
        let err = surrogate_gradient_error(seed);
        assert!(err < GRAD_TOL, "seed {seed}: relative error {err:e}");
    }
}
