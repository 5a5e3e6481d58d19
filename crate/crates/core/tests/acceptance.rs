//! One test per acceptance criterion, each printing a PASS/FAIL line.

use zdcover_core::verify::{Battery, NAMES};

fn check(id: u8) {
    let r = Battery::default().run(id);
    println!("{}", r.line());
    assert!(
        r.passed,
        "criterion {id} ({}) failed: {}",
        NAMES[id as usize - 1],
        r.detail
    );
}

#[test]
fn criterion_01_renormalization_identity() {
    check(1);
}

#[test]
fn criterion_02_matrix_pins() {
    check(2);
}

#[test]
fn criterion_03_zero_drift() {
    check(3);
}

#[test]
fn criterion_04_non_coboundary() {
    check(4);
}

#[test]
fn criterion_05_sigma2_concordance() {
    check(5);
}

#[test]
fn criterion_06_local_limit() {
    check(6);
}

#[test]
fn criterion_07_gaussian_integrals() {
    check(7);
}

#[test]
fn criterion_08_weak_rational_ergodicity_constant() {
    check(8);
}

#[test]
fn criterion_09_expansion_trend() {
    check(9);
}

#[test]
fn criterion_10_asclt_average() {
    check(10);
}

#[test]
fn criterion_11_determinism() {
    check(11);
}
