use std::io::Write;

use nsa_core::verify::{self, CriterionResult};

const SEED: u64 = 20240601;

// Written to the raw stream so the line shows even when the harness captures output.
fn check(r: CriterionResult) {
    let _ = writeln!(std::io::stderr(), "{}", r.line());
    assert!(r.passed, "criterion {} failed: {}", r.id, r.detail);
}

#[test]
fn c1_lattice_matches_galerkin() {
    check(verify::criterion_lattice_vs_galerkin());
}

#[test]
fn c2_singular_space() {
    check(verify::criterion_singular_space(SEED));
}

#[test]
fn c3_multiplicity() {
    check(verify::criterion_multiplicity(SEED));
}

#[test]
fn c4_leading_order() {
    check(verify::criterion_leading_order(SEED));
}

#[test]
fn c5_projections() {
    check(verify::criterion_projections(SEED));
}

#[test]
fn c6_semigroup_decay() {
    check(verify::criterion_semigroup_decay(SEED));
}

#[test]
fn c7_line_resolvent() {
    check(verify::criterion_line_resolvent());
}

#[test]
fn c8_parabolic() {
    check(verify::criterion_parabolic());
}

#[test]
fn c9_contraction() {
    check(verify::criterion_contraction(SEED));
}
