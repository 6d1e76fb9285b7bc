//! Acceptance gate: one test per numbered verification criterion, each
//! printing its pass/fail line with the measured values.

use ifire::flow::IntegratorConfig;
use ifire::verify::{self, CriterionResult};

fn gate(r: CriterionResult) {
    println!("{}", r.summary_line());
    for d in &r.details {
        println!("    {d}");
    }
    assert!(
        r.passed,
        "criterion {} ({}) failed:\n{}",
        r.id,
        r.name,
        r.details.join("\n")
    );
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn criterion_01_leaky_map_equivalence() {
    gate(verify::criterion1(&cfg()).unwrap());
}

#[test]
fn criterion_02_quadratic_map_equivalence() {
    gate(verify::criterion2(&cfg()).unwrap());
}

#[test]
fn criterion_03_fixed_point_formulas() {
    gate(verify::criterion3().unwrap());
}

#[test]
fn criterion_04_piecewise_map_structure() {
    gate(verify::criterion4().unwrap());
}

#[test]
fn criterion_05_quadratic_non_synchronization() {
    gate(verify::criterion5(&cfg()).unwrap());
}

#[test]
fn criterion_06_pair_timing_windows() {
    gate(verify::criterion6(&cfg()).unwrap());
}

#[test]
fn criterion_07_map_consistency_under_simulation() {
    gate(verify::criterion7(&cfg()).unwrap());
}

#[test]
fn criterion_08_perturbation_bound_audit() {
    gate(verify::criterion8(&cfg()).unwrap());
}

#[test]
fn criterion_09_ensemble_synchronization() {
    let (c9, _) = verify::criterion9_and_10(&cfg()).unwrap();
    gate(c9);
}

#[test]
fn criterion_10_synchrony_persistence() {
    let (_, c10) = verify::criterion9_and_10(&cfg()).unwrap();
    gate(c10);
}

#[test]
fn criterion_11_monotone_reduction() {
    gate(verify::criterion11(&cfg()).unwrap());
}

#[test]
fn criterion_12_cross_coupled_map() {
    gate(verify::criterion12().unwrap());
}
