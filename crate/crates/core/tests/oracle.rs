use std::collections::BTreeSet;

use nnsmt::camus::{Domain, LinearConstraint, PropertySpec, Region, SimulatorSpec};
use nnsmt::fixtures::{
    always_alert_net, conv_alert_net, correct_alert_net, false_alarm_net, identity_net, missed_pixel_net, r, zero_net,
};
use nnsmt::oracle::{brute_force_verify, params_of_index, DEFAULT_MAX_ENUM_BITS};
use nnsmt::solver::confirm_counterexample;
use nnsmt::{Error, Status, Verdict};

fn params(cells: &[(usize, usize)]) -> Option<BTreeSet<(usize, usize)>> {
    Some(cells.iter().copied().collect())
}

#[test]
fn correct_net_is_proven_after_every_image() {
    let sim = SimulatorSpec::binary(2, 2);
    let net = correct_alert_net(&sim, &Region::bottom_half(&sim));
    let report = brute_force_verify(&net, &sim, &PropertySpec::danger_zone_alert(&sim), 20).unwrap();
    assert_eq!(report.verdict, Verdict::Proven);
    assert_eq!(report.evaluations, 16);
    let report = brute_force_verify(&net, &sim, &PropertySpec::no_false_alert(&sim), 20).unwrap();
    assert_eq!(report.verdict, Verdict::Proven);
}

#[test]
fn zero_net_fails_on_the_first_zone_obstacle() {
    let sim = SimulatorSpec::binary(2, 2);
    let report = brute_force_verify(&zero_net(&sim), &sim, &PropertySpec::danger_zone_alert(&sim), 20).unwrap();
    let cex = report.verdict.counterexample().unwrap();
    assert_eq!(cex.params, params(&[(1, 1)]));
    assert!(cex.confirmed);
    assert_eq!(report.evaluations, 2);
    assert_eq!(cex.image, vec![vec![r(0, 1), r(0, 1)], vec![r(0, 1), r(1, 1)]]);
    assert_eq!(cex.assignment["actual_input_0_0_1_1"], r(1, 1));
}

#[test]
fn single_pixel_always_alert() {
    let sim = SimulatorSpec::binary(1, 1);
    let net = always_alert_net(&sim);
    let dza = brute_force_verify(&net, &sim, &PropertySpec::danger_zone_alert(&sim), 20).unwrap();
    assert_eq!(dza.verdict, Verdict::Proven);
    assert_eq!(dza.evaluations, 2);
    let nfa = brute_force_verify(&net, &sim, &PropertySpec::no_false_alert(&sim), 20).unwrap();
    assert_eq!(nfa.verdict.counterexample().unwrap().params, params(&[]));
    assert_eq!(nfa.evaluations, 1);
}

#[test]
fn faulty_nets_are_caught() {
    let sim = SimulatorSpec::binary(3, 3);
    let zone = Region::bottom_half(&sim);
    let dza = PropertySpec::danger_zone_alert(&sim);
    let nfa = PropertySpec::no_false_alert(&sim);
    let missed = brute_force_verify(&missed_pixel_net(&sim, &zone), &sim, &dza, 20).unwrap();
    assert_eq!(missed.verdict.status(), Status::Falsified);
    let alarm = brute_force_verify(&false_alarm_net(&sim, &zone), &sim, &nfa, 20).unwrap();
    assert_eq!(alarm.verdict.status(), Status::Falsified);
    let conv = conv_alert_net(&sim, &zone);
    assert_eq!(brute_force_verify(&conv, &sim, &dza, 20).unwrap().verdict, Verdict::Proven);
    assert_eq!(brute_force_verify(&conv, &sim, &nfa, 20).unwrap().verdict, Verdict::Proven);
}

#[test]
fn enumeration_order_is_row_major_msb_first() {
    let sim = SimulatorSpec::binary(2, 3);
    assert_eq!(params_of_index(&sim, 0), BTreeSet::new());
    assert_eq!(params_of_index(&sim, 1), [(1, 2)].into());
    assert_eq!(params_of_index(&sim, 32), [(0, 0)].into());
    assert_eq!(params_of_index(&sim, 63).len(), 6);
}

#[test]
fn oversized_and_interval_grids_are_refused() {
    let sim = SimulatorSpec::binary(5, 5);
    let err = brute_force_verify(&zero_net(&sim), &sim, &PropertySpec::danger_zone_alert(&sim), DEFAULT_MAX_ENUM_BITS);
    assert!(matches!(err, Err(Error::GridTooLarge { pixels: 25, cap_bits: 20 })));
    let mut sim = SimulatorSpec::binary(2, 2);
    sim.domain = Domain::Interval;
    let err = brute_force_verify(&zero_net(&sim), &sim, &PropertySpec::danger_zone_alert(&sim), 20);
    assert!(matches!(err, Err(Error::InvalidSpec(_))));
}

#[test]
fn identity_nets() {
    let sim = SimulatorSpec::binary(2, 2);
    let exact = PropertySpec::IdentityReconstruction;
    let tol = PropertySpec::ToleranceReconstruction { epsilon: r(0, 1), norm: Default::default() };
    for prop in [&exact, &tol] {
        assert_eq!(brute_force_verify(&identity_net(&sim, None), &sim, prop, 20).unwrap().verdict, Verdict::Proven);
        let bad = brute_force_verify(&identity_net(&sim, Some(2)), &sim, prop, 20).unwrap();
        assert_eq!(bad.verdict.counterexample().unwrap().params, params(&[(1, 0)]));
    }
    let loose = PropertySpec::ToleranceReconstruction { epsilon: r(1, 2), norm: "l1".parse().unwrap() };
    assert_eq!(brute_force_verify(&identity_net(&sim, Some(2)), &sim, &loose, 20).unwrap().verdict, Verdict::Proven);
}

#[test]
fn confirmation_matches_exact_evaluation() {
    let sim = SimulatorSpec::binary(2, 2);
    let dza = PropertySpec::danger_zone_alert(&sim);
    let zero = vec![vec![r(0, 1), r(0, 1)], vec![r(0, 1), r(1, 1)]];
    assert!(confirm_counterexample(&zero_net(&sim), &zero, &sim, &dza).unwrap());
    let net = correct_alert_net(&sim, &Region::bottom_half(&sim));
    assert!(!confirm_counterexample(&net, &zero, &sim, &dza).unwrap());
}

#[test]
fn io_contract_by_enumeration() {
    let sim = SimulatorSpec::binary(2, 2);
    let prop = PropertySpec::IoContract {
        pre: vec![LinearConstraint::parse("in0 = 0").unwrap()],
        post: vec![LinearConstraint::parse("out0 < 1/2").unwrap()],
    };
    let net = identity_net(&sim, None);
    assert_eq!(brute_force_verify(&net, &sim, &prop, 20).unwrap().verdict, Verdict::Proven);
    let prop = PropertySpec::IoContract { pre: vec![], post: vec![LinearConstraint::parse("out3 <= 1/2").unwrap()] };
    let cex = brute_force_verify(&net, &sim, &prop, 20).unwrap();
    assert_eq!(cex.verdict.counterexample().unwrap().params, params(&[(1, 1)]));
}
