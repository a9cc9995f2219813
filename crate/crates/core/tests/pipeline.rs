//! Library-level pipelines: separation to certified tests to schedules.

use consistency_lab::distances::{hull_variation, kraft_bound, optimal_test, total_variation};
use consistency_lab::measures::{FiniteMeasure, Law, Partition};
use consistency_lab::partition_tests::{build_frequency_test, exact_error, separation, Role};
use consistency_lab::report::Verdict;
use consistency_lab::scenarios::{
    bound, build_schedule, distinguish, scenario_nested_alternatives, scenario_sine_indistinguishable, schedule,
    simulate, RunSettings, Scenario,
};
use consistency_lab::scheduler::{interleave, nested_family, CertifiedSequence};
use consistency_lab::Error;

fn fm(w: &[f64]) -> FiniteMeasure {
    FiniteMeasure::new(w.to_vec()).unwrap()
}

fn certified(h: &[f64], a: &[f64]) -> CertifiedSequence {
    let report = separation(
        &[Law::Finite(fm(h))],
        &[Law::Finite(fm(a))],
        &Partition::identity(h.len()).unwrap(),
    )
    .unwrap();
    CertifiedSequence::from_frequency_test(build_frequency_test(&report, 1).unwrap())
}

#[test]
fn kraft_bound_is_attained_by_the_optimal_test() {
    let a = [fm(&[0.6, 0.3, 0.1]), fm(&[0.2, 0.5, 0.3])];
    let b = [fm(&[0.1, 0.1, 0.8])];
    let (test, hull) = optimal_test(&a, &b).unwrap();
    let (alpha, beta) = test.worst_case(&a, &b);
    assert!((alpha + beta - kraft_bound(&a, &b).unwrap()).abs() < 1e-9);
    assert!((hull.value - hull_variation(&a, &b).unwrap().value).abs() < 1e-12);
    // The hull distance never exceeds any pairwise distance.
    for p in &a {
        assert!(hull.value <= total_variation(p, &b[0]).unwrap() + 1e-12);
    }
}

#[test]
fn frequency_test_error_shrinks_with_n() {
    let p = fm(&[0.5, 0.5]);
    let q = fm(&[0.8, 0.2]);
    let report = separation(
        &[Law::Finite(p.clone())],
        &[Law::Finite(q.clone())],
        &Partition::identity(2).unwrap(),
    )
    .unwrap();
    let mut last = f64::INFINITY;
    for n in [10, 40, 160] {
        let test = build_frequency_test(&report, n).unwrap();
        let total = exact_error(&test, &p, Role::Hypothesis).unwrap() + exact_error(&test, &q, Role::Alternative).unwrap();
        assert!(total < last);
        let cert = test.certificate();
        assert!(total <= cert.alpha(n) + cert.beta(n) + 1e-12);
        last = total;
    }
}

#[test]
fn nested_schedule_tail_drops_to_zero() {
    let pieces = vec![
        (certified(&[0.5, 0.5], &[0.9, 0.1]), None),
        (certified(&[0.5, 0.5], &[0.2, 0.8]), None),
    ];
    let family = nested_family(&pieces).unwrap();
    let sched = interleave(&family, 4096).unwrap();
    assert_eq!(sched.block_lengths[0], 1);
    let b = sched.boundaries();
    assert!(b.windows(2).all(|w| w[0] < w[1]));
    let k = sched.first_k_below(0.01, 1).expect("tail falls below 1%");
    assert!(k < sched.n_max);
    assert!(sched.tail_after(sched.n_max, 1) <= sched.chain_bound(family.len()) + 1e-12);
}

#[test]
fn scenario_json_drives_every_command() {
    let s = scenario_nested_alternatives(&[vec![0.5, 0.5]], &[(vec![0.9, 0.1], None), (vec![0.1, 0.9], None)], 512)
        .unwrap();
    let s = Scenario::from_json(&s.to_json()).unwrap();
    let settings = RunSettings {
        seed: 3,
        replications: Some(200),
    };
    for out in [
        distinguish(&s).unwrap(),
        bound(&s).unwrap(),
        simulate(&s, &settings).unwrap(),
        schedule(&s, &settings).unwrap(),
    ] {
        assert_eq!(out.verdict, Verdict::Ok, "{}", out.command);
        assert!(!out.tables.is_empty());
    }
    let (_, sched) = build_schedule(&s).unwrap();
    assert_eq!(sched.n_max, 512);
}

#[test]
fn even_sine_frequency_is_indistinguishable_on_halves() {
    let s = scenario_sine_indistinguishable(2, 64, Partition::half_split()).unwrap();
    let out = distinguish(&s).unwrap();
    assert!(matches!(out.verdict, Verdict::Indistinguishable(_)));
    assert!(matches!(schedule(&s, &RunSettings::new(1)), Err(Error::Construction(_))));
}
