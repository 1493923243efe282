use std::collections::BTreeSet;

use gpurace::oracle::{predictable_races, DEFAULT_BUDGET, DEFAULT_LIMIT};
use gpurace::trace::{parse_trace, validate_trace, write_trace, EventKind, Trace};
use gpurace::workloads::{gen_litmus, gen_random, RandomConfig, CORPUS};
use gpurace::{compare, detect, order_matrix, prepare_trace, DetectorKind, Options, RaceReport};
use proptest::prelude::*;

fn random(seed: u64, events: usize) -> Trace {
    gen_random(seed, &RandomConfig { events, ..RandomConfig::default() }).unwrap()
}

fn keys(reports: &[RaceReport]) -> BTreeSet<(usize, usize, String)> {
    reports.iter().map(|r| (r.prior.event, r.current.event, format!("{:?}{:?}", r.kind, r.location))).collect()
}

#[test]
fn corpus_matches_expected_verdicts() {
    for l in CORPUS {
        let trace = prepare_trace(gen_litmus(l.name).unwrap()).unwrap().trace;
        let c = compare(&trace, &Options::default(), trace.len().max(DEFAULT_LIMIT), DEFAULT_BUDGET);
        assert_eq!(c.verdicts(), Some(l.expected), "{}", l.name);
    }
}

#[test]
fn corpus_traces_validate_after_preparation() {
    for l in CORPUS {
        let p = prepare_trace(gen_litmus(l.name).unwrap()).unwrap();
        assert_eq!(validate_trace(&p.trace), vec![], "{}", l.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn written_traces_parse_back(seed in any::<u64>(), events in 1usize..=30) {
        let t = random(seed, events);
        prop_assert_eq!(parse_trace(&write_trace(&t)).unwrap(), t);
    }

    #[test]
    fn gen_random_is_a_function_of_its_seed(seed in any::<u64>()) {
        prop_assert_eq!(random(seed, 30), random(seed, 30));
    }

    /// Everything HB leaves unordered GWCP leaves unordered too, so every
    /// HB report has a GWCP counterpart.
    #[test]
    fn hb_reports_are_gwcp_reports(seed in any::<u64>(), events in 1usize..=30) {
        let t = random(seed, events);
        let g = keys(&detect(&t, DetectorKind::Gwcp, &Options::default()));
        let h = keys(&detect(&t, DetectorKind::Hb, &Options::default()));
        prop_assert!(h.is_subset(&g), "hb {:?} gwcp {:?}", h, g);
    }

    #[test]
    fn gwcp_order_is_within_hb_order(seed in any::<u64>(), events in 1usize..=30) {
        let t = random(seed, events);
        let g = order_matrix(&t, DetectorKind::Gwcp, &Options::default()).unwrap();
        let h = order_matrix(&t, DetectorKind::Hb, &Options::default()).unwrap();
        for &(i, j) in &g.ordered {
            prop_assert!(h.is_ordered(i, j), "({}, {})", i, j);
        }
    }

    #[test]
    fn program_order_is_always_ordered(seed in any::<u64>()) {
        let t = random(seed, 30);
        for kind in [DetectorKind::Gwcp, DetectorKind::Hb] {
            let m = order_matrix(&t, kind, &Options::default()).unwrap();
            for (a, &i) in m.events.iter().enumerate() {
                for &j in &m.events[a + 1..] {
                    if t.events[i].tid() == t.events[j].tid() {
                        prop_assert!(m.is_ordered(i, j));
                    }
                }
            }
        }
    }

    #[test]
    fn order_matrix_ignores_clock_representation(seed in any::<u64>()) {
        let t = random(seed, 30);
        let dense = Options { compress: false, inactive_opt: false, ..Options::default() };
        for kind in [DetectorKind::Gwcp, DetectorKind::Hb] {
            prop_assert_eq!(
                order_matrix(&t, kind, &Options::default()).unwrap().ordered,
                order_matrix(&t, kind, &dense).unwrap().ordered
            );
        }
    }

    #[test]
    fn oracle_pairs_are_conflicting_accesses(seed in any::<u64>()) {
        let t = random(seed, 12);
        let r = predictable_races(&t, DEFAULT_LIMIT, DEFAULT_BUDGET).unwrap();
        prop_assert!(r.complete);
        for &(i, j) in &r.pairs {
            prop_assert!(i < j);
            match (&t.events[i], &t.events[j]) {
                (
                    EventKind::Access { tid: a, loc: la, write: wa, .. },
                    EventKind::Access { tid: b, loc: lb, write: wb, .. },
                ) => {
                    prop_assert_ne!(a, b);
                    prop_assert_eq!(la, lb);
                    prop_assert!(*wa || *wb);
                }
                _ => prop_assert!(false, "pair ({}, {}) is not two accesses", i, j),
            }
        }
    }

    #[test]
    fn gwcp_races_imply_predictable_races(seed in any::<u64>()) {
        let t = random(seed, 12);
        if !detect(&t, DetectorKind::Gwcp, &Options::default()).is_empty() {
            prop_assert!(predictable_races(&t, DEFAULT_LIMIT, DEFAULT_BUDGET).unwrap().has_race());
        }
    }

    /// Appending events never retracts an earlier report.
    #[test]
    fn reports_grow_with_the_trace(seed in any::<u64>(), cut in 0usize..30) {
        let t = random(seed, 30);
        let mut prefix = t.clone();
        prefix.events.truncate(cut.min(t.len()));
        for kind in [DetectorKind::Gwcp, DetectorKind::Hb, DetectorKind::Lockset] {
            let short = detect(&prefix, kind, &Options::default());
            let full = detect(&t, kind, &Options::default());
            prop_assert_eq!(&full[..short.len()], &short[..]);
        }
    }
}
