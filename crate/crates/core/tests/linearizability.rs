mod common;

use std::time::Instant;

use pop_smr::lincheck::{self, LinConfig};
use pop_smr::{ConcurrentSet, Scheme};

const HISTORIES: usize = 10_000;

fn check_pair<S: Scheme, D: ConcurrentSet<S> + 'static>() {
    for threads in [2, 3] {
        let start = Instant::now();
        let cfg = LinConfig::new(HISTORIES / 2, threads, 0x5eed + threads as u64);
        let report = lincheck::run::<S, D>(&cfg).unwrap();
        println!(
            "{:<10} {:<5} {threads} threads: {} histories ({} overlapping), {} failures in {:?}",
            S::NAME,
            D::NAME,
            report.histories,
            report.overlapping,
            report.failures,
            start.elapsed()
        );
        if let Some(h) = &report.first_failure {
            panic!("{} / {}: non-linearizable history\n{h}", S::NAME, D::NAME);
        }
        assert!(report.passed(), "{} / {}: {report:?}", S::NAME, D::NAME);
        assert_eq!(report.histories, HISTORIES / 2);
        assert!(report.overlapping > 0, "no history exercised concurrency");
    }
}

#[test]
fn all_pairs_are_linearizable_on_small_histories() {
    for_each_pair!(S, D => { check_pair::<S, D>(); });
}

/// Check-then-act set: membership test and update are separate critical
/// sections, so two racing inserts of one key can both succeed.
struct RacySet(parking_lot::Mutex<std::collections::BTreeSet<i64>>);

impl<S: Scheme> ConcurrentSet<S> for RacySet {
    const NAME: &'static str = "racy";

    fn with_range(_: &std::sync::Arc<pop_smr::Domain<S>>, _: usize) -> Self {
        RacySet(Default::default())
    }

    fn insert(&self, _: &mut pop_smr::Handle<S>, key: i64) -> bool {
        let absent = !self.0.lock().contains(&key);
        std::thread::yield_now();
        self.0.lock().insert(key);
        absent
    }

    fn remove(&self, _: &mut pop_smr::Handle<S>, key: i64) -> bool {
        let present = self.0.lock().contains(&key);
        std::thread::yield_now();
        self.0.lock().remove(&key);
        present
    }

    fn contains_with(&self, _: &mut pop_smr::Handle<S>, key: i64, _: &mut dyn FnMut()) -> bool {
        self.0.lock().contains(&key)
    }

    fn keys(&self, _: &mut pop_smr::Handle<S>) -> Vec<i64> {
        self.0.lock().iter().copied().collect()
    }
}

#[test]
fn harness_catches_a_check_then_act_race() {
    let cfg = LinConfig::new(2000, 3, 11);
    let report = lincheck::run::<pop_smr::Nr, RacySet>(&cfg).unwrap();
    assert!(report.failures > 0, "{report:?}");
    let h = report.first_failure.unwrap();
    assert!(!lincheck::is_linearizable(&h));
    println!("first violation:\n{h}");
}
