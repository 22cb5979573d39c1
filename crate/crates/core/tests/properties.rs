use std::collections::BTreeSet;

use pop_smr::lincheck::{is_linearizable, Event, History, Op};
use pop_smr::schemes::can_free_sorted;
use pop_smr::{
    can_free, ConcurrentSet, DebugAllocConfig, Domain, DomainConfig, EpochPop, HarrisMichaelList,
    HashTable, HePop, HpPop, LazyList, MAX,
};
use proptest::prelude::*;

fn op() -> impl Strategy<Value = (u8, i64)> {
    (0u8..3, -4i64..20)
}

fn replay<S: pop_smr::Scheme, D: ConcurrentSet<S>>(ops: &[(u8, i64)]) {
    let cfg = DomainConfig::default()
        .with_threads(1)
        .with_reclaim_freq(8)
        .with_debug_alloc(DebugAllocConfig {
            abort_on_uaf: true,
            ..Default::default()
        });
    let d = Domain::<S>::new(cfg).unwrap();
    let mut h = d.register().unwrap();
    let set = D::with_range(&d, 24);
    let mut model = BTreeSet::new();
    for &(kind, key) in ops {
        let (got, want) = match kind {
            0 => (set.insert(&mut h, key), model.insert(key)),
            1 => (set.remove(&mut h, key), model.remove(&key)),
            _ => (set.contains(&mut h, key), model.contains(&key)),
        };
        assert_eq!(got, want);
    }
    assert_eq!(set.keys(&mut h), model.into_iter().collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn lists_track_a_sequential_model(ops in prop::collection::vec(op(), 0..200)) {
        replay::<HpPop, HarrisMichaelList<HpPop>>(&ops);
        replay::<HePop, LazyList<HePop>>(&ops);
        replay::<EpochPop, HashTable<EpochPop>>(&ops);
    }

    #[test]
    fn sorted_and_linear_era_checks_agree(
        birth in 0u64..1000,
        span in 0u64..1000,
        eras in prop::collection::vec(prop_oneof![0u64..2000, Just(MAX)], 0..16),
    ) {
        let retire = birth + span;
        let mut sorted: Vec<u64> = eras.iter().copied().filter(|&e| e != MAX).collect();
        sorted.sort_unstable();
        prop_assert_eq!(can_free(birth, retire, &eras), can_free_sorted(birth, retire, &sorted));
    }

    #[test]
    fn every_sequential_history_is_linearizable(
        initial in 0u8..16,
        ops in prop::collection::vec((0u8..3, 0i64..4), 0..10),
    ) {
        let mut state = initial;
        let events = ops.iter().enumerate().map(|(i, &(kind, key))| {
            let op = match kind {
                0 => Op::Insert(key),
                1 => Op::Remove(key),
                _ => Op::Contains(key),
            };
            let (next, result) = op.apply(state);
            state = next;
            Event { thread: i % 3, op, result, call: 2 * i as u64, ret: 2 * i as u64 + 1 }
        }).collect();
        let h = History { initial, events };
        prop_assert!(is_linearizable(&h));
    }

    #[test]
    fn flipping_one_sequential_result_breaks_linearizability(
        initial in 0u8..16,
        ops in prop::collection::vec((0u8..3, 0i64..4), 1..10),
        victim in any::<prop::sample::Index>(),
    ) {
        let mut state = initial;
        let mut events: Vec<Event> = ops.iter().enumerate().map(|(i, &(kind, key))| {
            let op = match kind {
                0 => Op::Insert(key),
                1 => Op::Remove(key),
                _ => Op::Contains(key),
            };
            let (next, result) = op.apply(state);
            state = next;
            Event { thread: 0, op, result, call: 2 * i as u64, ret: 2 * i as u64 + 1 }
        }).collect();
        let v = victim.index(events.len());
        events[v].result = !events[v].result;
        let h = History { initial, events };
        prop_assert!(!is_linearizable(&h));
    }
}
