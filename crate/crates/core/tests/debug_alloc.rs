mod common;

use std::sync::atomic::AtomicUsize;

use common::Cell;
use pop_smr::{DebugAllocConfig, Domain, DomainConfig, HpPop, Nr, Reclaimable};

fn debug_config(quarantine: usize, abort: bool) -> DomainConfig {
    DomainConfig::default()
        .with_threads(2)
        .with_reclaim_freq(1)
        .with_debug_alloc(DebugAllocConfig {
            quarantine,
            abort_on_uaf: abort,
            ..Default::default()
        })
}

#[test]
fn counts_balance_after_mixed_frees() {
    let d = Domain::<HpPop>::new(debug_config(8, false)).unwrap();
    let mut h = d.register().unwrap();
    let kept: Vec<_> = (0..5).map(|i| h.alloc(Cell::new(i))).collect();
    for i in 0..20 {
        let p = h.alloc(Cell::new(i));
        unsafe { h.retire(p) };
    }
    let r = d.debug_report().unwrap();
    assert!(r.is_conserved(), "{r:?}");
    assert_eq!((r.allocated, r.retired, r.freed, r.live), (25, 20, 20, 5));
    assert_eq!((r.quarantined, r.evicted), (8, 12));
    for p in kept {
        unsafe { d.dispose_unpublished(p) };
    }
    assert!(d.debug_report().unwrap().is_conserved());
}

#[test]
fn read_of_a_freed_node_is_detected_while_quarantined() {
    let d = Domain::<HpPop>::new(debug_config(64, false)).unwrap();
    let mut h = d.register().unwrap();
    let node = h.alloc(Cell::new(42));
    let link = AtomicUsize::new(node as usize);
    h.begin_op();
    h.protect(0, &link);
    unsafe { h.check(node) };
    h.end_op();
    assert_eq!(d.debug_report().unwrap().uaf_detected, 0);

    unsafe { h.retire(node) };
    assert!(!d.debug_allocator().unwrap().is_live(node as usize));
    // A buggy reader that still holds the stale pointer.
    let stale = AtomicUsize::new(node as usize);
    h.begin_op();
    h.protect(0, &stale);
    unsafe { h.check(node) };
    h.end_op();
    assert_eq!(d.debug_report().unwrap().uaf_detected, 1);
}

#[test]
fn freed_nodes_are_flagged_and_poisoned() {
    let d = Domain::<HpPop>::new(debug_config(64, false)).unwrap();
    let mut h = d.register().unwrap();
    let node = h.alloc(Cell::new(7));
    unsafe {
        assert!(!(*node).is_poisoned());
        h.retire(node);
        assert!((*node).header().is_freed());
        assert!((*node).is_poisoned());
    }
}

#[test]
#[should_panic(expected = "use-after-free of node")]
fn abort_mode_panics_on_first_detection() {
    let d = Domain::<HpPop>::new(debug_config(64, true)).unwrap();
    let mut h = d.register().unwrap();
    let node = h.alloc(Cell::new(1));
    unsafe { h.retire(node) };
    let stale = AtomicUsize::new(node as usize);
    h.begin_op();
    h.protect(0, &stale);
    unsafe { h.check(node) };
}

#[test]
fn second_free_is_counted_not_performed() {
    let d = Domain::<Nr>::new(debug_config(64, false)).unwrap();
    let h = d.register().unwrap();
    let node = h.alloc(Cell::new(3));
    unsafe {
        d.dispose_unpublished(node);
        d.dispose_unpublished(node);
    }
    let r = d.debug_report().unwrap();
    assert_eq!((r.freed, r.double_frees), (1, 1));
    assert!(r.is_conserved());
}

#[test]
fn nothing_leaks_once_the_domain_is_gone() {
    let d = Domain::<Nr>::new(debug_config(4, false)).unwrap();
    let mut h = d.register().unwrap();
    for i in 0..10 {
        let p = h.alloc(Cell::new(i));
        unsafe { h.retire(p) };
    }
    drop(h);
    assert_eq!(d.drain(), 10);
    let r = d.debug_report().unwrap();
    assert_eq!((r.live, r.freed), (0, 10));
    assert!(r.is_conserved());
}
