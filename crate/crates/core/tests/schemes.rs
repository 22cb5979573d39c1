mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Barrier};
use std::thread;

use common::Cell;
use pop_smr::{
    DebugAllocConfig, Domain, DomainConfig, Ebr, EpochPop, He, HePop, Hp, HpPop, Nr, Reclaimable,
    Scheme,
};

/// A registered peer that opens an operation, optionally protects `link`,
/// and stays inside it until released.
struct Parked {
    tid: usize,
    release: Arc<Barrier>,
    join: thread::JoinHandle<()>,
}

impl Parked {
    fn start<S: Scheme>(d: &Arc<Domain<S>>, link: &Arc<AtomicUsize>, protect: bool) -> Parked {
        let (tx, rx) = mpsc::channel();
        let release = Arc::new(Barrier::new(2));
        let (d, link, r) = (Arc::clone(d), Arc::clone(link), Arc::clone(&release));
        let join = thread::spawn(move || {
            let mut h = d.register().unwrap();
            h.begin_op();
            if protect {
                h.protect(0, &link);
            }
            tx.send(h.tid()).unwrap();
            r.wait();
            h.end_op();
        });
        Parked {
            tid: rx.recv().unwrap(),
            release,
            join,
        }
    }

    fn finish(self) {
        self.release.wait();
        self.join.join().unwrap();
    }
}

fn config(freq: usize) -> DomainConfig {
    DomainConfig::default()
        .with_threads(4)
        .with_reclaim_freq(freq)
}

/// Retires `n` fresh nodes in separate operations.
fn churn<S: Scheme>(h: &mut pop_smr::Handle<S>, n: usize) {
    for i in 0..n {
        h.begin_op();
        let p = h.alloc(Cell::new(i as u64));
        unsafe { h.retire(p) };
        h.end_op();
    }
}

fn protected_node_survives<S: Scheme>() {
    // The quarantine keeps freed addresses from being handed out again.
    let d = Domain::<S>::new(config(32).with_debug_alloc(DebugAllocConfig::default())).unwrap();
    let mut me = d.register().unwrap();
    let target = me.alloc(Cell::new(99));
    let link = Arc::new(AtomicUsize::new(target as usize));
    let peer = Parked::start(&d, &link, true);

    // Unlink, then retire the protected node plus enough garbage for a pass.
    link.store(0, Ordering::Release);
    unsafe { me.retire(target) };
    churn(&mut me, 80);
    assert!(
        me.retired_addrs().contains(&(target as usize)),
        "{}: protected node was freed",
        S::NAME
    );
    assert!(!unsafe { (*target).header().is_freed() });
    if S::NAME != "ebr" {
        // EBR is stuck behind the open operation; everyone else makes progress.
        assert!(d.stats().freed > 0, "{}: nothing reclaimed", S::NAME);
    }

    peer.finish();
    churn(&mut me, 80);
    let alloc = d.debug_allocator().unwrap();
    assert!(
        !alloc.is_live(target as usize),
        "{}: node outlived its last reservation",
        S::NAME
    );
    assert_eq!(alloc.report().uaf_detected, 0);
}

#[test]
fn protected_nodes_survive_every_pointer_scheme() {
    protected_node_survives::<Hp>();
    protected_node_survives::<HpPop>();
    protected_node_survives::<He>();
    protected_node_survives::<HePop>();
    protected_node_survives::<EpochPop>();
    protected_node_survives::<Ebr>();
}

#[test]
fn hp_pop_frees_everything_unreserved_at_the_threshold() {
    let d = Domain::<HpPop>::new(config(8)).unwrap();
    let mut h = d.register().unwrap();
    churn(&mut h, 7);
    assert_eq!(h.retire_len(), 7);
    churn(&mut h, 1);
    assert_eq!(h.retire_len(), 0);
    let st = d.stats();
    assert_eq!((st.retired, st.freed, st.passes), (8, 8, 1));
}

#[test]
fn hp_pop_signals_only_other_threads() {
    let d = Domain::<HpPop>::new(config(8)).unwrap();
    let mut h = d.register().unwrap();
    churn(&mut h, 64);
    assert_eq!(
        d.stats().signals_sent,
        0,
        "a lone thread has nobody to ping"
    );

    let link = Arc::new(AtomicUsize::new(0));
    let peer = Parked::start(&d, &link, false);
    churn(&mut h, 64);
    let st = d.stats();
    assert!(st.signals_sent >= 8, "one ping per pass: {st:?}");
    assert!(d.publish_counter(peer.tid) >= 8);
    peer.finish();
}

#[test]
fn he_pop_advances_the_era_on_every_pass() {
    let d = Domain::<HePop>::new(config(4)).unwrap();
    let mut h = d.register().unwrap();
    let start = d.epoch();
    churn(&mut h, 12);
    assert_eq!(d.epoch(), start + 3);
    let epochs = {
        churn(&mut h, 3);
        h.retired_epochs()
    };
    assert_eq!(epochs, vec![start + 3; 3]);
}

#[test]
fn he_pop_frees_nodes_born_after_the_reserved_era() {
    let d = Domain::<HePop>::new(config(8)).unwrap();
    let mut me = d.register().unwrap();
    let old = me.alloc(Cell::new(0));
    let link = Arc::new(AtomicUsize::new(old as usize));
    let peer = Parked::start(&d, &link, true);
    let reserved = d.epoch();
    d.advance_epoch();

    link.store(0, Ordering::Release);
    unsafe { me.retire(old) };
    churn(&mut me, 7);
    // Only the node whose lifetime spans the reserved era is kept.
    assert_eq!(me.retired_addrs(), vec![old as usize]);
    assert!(d.shared_eras(peer.tid).contains(&reserved));
    peer.finish();
}

#[test]
fn epoch_pop_with_quiescent_peers_never_signals() {
    let d = Domain::<EpochPop>::new(config(64).with_epoch_freq(10)).unwrap();
    let link = Arc::new(AtomicUsize::new(0));
    // A registered but idle peer: the epoch moves past it freely.
    let (tx, rx) = mpsc::channel::<()>();
    let (done_tx, done_rx) = mpsc::channel::<()>();
    let d2 = Arc::clone(&d);
    let idle = thread::spawn(move || {
        let _h = d2.register().unwrap();
        tx.send(()).unwrap();
        done_rx.recv().unwrap();
    });
    rx.recv().unwrap();
    let mut h = d.register().unwrap();
    churn(&mut h, 50_000);
    let st = d.stats();
    assert_eq!(st.signals_sent, 0);
    assert_eq!(st.fallback_passes, 0);
    assert!(h.retire_len() <= 64, "{}", h.retire_len());
    done_tx.send(()).unwrap();
    idle.join().unwrap();
    drop(link);
}

#[test]
fn epoch_pop_falls_back_when_a_peer_stalls_inside_an_operation() {
    let freq = 64;
    let d = Domain::<EpochPop>::new(config(freq).with_epoch_freq(1)).unwrap();
    let mut me = d.register().unwrap();
    let pinned = me.alloc(Cell::new(5));
    let link = Arc::new(AtomicUsize::new(pinned as usize));
    let peer = Parked::start(&d, &link, true);
    assert_ne!(d.reserved_epoch(peer.tid), pop_smr::MAX);

    link.store(0, Ordering::Release);
    unsafe { me.retire(pinned) };
    let threshold = d.config().fallback_threshold();
    let mut worst = 0;
    for _ in 0..2000 {
        churn(&mut me, 1);
        worst = worst.max(me.retire_len());
    }
    let st = d.stats();
    assert!(st.fallback_passes > 0);
    assert!(st.signals_sent > 0);
    assert!(worst <= threshold + freq, "retire list reached {worst}");
    // The fallback scan honours the stalled peer's pointer reservation.
    assert!(me.retired_addrs().contains(&(pinned as usize)));
    peer.finish();
}

#[test]
fn ebr_garbage_grows_without_bound_behind_a_stalled_peer() {
    let d = Domain::<Ebr>::new(config(64).with_epoch_freq(1)).unwrap();
    let mut me = d.register().unwrap();
    let link = Arc::new(AtomicUsize::new(0));
    let peer = Parked::start(&d, &link, false);
    churn(&mut me, 2000);
    assert_eq!(me.retire_len(), 2000);
    peer.finish();
    churn(&mut me, 64);
    assert!(me.retire_len() < 64);
}

#[test]
fn nr_never_frees_until_the_domain_goes() {
    let d = Domain::<Nr>::new(config(4)).unwrap();
    let mut h = d.register().unwrap();
    churn(&mut h, 100);
    assert_eq!(h.retire_len(), 100);
    assert_eq!(d.stats().freed, 0);
    drop(h);
    assert_eq!(d.drain(), 100);
}

#[test]
fn baselines_never_signal() {
    fn run<S: Scheme>() {
        let d = Domain::<S>::new(config(8)).unwrap();
        let link = Arc::new(AtomicUsize::new(0));
        let peer = Parked::start(&d, &link, false);
        let mut h = d.register().unwrap();
        churn(&mut h, 100);
        peer.finish();
        assert_eq!(d.stats().signals_sent, 0, "{}", S::NAME);
    }
    run::<Nr>();
    run::<Hp>();
    run::<He>();
    run::<Ebr>();
}

#[test]
fn retire_stamps_the_current_epoch() {
    let d = Domain::<EpochPop>::new(config(1024).with_epoch_freq(1)).unwrap();
    let mut h = d.register().unwrap();
    churn(&mut h, 3);
    let e = h.retired_epochs();
    assert_eq!(e.len(), 3);
    assert!(e.windows(2).all(|w| w[0] < w[1]), "{e:?}");
}
