mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::Duration;

use pop_smr::{ConcurrentSet, DebugAllocConfig, Domain, DomainConfig, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THREADS: usize = 4;
const RANGE: usize = 256;

/// Update-heavy churn on a shared set. Checks the debug allocator saw no
/// unsafe access, that set contents match the net effect of every
/// successful update, and that every allocation is accounted for after
/// teardown.
fn churn<S: Scheme, D: ConcurrentSet<S> + 'static>(run_for: Duration) {
    let cfg = DomainConfig::default()
        .with_threads(THREADS + 1)
        .with_reclaim_freq(32)
        .with_epoch_freq(8)
        .with_debug_alloc(DebugAllocConfig {
            quarantine: 512,
            abort_on_uaf: true,
            preempt_every: 16,
        });
    let d = Domain::<S>::new(cfg).unwrap();
    let set = Arc::new(D::with_range(&d, RANGE));
    let prefilled = {
        let mut h = d.register().unwrap();
        set.prefill(&mut h, RANGE / 2, RANGE, 1);
        set.keys(&mut h).len() as i64
    };
    let stop = Arc::new(AtomicBool::new(false));
    let start = Arc::new(Barrier::new(THREADS + 1));
    let workers: Vec<_> = (0..THREADS)
        .map(|t| {
            let (d, set, stop, start) = (
                Arc::clone(&d),
                Arc::clone(&set),
                Arc::clone(&stop),
                Arc::clone(&start),
            );
            thread::spawn(move || {
                let mut h = d.register().unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(t as u64);
                let mut net = 0i64;
                start.wait();
                while !stop.load(Ordering::Relaxed) {
                    let key = rng.gen_range(0..RANGE as i64);
                    if rng.gen_bool(0.5) {
                        net += set.insert(&mut h, key) as i64;
                    } else {
                        net -= set.remove(&mut h, key) as i64;
                    }
                }
                net
            })
        })
        .collect();
    start.wait();
    thread::sleep(run_for);
    stop.store(true, Ordering::Relaxed);
    let net: i64 = workers.into_iter().map(|w| w.join().unwrap()).sum();

    let mut h = d.register().unwrap();
    let keys = set.keys(&mut h);
    assert_eq!(
        keys.len() as i64,
        prefilled + net,
        "{} / {}",
        S::NAME,
        D::NAME
    );
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    drop(h);

    let st = d.stats();
    assert_eq!(
        st.retired,
        st.freed + st.unreclaimed,
        "{} / {}: {st:?}",
        S::NAME,
        D::NAME
    );
    drop(set);
    d.drain();
    let r = d.debug_report().unwrap();
    assert_eq!((r.uaf_detected, r.double_frees), (0, 0));
    assert_eq!(r.live, 0, "{} / {}: leaked {r:?}", S::NAME, D::NAME);
    assert!(r.is_conserved());
}

#[test]
fn all_pairs_survive_update_heavy_churn() {
    for_each_pair!(S, D => { churn::<S, D>(Duration::from_millis(150)); });
}
