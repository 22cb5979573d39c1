//! Small-history linearizability checking for the concurrent sets.
//!
//! [`run`] drives a set from a few persistent threads, one short history at
//! a time, recording each operation's invocation and response on a global
//! ticket clock. [`is_linearizable`] then searches for a sequential order
//! that respects real time and agrees with a plain set.

use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Barrier};
use std::thread;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DebugAllocConfig, DomainConfig};
use crate::domain::Domain;
use crate::ds::ConcurrentSet;
use crate::error::DomainError;
use crate::schemes::Scheme;

/// Keys are drawn from `[0, KEYS)` so the sequential state fits in a byte.
pub const KEYS: i64 = 4;
/// Upper bound on operations per history.
pub const MAX_OPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Insert(i64),
    Remove(i64),
    Contains(i64),
}

impl Op {
    fn key(self) -> i64 {
        match self {
            Op::Insert(k) | Op::Remove(k) | Op::Contains(k) => k,
        }
    }

    /// Applies the op to a bitmask set; returns the new state and result.
    pub fn apply(self, state: u8) -> (u8, bool) {
        let bit = 1u8 << self.key();
        let present = state & bit != 0;
        match self {
            Op::Insert(_) => (state | bit, !present),
            Op::Remove(_) => (state & !bit, present),
            Op::Contains(_) => (state, present),
        }
    }

    fn random(rng: &mut impl Rng) -> Op {
        let key = rng.gen_range(0..KEYS);
        match rng.gen_range(0..10) {
            0..=3 => Op::Insert(key),
            4..=7 => Op::Remove(key),
            _ => Op::Contains(key),
        }
    }
}

/// One completed operation. `call` and `ret` are ticket-clock readings
/// taken just before invocation and just after response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub thread: usize,
    pub op: Op,
    pub result: bool,
    pub call: u64,
    pub ret: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    /// Keys present before the concurrent part, as a bitmask.
    pub initial: u8,
    pub events: Vec<Event>,
}

impl History {
    /// Whether two threads' operations were in flight at the same time.
    pub fn has_overlap(&self) -> bool {
        self.events.iter().any(|a| {
            self.events
                .iter()
                .any(|b| a.thread != b.thread && a.call < b.call && b.call < a.ret)
        })
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "initial {:04b}", self.initial)?;
        for e in &self.events {
            writeln!(
                f,
                "  T{} [{:>3}, {:>3}] {:?} -> {}",
                e.thread, e.call, e.ret, e.op, e.result
            )?;
        }
        Ok(())
    }
}

/// Exhaustive search for a legal linearization.
pub fn is_linearizable(h: &History) -> bool {
    assert!(
        h.events.len() <= 16,
        "history too long for a brute-force check"
    );
    let n = h.events.len();
    let all = if n == 16 { u16::MAX } else { (1u16 << n) - 1 };
    let mut dead = HashSet::new();
    search(&h.events, all, 0, h.initial, &mut dead)
}

fn search(events: &[Event], all: u16, done: u16, state: u8, dead: &mut HashSet<(u16, u8)>) -> bool {
    if done == all {
        return true;
    }
    if dead.contains(&(done, state)) {
        return false;
    }
    // Only an op invoked before every pending op has returned may go next.
    let horizon = events
        .iter()
        .enumerate()
        .filter(|(i, _)| done & (1 << i) == 0)
        .map(|(_, e)| e.ret)
        .min()
        .unwrap_or(u64::MAX);
    for (i, e) in events.iter().enumerate() {
        if done & (1 << i) != 0 || e.call > horizon {
            continue;
        }
        let (next, result) = e.op.apply(state);
        if result == e.result && search(events, all, done | (1 << i), next, dead) {
            return true;
        }
    }
    dead.insert((done, state));
    false
}

#[derive(Debug, Clone)]
pub struct LinConfig {
    pub histories: usize,
    /// Concurrent threads per history, 2 or 3.
    pub threads: usize,
    pub seed: u64,
    pub domain: DomainConfig,
}

impl LinConfig {
    pub fn new(histories: usize, threads: usize, seed: u64) -> Self {
        // Small thresholds so that reclamation actually runs between the
        // short histories; the epoch fallback bound still has to cover
        // every reservation. Frequent preemption makes ops overlap even on
        // a single core.
        let domain = DomainConfig::default()
            .with_threads(threads + 1)
            .with_reclaim_freq(32)
            .with_epoch_freq(2)
            .with_debug_alloc(DebugAllocConfig {
                quarantine: 1024,
                abort_on_uaf: false,
                preempt_every: 2,
            });
        LinConfig {
            histories,
            threads,
            seed,
            domain,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LinReport {
    pub histories: usize,
    pub failures: usize,
    pub first_failure: Option<History>,
    /// Histories in which ops of different threads overlapped in time.
    pub overlapping: usize,
    pub uaf_detected: u64,
    pub double_frees: u64,
}

impl LinReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.uaf_detected == 0 && self.double_frees == 0
    }
}

/// Per-history work handed to the workers.
struct Round<D> {
    set: Option<Arc<D>>,
    scripts: Vec<Vec<Op>>,
    events: Vec<Event>,
}

/// Runs `config.histories` random histories of at most [`MAX_OPS`] ops on a
/// fresh set each, checking every one.
pub fn run<S, D>(config: &LinConfig) -> Result<LinReport, DomainError>
where
    S: Scheme,
    D: ConcurrentSet<S> + 'static,
{
    assert!(
        (2..=3).contains(&config.threads),
        "histories use 2 or 3 threads"
    );
    let domain = Domain::<S>::new(config.domain.clone())?;
    let clock = Arc::new(AtomicU64::new(0));
    let round = Arc::new(Mutex::new(Round::<D> {
        set: None,
        scripts: vec![Vec::new(); config.threads],
        events: Vec::new(),
    }));
    // Coordinator plus workers meet twice per history: go and done.
    let barrier = Arc::new(Barrier::new(config.threads + 1));
    let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));

    let workers: Vec<_> = (0..config.threads)
        .map(|t| {
            let domain = Arc::clone(&domain);
            let clock = Arc::clone(&clock);
            let round = Arc::clone(&round);
            let barrier = Arc::clone(&barrier);
            let stop = Arc::clone(&stop);
            let seed = config.seed;
            thread::spawn(move || -> Result<(), DomainError> {
                let mut h = domain.register()?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9 * (t as u64 + 1)));
                loop {
                    barrier.wait();
                    if stop.load(Ordering::Acquire) {
                        return Ok(());
                    }
                    let (set, script) = {
                        let r = round.lock();
                        (Arc::clone(r.set.as_ref().unwrap()), r.scripts[t].clone())
                    };
                    let mut mine = Vec::with_capacity(script.len());
                    for op in script {
                        if rng.gen_bool(0.5) {
                            thread::yield_now();
                        }
                        let call = clock.fetch_add(1, Ordering::SeqCst);
                        if rng.gen_bool(0.25) {
                            thread::yield_now();
                        }
                        let result = match op {
                            Op::Insert(k) => set.insert(&mut h, k),
                            Op::Remove(k) => set.remove(&mut h, k),
                            Op::Contains(k) => set.contains(&mut h, k),
                        };
                        let ret = clock.fetch_add(1, Ordering::SeqCst);
                        mine.push(Event {
                            thread: t,
                            op,
                            result,
                            call,
                            ret,
                        });
                    }
                    drop(set);
                    round.lock().events.extend(mine);
                    barrier.wait();
                }
            })
        })
        .collect();

    let mut coordinator = domain.register()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = LinReport::default();
    for _ in 0..config.histories {
        let set = Arc::new(D::with_range(&domain, KEYS as usize));
        let initial: u8 = rng.gen_range(0..1 << KEYS);
        for k in 0..KEYS {
            if initial & (1 << k) != 0 {
                set.insert(&mut coordinator, k);
            }
        }
        let total = rng.gen_range(config.threads..=MAX_OPS);
        let mut scripts = vec![Vec::new(); config.threads];
        for i in 0..total {
            let op = Op::random(&mut rng);
            // every thread gets at least one op
            let t = if i < config.threads {
                i
            } else {
                rng.gen_range(0..config.threads)
            };
            scripts[t].push(op);
        }
        {
            let mut r = round.lock();
            r.set = Some(set);
            r.scripts = scripts;
            r.events.clear();
        }
        barrier.wait();
        barrier.wait();
        let history = {
            let mut r = round.lock();
            r.set = None;
            History {
                initial,
                events: std::mem::take(&mut r.events),
            }
        };
        report.histories += 1;
        if history.has_overlap() {
            report.overlapping += 1;
        }
        if !is_linearizable(&history) {
            report.failures += 1;
            report.first_failure.get_or_insert(history);
        }
    }
    stop.store(true, Ordering::Release);
    barrier.wait();
    for w in workers {
        w.join().expect("lincheck worker panicked")?;
    }
    drop(coordinator);
    if let Some(d) = domain.debug_report() {
        report.uaf_detected = d.uaf_detected;
        report.double_frees = d.double_frees;
    }
    Ok(report)
}
