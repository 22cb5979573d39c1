use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use pop_smr::{
    ConcurrentSet, Domain, Ebr, EpochPop, HarrisMichaelList, HashTable, He, HePop, Hp, HpPop,
    LazyList, Nr, Scheme,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{BenchConfig, DsKind, ReclaimerKind};
use crate::error::BenchError;

/// One metric sample taken by the coordinator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub at: Duration,
    pub max_retire_list: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchResult {
    pub total_ops: u64,
    pub inserts: u64,
    pub deletes: u64,
    pub contains: u64,
    /// Operations by reader threads in long-running-reads mode.
    pub read_ops: u64,
    pub throughput_mops: f64,
    pub read_throughput_mops: f64,
    /// Largest retire list of any thread over all samples.
    pub max_retire_list: usize,
    /// Same, restricted to samples taken while the stalled thread slept.
    pub stall_max_retire_list: Option<usize>,
    pub total_unreclaimed: u64,
    pub signals_sent: u64,
    pub handler_runs: u64,
    pub fallback_passes: u64,
    pub retired: u64,
    pub freed: u64,
    /// Largest retire list ever held by a reader thread (LRR mode).
    pub reader_retire_list: usize,
    pub uaf_detected: u64,
    pub double_frees: u64,
    pub wall_time: Duration,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Default)]
struct Counts {
    inserts: u64,
    deletes: u64,
    contains: u64,
    max_retire_list: usize,
}

impl Counts {
    fn total(&self) -> u64 {
        self.inserts + self.deletes + self.contains
    }
}

/// Counter-based stream per thread: same seed and tid, same keys.
fn thread_rng(seed: u64, tid: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tid as u64 + 1);
    rng
}

/// Runs one timed trial. In LRR mode the first half of the threads only
/// read across the whole key range and the second half update keys near
/// the head of the structure.
pub fn run_trial(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    cfg.validate()?;
    match cfg.reclaimer {
        ReclaimerKind::Nr => by_ds::<Nr>(cfg),
        ReclaimerKind::Hp => by_ds::<Hp>(cfg),
        ReclaimerKind::He => by_ds::<He>(cfg),
        ReclaimerKind::Ebr => by_ds::<Ebr>(cfg),
        ReclaimerKind::HpPop => by_ds::<HpPop>(cfg),
        ReclaimerKind::HePop => by_ds::<HePop>(cfg),
        ReclaimerKind::EpochPop => by_ds::<EpochPop>(cfg),
        ReclaimerKind::HpAsym => Err(BenchError::Unimplemented("hp-asym")),
    }
}

/// [`run_trial`] with LRR mode forced on.
pub fn run_lrr(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    let cfg = BenchConfig {
        lrr: true,
        ..cfg.clone()
    };
    run_trial(&cfg)
}

fn by_ds<S: Scheme>(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    match cfg.ds {
        DsKind::Hml => trial::<S, HarrisMichaelList<S>>(cfg),
        DsKind::Ll => trial::<S, LazyList<S>>(cfg),
        DsKind::Hmht => trial::<S, HashTable<S>>(cfg),
    }
}

fn trial<S: Scheme, D: ConcurrentSet<S> + 'static>(
    cfg: &BenchConfig,
) -> Result<BenchResult, BenchError> {
    let domain = Domain::<S>::new(cfg.domain_config())?;
    let set = Arc::new(D::with_range(&domain, cfg.key_range));
    {
        let mut h = domain.register()?;
        set.prefill(&mut h, cfg.key_range / 2, cfg.key_range, cfg.seed);
    }

    let stop = Arc::new(AtomicBool::new(false));
    let start = Arc::new(Barrier::new(cfg.threads + 1));
    let workers: Vec<_> = (0..cfg.threads)
        .map(|tid| {
            let (domain, set, stop, start) = (
                Arc::clone(&domain),
                Arc::clone(&set),
                Arc::clone(&stop),
                Arc::clone(&start),
            );
            let cfg = cfg.clone();
            thread::spawn(move || -> Result<(Counts, bool), BenchError> {
                let registered = domain.register();
                start.wait();
                let mut h = registered?;
                let reader = cfg.lrr && tid < cfg.threads / 2;
                let counts = work(&cfg, tid, reader, &*set, &mut h, &stop);
                Ok((counts, reader))
            })
        })
        .collect();

    start.wait();
    let began = Instant::now();
    let deadline = began + cfg.duration;
    let mut samples = Vec::new();
    loop {
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        thread::sleep(cfg.sample_every.min(deadline - now));
        samples.push(Sample {
            at: began.elapsed(),
            max_retire_list: domain.max_retire_len(),
        });
    }
    stop.store(true, Ordering::Relaxed);
    let elapsed = began.elapsed();

    let mut res = BenchResult::default();
    let mut first_err = None;
    for w in workers {
        match w.join() {
            Ok(Ok((c, reader))) => {
                res.inserts += c.inserts;
                res.deletes += c.deletes;
                res.contains += c.contains;
                if reader {
                    res.read_ops += c.total();
                    res.reader_retire_list = res.reader_retire_list.max(c.max_retire_list);
                }
            }
            Ok(Err(e)) => {
                first_err.get_or_insert(e);
            }
            Err(p) => {
                first_err.get_or_insert(BenchError::WorkerPanic(panic_text(&p)));
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }

    let st = domain.stats();
    res.total_ops = res.inserts + res.deletes + res.contains;
    let secs = elapsed.as_secs_f64();
    res.throughput_mops = res.total_ops as f64 / secs / 1e6;
    res.read_throughput_mops = res.read_ops as f64 / secs / 1e6;
    res.max_retire_list = samples.iter().map(|s| s.max_retire_list).max().unwrap_or(0);
    res.stall_max_retire_list = cfg.stall.map(|s| {
        samples
            .iter()
            .filter(|x| x.at >= s.at && x.at <= s.at + s.duration)
            .map(|x| x.max_retire_list)
            .max()
            .unwrap_or(0)
    });
    res.total_unreclaimed = st.unreclaimed;
    res.signals_sent = st.signals_sent;
    res.handler_runs = st.handler_runs;
    res.fallback_passes = st.fallback_passes;
    res.retired = st.retired;
    res.freed = st.freed;
    res.wall_time = elapsed;
    res.samples = samples;

    drop(set);
    domain.drain();
    if let Some(r) = domain.debug_report() {
        res.uaf_detected = r.uaf_detected;
        res.double_frees = r.double_frees;
    }
    Ok(res)
}

fn work<S: Scheme, D: ConcurrentSet<S>>(
    cfg: &BenchConfig,
    tid: usize,
    reader: bool,
    set: &D,
    h: &mut pop_smr::Handle<S>,
    stop: &AtomicBool,
) -> Counts {
    let mut rng = thread_rng(cfg.seed, tid);
    let mut c = Counts::default();
    let range = cfg.key_range as i64;
    // LRR writers stay within the first 5% of the keys.
    let update_range = (range / 20).max(1);
    let mut stall = cfg.stall.filter(|s| s.tid == tid);
    let began = Instant::now();
    while !stop.load(Ordering::Relaxed) {
        if let Some(s) = stall {
            if began.elapsed() >= s.at {
                stall = None;
                let key = rng.gen_range(0..range);
                set.contains_with(h, key, &mut || thread::sleep(s.duration));
                c.contains += 1;
                continue;
            }
        }
        if reader {
            set.contains(h, rng.gen_range(0..range));
            c.contains += 1;
        } else if cfg.lrr {
            let key = rng.gen_range(0..update_range);
            if rng.gen_bool(0.5) {
                set.insert(h, key);
                c.inserts += 1;
            } else {
                set.remove(h, key);
                c.deletes += 1;
            }
        } else {
            let key = rng.gen_range(0..range);
            let p = rng.gen_range(0..100);
            if p < cfg.insert_pct {
                set.insert(h, key);
                c.inserts += 1;
            } else if p < cfg.insert_pct + cfg.delete_pct {
                set.remove(h, key);
                c.deletes += 1;
            } else {
                set.contains(h, key);
                c.contains += 1;
            }
        }
        c.max_retire_list = c.max_retire_list.max(h.retire_len());
    }
    c
}

fn panic_text(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".to_string())
}

/// [`run_trial`] that also turns a panic into an error.
pub fn run_trial_caught(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    match panic::catch_unwind(AssertUnwindSafe(|| run_trial(cfg))) {
        Ok(r) => r,
        Err(p) => Err(BenchError::WorkerPanic(panic_text(&*p))),
    }
}
