//! Debug allocation layer: tracks live nodes, quarantines freed ones so
//! their memory is not recycled, and flags dereferences of freed nodes.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;

use crate::config::DebugAllocConfig;
use crate::header::{Reclaimable, Retired};
use crate::signal;

const SHARDS: usize = 16;

/// Byte pattern written over a freed payload.
pub const POISON: u8 = 0xDB;
/// `POISON` repeated across a word.
pub const POISON_WORD: u64 = u64::from_ne_bytes([POISON; 8]);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DebugReport {
    pub allocated: u64,
    pub retired: u64,
    /// Nodes logically freed (flagged, poisoned and quarantined).
    pub freed: u64,
    /// Quarantined nodes whose memory has actually been returned.
    pub evicted: u64,
    pub live: u64,
    pub quarantined: u64,
    pub uaf_detected: u64,
    pub double_frees: u64,
}

impl DebugReport {
    /// `allocated = freed + live`, and every freed node is either still
    /// quarantined or evicted.
    pub fn is_conserved(&self) -> bool {
        self.allocated == self.freed + self.live && self.freed == self.evicted + self.quarantined
    }
}

#[derive(Debug)]
struct Freed {
    node: Retired,
    freed_by: i32,
}

#[derive(Debug)]
pub struct DebugAllocator {
    config: DebugAllocConfig,
    /// Live node address -> allocating OS thread.
    live: [Mutex<HashMap<usize, i32>>; SHARDS],
    quarantine: Mutex<VecDeque<Freed>>,
    allocated: AtomicU64,
    retired: AtomicU64,
    freed: AtomicU64,
    evicted: AtomicU64,
    uaf: AtomicU64,
    double_free: AtomicU64,
}

fn shard(addr: usize) -> usize {
    (addr >> 4).wrapping_mul(0x9E37_79B9) % SHARDS
}

impl DebugAllocator {
    pub fn new(config: DebugAllocConfig) -> Self {
        DebugAllocator {
            config,
            live: std::array::from_fn(|_| Mutex::new(HashMap::new())),
            quarantine: Mutex::new(VecDeque::new()),
            allocated: AtomicU64::new(0),
            retired: AtomicU64::new(0),
            freed: AtomicU64::new(0),
            evicted: AtomicU64::new(0),
            uaf: AtomicU64::new(0),
            double_free: AtomicU64::new(0),
        }
    }

    pub(crate) fn on_alloc(&self, addr: usize) {
        self.live[shard(addr)]
            .lock()
            .insert(addr, signal::current_tid());
        self.allocated.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn on_retire(&self) {
        self.retired.fetch_add(1, Ordering::Relaxed);
    }

    /// Logically frees `node`: flags it, poisons the payload and parks it in
    /// quarantine. Memory is returned only once `quarantine` later frees
    /// have pushed it out.
    pub(crate) fn release(&self, node: Retired) {
        let addr = node.addr();
        if self.live[shard(addr)].lock().remove(&addr).is_none() {
            // Not live: either freed before or never ours. Leak it rather
            // than corrupt the heap.
            self.double_free.fetch_add(1, Ordering::Relaxed);
            if self.config.abort_on_uaf {
                panic!("double free of node {addr:#x}");
            }
            return;
        }
        node.header().mark_freed();
        unsafe { node.poison() };
        self.freed.fetch_add(1, Ordering::Relaxed);
        let evict = {
            let mut q = self.quarantine.lock();
            q.push_back(Freed {
                node,
                freed_by: signal::current_tid(),
            });
            if q.len() > self.config.quarantine {
                q.pop_front()
            } else {
                None
            }
        };
        if let Some(old) = evict {
            self.evicted.fetch_add(1, Ordering::Relaxed);
            unsafe { old.node.dispose() };
        }
    }

    /// Flags a dereference of a freed node. Counts it, or panics with the
    /// allocation and free sites when `abort_on_uaf` is set.
    ///
    /// # Safety
    /// `node` must come from this allocator and must not have been evicted
    /// from the quarantine yet.
    #[inline]
    pub unsafe fn check_access<T: Reclaimable>(&self, node: *const T) {
        let n = unsafe { &*node };
        if n.header().is_freed() || n.is_poisoned() {
            self.uaf.fetch_add(1, Ordering::Relaxed);
            if self.config.abort_on_uaf {
                panic!("{}", self.describe(node as usize));
            }
        }
    }

    fn describe(&self, addr: usize) -> String {
        let q = self.quarantine.lock();
        match q.iter().find(|f| f.node.addr() == addr) {
            Some(f) => format!(
                "use-after-free of node {addr:#x}: freed by thread {}, read by thread {}",
                f.freed_by,
                signal::current_tid()
            ),
            None => format!(
                "use-after-free of node {addr:#x} (no longer quarantined), read by thread {}",
                signal::current_tid()
            ),
        }
    }

    /// Whether `addr` is currently a live allocation.
    pub fn is_live(&self, addr: usize) -> bool {
        self.live[shard(addr)].lock().contains_key(&addr)
    }

    pub fn report(&self) -> DebugReport {
        DebugReport {
            allocated: self.allocated.load(Ordering::Relaxed),
            retired: self.retired.load(Ordering::Relaxed),
            freed: self.freed.load(Ordering::Relaxed),
            evicted: self.evicted.load(Ordering::Relaxed),
            live: self.live.iter().map(|s| s.lock().len() as u64).sum(),
            quarantined: self.quarantine.lock().len() as u64,
            uaf_detected: self.uaf.load(Ordering::Relaxed),
            double_frees: self.double_free.load(Ordering::Relaxed),
        }
    }

    /// Returns every quarantined node's memory.
    pub(crate) fn flush(&self) {
        let drained: Vec<Freed> = self.quarantine.lock().drain(..).collect();
        self.evicted
            .fetch_add(drained.len() as u64, Ordering::Relaxed);
        for f in drained {
            unsafe { f.node.dispose() };
        }
    }
}

impl Drop for DebugAllocator {
    fn drop(&mut self) {
        self.flush();
    }
}
