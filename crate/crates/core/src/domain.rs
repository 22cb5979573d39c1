//! Thread registry, per-thread reservation slots and the owning [`Handle`].

use std::marker::PhantomData;
use std::ops::Deref;
use std::sync::atomic::{
    compiler_fence, fence, AtomicBool, AtomicI32, AtomicU64, AtomicUsize, Ordering,
};
use std::sync::Arc;
use std::time::Instant;

use parking_lot::Mutex;

use crate::alloc::{DebugAllocator, DebugReport};
use crate::config::{DomainConfig, HP_CAPACITY};
use crate::error::DomainError;
use crate::header::{Reclaimable, Retired, MAX};
use crate::schemes::Scheme;
use crate::signal::{self, Delivery};

/// Low-order bits of a node word that data structures may use as marks.
pub const TAG_MASK: usize = 0b11;

#[repr(align(128))]
#[derive(Debug, Default)]
pub(crate) struct Padded<T>(T);

impl<T> Deref for Padded<T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.0
    }
}

#[repr(C, align(128))]
#[derive(Debug)]
pub(crate) struct Reservations {
    pub(crate) ptrs: [AtomicUsize; HP_CAPACITY],
    pub(crate) eras: [AtomicU64; HP_CAPACITY],
}

impl Reservations {
    fn new() -> Self {
        Reservations {
            ptrs: std::array::from_fn(|_| AtomicUsize::new(0)),
            eras: std::array::from_fn(|_| AtomicU64::new(MAX)),
        }
    }

    fn clear(&self, order: Ordering) {
        for i in 0..HP_CAPACITY {
            self.ptrs[i].store(0, order);
            self.eras[i].store(MAX, order);
        }
    }
}

#[derive(Debug)]
pub(crate) struct Registry {
    pub(crate) publish_counter: AtomicU64,
    pub(crate) generation: AtomicU64,
    pub(crate) active: AtomicBool,
    pub(crate) os_tid: AtomicI32,
    pub(crate) owner: AtomicUsize,
}

/// Counters written only by the owning thread (and its signal handler).
#[derive(Debug, Default)]
pub(crate) struct SlotStats {
    pub(crate) retire_len: AtomicUsize,
    pub(crate) retired: AtomicU64,
    pub(crate) freed: AtomicU64,
    pub(crate) signals_sent: AtomicU64,
    pub(crate) handler_runs: AtomicU64,
    pub(crate) passes: AtomicU64,
    pub(crate) fallbacks: AtomicU64,
    pub(crate) restarts: AtomicU64,
}

#[inline]
fn bump(c: &AtomicU64, n: u64) {
    c.store(c.load(Ordering::Relaxed) + n, Ordering::Relaxed);
}

/// Per-thread reservation state. `local` is private to the owner; `shared`,
/// `reserved_epoch` and `registry.publish_counter` are single-writer.
#[derive(Debug)]
pub struct ThreadSlot {
    pub(crate) local: Reservations,
    pub(crate) shared: Reservations,
    pub(crate) reserved_epoch: Padded<AtomicU64>,
    pub(crate) registry: Padded<Registry>,
    pub(crate) stats: Padded<SlotStats>,
}

impl ThreadSlot {
    fn new() -> Self {
        ThreadSlot {
            local: Reservations::new(),
            shared: Reservations::new(),
            reserved_epoch: Padded(AtomicU64::new(MAX)),
            registry: Padded(Registry {
                publish_counter: AtomicU64::new(0),
                generation: AtomicU64::new(0),
                active: AtomicBool::new(false),
                os_tid: AtomicI32::new(0),
                owner: AtomicUsize::new(0),
            }),
            stats: Padded(SlotStats::default()),
        }
    }

    /// Copies every local slot to its shared twin, then bumps the counter.
    /// Runs either in the owner's signal handler or synchronously in the
    /// owner, never anywhere else.
    pub(crate) fn publish(&self) {
        compiler_fence(Ordering::SeqCst);
        for i in 0..HP_CAPACITY {
            let p = self.local.ptrs[i].load(Ordering::Relaxed);
            self.shared.ptrs[i].store(p, Ordering::Relaxed);
            let e = self.local.eras[i].load(Ordering::Relaxed);
            self.shared.eras[i].store(e, Ordering::Relaxed);
        }
        self.registry.publish_counter.fetch_add(1, Ordering::SeqCst);
        fence(Ordering::SeqCst);
    }

    pub(crate) fn note_handler_run(&self) {
        bump(&self.stats.handler_runs, 1);
    }

    #[inline]
    pub(crate) fn assert_owner(&self) {
        debug_assert_eq!(
            self.registry.owner.load(Ordering::Relaxed),
            signal::thread_token(),
            "single-writer slot written by a foreign thread"
        );
    }

    pub(crate) fn is_active(&self) -> bool {
        self.registry.active.load(Ordering::SeqCst)
    }

    pub(crate) fn publish_counter(&self) -> u64 {
        self.registry.publish_counter.load(Ordering::Acquire)
    }

    pub(crate) fn generation(&self) -> u64 {
        self.registry.generation.load(Ordering::Acquire)
    }
}

/// Aggregate counters over every slot of a domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DomainStats {
    pub retired: u64,
    pub freed: u64,
    /// Retired but not yet freed: retire lists plus orphans.
    pub unreclaimed: u64,
    pub orphans: u64,
    pub signals_sent: u64,
    pub handler_runs: u64,
    pub passes: u64,
    pub fallback_passes: u64,
    pub restarts: u64,
    pub epoch: u64,
}

/// Registry of participating threads plus the global clock.
pub struct Domain<S: Scheme> {
    config: DomainConfig,
    slots: Box<[ThreadSlot]>,
    epoch: Padded<AtomicU64>,
    registry: Mutex<()>,
    orphans: Mutex<Vec<Retired>>,
    orphan_len: AtomicUsize,
    teardown_freed: AtomicU64,
    debug: Option<DebugAllocator>,
    _scheme: PhantomData<fn() -> S>,
}

impl<S: Scheme> std::fmt::Debug for Domain<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain")
            .field("scheme", &S::NAME)
            .field("config", &self.config)
            .field("epoch", &self.epoch())
            .finish_non_exhaustive()
    }
}

impl<S: Scheme> Domain<S> {
    pub fn new(config: DomainConfig) -> Result<Arc<Self>, DomainError> {
        config.validate(S::HAS_FALLBACK)?;
        if S::USES_SIGNALS {
            signal::install_handler(config.signal.signo())?;
        }
        let slots = (0..config.max_threads).map(|_| ThreadSlot::new()).collect();
        Ok(Arc::new(Domain {
            debug: config.debug_alloc.map(DebugAllocator::new),
            config,
            slots,
            epoch: Padded(AtomicU64::new(0)),
            registry: Mutex::new(()),
            orphans: Mutex::new(Vec::new()),
            orphan_len: AtomicUsize::new(0),
            teardown_freed: AtomicU64::new(0),
            _scheme: PhantomData,
        }))
    }

    pub fn config(&self) -> &DomainConfig {
        &self.config
    }

    /// Claims the lowest free thread index for the calling thread.
    pub fn register(self: &Arc<Self>) -> Result<Handle<S>, DomainError> {
        let _guard = self.registry.lock();
        let tid = self
            .slots
            .iter()
            .position(|s| !s.is_active())
            .ok_or(DomainError::CapacityExhausted(self.config.max_threads))?;
        let slot = &self.slots[tid];
        slot.local.clear(Ordering::Relaxed);
        slot.shared.clear(Ordering::Release);
        slot.reserved_epoch.store(MAX, Ordering::Release);
        slot.stats.retire_len.store(0, Ordering::Relaxed);
        slot.registry
            .owner
            .store(signal::thread_token(), Ordering::Relaxed);
        slot.registry
            .os_tid
            .store(signal::current_tid(), Ordering::Relaxed);
        let publisher = if S::USES_SIGNALS {
            Some(signal::attach(slot)?)
        } else {
            None
        };
        slot.registry.generation.fetch_add(1, Ordering::SeqCst);
        slot.registry.active.store(true, Ordering::SeqCst);
        fence(Ordering::SeqCst);
        Ok(Handle {
            domain: Arc::clone(self),
            slot: slot as *const ThreadSlot,
            tid,
            publisher,
            registered: true,
            retired: Vec::new(),
            spare: Vec::new(),
            op_counter: 0,
            scratch_ptrs: Vec::new(),
            scratch_eras: Vec::new(),
            snapshot: Vec::with_capacity(self.config.max_threads),
            debug: self.debug.is_some(),
            preempt: self.config.debug_alloc.map_or(0, |c| c.preempt_every),
            dice: std::cell::Cell::new(0x2545_f491_4f6c_dd1d ^ ((tid as u64 + 1) << 32)),
            _not_send: PhantomData,
        })
    }

    /// Current value of the shared epoch/era clock.
    pub fn epoch(&self) -> u64 {
        self.epoch.load(Ordering::SeqCst)
    }

    pub(crate) fn epoch_cell(&self) -> &AtomicU64 {
        &self.epoch
    }

    /// Advances the clock, returning the new value.
    pub fn advance_epoch(&self) -> u64 {
        self.epoch.fetch_add(1, Ordering::SeqCst) + 1
    }

    /// Allocates a node on the heap and stamps its birth era.
    pub fn alloc<T: Reclaimable>(&self, value: T) -> *mut T {
        let ptr = Box::into_raw(Box::new(value));
        unsafe { (*ptr).header().stamp_birth(self.epoch()) };
        if let Some(d) = &self.debug {
            d.on_alloc(ptr as usize);
        }
        ptr
    }

    /// Destroys a node that was never retired (structure teardown, failed
    /// insert).
    ///
    /// # Safety
    ///
    /// `ptr` must come from [`Domain::alloc`] and be unreachable by any
    /// other thread.
    pub unsafe fn dispose_unpublished<T: Reclaimable>(&self, ptr: *mut T) {
        let r = Retired::new(ptr, 0);
        match &self.debug {
            Some(d) => d.release(r),
            None => r.dispose(),
        }
    }

    pub(crate) fn free_retired(&self, r: Retired) {
        match &self.debug {
            Some(d) => d.release(r),
            None => unsafe { r.dispose() },
        }
    }

    pub fn debug_allocator(&self) -> Option<&DebugAllocator> {
        self.debug.as_ref()
    }

    pub fn debug_report(&self) -> Option<DebugReport> {
        self.debug.as_ref().map(DebugAllocator::report)
    }

    pub fn is_active(&self, tid: usize) -> bool {
        self.slots[tid].is_active()
    }

    pub fn active_threads(&self) -> usize {
        self.slots.iter().filter(|s| s.is_active()).count()
    }

    /// Published pointer reservations of `tid`.
    pub fn shared_reservations(&self, tid: usize) -> [usize; HP_CAPACITY] {
        std::array::from_fn(|i| self.slots[tid].shared.ptrs[i].load(Ordering::Acquire))
    }

    /// Published era reservations of `tid`.
    pub fn shared_eras(&self, tid: usize) -> [u64; HP_CAPACITY] {
        std::array::from_fn(|i| self.slots[tid].shared.eras[i].load(Ordering::Acquire))
    }

    pub fn publish_counter(&self, tid: usize) -> u64 {
        self.slots[tid].publish_counter()
    }

    pub fn reserved_epoch(&self, tid: usize) -> u64 {
        self.slots[tid].reserved_epoch.load(Ordering::Acquire)
    }

    /// Retire-list length of `tid` as last reported by its owner.
    pub fn retire_len(&self, tid: usize) -> usize {
        self.slots[tid].stats.retire_len.load(Ordering::Relaxed)
    }

    /// Largest retire list among all slots right now.
    pub fn max_retire_len(&self) -> usize {
        self.slots
            .iter()
            .map(|s| s.stats.retire_len.load(Ordering::Relaxed))
            .max()
            .unwrap_or(0)
    }

    pub fn orphan_len(&self) -> usize {
        self.orphan_len.load(Ordering::Acquire)
    }

    pub fn stats(&self) -> DomainStats {
        let mut st = DomainStats {
            epoch: self.epoch(),
            orphans: self.orphan_len() as u64,
            freed: self.teardown_freed.load(Ordering::Relaxed),
            ..DomainStats::default()
        };
        let mut listed = 0u64;
        for s in self.slots.iter() {
            let c = &s.stats;
            listed += c.retire_len.load(Ordering::Relaxed) as u64;
            st.retired += c.retired.load(Ordering::Relaxed);
            st.freed += c.freed.load(Ordering::Relaxed);
            st.signals_sent += c.signals_sent.load(Ordering::Relaxed);
            st.handler_runs += c.handler_runs.load(Ordering::Relaxed);
            st.passes += c.passes.load(Ordering::Relaxed);
            st.fallback_passes += c.fallbacks.load(Ordering::Relaxed);
            st.restarts += c.restarts.load(Ordering::Relaxed);
        }
        st.unreclaimed = listed + st.orphans;
        st
    }

    /// Frees every orphaned node. Only sound once no thread can hold a
    /// reference into the structures that retired them, so this refuses to
    /// run while any thread is registered. Returns the number freed.
    pub fn drain(&self) -> usize {
        let _guard = self.registry.lock();
        if self.slots.iter().any(|s| s.is_active()) {
            return 0;
        }
        let orphans = std::mem::take(&mut *self.orphans.lock());
        self.orphan_len.store(0, Ordering::Release);
        let n = orphans.len();
        for r in orphans {
            self.free_retired(r);
        }
        self.teardown_freed.fetch_add(n as u64, Ordering::Relaxed);
        n
    }

    fn push_orphans(&self, list: &mut Vec<Retired>) {
        if list.is_empty() {
            return;
        }
        let mut orphans = self.orphans.lock();
        orphans.append(list);
        self.orphan_len.store(orphans.len(), Ordering::Release);
    }
}

impl<S: Scheme> Drop for Domain<S> {
    fn drop(&mut self) {
        for r in std::mem::take(self.orphans.get_mut()) {
            self.free_retired(r);
        }
        if let Some(d) = &self.debug {
            d.flush();
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Snap {
    generation: u64,
    counter: u64,
    os_tid: i32,
    pending: bool,
}

/// A thread's registration in a [`Domain`]. Owns the retire list and is the
/// only path through which the thread touches its slot. Dropping the handle
/// deregisters.
pub struct Handle<S: Scheme> {
    domain: Arc<Domain<S>>,
    slot: *const ThreadSlot,
    tid: usize,
    publisher: Option<usize>,
    registered: bool,
    pub(crate) retired: Vec<Retired>,
    spare: Vec<Retired>,
    pub(crate) op_counter: u64,
    scratch_ptrs: Vec<usize>,
    scratch_eras: Vec<u64>,
    snapshot: Vec<Option<Snap>>,
    debug: bool,
    preempt: u32,
    /// xorshift state for the preemption knob.
    dice: std::cell::Cell<u64>,
    _not_send: PhantomData<*mut ()>,
}

impl<S: Scheme> std::fmt::Debug for Handle<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Handle")
            .field("scheme", &S::NAME)
            .field("tid", &self.tid)
            .field("retired", &self.retired.len())
            .finish_non_exhaustive()
    }
}

impl<S: Scheme> Handle<S> {
    #[inline]
    pub fn tid(&self) -> usize {
        self.tid
    }

    #[inline]
    pub fn domain(&self) -> &Arc<Domain<S>> {
        &self.domain
    }

    #[inline]
    pub(crate) fn slot(&self) -> &ThreadSlot {
        unsafe { &*self.slot }
    }

    pub(crate) fn config(&self) -> &DomainConfig {
        &self.domain.config
    }

    /// Enters an operation. Every node dereference must happen between
    /// `begin_op` and `end_op`.
    #[inline]
    pub fn begin_op(&mut self) {
        S::begin_op(self);
    }

    /// Leaves the operation and drops every reservation.
    #[inline]
    pub fn end_op(&mut self) {
        S::end_op(self);
    }

    /// Reads `src` and protects the node it points to in reservation slot
    /// `index`. Returns the raw word (tag bits included); the reservation
    /// holds the untagged address.
    #[inline]
    pub fn protect(&self, index: usize, src: &std::sync::atomic::AtomicUsize) -> usize {
        debug_assert!(index < self.domain.config.max_hp);
        S::protect(self, index, src)
    }

    /// Allocates a node and stamps its birth era.
    #[inline]
    pub fn alloc<T: Reclaimable>(&self, value: T) -> *mut T {
        self.domain.alloc(value)
    }

    /// Hands an unlinked node to the reclaimer.
    ///
    /// # Safety
    ///
    /// `ptr` must come from [`Domain::alloc`] on this domain, be unreachable
    /// from every shared entry point, and be retired exactly once.
    pub unsafe fn retire<T: Reclaimable>(&mut self, ptr: *mut T) {
        let era = self.domain.epoch();
        (*ptr).header().stamp_retire(era);
        if let Some(d) = &self.domain.debug {
            d.on_retire();
        }
        self.retired.push(Retired::new(ptr, era));
        let st = &self.slot().stats;
        bump(&st.retired, 1);
        self.sync_len();
        S::after_retire(self);
    }

    /// Debug-allocator check that `node` has not been freed. No-op unless
    /// the domain runs with a debug allocator.
    ///
    /// # Safety
    /// `node` must have been allocated by this domain, and its memory must
    /// still be mapped: live, or freed but still in quarantine.
    #[inline]
    pub unsafe fn check<T: Reclaimable>(&self, node: *const T) {
        debug_assert!(
            self.covers(node as usize),
            "node {:#x} dereferenced without a covering reservation",
            node as usize
        );
        if self.debug {
            if self.preempt != 0 {
                self.maybe_preempt();
            }
            if let Some(d) = &self.domain.debug {
                unsafe { d.check_access(node) };
            }
        }
    }

    // Yielding between the protect and the access gives other threads the
    // window in which a broken reservation would let them free the node.
    #[cold]
    fn maybe_preempt(&self) {
        let mut x = self.dice.get();
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.dice.set(x);
        if x.is_multiple_of(self.preempt as u64) {
            std::thread::yield_now();
        }
    }

    /// Whether some reservation of this thread (pointer slot, era slot or
    /// announced epoch) covers `addr`.
    pub fn covers(&self, addr: usize) -> bool {
        if !S::PROTECTS {
            return true;
        }
        let s = self.slot();
        let has = |r: &crate::domain::Reservations| {
            r.ptrs.iter().any(|p| p.load(Ordering::Relaxed) == addr)
                || r.eras.iter().any(|e| e.load(Ordering::Relaxed) != MAX)
        };
        s.reserved_epoch.load(Ordering::Relaxed) != MAX || has(&s.local) || has(&s.shared)
    }

    pub fn retire_len(&self) -> usize {
        self.retired.len()
    }

    /// Stamps recorded for the current retire list, oldest first.
    pub fn retired_epochs(&self) -> Vec<u64> {
        self.retired.iter().map(Retired::retire_epoch).collect()
    }

    pub fn retired_addrs(&self) -> Vec<usize> {
        self.retired.iter().map(Retired::addr).collect()
    }

    pub fn local_reservation(&self, index: usize) -> usize {
        self.slot().local.ptrs[index].load(Ordering::Relaxed)
    }

    pub fn local_era(&self, index: usize) -> u64 {
        self.slot().local.eras[index].load(Ordering::Relaxed)
    }

    pub fn shared_reservation(&self, index: usize) -> usize {
        self.slot().shared.ptrs[index].load(Ordering::Acquire)
    }

    pub fn shared_era(&self, index: usize) -> u64 {
        self.slot().shared.eras[index].load(Ordering::Acquire)
    }

    pub fn publish_counter(&self) -> u64 {
        self.slot().publish_counter()
    }

    pub fn reserved_epoch(&self) -> u64 {
        self.slot().reserved_epoch.load(Ordering::Acquire)
    }

    pub fn note_restart(&self) {
        bump(&self.slot().stats.restarts, 1);
    }

    pub(crate) fn sync_len(&self) {
        self.slot()
            .stats
            .retire_len
            .store(self.retired.len(), Ordering::Relaxed);
    }

    pub(crate) fn note_pass(&self) {
        bump(&self.slot().stats.passes, 1);
    }

    pub(crate) fn note_fallback(&self) {
        bump(&self.slot().stats.fallbacks, 1);
    }

    /// Drops every local reservation. Shared slots go stale until the next
    /// publish.
    #[inline]
    pub fn clear(&self) {
        compiler_fence(Ordering::SeqCst);
        self.slot().local.clear(Ordering::Relaxed);
    }

    pub(crate) fn clear_shared(&self) {
        let slot = self.slot();
        slot.assert_owner();
        slot.shared.clear(Ordering::Release);
    }

    pub(crate) fn announce_epoch(&self, epoch: u64) {
        let slot = self.slot();
        slot.assert_owner();
        slot.reserved_epoch.store(epoch, Ordering::SeqCst);
        fence(Ordering::SeqCst);
    }

    pub(crate) fn retract_epoch(&self) {
        self.slot().reserved_epoch.store(MAX, Ordering::Release);
    }

    /// Publishes this thread's own reservations synchronously.
    pub fn publish_own(&self) {
        let slot = self.slot();
        slot.assert_owner();
        slot.publish();
    }

    /// Moves any orphaned nodes onto this thread's retire list.
    pub(crate) fn adopt_orphans(&mut self) {
        if self.domain.orphan_len.load(Ordering::Acquire) == 0 {
            return;
        }
        let mut orphans = self.domain.orphans.lock();
        self.retired.append(&mut orphans);
        self.domain.orphan_len.store(0, Ordering::Release);
        drop(orphans);
        self.sync_len();
    }

    /// Records every other active thread's publish counter.
    pub fn collect_published_counters(&mut self) {
        self.snapshot.clear();
        for (i, s) in self.domain.slots.iter().enumerate() {
            if i == self.tid || !s.is_active() {
                self.snapshot.push(None);
                continue;
            }
            let generation = s.generation();
            let counter = s.publish_counter();
            let os_tid = s.registry.os_tid.load(Ordering::Acquire);
            let snap = (s.is_active() && s.generation() == generation).then_some(Snap {
                generation,
                counter,
                os_tid,
                pending: false,
            });
            self.snapshot.push(snap);
        }
    }

    /// Threads captured by the last snapshot, or `None` for skipped ones.
    pub fn snapshot_counters(&self) -> Vec<Option<u64>> {
        self.snapshot.iter().map(|s| s.map(|s| s.counter)).collect()
    }

    /// Signals every thread in the snapshot. Threads that no longer exist
    /// are dropped from the snapshot.
    pub fn ping_all_to_publish(&mut self) {
        let signo = self.domain.config.signal.signo();
        let mut sent = 0;
        for entry in self.snapshot.iter_mut() {
            let Some(snap) = entry else { continue };
            match signal::ping_thread(snap.os_tid, signo) {
                Delivery::Sent => sent += 1,
                Delivery::Gone => *entry = None,
                Delivery::Busy => snap.pending = true,
            }
        }
        bump(&self.slot().stats.signals_sent, sent);
    }

    /// Blocks until every snapshotted thread has published again (or left),
    /// then publishes the caller's own slot.
    pub fn wait_for_all_published(&mut self) {
        let signo = self.domain.config.signal.signo();
        let watchdog = self.domain.config.watchdog;
        let started = Instant::now();
        let slots = &self.domain.slots;
        let mut extra_sent = 0;
        for (i, entry) in self.snapshot.iter_mut().enumerate() {
            let Some(snap) = entry else { continue };
            let s = &slots[i];
            let mut spins = 0u32;
            loop {
                if !s.is_active()
                    || s.generation() != snap.generation
                    || s.publish_counter() > snap.counter
                {
                    break;
                }
                if snap.pending {
                    match signal::ping_thread(snap.os_tid, signo) {
                        Delivery::Sent => {
                            snap.pending = false;
                            extra_sent += 1;
                        }
                        Delivery::Gone => break,
                        Delivery::Busy => {}
                    }
                }
                spins += 1;
                if spins < 32 {
                    std::hint::spin_loop();
                } else {
                    std::thread::yield_now();
                }
                if let Some(limit) = watchdog {
                    if spins.is_multiple_of(1024) && started.elapsed() > limit {
                        panic!(
                            "publish handshake stalled for {:?}: thread {} (os tid {}) never \
                             published past counter {}",
                            started.elapsed(),
                            i,
                            snap.os_tid,
                            snap.counter
                        );
                    }
                }
            }
        }
        bump(&self.slot().stats.signals_sent, extra_sent);
        self.publish_own();
    }

    /// Full publish-on-ping handshake: snapshot, ping, wait.
    pub fn handshake(&mut self) {
        self.collect_published_counters();
        self.ping_all_to_publish();
        self.wait_for_all_published();
    }

    /// Frees every listed node absent from all shared pointer slots.
    pub fn reclaim_hp_freeable(&mut self) -> usize {
        let max_hp = self.domain.config.max_hp;
        self.scratch_ptrs.clear();
        for s in self.domain.slots.iter() {
            for p in &s.shared.ptrs[..max_hp] {
                let p = p.load(Ordering::Acquire);
                if p != 0 {
                    self.scratch_ptrs.push(p);
                }
            }
        }
        self.scratch_ptrs.sort_unstable();
        self.scratch_ptrs.dedup();
        let reserved = std::mem::take(&mut self.scratch_ptrs);
        let freed = self.sweep(|r| reserved.binary_search(&r.addr()).is_err());
        self.scratch_ptrs = reserved;
        freed
    }

    /// Frees every listed node whose lifespan holds no published era.
    pub fn reclaim_he_freeable(&mut self) -> usize {
        let max_hp = self.domain.config.max_hp;
        self.scratch_eras.clear();
        for s in self.domain.slots.iter() {
            for e in &s.shared.eras[..max_hp] {
                let e = e.load(Ordering::Acquire);
                if e != MAX {
                    self.scratch_eras.push(e);
                }
            }
        }
        self.scratch_eras.sort_unstable();
        self.scratch_eras.dedup();
        let eras = std::mem::take(&mut self.scratch_eras);
        let freed = self.sweep(|r| {
            let h = r.header();
            crate::schemes::can_free_sorted(h.birth_era(), h.retire_era(), &eras)
        });
        self.scratch_eras = eras;
        freed
    }

    /// Frees every listed node retired before the oldest announced epoch.
    pub fn reclaim_epoch_freeable(&mut self) -> usize {
        let min = self.min_reserved_epoch();
        self.sweep(|r| r.retire_epoch() < min)
    }

    /// Minimum over active threads' announced epochs; `MAX` when all are
    /// quiescent.
    pub fn min_reserved_epoch(&self) -> u64 {
        self.domain
            .slots
            .iter()
            .filter(|s| s.is_active())
            .map(|s| s.reserved_epoch.load(Ordering::SeqCst))
            .min()
            .unwrap_or(MAX)
    }

    /// Frees every node for which `freeable` holds, keeping survivors in
    /// their original order at the front of the list.
    fn sweep(&mut self, mut freeable: impl FnMut(&Retired) -> bool) -> usize {
        let mut list = std::mem::take(&mut self.retired);
        let mut kept = std::mem::take(&mut self.spare);
        let mut freed = 0;
        for r in list.drain(..) {
            if freeable(&r) {
                self.domain.free_retired(r);
                freed += 1;
            } else {
                kept.push(r);
            }
        }
        self.retired = kept;
        self.spare = list;
        bump(&self.slot().stats.freed, freed as u64);
        self.sync_len();
        freed as usize
    }

    /// Leaves the domain: reservations are cleared and published, the
    /// retire list moves to the orphan list, and the slot is released.
    /// Idempotent; also runs on drop.
    pub fn deregister(&mut self) {
        if !self.registered {
            return;
        }
        self.registered = false;
        // SAFETY: slots live as long as the domain, which `self` keeps alive.
        let slot: &ThreadSlot = unsafe { &*self.slot };
        self.clear();
        slot.shared.clear(Ordering::Release);
        slot.reserved_epoch.store(MAX, Ordering::Release);
        let mut list = std::mem::take(&mut self.retired);
        self.domain.push_orphans(&mut list);
        slot.stats.retire_len.store(0, Ordering::Relaxed);
        let _guard = self.domain.registry.lock();
        slot.registry.active.store(false, Ordering::SeqCst);
        if let Some(index) = self.publisher.take() {
            signal::detach(index);
        }
    }

    pub fn is_registered(&self) -> bool {
        self.registered
    }
}

impl<S: Scheme> Drop for Handle<S> {
    fn drop(&mut self) {
        self.deregister();
    }
}
