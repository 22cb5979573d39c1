//! Per-node reclamation metadata and type-erased retired handles.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

/// Sentinel shared by every clock-valued field: "live" for a node's retire
/// era, "none" for an era reservation and "quiescent" for an announced epoch.
pub const MAX: u64 = u64::MAX;

/// Header carried as the first field of every reclaimable node.
///
/// `birth_era` and `retire_era` bracket the interval during which the node
/// may have been reachable; hazard-era reclaimers compare reservations
/// against it. `freed` is the use-after-free canary flipped by the debug
/// allocator.
#[derive(Debug)]
#[repr(C)]
pub struct NodeHeader {
    birth_era: AtomicU64,
    retire_era: AtomicU64,
    freed: AtomicBool,
}

impl NodeHeader {
    pub const fn new() -> Self {
        NodeHeader {
            birth_era: AtomicU64::new(0),
            retire_era: AtomicU64::new(MAX),
            freed: AtomicBool::new(false),
        }
    }

    #[inline]
    pub fn birth_era(&self) -> u64 {
        self.birth_era.load(Ordering::Relaxed)
    }

    #[inline]
    pub fn retire_era(&self) -> u64 {
        self.retire_era.load(Ordering::Relaxed)
    }

    #[inline]
    pub fn is_freed(&self) -> bool {
        self.freed.load(Ordering::Acquire)
    }

    pub(crate) fn stamp_birth(&self, era: u64) {
        self.birth_era.store(era, Ordering::Relaxed);
        self.retire_era.store(MAX, Ordering::Relaxed);
        self.freed.store(false, Ordering::Relaxed);
    }

    pub(crate) fn stamp_retire(&self, era: u64) {
        self.retire_era.store(era, Ordering::Relaxed);
    }

    /// Sets the freed flag, returning its previous value.
    pub(crate) fn mark_freed(&self) -> bool {
        self.freed.swap(true, Ordering::AcqRel)
    }
}

impl Default for NodeHeader {
    fn default() -> Self {
        Self::new()
    }
}

/// A node type that can be handed to a reclaimer.
///
/// # Safety
///
/// Implementors must be `#[repr(C)]` with a [`NodeHeader`] as their first
/// field, so that a pointer to the node is also a valid pointer to its
/// header.
pub unsafe trait Reclaimable: Sized + Send + 'static {
    fn header(&self) -> &NodeHeader;

    /// Overwrites the payload with a recognizable pattern once the node is
    /// logically freed. Only the debug allocator calls this.
    fn poison(&mut self) {}

    /// Whether the payload currently holds the poison pattern.
    fn is_poisoned(&self) -> bool {
        false
    }
}

/// A retired node awaiting destruction, with its retire-epoch stamp.
#[derive(Debug)]
pub struct Retired {
    ptr: *mut NodeHeader,
    dispose: unsafe fn(*mut NodeHeader),
    poison: unsafe fn(*mut NodeHeader),
    retire_epoch: u64,
}

// Retired nodes are unreachable; whoever holds the handle owns the node.
unsafe impl Send for Retired {}

unsafe fn dispose_as<T: Reclaimable>(ptr: *mut NodeHeader) {
    drop(Box::from_raw(ptr as *mut T));
}

unsafe fn poison_as<T: Reclaimable>(ptr: *mut NodeHeader) {
    (*(ptr as *mut T)).poison();
}

impl Retired {
    /// # Safety
    ///
    /// `ptr` must come from `Box::into_raw` and must be unreachable from any
    /// shared entry point.
    pub(crate) unsafe fn new<T: Reclaimable>(ptr: *mut T, retire_epoch: u64) -> Self {
        Retired {
            ptr: ptr as *mut NodeHeader,
            dispose: dispose_as::<T>,
            poison: poison_as::<T>,
            retire_epoch,
        }
    }

    /// Identity of the node, as stored in reservation slots.
    #[inline]
    pub fn addr(&self) -> usize {
        self.ptr as usize
    }

    #[inline]
    pub fn retire_epoch(&self) -> u64 {
        self.retire_epoch
    }

    #[inline]
    pub fn header(&self) -> &NodeHeader {
        unsafe { &*self.ptr }
    }

    pub(crate) unsafe fn poison(&self) {
        (self.poison)(self.ptr)
    }

    pub(crate) unsafe fn dispose(self) {
        (self.dispose)(self.ptr)
    }
}
