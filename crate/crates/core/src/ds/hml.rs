//! Harris-Michael ordered list. Deletion marks bit 0 of the victim's `next`
//! word, then unlinks it; whoever wins the unlinking CAS retires the node.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{ConcurrentSet, POISON_KEY};
use crate::domain::{Domain, Handle};
use crate::header::{NodeHeader, Reclaimable};
use crate::schemes::Scheme;

const MARK: usize = 1;

#[repr(C)]
#[derive(Debug)]
pub struct Node {
    header: NodeHeader,
    key: i64,
    next: AtomicUsize,
}

unsafe impl Reclaimable for Node {
    fn header(&self) -> &NodeHeader {
        &self.header
    }

    fn poison(&mut self) {
        unsafe { std::ptr::write_volatile(&mut self.key, POISON_KEY) };
    }

    fn is_poisoned(&self) -> bool {
        unsafe { std::ptr::read_volatile(&self.key) == POISON_KEY }
    }
}

/// Result of a search: `prev` is the cell that pointed at `cur` (unmarked)
/// when the search finished.
pub(crate) struct Position {
    pub(crate) found: bool,
    prev: *const AtomicUsize,
    cur: usize,
}

#[inline]
unsafe fn node<'a>(word: usize) -> &'a Node {
    &*((word & !MARK) as *const Node)
}

/// Finds the first node with key `>= key`, unlinking (and retiring) any
/// marked nodes on the way. Reservation slots 0..3 rotate between the
/// predecessor, current and successor nodes.
pub(crate) fn find<S: Scheme>(head: &AtomicUsize, h: &mut Handle<S>, key: i64) -> Position {
    'retry: loop {
        let mut prev: *const AtomicUsize = head;
        let (mut ps, mut cs, mut ns) = (0usize, 1usize, 2usize);
        let mut cur = h.protect(cs, head);
        loop {
            if cur == 0 {
                return Position {
                    found: false,
                    prev,
                    cur,
                };
            }
            let cur_node = unsafe { node(cur) };
            unsafe { h.check(cur_node) };
            let next = h.protect(ns, &cur_node.next);
            if S::VALIDATES && unsafe { (*prev).load(Ordering::Acquire) } != cur {
                h.note_restart();
                continue 'retry;
            }
            if next & MARK == 0 {
                if cur_node.key >= key {
                    return Position {
                        found: cur_node.key == key,
                        prev,
                        cur,
                    };
                }
                prev = &cur_node.next;
                (ps, cs, ns) = (cs, ns, ps);
                cur = next;
            } else {
                let succ = next & !MARK;
                let unlinked = unsafe {
                    (*prev).compare_exchange(cur, succ, Ordering::AcqRel, Ordering::Acquire)
                };
                if unlinked.is_err() {
                    h.note_restart();
                    continue 'retry;
                }
                unsafe { h.retire(cur as *mut Node) };
                (cs, ns) = (ns, cs);
                cur = succ;
            }
        }
    }
}

pub(crate) fn insert<S: Scheme>(head: &AtomicUsize, h: &mut Handle<S>, key: i64) -> bool {
    let mut fresh: *mut Node = std::ptr::null_mut();
    let inserted = loop {
        let pos = find(head, h, key);
        if pos.found {
            break false;
        }
        if fresh.is_null() {
            fresh = h.alloc(Node {
                header: NodeHeader::new(),
                key,
                next: AtomicUsize::new(0),
            });
        }
        unsafe { (*fresh).next.store(pos.cur, Ordering::Relaxed) };
        let linked = unsafe {
            (*pos.prev).compare_exchange(
                pos.cur,
                fresh as usize,
                Ordering::AcqRel,
                Ordering::Acquire,
            )
        };
        if linked.is_ok() {
            break true;
        }
    };
    if !inserted && !fresh.is_null() {
        unsafe { h.domain().dispose_unpublished(fresh) };
    }
    inserted
}

pub(crate) fn remove<S: Scheme>(head: &AtomicUsize, h: &mut Handle<S>, key: i64) -> bool {
    loop {
        let pos = find(head, h, key);
        if !pos.found {
            return false;
        }
        let cur = unsafe { node(pos.cur) };
        let next = cur.next.load(Ordering::Acquire);
        if next & MARK != 0 {
            continue;
        }
        if cur
            .next
            .compare_exchange(next, next | MARK, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            continue;
        }
        let unlinked = unsafe {
            (*pos.prev).compare_exchange(pos.cur, next, Ordering::AcqRel, Ordering::Acquire)
        };
        if unlinked.is_ok() {
            unsafe { h.retire(pos.cur as *mut Node) };
        } else {
            // A later search unlinks and retires it.
            find(head, h, key);
        }
        return true;
    }
}

/// Read-only lookup. Never unlinks, so pure readers never retire. Under
/// validating schemes a marked node forces a restart, since its successor
/// may already be unreachable.
pub(crate) fn contains<S: Scheme>(
    head: &AtomicUsize,
    h: &mut Handle<S>,
    key: i64,
    pause: &mut dyn FnMut(),
) -> bool {
    let mut paused = false;
    'retry: loop {
        let mut prev: *const AtomicUsize = head;
        let (mut ps, mut cs, mut ns) = (0usize, 1usize, 2usize);
        let mut cur = h.protect(cs, head);
        loop {
            if cur == 0 {
                return false;
            }
            let cur_node = unsafe { node(cur) };
            unsafe { h.check(cur_node) };
            if !paused {
                paused = true;
                pause();
            }
            let next = h.protect(ns, &cur_node.next);
            if S::VALIDATES
                && (unsafe { (*prev).load(Ordering::Acquire) } != cur || next & MARK != 0)
            {
                h.note_restart();
                continue 'retry;
            }
            if cur_node.key >= key {
                return cur_node.key == key && next & MARK == 0;
            }
            prev = &cur_node.next;
            (ps, cs, ns) = (cs, ns, ps);
            cur = next & !MARK;
        }
    }
}

pub(crate) fn keys<S: Scheme>(head: &AtomicUsize, h: &mut Handle<S>, out: &mut Vec<i64>) {
    h.begin_op();
    let mut cur = head.load(Ordering::Acquire);
    while cur & !MARK != 0 {
        let n = unsafe { node(cur) };
        let next = n.next.load(Ordering::Acquire);
        if next & MARK == 0 {
            out.push(n.key);
        }
        cur = next;
    }
    h.end_op();
}

/// Frees every node still reachable from `head`.
pub(crate) unsafe fn free_all<S: Scheme>(head: &AtomicUsize, domain: &Domain<S>) {
    let mut cur = head.swap(0, Ordering::Acquire) & !MARK;
    while cur != 0 {
        let next = node(cur).next.load(Ordering::Acquire) & !MARK;
        domain.dispose_unpublished(cur as *mut Node);
        cur = next;
    }
}

/// Lock-free sorted linked list.
pub struct HarrisMichaelList<S: Scheme> {
    head: AtomicUsize,
    domain: Arc<Domain<S>>,
}

impl<S: Scheme> std::fmt::Debug for HarrisMichaelList<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HarrisMichaelList")
            .field("scheme", &S::NAME)
            .finish()
    }
}

impl<S: Scheme> HarrisMichaelList<S> {
    pub fn new(domain: &Arc<Domain<S>>) -> Self {
        HarrisMichaelList {
            head: AtomicUsize::new(0),
            domain: Arc::clone(domain),
        }
    }
}

impl<S: Scheme> ConcurrentSet<S> for HarrisMichaelList<S> {
    const NAME: &'static str = "hml";

    fn with_range(domain: &Arc<Domain<S>>, _key_range: usize) -> Self {
        Self::new(domain)
    }

    fn insert(&self, h: &mut Handle<S>, key: i64) -> bool {
        h.begin_op();
        let r = insert(&self.head, h, key);
        h.end_op();
        r
    }

    fn remove(&self, h: &mut Handle<S>, key: i64) -> bool {
        h.begin_op();
        let r = remove(&self.head, h, key);
        h.end_op();
        r
    }

    fn contains_with(&self, h: &mut Handle<S>, key: i64, pause: &mut dyn FnMut()) -> bool {
        h.begin_op();
        let r = contains(&self.head, h, key, pause);
        h.end_op();
        r
    }

    fn keys(&self, h: &mut Handle<S>) -> Vec<i64> {
        let mut out = Vec::new();
        keys(&self.head, h, &mut out);
        out
    }
}

impl<S: Scheme> Drop for HarrisMichaelList<S> {
    fn drop(&mut self) {
        unsafe { free_all(&self.head, &self.domain) };
    }
}

// Nodes are only reached through the reclaimer protocol.
unsafe impl<S: Scheme> Send for HarrisMichaelList<S> {}
unsafe impl<S: Scheme> Sync for HarrisMichaelList<S> {}
