//! Lazy list: lock-based updates that validate after locking, and a
//! wait-free-style `contains` that never takes locks.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use super::{ConcurrentSet, POISON_KEY};
use crate::domain::{Domain, Handle};
use crate::header::{NodeHeader, Reclaimable};
use crate::schemes::Scheme;

#[repr(C)]
#[derive(Debug)]
pub struct LazyNode {
    header: NodeHeader,
    key: i64,
    next: AtomicUsize,
    marked: AtomicBool,
    lock: Mutex<()>,
}

unsafe impl Reclaimable for LazyNode {
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

impl LazyNode {
    fn new(key: i64, next: usize) -> Self {
        LazyNode {
            header: NodeHeader::new(),
            key,
            next: AtomicUsize::new(next),
            marked: AtomicBool::new(false),
            lock: Mutex::new(()),
        }
    }
}

#[inline]
unsafe fn node<'a>(word: usize) -> &'a LazyNode {
    &*(word as *const LazyNode)
}

/// Sorted list between `i64::MIN` and `i64::MAX` sentinels.
pub struct LazyList<S: Scheme> {
    head: *mut LazyNode,
    domain: Arc<Domain<S>>,
}

// Nodes are only reached through the reclaimer protocol.
unsafe impl<S: Scheme> Send for LazyList<S> {}
unsafe impl<S: Scheme> Sync for LazyList<S> {}

impl<S: Scheme> std::fmt::Debug for LazyList<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LazyList")
            .field("scheme", &S::NAME)
            .finish()
    }
}

impl<S: Scheme> LazyList<S> {
    pub fn new(domain: &Arc<Domain<S>>) -> Self {
        let tail = domain.alloc(LazyNode::new(i64::MAX, 0));
        let head = domain.alloc(LazyNode::new(i64::MIN, tail as usize));
        LazyList {
            head,
            domain: Arc::clone(domain),
        }
    }

    /// Returns `(pred, cur)` with `pred.key < key <= cur.key`, both
    /// protected. Under validating schemes `pred` is re-checked unmarked
    /// after each hop, which proves `cur` was reachable when read.
    fn locate(
        &self,
        h: &mut Handle<S>,
        key: i64,
        pause: &mut dyn FnMut(),
        paused: &mut bool,
    ) -> (usize, usize) {
        let head = unsafe { &*self.head };
        'retry: loop {
            let (mut ps, mut cs) = (0usize, 1usize);
            let mut pred = self.head as usize;
            let mut cur = h.protect(cs, &head.next);
            loop {
                let cur_node = unsafe { node(cur) };
                unsafe { h.check(cur_node) };
                if !*paused {
                    *paused = true;
                    pause();
                }
                if cur_node.key >= key {
                    return (pred, cur);
                }
                let ns = 3 - ps - cs;
                let next = h.protect(ns, &cur_node.next);
                if S::VALIDATES && cur_node.marked.load(Ordering::Acquire) {
                    h.note_restart();
                    continue 'retry;
                }
                pred = cur;
                (ps, cs) = (cs, ns);
                cur = next;
            }
        }
    }

    fn validate(pred: &LazyNode, cur: usize) -> bool {
        !pred.marked.load(Ordering::Acquire)
            && !unsafe { node(cur) }.marked.load(Ordering::Acquire)
            && pred.next.load(Ordering::Acquire) == cur
    }

    fn insert_op(&self, h: &mut Handle<S>, key: i64) -> bool {
        let mut fresh: *mut LazyNode = std::ptr::null_mut();
        let mut paused = true;
        let inserted = loop {
            let (pred, cur) = self.locate(h, key, &mut || {}, &mut paused);
            let pred_node = unsafe { node(pred) };
            let cur_node = unsafe { node(cur) };
            let _p = pred_node.lock.lock();
            let _c = cur_node.lock.lock();
            if !Self::validate(pred_node, cur) {
                continue;
            }
            if cur_node.key == key {
                break false;
            }
            if fresh.is_null() {
                fresh = h.alloc(LazyNode::new(key, cur));
            } else {
                unsafe { (*fresh).next.store(cur, Ordering::Relaxed) };
            }
            pred_node.next.store(fresh as usize, Ordering::Release);
            break true;
        };
        if !inserted && !fresh.is_null() {
            unsafe { self.domain.dispose_unpublished(fresh) };
        }
        inserted
    }

    fn remove_op(&self, h: &mut Handle<S>, key: i64) -> bool {
        let mut paused = true;
        loop {
            let (pred, cur) = self.locate(h, key, &mut || {}, &mut paused);
            let pred_node = unsafe { node(pred) };
            let cur_node = unsafe { node(cur) };
            let removed = {
                let _p = pred_node.lock.lock();
                let _c = cur_node.lock.lock();
                if !Self::validate(pred_node, cur) {
                    continue;
                }
                if cur_node.key != key {
                    return false;
                }
                cur_node.marked.store(true, Ordering::Release);
                let next = cur_node.next.load(Ordering::Acquire);
                pred_node.next.store(next, Ordering::Release);
                cur
            };
            unsafe { h.retire(removed as *mut LazyNode) };
            return true;
        }
    }
}

impl<S: Scheme> ConcurrentSet<S> for LazyList<S> {
    const NAME: &'static str = "ll";

    fn with_range(domain: &Arc<Domain<S>>, _key_range: usize) -> Self {
        Self::new(domain)
    }

    fn insert(&self, h: &mut Handle<S>, key: i64) -> bool {
        h.begin_op();
        let r = self.insert_op(h, key);
        h.end_op();
        r
    }

    fn remove(&self, h: &mut Handle<S>, key: i64) -> bool {
        h.begin_op();
        let r = self.remove_op(h, key);
        h.end_op();
        r
    }

    fn contains_with(&self, h: &mut Handle<S>, key: i64, pause: &mut dyn FnMut()) -> bool {
        h.begin_op();
        let mut paused = false;
        let (_, cur) = self.locate(h, key, pause, &mut paused);
        let cur_node = unsafe { node(cur) };
        let r = cur_node.key == key && !cur_node.marked.load(Ordering::Acquire);
        h.end_op();
        r
    }

    fn keys(&self, h: &mut Handle<S>) -> Vec<i64> {
        h.begin_op();
        let mut out = Vec::new();
        let mut cur = unsafe { &*self.head }.next.load(Ordering::Acquire);
        loop {
            let n = unsafe { node(cur) };
            let next = n.next.load(Ordering::Acquire);
            if next == 0 {
                break;
            }
            if !n.marked.load(Ordering::Acquire) {
                out.push(n.key);
            }
            cur = next;
        }
        h.end_op();
        out
    }
}

impl<S: Scheme> Drop for LazyList<S> {
    fn drop(&mut self) {
        let mut cur = self.head as usize;
        while cur != 0 {
            let next = unsafe { node(cur) }.next.load(Ordering::Acquire);
            unsafe { self.domain.dispose_unpublished(cur as *mut LazyNode) };
            cur = next;
        }
    }
}
