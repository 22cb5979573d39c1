use std::sync::atomic::{fence, AtomicUsize, Ordering};

use super::{protect_shared, Scheme};
use crate::domain::Handle;

/// Classic hazard pointers: every protect publishes and fences.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hp;

impl Scheme for Hp {
    const NAME: &'static str = "hp";
    const VALIDATES: bool = true;
    const USES_SIGNALS: bool = false;

    fn end_op(h: &mut Handle<Self>) {
        h.clear_shared();
    }

    #[inline]
    fn protect(h: &Handle<Self>, index: usize, src: &AtomicUsize) -> usize {
        protect_shared(h, index, src)
    }

    fn after_retire(h: &mut Handle<Self>) {
        if h.retired.len() >= h.config().reclaim_freq {
            h.adopt_orphans();
            fence(Ordering::SeqCst);
            h.reclaim_hp_freeable();
            h.note_pass();
        }
    }
}
