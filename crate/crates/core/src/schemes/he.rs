use std::sync::atomic::{fence, AtomicUsize, Ordering};

use super::Scheme;
use crate::domain::Handle;

/// Classic hazard eras: an era change is published and fenced immediately.
#[derive(Debug, Clone, Copy, Default)]
pub struct He;

impl Scheme for He {
    const NAME: &'static str = "he";
    const VALIDATES: bool = true;
    const USES_SIGNALS: bool = false;

    fn end_op(h: &mut Handle<Self>) {
        h.clear_shared();
    }

    #[inline]
    fn protect(h: &Handle<Self>, index: usize, src: &AtomicUsize) -> usize {
        let slot = &h.slot().shared.eras[index];
        let clock = h.domain().epoch_cell();
        let mut old = slot.load(Ordering::Relaxed);
        loop {
            let raw = src.load(Ordering::Acquire);
            let era = clock.load(Ordering::Acquire);
            if era == old {
                return raw;
            }
            slot.store(era, Ordering::Release);
            fence(Ordering::SeqCst);
            old = era;
        }
    }

    fn after_retire(h: &mut Handle<Self>) {
        if h.retired.len() >= h.config().reclaim_freq {
            h.domain().advance_epoch();
            h.adopt_orphans();
            fence(Ordering::SeqCst);
            h.reclaim_he_freeable();
            h.note_pass();
        }
    }
}
