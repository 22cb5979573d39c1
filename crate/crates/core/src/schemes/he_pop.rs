use std::sync::atomic::{compiler_fence, AtomicUsize, Ordering};

use super::Scheme;
use crate::domain::Handle;

/// Hazard eras with publish-on-ping.
#[derive(Debug, Clone, Copy, Default)]
pub struct HePop;

impl Scheme for HePop {
    const NAME: &'static str = "he-pop";
    const VALIDATES: bool = true;
    const USES_SIGNALS: bool = true;

    fn end_op(h: &mut Handle<Self>) {
        h.clear();
    }

    #[inline]
    fn protect(h: &Handle<Self>, index: usize, src: &AtomicUsize) -> usize {
        let slot = &h.slot().local.eras[index];
        let clock = h.domain().epoch_cell();
        let mut old = slot.load(Ordering::Relaxed);
        loop {
            let raw = src.load(Ordering::Acquire);
            let era = clock.load(Ordering::Acquire);
            if era == old {
                return raw;
            }
            compiler_fence(Ordering::SeqCst);
            slot.store(era, Ordering::Relaxed);
            compiler_fence(Ordering::SeqCst);
            old = era;
        }
    }

    fn after_retire(h: &mut Handle<Self>) {
        if h.retired.len() >= h.config().reclaim_freq {
            h.domain().advance_epoch();
            h.adopt_orphans();
            h.handshake();
            h.reclaim_he_freeable();
            h.note_pass();
        }
    }
}
