use std::sync::atomic::AtomicUsize;

use super::{protect_local, Scheme};
use crate::domain::Handle;

/// Epoch-based reclamation that tracks reservations privately and falls
/// back to a publish-on-ping pointer scan when a delayed thread pins the
/// epoch.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpochPop;

impl Scheme for EpochPop {
    const NAME: &'static str = "epoch-pop";
    const VALIDATES: bool = true;
    const USES_SIGNALS: bool = true;
    const HAS_FALLBACK: bool = true;

    fn begin_op(h: &mut Handle<Self>) {
        h.op_counter += 1;
        if h.op_counter.is_multiple_of(h.config().epoch_freq) {
            h.domain().advance_epoch();
        }
        h.announce_epoch(h.domain().epoch());
    }

    fn end_op(h: &mut Handle<Self>) {
        h.retract_epoch();
        h.clear();
    }

    #[inline]
    fn protect(h: &Handle<Self>, index: usize, src: &AtomicUsize) -> usize {
        protect_local(h, index, src)
    }

    fn after_retire(h: &mut Handle<Self>) {
        let cfg = h.config();
        let (freq, threshold) = (cfg.reclaim_freq, cfg.fallback_threshold());
        if !h.retired.len().is_multiple_of(freq) {
            return;
        }
        h.adopt_orphans();
        h.reclaim_epoch_freeable();
        h.note_pass();
        if h.retired.len() > threshold {
            h.handshake();
            h.reclaim_hp_freeable();
            h.note_fallback();
        }
    }
}
