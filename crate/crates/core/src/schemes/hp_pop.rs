use std::sync::atomic::AtomicUsize;

use super::{protect_local, Scheme};
use crate::domain::Handle;

/// Hazard pointers with publish-on-ping: reservations stay in private slots
/// until a reclaimer pings.
#[derive(Debug, Clone, Copy, Default)]
pub struct HpPop;

impl Scheme for HpPop {
    const NAME: &'static str = "hp-pop";
    const VALIDATES: bool = true;
    const USES_SIGNALS: bool = true;

    fn end_op(h: &mut Handle<Self>) {
        h.clear();
    }

    #[inline]
    fn protect(h: &Handle<Self>, index: usize, src: &AtomicUsize) -> usize {
        protect_local(h, index, src)
    }

    fn after_retire(h: &mut Handle<Self>) {
        if h.retired.len() >= h.config().reclaim_freq {
            h.adopt_orphans();
            h.handshake();
            h.reclaim_hp_freeable();
            h.note_pass();
        }
    }
}
