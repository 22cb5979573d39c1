use std::sync::atomic::AtomicUsize;

use super::{load_unprotected, Scheme};
use crate::domain::Handle;

/// Textbook epoch-based reclamation. Not robust: one delayed thread stops
/// all freeing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ebr;

impl Scheme for Ebr {
    const NAME: &'static str = "ebr";
    const VALIDATES: bool = false;
    const USES_SIGNALS: bool = false;

    fn begin_op(h: &mut Handle<Self>) {
        h.op_counter += 1;
        if h.op_counter.is_multiple_of(h.config().epoch_freq) {
            h.domain().advance_epoch();
        }
        h.announce_epoch(h.domain().epoch());
    }

    fn end_op(h: &mut Handle<Self>) {
        h.retract_epoch();
    }

    #[inline]
    fn protect(_h: &Handle<Self>, _index: usize, src: &AtomicUsize) -> usize {
        load_unprotected(src)
    }

    fn after_retire(h: &mut Handle<Self>) {
        if h.retired.len().is_multiple_of(h.config().reclaim_freq) {
            h.adopt_orphans();
            h.reclaim_epoch_freeable();
            h.note_pass();
        }
    }
}
