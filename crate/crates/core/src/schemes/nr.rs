use std::sync::atomic::AtomicUsize;

use super::{load_unprotected, Scheme};
use crate::domain::Handle;

/// No reclamation. Retired nodes are only freed when the domain is dropped.
#[derive(Debug, Clone, Copy, Default)]
pub struct Nr;

impl Scheme for Nr {
    const NAME: &'static str = "nr";
    const VALIDATES: bool = false;
    const USES_SIGNALS: bool = false;
    const PROTECTS: bool = false;

    #[inline]
    fn protect(_h: &Handle<Self>, _index: usize, src: &AtomicUsize) -> usize {
        load_unprotected(src)
    }

    fn after_retire(_h: &mut Handle<Self>) {}
}
