//! The reclaimers. Each is a zero-sized marker implementing [`Scheme`];
//! all per-thread state lives in the domain slots and the [`Handle`].

use std::sync::atomic::{compiler_fence, fence, AtomicUsize, Ordering};

use crate::domain::{Handle, TAG_MASK};
use crate::header::MAX;

mod ebr;
mod epoch_pop;
mod he;
mod he_pop;
mod hp;
mod hp_pop;
mod nr;

pub use ebr::Ebr;
pub use epoch_pop::EpochPop;
pub use he::He;
pub use he_pop::HePop;
pub use hp::Hp;
pub use hp_pop::HpPop;
pub use nr::Nr;

/// Uniform reclaimer interface consumed by the data structures.
pub trait Scheme: Sized + Send + Sync + 'static {
    /// CLI name.
    const NAME: &'static str;
    /// `protect` only covers the node if the caller re-validates that it is
    /// still linked (hazard-style schemes). Epoch-only schemes return
    /// `false`.
    const VALIDATES: bool;
    const USES_SIGNALS: bool;
    /// Whether the epoch fast path falls back to a pointer scan, which
    /// requires the fallback threshold to cover every reservation.
    const HAS_FALLBACK: bool = false;
    /// Whether operations hold any reservation at all.
    const PROTECTS: bool = true;

    fn begin_op(_h: &mut Handle<Self>) {}

    fn end_op(_h: &mut Handle<Self>) {}

    fn protect(h: &Handle<Self>, index: usize, src: &AtomicUsize) -> usize;

    /// Called after every retire with the new node already listed.
    fn after_retire(h: &mut Handle<Self>);
}

/// Plain acquire load; the epoch announcement is the protection.
#[inline]
pub(crate) fn load_unprotected(src: &AtomicUsize) -> usize {
    src.load(Ordering::Acquire)
}

/// Stores the handle in a private slot and re-reads the source until the
/// two agree. Only a compiler fence separates the store from the re-read:
/// the publishing signal handler runs on this same thread.
#[inline]
pub(crate) fn protect_local<S: Scheme>(h: &Handle<S>, index: usize, src: &AtomicUsize) -> usize {
    let slot = &h.slot().local.ptrs[index];
    let mut raw = src.load(Ordering::Acquire);
    loop {
        compiler_fence(Ordering::SeqCst);
        slot.store(raw & !TAG_MASK, Ordering::Relaxed);
        compiler_fence(Ordering::SeqCst);
        let again = src.load(Ordering::Acquire);
        if again == raw {
            return raw;
        }
        raw = again;
    }
}

/// Stores the handle straight into the shared slot, fences, then re-reads.
#[inline]
pub(crate) fn protect_shared<S: Scheme>(h: &Handle<S>, index: usize, src: &AtomicUsize) -> usize {
    let slot = &h.slot().shared.ptrs[index];
    let mut raw = src.load(Ordering::Acquire);
    loop {
        slot.store(raw & !TAG_MASK, Ordering::Release);
        fence(Ordering::SeqCst);
        let again = src.load(Ordering::Acquire);
        if again == raw {
            return raw;
        }
        raw = again;
    }
}

/// True iff no reserved era falls inside `[birth, retire]`. `MAX` entries
/// stand for empty slots.
pub fn can_free(birth: u64, retire: u64, eras: &[u64]) -> bool {
    eras.iter().all(|&e| e == MAX || e < birth || e > retire)
}

/// [`can_free`] over a sorted, `MAX`-free era list.
pub fn can_free_sorted(birth: u64, retire: u64, sorted: &[u64]) -> bool {
    let i = sorted.partition_point(|&e| e < birth);
    match sorted.get(i) {
        Some(&e) => e > retire,
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn can_free_examples() {
        assert!(can_free(5, 7, &[MAX, MAX]));
        assert!(!can_free(5, 7, &[6]));
        assert!(!can_free(5, 7, &[5]));
        assert!(!can_free(5, 7, &[7]));
        assert!(can_free(5, 7, &[4, 9]));
    }

    #[test]
    fn sorted_variant_matches_linear() {
        let eras = [1u64, 4, 9, 12];
        for birth in 0..16 {
            for retire in birth..16 {
                assert_eq!(
                    can_free(birth, retire, &eras),
                    can_free_sorted(birth, retire, &eras),
                    "[{birth}, {retire}]"
                );
            }
        }
    }
}
