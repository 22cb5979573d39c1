//! Concurrent sets parameterized by a reclaimer.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Domain, Handle};
use crate::schemes::Scheme;

mod hmht;
mod hml;
mod lazy;

pub use hmht::HashTable;
pub use hml::HarrisMichaelList;
pub use lazy::LazyList;

/// Key written over a freed node's key field by the debug allocator.
pub const POISON_KEY: i64 = crate::alloc::POISON_WORD as i64;

/// Integer set keyed by `i64`. Every method runs one complete operation
/// (begin, traverse, end) on behalf of the handle's thread.
pub trait ConcurrentSet<S: Scheme>: Send + Sync {
    /// Short CLI name.
    const NAME: &'static str;

    /// Builds an empty set sized for `key_range` keys. Only the hash table
    /// uses the size.
    fn with_range(domain: &Arc<Domain<S>>, key_range: usize) -> Self
    where
        Self: Sized;

    fn insert(&self, h: &mut Handle<S>, key: i64) -> bool;

    fn remove(&self, h: &mut Handle<S>, key: i64) -> bool;

    fn contains(&self, h: &mut Handle<S>, key: i64) -> bool {
        self.contains_with(h, key, &mut || {})
    }

    /// `contains` that calls `pause` once in the middle of the traversal,
    /// while holding its reservations. Used for stall injection.
    fn contains_with(&self, h: &mut Handle<S>, key: i64, pause: &mut dyn FnMut()) -> bool;

    /// Keys currently present, in ascending order. Only meaningful while no
    /// other thread is operating on the set.
    fn keys(&self, h: &mut Handle<S>) -> Vec<i64>;

    /// Inserts distinct uniform keys from `[0, key_range)` until the set
    /// holds `target` of them. Random insertion order also scatters list
    /// nodes in memory, as a long-running workload would.
    fn prefill(&self, h: &mut Handle<S>, target: usize, key_range: usize, seed: u64) {
        assert!(
            target <= key_range,
            "cannot hold {target} distinct keys in range {key_range}"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut present: HashSet<i64> = self.keys(h).into_iter().collect();
        while present.len() < target {
            let key = rng.gen_range(0..key_range as i64);
            if self.insert(h, key) {
                present.insert(key);
            }
        }
    }
}
