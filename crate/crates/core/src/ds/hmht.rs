//! Fixed-size hash table whose buckets are Harris-Michael lists.

use std::sync::atomic::AtomicUsize;
use std::sync::Arc;

use super::{hml, ConcurrentSet};
use crate::domain::{Domain, Handle};
use crate::schemes::Scheme;

pub struct HashTable<S: Scheme> {
    buckets: Box<[AtomicUsize]>,
    domain: Arc<Domain<S>>,
}

// Nodes are only reached through the reclaimer protocol.
unsafe impl<S: Scheme> Send for HashTable<S> {}
unsafe impl<S: Scheme> Sync for HashTable<S> {}

impl<S: Scheme> std::fmt::Debug for HashTable<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HashTable")
            .field("scheme", &S::NAME)
            .field("buckets", &self.buckets.len())
            .finish()
    }
}

impl<S: Scheme> HashTable<S> {
    pub const LOAD_FACTOR: usize = 6;

    pub fn new(domain: &Arc<Domain<S>>, buckets: usize) -> Self {
        let buckets = buckets.max(1);
        HashTable {
            buckets: (0..buckets).map(|_| AtomicUsize::new(0)).collect(),
            domain: Arc::clone(domain),
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket_of(&self, key: i64) -> usize {
        key.rem_euclid(self.buckets.len() as i64) as usize
    }

    /// Keys stored in one bucket, ascending.
    pub fn bucket_keys(&self, h: &mut Handle<S>, bucket: usize) -> Vec<i64> {
        let mut out = Vec::new();
        hml::keys(&self.buckets[bucket], h, &mut out);
        out
    }

    fn head(&self, key: i64) -> &AtomicUsize {
        &self.buckets[self.bucket_of(key)]
    }
}

impl<S: Scheme> ConcurrentSet<S> for HashTable<S> {
    const NAME: &'static str = "hmht";

    fn with_range(domain: &Arc<Domain<S>>, key_range: usize) -> Self {
        Self::new(domain, key_range / Self::LOAD_FACTOR)
    }

    fn insert(&self, h: &mut Handle<S>, key: i64) -> bool {
        h.begin_op();
        let r = hml::insert(self.head(key), h, key);
        h.end_op();
        r
    }

    fn remove(&self, h: &mut Handle<S>, key: i64) -> bool {
        h.begin_op();
        let r = hml::remove(self.head(key), h, key);
        h.end_op();
        r
    }

    fn contains_with(&self, h: &mut Handle<S>, key: i64, pause: &mut dyn FnMut()) -> bool {
        h.begin_op();
        let r = hml::contains(self.head(key), h, key, pause);
        h.end_op();
        r
    }

    fn keys(&self, h: &mut Handle<S>) -> Vec<i64> {
        let mut out = Vec::new();
        for b in self.buckets.iter() {
            hml::keys(b, h, &mut out);
        }
        out.sort_unstable();
        out
    }
}

impl<S: Scheme> Drop for HashTable<S> {
    fn drop(&mut self) {
        for b in self.buckets.iter() {
            unsafe { hml::free_all(b, &self.domain) };
        }
    }
}
