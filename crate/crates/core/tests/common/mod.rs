#![allow(dead_code)]

use std::sync::atomic::AtomicUsize;

use pop_smr::{NodeHeader, Reclaimable};

/// Minimal reclaimable node for driving the reclaimers directly.
#[repr(C)]
pub struct Cell {
    header: NodeHeader,
    pub value: u64,
}

impl Cell {
    pub fn new(value: u64) -> Self {
        Cell {
            header: NodeHeader::new(),
            value,
        }
    }
}

unsafe impl Reclaimable for Cell {
    fn header(&self) -> &NodeHeader {
        &self.header
    }

    fn poison(&mut self) {
        unsafe { std::ptr::write_volatile(&mut self.value, u64::MAX) };
    }

    fn is_poisoned(&self) -> bool {
        unsafe { std::ptr::read_volatile(&self.value) == u64::MAX }
    }
}

/// Shared link cell that a reader protects from.
pub fn link(ptr: *mut Cell) -> AtomicUsize {
    AtomicUsize::new(ptr as usize)
}

/// Runs `$body` once per reclaimer with `$S` bound to the scheme type.
#[macro_export]
macro_rules! for_each_scheme {
    ($S:ident => $body:block) => {{
        {
            type $S = pop_smr::Nr;
            $body
        }
        {
            type $S = pop_smr::Hp;
            $body
        }
        {
            type $S = pop_smr::He;
            $body
        }
        {
            type $S = pop_smr::Ebr;
            $body
        }
        {
            type $S = pop_smr::HpPop;
            $body
        }
        {
            type $S = pop_smr::HePop;
            $body
        }
        {
            type $S = pop_smr::EpochPop;
            $body
        }
    }};
}

/// Runs `$body` for all 21 (reclaimer, structure) pairs.
#[macro_export]
macro_rules! for_each_pair {
    ($S:ident, $D:ident => $body:block) => {{
        $crate::for_each_scheme!($S => {
            { type $D = pop_smr::HarrisMichaelList<$S>; $body }
            { type $D = pop_smr::LazyList<$S>; $body }
            { type $D = pop_smr::HashTable<$S>; $body }
        });
    }};
}
