//! Safe memory reclamation with publish-on-ping.
//!
//! Readers record reservations in private, unfenced slots. A reclaimer that
//! needs them pings every thread with a real-time signal; each handler copies
//! its private slots to shared ones and bumps a counter, and the reclaimer
//! waits for every counter to move before scanning.
//!
//! Schemes: [`HpPop`], [`HePop`], [`EpochPop`], and the baselines [`Hp`],
//! [`He`], [`Ebr`], [`Nr`]. Data structures in [`ds`] work with any of them.

pub mod alloc;
pub mod config;
pub mod domain;
pub mod ds;
pub mod error;
pub mod header;
pub mod lincheck;
pub mod model;
pub mod schemes;
mod signal;

pub use alloc::{DebugAllocator, DebugReport};
pub use config::{DebugAllocConfig, DomainConfig, Fraction, SignalId, HP_CAPACITY};
pub use domain::{Domain, DomainStats, Handle, TAG_MASK};
pub use ds::{ConcurrentSet, HarrisMichaelList, HashTable, LazyList};
pub use error::{ConfigError, DomainError};
pub use header::{NodeHeader, Reclaimable, Retired, MAX};
pub use schemes::{can_free, Ebr, EpochPop, He, HePop, Hp, HpPop, Nr, Scheme};
