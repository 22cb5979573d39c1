use std::time::Duration;

use crate::error::ConfigError;

/// Capacity of the inline reservation arrays in each thread slot.
pub const HP_CAPACITY: usize = 8;

/// Real-time signal used for pings, expressed as an offset from `SIGRTMIN`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignalId(pub i32);

impl SignalId {
    pub const DEFAULT_OFFSET: i32 = 5;

    /// Reads `POP_SIGNAL` (an offset from the first real-time signal),
    /// falling back to [`SignalId::default`].
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var("POP_SIGNAL") {
            Ok(raw) => {
                let offset = raw
                    .trim()
                    .parse::<i32>()
                    .map_err(|_| ConfigError::BadSignal(raw.clone()))?;
                let id = SignalId(offset);
                id.validate()?;
                Ok(id)
            }
            Err(_) => Ok(SignalId::default()),
        }
    }

    pub fn signo(self) -> libc::c_int {
        libc::SIGRTMIN() + self.0
    }

    fn validate(self) -> Result<(), ConfigError> {
        if self.0 < 0 || libc::SIGRTMIN() + self.0 > libc::SIGRTMAX() {
            return Err(ConfigError::BadSignal(self.0.to_string()));
        }
        Ok(())
    }
}

impl Default for SignalId {
    fn default() -> Self {
        SignalId(Self::DEFAULT_OFFSET)
    }
}

/// Positive rational `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Fraction {
    pub const HALF: Fraction = Fraction { num: 1, den: 2 };

    pub fn new(num: u32, den: u32) -> Self {
        Fraction { num, den }
    }

    /// `floor(self * n)`.
    pub fn of(self, n: usize) -> usize {
        (n as u128 * self.num as u128 / self.den as u128) as usize
    }
}

/// Debug-allocator options.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DebugAllocConfig {
    /// Freed nodes kept un-recycled before their memory is returned.
    pub quarantine: usize,
    /// Panic on the first use-after-free instead of counting it.
    pub abort_on_uaf: bool,
    /// When non-zero, each checked dereference yields the CPU with
    /// probability `1 / preempt_every`. Forces interleavings inside
    /// traversals on machines with few cores.
    pub preempt_every: u32,
}

impl Default for DebugAllocConfig {
    fn default() -> Self {
        DebugAllocConfig {
            quarantine: 4096,
            abort_on_uaf: false,
            preempt_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    /// Retire-list size that triggers a reclamation pass.
    pub reclaim_freq: usize,
    /// `begin_op` calls between global-epoch increments.
    pub epoch_freq: u64,
    /// Reservation slots per thread.
    pub max_hp: usize,
    /// EpochPOP falls back to the ping handshake when more than
    /// `fallback_factor * reclaim_freq` nodes survive an epoch pass.
    pub fallback_factor: Fraction,
    pub max_threads: usize,
    pub signal: SignalId,
    /// Panic with a diagnostic if a publish handshake waits longer than this.
    pub watchdog: Option<Duration>,
    pub debug_alloc: Option<DebugAllocConfig>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            reclaim_freq: 1024,
            epoch_freq: 100,
            max_hp: 3,
            fallback_factor: Fraction::HALF,
            max_threads: 64,
            signal: SignalId::default(),
            watchdog: None,
            debug_alloc: None,
        }
    }
}

impl DomainConfig {
    /// Benchmark-scale retire threshold.
    pub const PAPER_RECLAIM_FREQ: usize = 24576;

    pub fn with_threads(mut self, max_threads: usize) -> Self {
        self.max_threads = max_threads;
        self
    }

    pub fn with_reclaim_freq(mut self, reclaim_freq: usize) -> Self {
        self.reclaim_freq = reclaim_freq;
        self
    }

    pub fn with_epoch_freq(mut self, epoch_freq: u64) -> Self {
        self.epoch_freq = epoch_freq;
        self
    }

    pub fn with_debug_alloc(mut self, debug: DebugAllocConfig) -> Self {
        self.debug_alloc = Some(debug);
        self
    }

    pub fn with_watchdog(mut self, watchdog: Duration) -> Self {
        self.watchdog = Some(watchdog);
        self
    }

    /// Survivor count above which EpochPOP runs its fallback pass.
    pub fn fallback_threshold(&self) -> usize {
        self.fallback_factor.of(self.reclaim_freq)
    }

    /// Checks the basic invariants. `needs_fallback_bound` additionally
    /// requires that the fallback threshold can hold every reservation in the
    /// system, which only matters for schemes with an epoch fast path.
    pub fn validate(&self, needs_fallback_bound: bool) -> Result<(), ConfigError> {
        if self.reclaim_freq == 0 {
            return Err(ConfigError::Zero("reclaim_freq"));
        }
        if self.epoch_freq == 0 {
            return Err(ConfigError::Zero("epoch_freq"));
        }
        if self.max_hp == 0 {
            return Err(ConfigError::Zero("max_hp"));
        }
        if self.max_threads == 0 {
            return Err(ConfigError::Zero("max_threads"));
        }
        if self.max_hp > HP_CAPACITY {
            return Err(ConfigError::TooManySlots {
                requested: self.max_hp,
                capacity: HP_CAPACITY,
            });
        }
        if self.fallback_factor.num == 0 || self.fallback_factor.den == 0 {
            return Err(ConfigError::Zero("fallback_factor"));
        }
        if needs_fallback_bound {
            let reserved = self.max_threads * self.max_hp;
            if self.fallback_threshold() < reserved {
                return Err(ConfigError::FallbackTooSmall {
                    threshold: self.fallback_threshold(),
                    reserved,
                });
            }
        }
        self.signal.validate()
    }
}
