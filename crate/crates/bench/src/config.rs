use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use pop_smr::DomainConfig;

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DsKind {
    Hml,
    Ll,
    Hmht,
}

impl DsKind {
    pub const ALL: [DsKind; 3] = [DsKind::Hml, DsKind::Ll, DsKind::Hmht];

    pub fn name(self) -> &'static str {
        match self {
            DsKind::Hml => "hml",
            DsKind::Ll => "ll",
            DsKind::Hmht => "hmht",
        }
    }
}

impl FromStr for DsKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DsKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| BenchError::UnknownName("data structure", s.to_string()))
    }
}

impl fmt::Display for DsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReclaimerKind {
    Nr,
    Hp,
    He,
    Ebr,
    HpPop,
    HePop,
    EpochPop,
    /// Asymmetric-fence hazard pointers. Accepted by the parser so that
    /// matrices naming it produce error rows, but not implemented.
    HpAsym,
}

impl ReclaimerKind {
    /// The seven implemented reclaimers.
    pub const ALL: [ReclaimerKind; 7] = [
        ReclaimerKind::Nr,
        ReclaimerKind::Hp,
        ReclaimerKind::He,
        ReclaimerKind::Ebr,
        ReclaimerKind::HpPop,
        ReclaimerKind::HePop,
        ReclaimerKind::EpochPop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReclaimerKind::Nr => "nr",
            ReclaimerKind::Hp => "hp",
            ReclaimerKind::He => "he",
            ReclaimerKind::Ebr => "ebr",
            ReclaimerKind::HpPop => "hp-pop",
            ReclaimerKind::HePop => "he-pop",
            ReclaimerKind::EpochPop => "epoch-pop",
            ReclaimerKind::HpAsym => "hp-asym",
        }
    }

    pub fn uses_signals(self) -> bool {
        matches!(
            self,
            ReclaimerKind::HpPop | ReclaimerKind::HePop | ReclaimerKind::EpochPop
        )
    }
}

impl FromStr for ReclaimerKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReclaimerKind::ALL
            .into_iter()
            .chain([ReclaimerKind::HpAsym])
            .find(|r| r.name() == s)
            .ok_or_else(|| BenchError::UnknownName("reclaimer", s.to_string()))
    }
}

impl fmt::Display for ReclaimerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One thread sleeps inside an operation: `tid=3,at-ms=200,for-ms=500`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StallSpec {
    pub tid: usize,
    pub at: Duration,
    pub duration: Duration,
}

impl FromStr for StallSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::BadStall(s.to_string());
        let (mut tid, mut at, mut dur) = (None, None, None);
        for part in s.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: u64 = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "tid" => tid = Some(v as usize),
                "at-ms" => at = Some(Duration::from_millis(v)),
                "for-ms" => dur = Some(Duration::from_millis(v)),
                _ => return Err(bad()),
            }
        }
        Ok(StallSpec {
            tid: tid.ok_or_else(bad)?,
            at: at.ok_or_else(bad)?,
            duration: dur.ok_or_else(bad)?,
        })
    }
}

impl fmt::Display for StallSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tid={},at-ms={},for-ms={}",
            self.tid,
            self.at.as_millis(),
            self.duration.as_millis()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ds: DsKind,
    pub reclaimer: ReclaimerKind,
    pub threads: usize,
    pub key_range: usize,
    pub insert_pct: u32,
    pub delete_pct: u32,
    pub duration: Duration,
    pub reclaim_freq: usize,
    pub epoch_freq: u64,
    pub seed: u64,
    pub stall: Option<StallSpec>,
    pub lrr: bool,
    /// Run under the debug allocator and count unsafe accesses.
    pub debug_alloc: bool,
    /// With `debug_alloc`, yield on about one in this many checked accesses
    /// (0 = never). Forces interleavings on machines with few cores.
    pub preempt_every: u32,
    /// Metric sampling period.
    pub sample_every: Duration,
    pub trial: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ds: DsKind::Hml,
            reclaimer: ReclaimerKind::HpPop,
            threads: 8,
            key_range: 2048,
            insert_pct: 50,
            delete_pct: 50,
            duration: Duration::from_millis(1000),
            reclaim_freq: 1024,
            epoch_freq: 100,
            seed: 42,
            stall: None,
            lrr: false,
            debug_alloc: false,
            preempt_every: 0,
            sample_every: Duration::from_millis(100),
            trial: 0,
        }
    }
}

/// Upper bound on worker threads; one more slot is kept for prefill.
pub const MAX_WORKERS: usize = 255;

impl BenchConfig {
    pub const PAPER_DURATION: Duration = Duration::from_secs(5);

    /// Restores the full-size run: 5 s trials and the large retire
    /// threshold.
    pub fn paper_parity(mut self) -> Self {
        self.duration = Self::PAPER_DURATION;
        self.reclaim_freq = DomainConfig::PAPER_RECLAIM_FREQ;
        self
    }

    pub fn contains_pct(&self) -> u32 {
        100 - self.insert_pct - self.delete_pct
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.insert_pct + self.delete_pct > 100 {
            return Err(BenchError::BadMix(self.insert_pct, self.delete_pct));
        }
        if self.threads == 0 || self.threads > MAX_WORKERS {
            return Err(BenchError::BadThreads(self.threads));
        }
        if self.key_range < 2 {
            return Err(BenchError::BadRange(self.key_range));
        }
        if self.lrr && !self.threads.is_multiple_of(2) {
            return Err(BenchError::OddLrrThreads(self.threads));
        }
        if let Some(s) = self.stall {
            if s.tid >= self.threads {
                return Err(BenchError::BadStall(s.to_string()));
            }
        }
        if self.reclaimer == ReclaimerKind::HpAsym {
            return Err(BenchError::Unimplemented("hp-asym"));
        }
        Ok(())
    }

    /// Domain settings for this run: one slot per worker plus the prefill
    /// thread.
    pub fn domain_config(&self) -> DomainConfig {
        let mut cfg = DomainConfig::default()
            .with_threads(self.threads + 1)
            .with_reclaim_freq(self.reclaim_freq)
            .with_epoch_freq(self.epoch_freq)
            .with_watchdog(Duration::from_secs(30));
        if self.debug_alloc {
            cfg = cfg.with_debug_alloc(pop_smr::DebugAllocConfig {
                preempt_every: self.preempt_every,
                ..Default::default()
            });
        }
        cfg
    }
}
