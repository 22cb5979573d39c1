use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("max_hp {requested} exceeds slot capacity {capacity}")]
    TooManySlots { requested: usize, capacity: usize },
    #[error(
        "fallback threshold {threshold} cannot hold {reserved} reservations; \
         raise fallback_factor or reclaim_freq"
    )]
    FallbackTooSmall { threshold: usize, reserved: usize },
    #[error("invalid real-time signal offset `{0}`")]
    BadSignal(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("all {0} thread slots are in use")]
    CapacityExhausted(usize),
    #[error("this thread is already registered in {0} domains")]
    TooManyRegistrations(usize),
    #[error("failed to install signal handler: errno {0}")]
    SignalInstall(i32),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
