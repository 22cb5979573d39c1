use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown {0} `{1}`")]
    UnknownName(&'static str, String),
    #[error(
        "bad stall spec `{0}`; expected tid=N,at-ms=N,for-ms=N with tid below the thread count"
    )]
    BadStall(String),
    #[error("insert {0}% + delete {1}% exceeds 100%")]
    BadMix(u32, u32),
    #[error("thread count {0} out of range")]
    BadThreads(usize),
    #[error("key range {0} too small")]
    BadRange(usize),
    #[error("long-running-reads mode needs an even thread count, got {0}")]
    OddLrrThreads(usize),
    #[error("{0} is not implemented")]
    Unimplemented(&'static str),
    #[error(transparent)]
    Domain(#[from] pop_smr::DomainError),
    #[error("worker panicked: {0}")]
    WorkerPanic(String),
    #[error("matrix spec: {0}")]
    Spec(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
