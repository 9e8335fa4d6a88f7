use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("malformed coefficient tuple: {0}")]
    MalformedTuple(String),
    #[error("tuple {0} is not valid (needs d_1 = 1 and each d_l at most the sum of its predecessors)")]
    InvalidTuple(String),
    #[error("search budget of {limit} nodes exhausted")]
    BudgetExhausted { limit: u64 },
    #[error("value exceeds the 63-bit range")]
    Overflow,
    #[error("m = {0} is not supported (m must be at least 3)")]
    UnsupportedM(usize),
    #[error("argument outside the formula's domain: {0}")]
    Domain(String),
    #[error("malformed closed form: {0}")]
    MalformedClosedForm(String),
    #[error("malformed witness: {0}")]
    MalformedWitness(String),
    #[error("malformed sequence cache: {0}")]
    MalformedCache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
