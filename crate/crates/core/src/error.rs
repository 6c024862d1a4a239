use thiserror::Error;

/// Errors produced by the library. Every variant names the precondition it
/// guards so front ends can map it to a stable exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid modulus {0}: must be a prime in [2, 17]")]
    InvalidPrime(u32),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("budget exceeded for {what}: needs {required} work units, budget is {budget}")]
    BudgetExceeded {
        what: String,
        required: u128,
        budget: u64,
    },

    #[error("affine map is not an embedding (rank {rank} < input dimension {in_dim})")]
    NotEmbedding { rank: usize, in_dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("property `{0}` has no enumerator at this size")]
    NoEnumerator(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Upper bound on the work an exhaustive computation may perform.
///
/// Work is counted in the natural unit of each operation (tuples visited,
/// maps enumerated, ...); the operation documents its own cost formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Budget(pub u64);

impl Budget {
    pub const DEFAULT: Budget = Budget(1 << 32);

    pub fn check(self, what: &str, required: u128) -> Result<()> {
        if required > self.0 as u128 {
            Err(Error::BudgetExceeded {
                what: what.to_string(),
                required,
                budget: self.0,
            })
        } else {
            Ok(())
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::DEFAULT
    }
}

/// `base^exp` as a `u128`, saturating at `u128::MAX`.
pub(crate) fn pow_sat(base: u64, exp: u64) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}
