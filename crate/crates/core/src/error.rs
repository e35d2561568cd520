use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwdError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// `1 - W T` is not positive, so the period-effect block cannot be inverted.
    #[error("degenerate variance: W*T = {wt} is not below 1")]
    DegenerateVariance { wt: f64 },

    #[error("treatment effect is not estimable for allocation {0}")]
    NonEstimable(String),

    #[error("{count} distinct allocations exceed the enumeration cap of {cap}; use a random sampling mode instead")]
    TooLarge { count: u128, cap: u128 },

    #[error(
        "no sampled allocation reached efficiency {threshold}; best efficiency found was {best:.6}"
    )]
    NoQualifier { threshold: f64, best: f64 },
}

pub type Result<T> = std::result::Result<T, SwdError>;
