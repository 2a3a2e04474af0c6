use thiserror::Error;

/// Errors produced by the height machinery.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("(0, 0) is not a point of the projective line")]
    ZeroPoint,
    #[error("valuation is undefined at zero")]
    UndefinedAtZero,
    #[error("logarithm requires a positive integer")]
    NonPositive,
    #[error("degenerate map: {0}")]
    DegenerateMap(String),
    #[error("enumeration budget exceeded: {needed} words requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("iteration cap: orbit coordinates reached {bits} bits (budget {budget})")]
    IterationCap { bits: u64, budget: u64 },
    #[error("point lies on the divisor")]
    OnDivisor,
    #[error("orbit numerator is zero at step {0}")]
    ZeroNumerator(usize),
    #[error("orbit hit {what} at step {step} before the horizon")]
    OrbitDegenerate { step: usize, what: &'static str },
    #[error("delta vanishes for this map")]
    SingularDelta,
    #[error("characteristic {p} divides the degree {d}")]
    BadCharacteristic { p: u64, d: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for resource-limit failures (enumeration or bit budgets).
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. } | Error::IterationCap { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
