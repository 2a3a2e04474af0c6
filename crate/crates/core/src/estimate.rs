use std::fmt;

/// How an error radius should be read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimateKind {
    /// The true value lies in `[value - error, value + error]`.
    Certified,
    /// `error` is a confidence-interval half-width.
    Statistical,
}

impl EstimateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateKind::Certified => "certified",
            EstimateKind::Statistical => "statistical",
        }
    }
}

/// A real value with an error radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub kind: EstimateKind,
}

/// Canonical and expected heights.
pub type HeightEstimate = Estimate;
/// Green functions and local heights.
pub type GreenValue = Estimate;

/// Relative rounding floor for logs of exact integers.
pub const LOG_FLOOR: f64 = 1.0 / (1u64 << 40) as f64;

impl Estimate {
    pub fn certified(value: f64, error: f64) -> Self {
        Estimate { value, error, kind: EstimateKind::Certified }
    }

    pub fn statistical(value: f64, error: f64) -> Self {
        Estimate { value, error, kind: EstimateKind::Statistical }
    }

    pub fn lo(&self) -> f64 {
        self.value - self.error
    }

    pub fn hi(&self) -> f64 {
        self.value + self.error
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    /// Both endpoints on the same side of zero.
    pub fn excludes_zero(&self) -> bool {
        self.lo() > 0.0 || self.hi() < 0.0
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {} ({})", self.value, self.error, self.kind.as_str())
    }
}
