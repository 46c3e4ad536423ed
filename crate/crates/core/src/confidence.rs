//! The 1-10 confidence rubric and its mapping onto the unit interval.
//!
//! Relations and summaries carry integer scores: a 10 is an unambiguous,
//! direct connection, the 7-9 band covers strong but partly indirect ones,
//! 4-6 marks weak or tangential links, and 1-3 means essentially none.
//! Traversal works on the normalized image `raw / 10` so scores compose
//! multiplicatively.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Integer reliability score on the 1-10 rubric.
///
/// Construction is validated; out-of-range values are rejected rather than
/// clamped so the rubric stays meaningful end to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RawConfidence(u8);

impl RawConfidence {
    pub const MIN: RawConfidence = RawConfidence(1);
    pub const MAX: RawConfidence = RawConfidence(10);

    pub fn new(value: u8) -> Result<Self, ConfidenceError> {
        if (1..=10).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ConfidenceError::OutOfRange(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Normalized image of the rubric score: `raw / 10`, in `[0.1, 1.0]`.
    pub fn normalized<F: Float>(self) -> F {
        F::from(self.0).expect("rubric score fits any float") / F::from(10u8).expect("10 fits any float")
    }
}

impl TryFrom<u8> for RawConfidence {
    type Error = ConfidenceError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<RawConfidence> for u8 {
    fn from(value: RawConfidence) -> Self {
        value.0
    }
}

impl fmt::Display for RawConfidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfidenceError {
    #[error("confidence {0} is outside the 1-10 rubric")]
    OutOfRange(u8),
}
