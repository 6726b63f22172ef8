//! Nonnegative extended reals: a finite value or `+∞`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// A real number that may also be `+∞`.
///
/// Serializes as a JSON number when finite and as the string `"inf"` otherwise,
/// so reports never carry a large float standing in for infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInfinity => None,
        }
    }

    /// Lossy conversion to `f64` (`+∞` maps to `f64::INFINITY`).
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::PosInfinity => f64::INFINITY,
        }
    }

    /// Restricts the value to `[lo, hi]`; `+∞` becomes `hi`.
    pub fn clamp(self, lo: f64, hi: f64) -> f64 {
        match self {
            Extended::Finite(v) => v.clamp(lo, hi),
            Extended::PosInfinity => hi,
        }
    }

    /// `numerator / denominator`, mapping nonpositive denominators to `+∞`.
    pub fn ratio(numerator: f64, denominator: f64) -> Self {
        if denominator > 0.0 {
            Extended::Finite(numerator / denominator)
        } else {
            Extended::PosInfinity
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            Extended::PosInfinity
        } else {
            Extended::Finite(v)
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => serializer.serialize_f64(*v),
            Extended::PosInfinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(Extended::Finite(v)),
            Repr::Str(s) if s == "inf" => Ok(Extended::PosInfinity),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}
