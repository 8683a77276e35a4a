use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A value in `R ∪ {+∞}`.
///
/// Infinity is a separate variant rather than `f64::INFINITY` so that
/// constraint costs never leak into finite arithmetic.
#[derive(Clone, Copy, Debug)]
pub enum ExtendedReal {
    Finite(f64),
    Infinity,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        !self.is_finite()
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinity => None,
        }
    }

    /// Maps `+∞` to `f64::INFINITY`; only for reporting and optimizer objectives.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::Infinity => f64::INFINITY,
        }
    }

    /// Multiplication by a non-negative scalar, with `0 · ∞ = 0`.
    pub fn scale(self, c: f64) -> ExtendedReal {
        debug_assert!(c >= 0.0);
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(c * v),
            ExtendedReal::Infinity if c == 0.0 => ExtendedReal::ZERO,
            ExtendedReal::Infinity => ExtendedReal::Infinity,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtendedReal::Infinity
        } else {
            ExtendedReal::Finite(v)
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinity,
        }
    }
}

impl Add<f64> for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: f64) -> ExtendedReal {
        self + ExtendedReal::Finite(rhs)
    }
}

impl std::iter::Sum for ExtendedReal {
    fn sum<I: Iterator<Item = ExtendedReal>>(iter: I) -> Self {
        iter.fold(ExtendedReal::ZERO, |acc, x| acc + x)
    }
}

impl PartialEq for ExtendedReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::Infinity) => Ordering::Less,
            (ExtendedReal::Infinity, ExtendedReal::Finite(_)) => Ordering::Greater,
            (ExtendedReal::Infinity, ExtendedReal::Infinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinity => f.write_str("+inf"),
        }
    }
}

// JSON has no infinity literal: finite values serialize as numbers, +∞ as "+inf".
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => serializer.serialize_f64(*v),
            ExtendedReal::Infinity => serializer.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(ExtendedReal::Finite(v)),
            Repr::Str(s) if s == "+inf" || s == "inf" => Ok(ExtendedReal::Infinity),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("not an extended real: {s}"))),
        }
    }
}
