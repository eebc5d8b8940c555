//! Exact score time in quarter-note beats.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A position or length on the score timeline, measured in quarter notes.
///
/// Stored as an exact rational so that onset grouping never depends on
/// floating-point rounding.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Beat(pub Rational64);

impl Beat {
    pub const ZERO: Beat = Beat(Rational64::new_raw(0, 1));

    pub fn new(numer: i64, denom: i64) -> Beat {
        Beat(Rational64::new(numer, denom))
    }

    pub fn from_integer(n: i64) -> Beat {
        Beat(Rational64::from_integer(n))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Largest integer not above this value.
    pub fn floor(&self) -> i64 {
        *self.0.floor().numer()
    }

    /// Euclidean remainder modulo a positive length.
    pub fn rem_euclid(self, modulus: Beat) -> Beat {
        let q = (self.0 / modulus.0).floor();
        Beat(self.0 - q * modulus.0)
    }

    /// Closest representable beat to a decimal value, with the given denominator.
    pub fn approximate(value: f64, denom: i64) -> Beat {
        Beat::new((value * denom as f64).round() as i64, denom)
    }
}

impl fmt::Debug for Beat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Beat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid beat value {0:?}")]
pub struct ParseBeatError(String);

impl FromStr for Beat {
    type Err = ParseBeatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseBeatError(s.to_string());
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| err())?;
                let d: i64 = d.trim().parse().map_err(|_| err())?;
                if d == 0 {
                    return Err(err());
                }
                Ok(Beat::new(n, d))
            }
            None => s.parse::<i64>().map(Beat::from_integer).map_err(|_| err()),
        }
    }
}

impl Serialize for Beat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Beat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Add for Beat {
    type Output = Beat;
    fn add(self, rhs: Beat) -> Beat {
        Beat(self.0 + rhs.0)
    }
}

impl AddAssign for Beat {
    fn add_assign(&mut self, rhs: Beat) {
        self.0 += rhs.0;
    }
}

impl Sub for Beat {
    type Output = Beat;
    fn sub(self, rhs: Beat) -> Beat {
        Beat(self.0 - rhs.0)
    }
}

impl Mul<i64> for Beat {
    type Output = Beat;
    fn mul(self, rhs: i64) -> Beat {
        Beat(self.0 * rhs)
    }
}

impl Sum for Beat {
    fn sum<I: Iterator<Item = Beat>>(iter: I) -> Beat {
        iter.fold(Beat::ZERO, |a, b| a + b)
    }
}
