//! Time units.
//!
//! Every duration is held as an integer number of nanoseconds so that tag
//! streams and histogram bin edges are bit-reproducible. Configuration files
//! express durations as decimal microseconds; the conversion is exact or it
//! is rejected.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative duration in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Nanos(pub u64);

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);

    /// Converts decimal microseconds, failing unless the value is a whole
    /// number of nanoseconds.
    pub fn from_micros(us: f64) -> Result<Self, String> {
        if !us.is_finite() || us < 0.0 {
            return Err(format!("duration must be a finite non-negative number of µs, got {us}"));
        }
        let ns = us * 1000.0;
        let rounded = ns.round();
        if (ns - rounded).abs() > 1e-6 * rounded.max(1.0) {
            return Err(format!("{us} µs is not a whole number of nanoseconds"));
        }
        if rounded > u64::MAX as f64 {
            return Err(format!("{us} µs overflows the nanosecond range"));
        }
        Ok(Nanos(rounded as u64))
    }

    pub fn from_micros_lossy(us: f64) -> Self {
        Nanos((us * 1000.0).round().max(0.0) as u64)
    }

    pub fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_ns_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn as_micros(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} µs", self.as_micros())
    }
}

impl Serialize for Nanos {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_micros())
    }
}

impl<'de> Deserialize<'de> for Nanos {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let us = f64::deserialize(deserializer)?;
        Nanos::from_micros(us).map_err(de::Error::custom)
    }
}
