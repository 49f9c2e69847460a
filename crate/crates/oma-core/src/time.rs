//! Microsecond UTC timestamps with one canonical text form.
//!
//! Every timestamp in the system is stored as microseconds since the Unix
//! epoch and rendered as `YYYY-MM-DDTHH:MM:SSZ`, with a `.ffffff` fraction
//! (exactly six digits) appended only when the sub-second part is nonzero.
//! Inputs may carry `Z` or `±HH:MM` offsets; parsing converts to UTC, so
//! normalization is idempotent and offset-insensitive.

use alloc::string::{String, ToString};
use core::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MICROS_PER_SEC: i64 = 1_000_000;
pub const MICROS_PER_MS: i64 = 1_000;

/// A UTC instant with microsecond precision.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_micros(micros: i64) -> Self {
        Timestamp(micros)
    }

    pub const fn from_seconds(secs: i64) -> Self {
        Timestamp(secs * MICROS_PER_SEC)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Parse an RFC 3339 timestamp (offset `Z` or `±HH:MM`), converting to
    /// UTC and truncating any sub-microsecond digits.
    pub fn parse(raw: &str) -> Result<Self, MalformedTimestamp> {
        let dt = DateTime::parse_from_rfc3339(raw).map_err(|e| MalformedTimestamp {
            input: raw.to_string(),
            detail: e.to_string(),
        })?;
        Ok(Timestamp(dt.with_timezone(&Utc).timestamp_micros()))
    }

    pub const fn add_micros(self, delta: i64) -> Self {
        Timestamp(self.0 + delta)
    }

    pub const fn add_millis(self, delta: i64) -> Self {
        Timestamp(self.0 + delta * MICROS_PER_MS)
    }

    pub const fn add_seconds(self, delta: i64) -> Self {
        Timestamp(self.0 + delta * MICROS_PER_SEC)
    }

    /// Microseconds elapsed since `earlier` (negative if `self` precedes it).
    pub const fn delta_micros(self, earlier: Self) -> i64 {
        self.0 - earlier.0
    }

    /// Whole milliseconds elapsed since `earlier`, truncated toward zero.
    pub const fn delta_millis(self, earlier: Self) -> i64 {
        (self.0 - earlier.0) / MICROS_PER_MS
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let frac = self.0.rem_euclid(MICROS_PER_SEC);
        let dt = DateTime::<Utc>::from_timestamp_micros(self.0)
            .expect("timestamp out of chrono range");
        let base = dt.format("%Y-%m-%dT%H:%M:%S");
        if frac == 0 {
            write!(f, "{base}Z")
        } else {
            write!(f, "{base}.{frac:06}Z")
        }
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Timestamp({self})")
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Timestamp::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Normalize a raw timestamp string to the canonical UTC form.
pub fn normalize_timestamp(raw: &str) -> Result<String, MalformedTimestamp> {
    Ok(Timestamp::parse(raw)?.to_string())
}

/// A string that does not parse as an RFC 3339 timestamp with offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedTimestamp {
    pub input: String,
    pub detail: String,
}

impl fmt::Display for MalformedTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed timestamp {:?}: {}", self.input, self.detail)
    }
}

impl core::error::Error for MalformedTimestamp {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_is_converted_to_utc() {
        assert_eq!(
            normalize_timestamp("2026-01-15T10:00:00-05:00").unwrap(),
            "2026-01-15T15:00:00Z"
        );
    }

    #[test]
    fn canonical_input_is_identity() {
        assert_eq!(
            normalize_timestamp("2026-01-15T10:00:00Z").unwrap(),
            "2026-01-15T10:00:00Z"
        );
    }

    #[test]
    fn fractional_seconds_keep_six_digits() {
        assert_eq!(
            normalize_timestamp("2026-01-15T10:00:00.123456+00:00").unwrap(),
            "2026-01-15T10:00:00.123456Z"
        );
        assert_eq!(
            normalize_timestamp("2026-01-15T10:00:00.5Z").unwrap(),
            "2026-01-15T10:00:00.500000Z"
        );
    }

    #[test]
    fn sub_microsecond_digits_truncate() {
        assert_eq!(
            normalize_timestamp("2026-01-15T10:00:00.1234567Z").unwrap(),
            "2026-01-15T10:00:00.123456Z"
        );
    }

    #[test]
    fn missing_offset_is_rejected() {
        assert!(Timestamp::parse("2026-01-15T10:00:00").is_err());
        assert!(Timestamp::parse("not a time").is_err());
        assert!(Timestamp::parse("2026-13-40T99:00:00Z").is_err());
    }

    #[test]
    fn normalization_is_idempotent() {
        for raw in [
            "2026-01-15T10:00:00-05:00",
            "2026-01-15T10:00:00.000001+05:30",
            "2026-06-30T23:59:59.999999Z",
        ] {
            let once = normalize_timestamp(raw).unwrap();
            let twice = normalize_timestamp(&once).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn ordering_matches_instants() {
        let a = Timestamp::parse("2026-01-15T10:00:00Z").unwrap();
        let b = Timestamp::parse("2026-01-15T10:00:00.000001Z").unwrap();
        let c = Timestamp::parse("2026-01-15T05:00:01-05:00").unwrap();
        assert!(a < b);
        assert!(b < c);
        assert_eq!(c.delta_micros(a), 1_000_000);
        assert_eq!(c.delta_millis(a), 1_000);
    }

    #[test]
    fn arithmetic_round_trips() {
        let t = Timestamp::parse("2026-01-15T10:00:00Z").unwrap();
        assert_eq!(t.add_seconds(90).delta_millis(t), 90_000);
        assert_eq!(t.add_millis(1).to_string(), "2026-01-15T10:00:00.001000Z");
        assert_eq!(t.add_micros(50).to_string(), "2026-01-15T10:00:00.000050Z");
    }
}
