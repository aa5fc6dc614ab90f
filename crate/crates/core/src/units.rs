//! Integer time, rate and size units used throughout the simulator.
//!
//! Scenario files may write quantities either as bare integers (nanoseconds,
//! bits per second, bytes) or as strings with a unit suffix such as `"5us"`,
//! `"5Gbps"` or `"1.5MB"`. Sizes use decimal prefixes (1 KB = 1000 bytes).

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Nanoseconds since the start of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    /// Rounds to the nearest nanosecond; negative inputs saturate at zero.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1e9).round().max(0.0) as u64)
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn mul_f64(self, k: f64) -> SimTime {
        SimTime::from_secs_f64(self.as_secs_f64() * k)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Link or sending rate in bits per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitRate(pub u64);

impl BitRate {
    pub const fn bps(v: u64) -> Self {
        BitRate(v)
    }

    pub const fn mbps(v: u64) -> Self {
        BitRate(v * 1_000_000)
    }

    pub const fn gbps(v: u64) -> Self {
        BitRate(v * 1_000_000_000)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Time to put `bytes` on the wire, rounded up to a whole nanosecond.
    pub fn serialization_time(self, bytes: u64) -> SimTime {
        let bits = bytes as u128 * 8 * 1_000_000_000;
        let rate = self.0 as u128;
        SimTime(bits.div_ceil(rate) as u64)
    }

    /// Bytes this rate moves in `dur`, rounded down.
    pub fn bytes_in(self, dur: SimTime) -> u64 {
        (self.0 as u128 * dur.0 as u128 / 8 / 1_000_000_000) as u64
    }
}

impl fmt::Display for BitRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}bps", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {input:?} as {what}")]
pub struct UnitError {
    input: String,
    what: &'static str,
}

fn split_number(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    let end = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '-' || c == '+'))
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(end);
    num.parse::<f64>().ok().map(|v| (v, unit.trim()))
}

fn scaled(value: f64, scale: f64, input: &str, what: &'static str) -> Result<u64, UnitError> {
    let v = value * scale;
    if !v.is_finite() || v < 0.0 || v > u64::MAX as f64 {
        return Err(UnitError { input: input.to_string(), what });
    }
    Ok(v.round() as u64)
}

impl std::str::FromStr for SimTime {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnitError { input: s.to_string(), what: "a duration" };
        let (v, unit) = split_number(s).ok_or_else(err)?;
        let scale = match unit {
            "" | "ns" => 1.0,
            "us" | "µs" => 1e3,
            "ms" => 1e6,
            "s" => 1e9,
            _ => return Err(err()),
        };
        scaled(v, scale, s, "a duration").map(SimTime)
    }
}

impl std::str::FromStr for BitRate {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnitError { input: s.to_string(), what: "a bit rate" };
        let (v, unit) = split_number(s).ok_or_else(err)?;
        let scale = match unit {
            "" | "bps" => 1.0,
            "Kbps" | "kbps" => 1e3,
            "Mbps" => 1e6,
            "Gbps" => 1e9,
            _ => return Err(err()),
        };
        let r = scaled(v, scale, s, "a bit rate")?;
        if r == 0 {
            return Err(err());
        }
        Ok(BitRate(r))
    }
}

/// Parses a byte count such as `"1500"`, `"100KB"` or `"1.5MB"`.
pub fn parse_bytes(s: &str) -> Result<u64, UnitError> {
    let (v, unit) = split_number(s).ok_or_else(|| UnitError { input: s.to_string(), what: "a byte size" })?;
    let scale = match unit {
        "" | "B" => 1.0,
        "KB" | "kB" => 1e3,
        "MB" => 1e6,
        "GB" => 1e9,
        _ => return Err(UnitError { input: s.to_string(), what: "a byte size" }),
    };
    scaled(v, scale, s, "a byte size")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntOrString {
    Int(u64),
    Str(String),
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}ns", self.0))
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match IntOrString::deserialize(d)? {
            IntOrString::Int(v) => Ok(SimTime(v)),
            IntOrString::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for BitRate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}bps", self.0))
    }
}

impl<'de> Deserialize<'de> for BitRate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match IntOrString::deserialize(d)? {
            IntOrString::Int(0) => Err(serde::de::Error::custom("bit rate must be positive")),
            IntOrString::Int(v) => Ok(BitRate(v)),
            IntOrString::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Serde adapter for byte counts written with or without a unit suffix.
pub mod bytes_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match IntOrString::deserialize(d)? {
            IntOrString::Int(v) => Ok(v),
            IntOrString::Str(s) => parse_bytes(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Same as [`bytes_serde`] for optional fields.
pub mod opt_bytes_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_u64(*v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        match Option::<IntOrString>::deserialize(d)? {
            None => Ok(None),
            Some(IntOrString::Int(v)) => Ok(Some(v)),
            Some(IntOrString::Str(s)) => parse_bytes(&s).map(Some).map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_durations() {
        assert_eq!("5us".parse::<SimTime>().unwrap(), SimTime::from_micros(5));
        assert_eq!("1.5ms".parse::<SimTime>().unwrap(), SimTime(1_500_000));
        assert_eq!("42".parse::<SimTime>().unwrap(), SimTime(42));
        assert!("5 parsecs".parse::<SimTime>().is_err());
    }

    #[test]
    fn parses_rates_and_sizes() {
        assert_eq!("5Gbps".parse::<BitRate>().unwrap(), BitRate::gbps(5));
        assert_eq!("40Mbps".parse::<BitRate>().unwrap(), BitRate::mbps(40));
        assert!("0Gbps".parse::<BitRate>().is_err());
        assert_eq!(parse_bytes("100KB").unwrap(), 100_000);
        assert_eq!(parse_bytes("1.5MB").unwrap(), 1_500_000);
    }

    #[test]
    fn serialization_time_rounds_up() {
        assert_eq!(BitRate::gbps(5).serialization_time(1500), SimTime(2400));
        // 64 bytes at 3 bps is 170.67 s
        assert_eq!(BitRate(3).serialization_time(64), SimTime(170_666_666_667));
        assert_eq!(BitRate::gbps(50).serialization_time(1), SimTime(1));
    }
}
