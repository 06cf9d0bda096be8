//! Detector clicks as integer clock ticks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest representable tick + 1.
pub const TICK_LIMIT: u64 = 1 << 60;

/// Clock resolution of 10 ns / 64, stored exactly.
pub const DEFAULT_TICK_FS: u64 = 156_250;

/// The four detectors behind the two analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    /// Analyzer A, transmitted port.
    AT = 1,
    AR = 2,
    BT = 3,
    BR = 4,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::AT, Detector::AR, Detector::BT, Detector::BR];

    pub fn channel(self) -> u8 {
        self as u8
    }

    pub fn from_channel(channel: u8) -> Option<Self> {
        match channel {
            1 => Some(Detector::AT),
            2 => Some(Detector::AR),
            3 => Some(Detector::BT),
            4 => Some(Detector::BR),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }
}

/// One detector click.
///
/// Packed as `tick << 4 | channel`, the same word that is written to disk, so
/// the derived ordering is by `(tick, channel)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeTag(u64);

impl TimeTag {
    pub fn new(tick: u64, channel: u8) -> Result<Self> {
        if tick >= TICK_LIMIT {
            return Err(Error::Range(format!("tick {tick} does not fit in 60 bits")));
        }
        if !(1..=4).contains(&channel) {
            return domain(format!("channel {channel} outside 1..=4"));
        }
        Ok(Self(tick << 4 | channel as u64))
    }

    pub fn from_detector(tick: u64, detector: Detector) -> Result<Self> {
        Self::new(tick, detector.channel())
    }

    #[inline]
    pub fn tick(self) -> u64 {
        self.0 >> 4
    }

    #[inline]
    pub fn channel(self) -> u8 {
        (self.0 & 0xf) as u8
    }

    pub fn detector(self) -> Detector {
        Detector::from_channel(self.channel()).expect("validated on construction")
    }

    #[inline]
    pub fn word(self) -> u64 {
        self.0
    }

    /// Same tag moved by `offset` ticks.
    pub fn shifted(self, offset: u64) -> Result<Self> {
        Self::new(self.tick() + offset, self.channel())
    }
}

impl fmt::Debug for TimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeTag({}@ch{})", self.tick(), self.channel())
    }
}

pub fn encode_record(tag: TimeTag) -> [u8; 8] {
    tag.0.to_le_bytes()
}

/// `index` is only used for error reporting.
pub fn decode_record(bytes: [u8; 8], index: u64) -> Result<TimeTag> {
    let word = u64::from_le_bytes(bytes);
    let channel = (word & 0xf) as u8;
    if !(1..=4).contains(&channel) {
        return Err(Error::CorruptRecord {
            index,
            reason: format!("channel {channel} outside 1..=4"),
        });
    }
    Ok(TimeTag(word))
}

/// Clock tick length in integer femtoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TickDuration(u64);

impl TickDuration {
    pub fn from_femtoseconds(fs: u64) -> Result<Self> {
        if fs == 0 {
            return domain("tick duration must be positive");
        }
        Ok(Self(fs))
    }

    pub fn femtoseconds(self) -> u64 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 * 1e-15
    }

    pub fn quantize(self, time: f64) -> Result<u64> {
        quantize(time, self.seconds())
    }

    /// Nearest whole number of ticks for a duration.
    pub fn ticks(self, seconds: f64) -> Result<u64> {
        quantize(seconds, self.seconds())
    }
}

impl Default for TickDuration {
    fn default() -> Self {
        Self(DEFAULT_TICK_FS)
    }
}

/// Round-to-nearest tick count.
pub fn quantize(time: f64, tick: f64) -> Result<u64> {
    if !(tick > 0.0) || !tick.is_finite() {
        return domain(format!("tick {tick} must be positive and finite"));
    }
    if time.is_nan() || time < 0.0 {
        return domain(format!("cannot quantize time {time}"));
    }
    let n = (time / tick).round();
    if !(n < TICK_LIMIT as f64) {
        return Err(Error::Range(format!("time {time} s exceeds the 60-bit tick range")));
    }
    Ok(n as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(50e-9, 156.25e-12).unwrap(), 320);
        assert_eq!(quantize(0.0, 1e-9).unwrap(), 0);
        assert_eq!(quantize(1.25e-9, 156.25e-12).unwrap(), 8);
        assert_eq!(TickDuration::default().quantize(50e-9).unwrap(), 320);
    }

    #[test]
    fn quantize_errors() {
        assert!(matches!(quantize(-1e-12, 1e-9), Err(Error::Domain(_))));
        assert!(matches!(quantize(f64::NAN, 1e-9), Err(Error::Domain(_))));
        assert!(matches!(quantize(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(quantize(1e9, 156.25e-12), Err(Error::Range(_))));
        assert!(matches!(quantize(f64::INFINITY, 1e-9), Err(Error::Range(_))));
    }

    #[test]
    fn quantize_is_monotone() {
        let tick = 156.25e-12;
        let mut prev = 0;
        for k in 0..10_000 {
            let q = quantize(k as f64 * 3.7e-12, tick).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn record_layout() {
        let tag = TimeTag::new(0, 1).unwrap();
        assert_eq!(encode_record(tag), [1, 0, 0, 0, 0, 0, 0, 0]);
        let tag = TimeTag::new(320, 4).unwrap();
        assert_eq!(u64::from_le_bytes(encode_record(tag)), 5124);
        assert_eq!(decode_record(5124u64.to_le_bytes(), 0).unwrap(), tag);
    }

    #[test]
    fn decode_rejects_bad_channels() {
        for ch in [0u64, 5, 15] {
            let err = decode_record((320 << 4 | ch).to_le_bytes(), 7).unwrap_err();
            assert!(matches!(err, Error::CorruptRecord { index: 7, .. }));
        }
    }

    #[test]
    fn construction_limits() {
        assert!(TimeTag::new(TICK_LIMIT - 1, 4).is_ok());
        assert!(matches!(TimeTag::new(TICK_LIMIT, 1), Err(Error::Range(_))));
        assert!(TimeTag::new(5, 0).is_err());
        assert!(TimeTag::new(5, 5).is_err());
    }

    #[test]
    fn ordering_is_tick_then_channel() {
        let a = TimeTag::new(10, 4).unwrap();
        let b = TimeTag::new(11, 1).unwrap();
        let c = TimeTag::new(11, 2).unwrap();
        assert!(a < b && b < c);
    }
}
