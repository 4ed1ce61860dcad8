//! Sensor output samples and sensor geometry.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Event sign. `On` is an intensity increase, `Off` a decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Off = 0,
    On = 1,
}

impl Polarity {
    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Polarity::Off),
            1 => Ok(Polarity::On),
            other => Err(Error::InvalidStream(format!("polarity must be 0 or 1, got {other}"))),
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn as_bool(self) -> bool {
        self == Polarity::On
    }
}

/// One sensor output sample.
///
/// Streams are ordered by `(t, y, x, polarity)`, which is what `Ord` implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Timestamp in µs.
    pub t: u64,
    pub x: u32,
    pub y: u32,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u32, y: u32, polarity: Polarity) -> Self {
        Self { t, x, y, polarity }
    }

    fn key(&self) -> (u64, u32, u32, Polarity) {
        (self.t, self.y, self.x, self.polarity)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Returns true when the stream is in canonical `(t, y, x, polarity)` order.
pub fn is_canonical(stream: &[Event]) -> bool {
    stream.windows(2).all(|w| w[0] <= w[1])
}

/// Sensor array size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u32,
    pub height: u32,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self { width: 1280, height: 720 }
    }
}

impl SensorGeometry {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!("sensor geometry {width}x{height} is empty")));
        }
        Ok(Self { width, height })
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub(crate) fn check(&self, x: u32, y: u32) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(Error::PixelOutOfBounds { x, y, width: self.width, height: self.height })
        }
    }
}
