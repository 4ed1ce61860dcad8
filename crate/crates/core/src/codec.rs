//! Transmit-side line codes.
//!
//! A pulse is one on slot followed by one off slot (`"10"`); a run of `n`
//! pulses repeats that pattern `n` times. A guard is `guard_us / slot_us`
//! off slots. Every N-pulse frame is a sync burst, one guard, then one pulse
//! run plus guard per symbol.
//!
//! | symbol | default (`00` sync, 8 pulses) | swapped (`11` sync, 11 pulses) |
//! |--------|-------------------------------|--------------------------------|
//! | `00`   | 1                             | 4                              |
//! | `01`   | 2                             | 2                              |
//! | `10`   | 3                             | 3                              |
//! | `11`   | 4                             | 1                              |
//!
//! The two-symbol scheme uses a 5-pulse sync and sends `0` as one pulse and
//! `1` as two.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::{bits_to_string, count_ones, parse_bits, Bits};
use crate::error::{Error, Result};

/// Slot-level on/off transmit sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseString {
    pub slots: Vec<bool>,
    pub slot_us: u64,
}

impl PulseString {
    pub fn new(slots: Vec<bool>, slot_us: u64) -> Result<Self> {
        if slot_us == 0 {
            return Err(Error::InvalidConfig("slot_us must be > 0".into()));
        }
        Ok(Self { slots, slot_us })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Appends another string with the same slot duration.
    pub fn extend(&mut self, other: &PulseString) {
        debug_assert_eq!(self.slot_us, other.slot_us);
        self.slots.extend_from_slice(&other.slots);
    }
}

impl fmt::Display for PulseString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_to_string(&self.slots))
    }
}

fn ser_bits<S: Serializer>(bits: &Bits, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&bits_to_string(bits))
}

fn de_bits<'de, D: Deserializer<'de>>(d: D) -> Result<Bits, D::Error> {
    let s = String::deserialize(d)?;
    parse_bits(&s).map_err(serde::de::Error::custom)
}

/// Timing and framing parameters shared by all schemes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    pub slot_us: u64,
    pub guard_us: u64,
    pub sync2_pulses: usize,
    pub sync00_pulses: usize,
    pub sync11_pulses: usize,
    #[serde(serialize_with = "ser_bits", deserialize_with = "de_bits")]
    pub ook_start: Bits,
    #[serde(serialize_with = "ser_bits", deserialize_with = "de_bits")]
    pub ook_stop: Bits,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            slot_us: 100,
            guard_us: 600,
            sync2_pulses: 5,
            sync00_pulses: 8,
            sync11_pulses: 11,
            ook_start: vec![true, false, true],
            ook_stop: vec![false],
        }
    }
}

/// Longest payload run of the two-symbol scheme.
pub const MAX_RUN_NPULSE2: usize = 2;
/// Longest payload run of the four-level schemes.
pub const MAX_RUN_NPULSE4: usize = 4;

impl SchemeConfig {
    pub fn guard_slots(&self) -> usize {
        (self.guard_us / self.slot_us) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("scheme: {m}")));
        if self.slot_us == 0 {
            return bad("slot_us must be > 0".into());
        }
        if self.guard_us % self.slot_us != 0 {
            return bad(format!("guard_us {} is not a multiple of slot_us {}", self.guard_us, self.slot_us));
        }
        if self.guard_us == 0 {
            return bad("guard_us must be > 0".into());
        }
        for (name, n) in [("sync2", self.sync2_pulses), ("sync00", self.sync00_pulses), ("sync11", self.sync11_pulses)] {
            if n < 5 {
                return bad(format!("{name}_pulses = {n} is shorter than 5 pulses"));
            }
        }
        if self.sync2_pulses <= MAX_RUN_NPULSE2 || self.sync00_pulses.min(self.sync11_pulses) <= MAX_RUN_NPULSE4 {
            return bad("sync bursts must be longer than every payload run".into());
        }
        // Runs are matched against the 11 threshold first.
        if self.sync00_pulses >= self.sync11_pulses {
            return bad(format!(
                "sync00_pulses ({}) must be shorter than sync11_pulses ({})",
                self.sync00_pulses, self.sync11_pulses
            ));
        }
        if self.ook_start.is_empty() {
            return bad("ook_start must not be empty".into());
        }
        Ok(())
    }
}

/// Modulation scheme used for a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Repeated OOK ID frames.
    #[serde(alias = "ook")]
    OokId,
    Npulse2,
    Npulse4,
    #[serde(alias = "npulse4_adaptive")]
    Adaptive,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::OokId, Scheme::Npulse2, Scheme::Npulse4, Scheme::Adaptive];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::OokId => "ook_id",
            Scheme::Npulse2 => "npulse2",
            Scheme::Npulse4 => "npulse4",
            Scheme::Adaptive => "adaptive",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ook_id" | "ook" => Ok(Scheme::OokId),
            "npulse2" => Ok(Scheme::Npulse2),
            "npulse4" => Ok(Scheme::Npulse4),
            "adaptive" | "npulse4_adaptive" => Ok(Scheme::Adaptive),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symbol mapping selected by the adaptive encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveMode {
    /// `00` is the single pulse; announced by `sync00_pulses`.
    Default00,
    /// `11` is the single pulse; announced by `sync11_pulses`.
    Swapped11,
}

impl AdaptiveMode {
    /// Mode the adaptive encoder picks: swapped only when ones strictly outnumber zeros.
    pub fn for_packet(bits: &[bool]) -> Self {
        let ones = count_ones(bits);
        if ones > bits.len() - ones {
            AdaptiveMode::Swapped11
        } else {
            AdaptiveMode::Default00
        }
    }

    /// Number of pulses carrying the bit pair `(hi, lo)`.
    pub fn pulses(self, hi: bool, lo: bool) -> usize {
        match (self, hi, lo) {
            (_, false, true) => 2,
            (_, true, false) => 3,
            (AdaptiveMode::Default00, false, false) | (AdaptiveMode::Swapped11, true, true) => 1,
            (AdaptiveMode::Default00, true, true) | (AdaptiveMode::Swapped11, false, false) => 4,
        }
    }

    pub fn sync_pulses(self, cfg: &SchemeConfig) -> usize {
        match self {
            AdaptiveMode::Default00 => cfg.sync00_pulses,
            AdaptiveMode::Swapped11 => cfg.sync11_pulses,
        }
    }
}

struct Builder<'a> {
    cfg: &'a SchemeConfig,
    slots: Vec<bool>,
}

impl<'a> Builder<'a> {
    fn new(cfg: &'a SchemeConfig) -> Self {
        Self { cfg, slots: Vec::new() }
    }

    fn pulses(&mut self, n: usize) -> &mut Self {
        for _ in 0..n {
            self.slots.extend_from_slice(&[true, false]);
        }
        self
    }

    fn guard(&mut self) -> &mut Self {
        self.slots.extend(std::iter::repeat_n(false, self.cfg.guard_slots()));
        self
    }

    fn finish(self) -> PulseString {
        PulseString { slots: self.slots, slot_us: self.cfg.slot_us }
    }
}

fn require_pairs(bits: &[bool]) -> Result<()> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidPacket(format!(
            "four-level packets need an even bit count, got {}",
            bits.len()
        )));
    }
    Ok(())
}

/// One slot per bit: on for `1`, off for `0`.
pub fn encode_ook(bits: &[bool], cfg: &SchemeConfig) -> PulseString {
    PulseString { slots: bits.to_vec(), slot_us: cfg.slot_us }
}

/// `start + id + stop` frame used for ID beacons.
pub fn ook_id_frame(id: &[bool], cfg: &SchemeConfig) -> Bits {
    let mut frame = cfg.ook_start.clone();
    frame.extend_from_slice(id);
    frame.extend_from_slice(&cfg.ook_stop);
    frame
}

/// Two-symbol N-pulse: `0` is one pulse, `1` is two.
pub fn encode_npulse2(bits: &[bool], cfg: &SchemeConfig) -> PulseString {
    let mut b = Builder::new(cfg);
    b.pulses(cfg.sync2_pulses).guard();
    for &bit in bits {
        b.pulses(if bit { 2 } else { 1 }).guard();
    }
    b.finish()
}

fn encode_four_level(bits: &[bool], mode: AdaptiveMode, cfg: &SchemeConfig) -> PulseString {
    let mut b = Builder::new(cfg);
    b.pulses(mode.sync_pulses(cfg)).guard();
    for pair in bits.chunks_exact(2) {
        b.pulses(mode.pulses(pair[0], pair[1])).guard();
    }
    b.finish()
}

/// Four-level N-pulse with the fixed default mapping.
pub fn encode_npulse4(bits: &[bool], cfg: &SchemeConfig) -> Result<PulseString> {
    require_pairs(bits)?;
    Ok(encode_four_level(bits, AdaptiveMode::Default00, cfg))
}

/// Four-level N-pulse choosing the mapping that makes the packet shorter.
pub fn encode_npulse4_adaptive(bits: &[bool], cfg: &SchemeConfig) -> Result<(PulseString, AdaptiveMode)> {
    require_pairs(bits)?;
    let mode = AdaptiveMode::for_packet(bits);
    Ok((encode_four_level(bits, mode, cfg), mode))
}

/// Encodes one packet with `scheme`. OOK ID packets are wrapped in their frame.
pub fn encode(scheme: Scheme, bits: &[bool], cfg: &SchemeConfig) -> Result<PulseString> {
    match scheme {
        Scheme::OokId => Ok(encode_ook(&ook_id_frame(bits, cfg), cfg)),
        Scheme::Npulse2 => Ok(encode_npulse2(bits, cfg)),
        Scheme::Npulse4 => encode_npulse4(bits, cfg),
        Scheme::Adaptive => encode_npulse4_adaptive(bits, cfg).map(|(p, _)| p),
    }
}

/// Transmit duration in µs.
pub fn airtime(p: &PulseString) -> u64 {
    p.slots.len() as u64 * p.slot_us
}

/// Airtime of a sync burst plus its guard.
pub fn sync_airtime(pulses: usize, cfg: &SchemeConfig) -> u64 {
    (2 * pulses + cfg.guard_slots()) as u64 * cfg.slot_us
}

/// Rate figures reported for each scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateScheme {
    Npulse2,
    Npulse4,
    AdaptiveBest,
    AdaptiveAvg,
    AdaptiveWorst,
    OokRaw,
}

impl FromStr for RateScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "npulse2" => Ok(RateScheme::Npulse2),
            "npulse4" => Ok(RateScheme::Npulse4),
            "adaptive_best" => Ok(RateScheme::AdaptiveBest),
            "adaptive_avg" => Ok(RateScheme::AdaptiveAvg),
            "adaptive_worst" => Ok(RateScheme::AdaptiveWorst),
            "ook_raw" => Ok(RateScheme::OokRaw),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

/// Nominal payload rate in bits per second.
///
/// The N-pulse figures price a pulse at one slot and assume uniformly
/// distributed payload without sync overhead; the adaptive figures are
/// measured 64-bit packet rates including sync and are returned as-is.
pub fn theoretical_rate(scheme: RateScheme, cfg: &SchemeConfig) -> f64 {
    let slot = cfg.slot_us as f64 * 1e-6;
    let guard = cfg.guard_us as f64 * 1e-6;
    match scheme {
        // 1.5 pulses per bit on average, each followed by a guard
        RateScheme::Npulse2 => 1.0 / (1.5 * (slot + guard)),
        // 2.5 pulses per two-bit symbol, one guard per symbol
        RateScheme::Npulse4 => 2.0 / (2.5 * slot + guard),
        RateScheme::AdaptiveBest => 1828.57,
        RateScheme::AdaptiveAvg => 1702.13,
        RateScheme::AdaptiveWorst => 1454.54,
        RateScheme::OokRaw => 1.0 / slot,
    }
}
