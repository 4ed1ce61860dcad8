//! Receive side: events to slot bits, slot bits to pulse runs, pulse runs to
//! packets. Also the OOK frame scanner and the Pearson ID correlator.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::bits::{bits_to_string, Bits};
use crate::codec::{Scheme, SchemeConfig};
use crate::error::{Error, Result};
use crate::event::Polarity;
use crate::scalar::Scalar;

/// Rebuilds the slot-level bit sequence of one pixel from its events.
///
/// The first event seeds the sequence with its polarity. Every later event
/// sits `n = round(dt / bit_time)` slots after the previous one (at least
/// one); the `n - 1` slots in between repeat the previous level.
pub fn sliding_demodulator(events: &[(u64, Polarity)], bit_time_us: u64) -> Result<Bits> {
    if bit_time_us == 0 {
        return Err(Error::InvalidConfig("bit_time_us must be > 0".into()));
    }
    if let Some(w) = events.windows(2).find(|w| w[1].0 < w[0].0) {
        return Err(Error::InvalidStream(format!("event at {} µs follows {} µs", w[1].0, w[0].0)));
    }
    let Some(&(t0, p0)) = events.first() else {
        return Ok(Bits::new());
    };
    let mut bits = vec![p0.as_bool()];
    let mut last_time = t0;
    for &(t, p) in &events[1..] {
        let n = ((t - last_time + bit_time_us / 2) / bit_time_us).max(1);
        let prev = *bits.last().unwrap();
        bits.extend(std::iter::repeat_n(prev, (n - 1) as usize));
        bits.push(p.as_bool());
        last_time = t;
    }
    Ok(bits)
}

/// Positions `i` where `bits[i] = 1` and `bits[i + 1] = 0`.
pub fn pulse_run_indices(bits: &[bool]) -> Vec<usize> {
    bits.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] && !w[1])
        .map(|(i, _)| i)
        .collect()
}

/// Sync class a decoder can lock onto.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncMode {
    pub label: &'static str,
    /// Minimum run length announcing this mode.
    pub threshold: usize,
    /// Bits for a data run of `count` pulses at index `count - 1`.
    pub table: Vec<Bits>,
}

/// How one pulse run was interpreted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RunKind {
    Sync { mode: String },
    Data { bits: String },
    /// Data run whose length has no table entry.
    Unmapped,
    /// Run seen before any sync.
    Unsynced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Slot index of the first pulse.
    pub start: usize,
    pub count: usize,
    #[serde(flatten)]
    pub kind: RunKind,
}

/// Trace of a run-length decode, written next to the decoded packets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeLog {
    pub runs: Vec<RunRecord>,
    /// Slot indices where a sync burst started.
    pub sync_positions: Vec<usize>,
    pub anomalies: Vec<String>,
}

/// Packets plus the decode trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Decoded {
    pub packets: Vec<Bits>,
    pub log: DecodeLog,
}

/// Run-length packet decoder.
///
/// Groups `indices` into maximal arithmetic runs of stride `pattern_length`.
/// A run at least as long as some sync threshold closes the current packet
/// and selects the mode with the highest threshold it reaches. Other runs
/// append the active mode's bits for their length; unknown lengths append
/// nothing and runs before the first sync are skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDecoder {
    pub pattern_length: usize,
    modes: Vec<SyncMode>,
}

fn pairs(table: [[bool; 2]; 4]) -> Vec<Bits> {
    table.iter().map(|p| p.to_vec()).collect()
}

impl RunDecoder {
    pub fn new(pattern_length: usize, mut modes: Vec<SyncMode>) -> Self {
        modes.sort_by(|a, b| b.threshold.cmp(&a.threshold));
        Self { pattern_length, modes }
    }

    /// Four-level decoder with the `00` and `11` sync modes.
    pub fn four_level(pattern_length: usize, sync_threshold_00: usize, sync_threshold_11: usize) -> Self {
        const F: bool = false;
        const T: bool = true;
        Self::new(
            pattern_length,
            vec![
                SyncMode { label: "sync_11", threshold: sync_threshold_11, table: pairs([[T, T], [F, T], [T, F], [F, F]]) },
                SyncMode { label: "sync_00", threshold: sync_threshold_00, table: pairs([[F, F], [F, T], [T, F], [T, T]]) },
            ],
        )
    }

    /// Two-symbol decoder: one pulse is `0`, two pulses are `1`.
    pub fn two_symbol(pattern_length: usize, sync_threshold: usize) -> Self {
        Self::new(
            pattern_length,
            vec![SyncMode { label: "sync_2", threshold: sync_threshold, table: vec![vec![false], vec![true]] }],
        )
    }

    pub fn for_scheme(scheme: Scheme, cfg: &SchemeConfig) -> Option<Self> {
        match scheme {
            Scheme::OokId => None,
            Scheme::Npulse2 => Some(Self::two_symbol(2, cfg.sync2_pulses)),
            Scheme::Npulse4 | Scheme::Adaptive => Some(Self::four_level(2, cfg.sync00_pulses, cfg.sync11_pulses)),
        }
    }

    pub fn decode(&self, indices: &[usize]) -> Decoded {
        let mut out = Decoded::default();
        let mut current = Bits::new();
        let mut active: Option<&SyncMode> = None;
        let mut i = 0;
        while i < indices.len() {
            let mut count = 1;
            while i + count < indices.len() && indices[i + count] == indices[i] + count * self.pattern_length {
                count += 1;
            }
            let start = indices[i];
            let kind = if let Some(mode) = self.modes.iter().find(|m| count >= m.threshold) {
                if !current.is_empty() {
                    out.packets.push(std::mem::take(&mut current));
                }
                active = Some(mode);
                out.log.sync_positions.push(start);
                RunKind::Sync { mode: mode.label.to_string() }
            } else {
                match active {
                    None => RunKind::Unsynced,
                    Some(mode) => match mode.table.get(count - 1) {
                        Some(bits) => {
                            current.extend_from_slice(bits);
                            RunKind::Data { bits: bits_to_string(bits) }
                        }
                        None => {
                            let msg = format!("run of {count} pulses at slot {start} has no symbol in {}", mode.label);
                            warn!("{msg}");
                            out.log.anomalies.push(msg);
                            RunKind::Unmapped
                        }
                    },
                }
            };
            out.log.runs.push(RunRecord { start, count, kind });
            i += count;
        }
        if !current.is_empty() {
            out.packets.push(current);
        }
        out
    }
}

/// Four-level run decoder over `'1-0'` indices.
pub fn demodulate_bits_from_indices(
    indices: &[usize],
    pattern_length: usize,
    sync_threshold_00: usize,
    sync_threshold_11: usize,
) -> Vec<Bits> {
    RunDecoder::four_level(pattern_length, sync_threshold_00, sync_threshold_11)
        .decode(indices)
        .packets
}

/// Decodes the slot bits of an N-pulse link.
pub fn decode_npulse(scheme: Scheme, slot_bits: &[bool], cfg: &SchemeConfig) -> Result<Decoded> {
    let decoder = RunDecoder::for_scheme(scheme, cfg)
        .ok_or_else(|| Error::InvalidConfig(format!("{scheme} is not a pulse-run scheme")))?;
    Ok(decoder.decode(&pulse_run_indices(slot_bits)))
}

/// Payloads of every `start + payload + stop` frame found at any offset.
/// Overlapping frames are all reported.
pub fn scan_payloads(bits: &[bool], start_bits: &[bool], stop_bits: &[bool], payload_length: usize) -> Vec<Bits> {
    let frame = start_bits.len() + payload_length + stop_bits.len();
    if bits.len() < frame {
        return Vec::new();
    }
    (0..=bits.len() - frame)
        .filter(|&i| {
            let stop_at = i + start_bits.len() + payload_length;
            bits[i..i + start_bits.len()] == *start_bits && bits[stop_at..stop_at + stop_bits.len()] == *stop_bits
        })
        .map(|i| bits[i + start_bits.len()..i + start_bits.len() + payload_length].to_vec())
        .collect()
}

/// Counts framed payloads and those differing from `expected_combo`.
/// Returns `(total_packets, wrong_packets)`.
pub fn decode_payload(
    bits: &[bool],
    start_bits: &[bool],
    stop_bits: &[bool],
    payload_length: usize,
    expected_combo: &[bool],
) -> (usize, usize) {
    let payloads = scan_payloads(bits, start_bits, stop_bits, payload_length);
    let wrong = payloads.iter().filter(|p| p.as_slice() != expected_combo).count();
    (payloads.len(), wrong)
}

/// Pearson correlation of two 0/1 sequences.
pub fn pearson<T: Scalar>(a: &[bool], b: &[bool]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InvalidPacket("correlation needs at least two samples".into()));
    }
    let n = T::from_usize(a.len()).unwrap();
    let val = |x: bool| if x { T::one() } else { T::zero() };
    let mean_a = a.iter().map(|&x| val(x)).sum::<T>() / n;
    let mean_b = b.iter().map(|&x| val(x)).sum::<T>() / n;
    let (mut cov, mut var_a, mut var_b) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (val(x) - mean_a, val(y) - mean_b);
        cov = cov + dx * dy;
        var_a = var_a + dx * dx;
        var_b = var_b + dy * dy;
    }
    if var_a == T::zero() {
        return Err(Error::UndefinedCorrelation("first sequence"));
    }
    if var_b == T::zero() {
        return Err(Error::UndefinedCorrelation("second sequence"));
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Picks the ID in `id_set` carried by an OOK slot-bit window.
///
/// Frames are located with the configured start and stop bits. The ID with
/// the most exact payload matches wins (earlier IDs win ties). Without any
/// exact match, the ID with the highest mean Pearson correlation against the
/// recovered payloads wins; constant IDs and payloads take no part in that
/// fallback since their correlation is undefined.
pub fn correlate_id(window: &[bool], id_set: &[Bits], cfg: &SchemeConfig) -> Result<Bits> {
    let Some(first) = id_set.first() else {
        return Err(Error::NoDetection("empty id set".into()));
    };
    if id_set.iter().any(|id| id.len() != first.len()) {
        return Err(Error::InvalidConfig("ids in the set differ in length".into()));
    }
    if window.len() < first.len() {
        return Err(Error::NoDetection(format!("window of {} bits is shorter than an id", window.len())));
    }
    let payloads = scan_payloads(window, &cfg.ook_start, &cfg.ook_stop, first.len());

    let votes: Vec<usize> = id_set
        .iter()
        .map(|id| payloads.iter().filter(|p| *p == id).count())
        .collect();
    if let Some(best) = argmax(&votes, |&v| v as f64).filter(|&i| votes[i] > 0) {
        return Ok(id_set[best].clone());
    }

    let scores: Vec<Option<f64>> = id_set
        .iter()
        .map(|id| {
            let rs: Vec<f64> = payloads.iter().filter_map(|p| pearson::<f64>(p, id).ok()).collect();
            (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64)
        })
        .collect();
    argmax(&scores, |s| s.unwrap_or(f64::NEG_INFINITY))
        .filter(|&i| scores[i].is_some())
        .map(|i| id_set[i].clone())
        .ok_or_else(|| Error::NoDetection("no framed payload and no defined correlation".into()))
}

fn argmax<V>(values: &[V], key: impl Fn(&V) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let k = key(v);
        if best.is_none_or(|(_, bk)| k > bk) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}
