//! Periodic event frames and hot-pixel selection.
//!
//! Frame `k` (for `k = 1 ..= floor(duration · fps)`) is emitted at
//! `t_k = k / fps` and counts the events in the half-open window
//! `[t_k - accumulation, t_k)`. Windows overlap whenever
//! `1 / fps < accumulation`. Emission times are kept exact as rationals;
//! since event timestamps are whole µs, the window is equivalently
//! `[ceil(t_k) - accumulation, ceil(t_k))`.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::detect::BoundingBox;
use crate::error::{Error, Result};
use crate::event::{Event, Polarity, SensorGeometry};

/// Which events a frame counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    #[default]
    All,
    On,
    Off,
}

impl CountMode {
    fn accepts(self, p: Polarity) -> bool {
        match self {
            CountMode::All => true,
            CountMode::On => p == Polarity::On,
            CountMode::Off => p == Polarity::Off,
        }
    }
}

/// Per-pixel event counts over one accumulation window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major counts.
    pub counts: Vec<u32>,
    /// Emission time (rounded up to the µs).
    pub t_frame_us: u64,
}

impl EventFrame {
    pub fn zeros(geometry: SensorGeometry, t_frame_us: u64) -> Self {
        Self {
            width: geometry.width,
            height: geometry.height,
            counts: vec![0; geometry.pixel_count()],
            t_frame_us,
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.counts[(y * self.width + x) as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn geometry(&self) -> SensorGeometry {
        SensorGeometry { width: self.width, height: self.height }
    }
}

/// Frame rate as an exact ratio, e.g. `30000/1001`.
pub type FrameRate = Ratio<u64>;

/// Parses `"100"` or `"30000/1001"`.
pub fn parse_fps(s: &str) -> Result<FrameRate> {
    let r: FrameRate = s
        .trim()
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("bad fps `{s}`: {e}")))?;
    if *r.numer() == 0 {
        return Err(Error::InvalidConfig("fps must be > 0".into()));
    }
    Ok(r)
}

fn emission_time(k: u64, fps: FrameRate) -> u64 {
    (Ratio::from_integer(k * 1_000_000) / fps).ceil().to_integer()
}

/// Number of frames for a recording: `floor(duration · fps)`.
pub fn frame_count(duration_us: u64, fps: FrameRate) -> u64 {
    (Ratio::from_integer(duration_us) * fps / Ratio::from_integer(1_000_000u64))
        .floor()
        .to_integer()
}

/// Builds the periodic frame sequence of a sorted stream.
pub fn periodic_frames(
    stream: &[Event],
    geometry: SensorGeometry,
    duration_us: u64,
    accumulation_us: u64,
    fps: FrameRate,
    mode: CountMode,
) -> Result<Vec<EventFrame>> {
    if accumulation_us == 0 {
        return Err(Error::InvalidConfig("accumulation_us must be > 0".into()));
    }
    if *fps.numer() == 0 {
        return Err(Error::InvalidConfig("fps must be > 0".into()));
    }
    let n = frame_count(duration_us, fps);
    (1..=n)
        .map(|k| {
            let end = emission_time(k, fps);
            let start = end.saturating_sub(accumulation_us);
            let mut frame = EventFrame::zeros(geometry, end);
            let lo = stream.partition_point(|e| e.t < start);
            let hi = stream.partition_point(|e| e.t < end);
            for e in &stream[lo..hi] {
                geometry.check(e.x, e.y)?;
                if mode.accepts(e.polarity) {
                    frame.counts[(e.y * geometry.width + e.x) as usize] += 1;
                }
            }
            Ok(frame)
        })
        .collect()
}

/// Keeps only the events inside `roi`.
pub fn restrict(stream: &[Event], roi: Option<BoundingBox>) -> Vec<Event> {
    match roi {
        None => stream.to_vec(),
        Some(r) => stream.iter().filter(|e| r.contains(e.x, e.y)).copied().collect(),
    }
}

/// Pixel with the most events inside `roi`; ties go to the smallest `(y, x)`.
pub fn hot_pixel(stream: &[Event], roi: Option<BoundingBox>) -> Result<(u32, u32)> {
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for e in stream.iter().filter(|e| roi.is_none_or(|r| r.contains(e.x, e.y))) {
        *counts.entry((e.x, e.y)).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| (pb.1, pb.0).cmp(&(pa.1, pa.0))))
        .map(|(p, _)| p)
        .ok_or_else(|| Error::NoSignal("no events inside the region of interest".into()))
}

/// `(t, polarity)` sequence of one pixel.
pub fn pixel_events(stream: &[Event], x: u32, y: u32) -> Vec<(u64, Polarity)> {
    stream
        .iter()
        .filter(|e| e.x == x && e.y == y)
        .map(|e| (e.t, e.polarity))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: u64, x: u32, y: u32) -> Event {
        Event::new(t, x, y, Polarity::On)
    }

    fn g() -> SensorGeometry {
        SensorGeometry::new(8, 8).unwrap()
    }

    #[test]
    fn non_overlapping_windows_tile_the_recording() {
        let stream: Vec<Event> = (0..1000).map(|i| ev(i * 1000, 1, 1)).collect();
        let frames = periodic_frames(&stream, g(), 1_000_000, 100_000, parse_fps("10").unwrap(), CountMode::All).unwrap();
        assert_eq!(frames.len(), 10);
        assert!(frames.iter().all(|f| f.total() == 100));
        assert_eq!(frames[0].t_frame_us, 100_000);
        assert_eq!(frames.iter().map(|f| f.total()).sum::<u64>(), 1000);
    }

    #[test]
    fn overlapping_windows_share_events() {
        let stream = vec![ev(60_000, 2, 3)];
        let frames = periodic_frames(&stream, g(), 1_000_000, 100_000, parse_fps("20").unwrap(), CountMode::All).unwrap();
        // windows containing t: [t_k - 100ms, t_k) with t_k = 50k ms
        let expect: Vec<u64> = (1..=20u64)
            .filter(|k| k * 50_000 > 60_000 && k * 50_000 <= 160_000)
            .collect();
        assert_eq!(expect.len(), 2);
        let hits: Vec<usize> = frames.iter().enumerate().filter(|(_, f)| f.get(2, 3) == 1).map(|(i, _)| i + 1).collect();
        assert_eq!(hits, vec![2, 3]);
    }

    #[test]
    fn empty_stream_gives_zero_frames() {
        let frames = periodic_frames(&[], g(), 500_000, 100_000, parse_fps("10").unwrap(), CountMode::All).unwrap();
        assert_eq!(frames.len(), 5);
        assert!(frames.iter().all(|f| f.total() == 0));
    }

    #[test]
    fn rational_rates_round_emission_up() {
        let fps = parse_fps("30000/1001").unwrap();
        assert_eq!(emission_time(1, fps), 33_367);
        assert_eq!(frame_count(1_000_000, fps), 29);
        assert!(parse_fps("0").is_err());
        assert!(parse_fps("abc").is_err());
    }

    #[test]
    fn polarity_split() {
        let stream = vec![ev(10, 0, 0), Event::new(20, 0, 0, Polarity::Off)];
        let fps = parse_fps("1").unwrap();
        let on = periodic_frames(&stream, g(), 1_000_000, 1_000_000, fps, CountMode::On).unwrap();
        let off = periodic_frames(&stream, g(), 1_000_000, 1_000_000, fps, CountMode::Off).unwrap();
        assert_eq!((on[0].total(), off[0].total()), (1, 1));
    }

    #[test]
    fn hot_pixel_picks_max_then_smallest_row() {
        let mut stream: Vec<Event> = (0..10).map(|t| ev(t, 4, 4)).collect();
        stream.push(ev(3, 1, 1));
        assert_eq!(hot_pixel(&stream, None).unwrap(), (4, 4));

        let tie: Vec<Event> = (0..3).flat_map(|t| [ev(t, 3, 5), ev(t, 2, 7)]).collect();
        assert_eq!(hot_pixel(&tie, None).unwrap(), (3, 5));
        let same_row: Vec<Event> = (0..3).flat_map(|t| [ev(t, 6, 5), ev(t, 2, 5)]).collect();
        assert_eq!(hot_pixel(&same_row, None).unwrap(), (2, 5));
    }

    #[test]
    fn hot_pixel_needs_events_in_roi() {
        let stream = vec![ev(1, 0, 0)];
        let roi = BoundingBox::new(4, 4, 2, 2).unwrap();
        assert!(matches!(hot_pixel(&stream, Some(roi)), Err(Error::NoSignal(_))));
        assert!(matches!(hot_pixel(&[], None), Err(Error::NoSignal(_))));
    }
}
