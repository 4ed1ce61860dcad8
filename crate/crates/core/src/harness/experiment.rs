//! One end-to-end link run per seed, plus aggregation across seeds.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, FramesConfig, RoiMode};
use crate::bits::{to_hex, Bits};
use crate::channel::{compose_scene, mask_bbox};
use crate::codec::{airtime, encode, PulseString, Scheme, SchemeConfig};
use crate::demod::{decode_npulse, decode_payload, scan_payloads, sliding_demodulator, DecodeLog};
use crate::detect::{binarize, largest_contour_bbox, BinaryImage, BoundingBox};
use crate::error::{Error, Result};
use crate::event::{Event, SensorGeometry};
use crate::framing::{hot_pixel, periodic_frames, pixel_events, restrict, CountMode, EventFrame};
use crate::io::{frame_to_pgm, packets_to_text, write_annotations, write_atomic, write_events, Annotation};
use crate::metrics::{evaluate_link, id_link_report, LinkReport};
use crate::sensor::simulate_sensor;

/// Transmitted slot string and the packets it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub packets: Vec<Bits>,
    /// Lead-in, packets, then idle padding up to `duration_us`.
    pub pulse: PulseString,
    /// Airtime of the packets alone.
    pub packet_airtime_us: u64,
    pub duration_us: u64,
}

/// Encodes the configured packets. With `packets.count` unset, packets are
/// added while they fit in `duration_us`; otherwise the recording ends with
/// the last packet.
pub fn build_transmission(cfg: &ExperimentConfig, seed: u64) -> Result<Transmission> {
    let codec = &cfg.codec;
    let mut slots = vec![false; cfg.lead_in_slots];
    let mut packets = Vec::new();
    let mut packet_slots = 0usize;
    let budget = (cfg.duration_us / codec.slot_us) as usize;
    loop {
        if cfg.packets.count.is_some_and(|n| packets.len() >= n) {
            break;
        }
        let bits = match cfg.scheme {
            // an ID beacon repeats one ID
            Scheme::OokId => cfg.packets.packet(seed, 0)?,
            _ => cfg.packets.packet(seed, packets.len())?,
        };
        let p = encode(cfg.scheme, &bits, codec)?;
        if cfg.packets.count.is_none() && slots.len() + p.len() > budget {
            break;
        }
        slots.extend_from_slice(&p.slots);
        packet_slots += p.len();
        packets.push(bits);
    }
    if packets.is_empty() {
        return Err(Error::InvalidConfig(format!("duration_us {} is too short for one packet", cfg.duration_us)));
    }
    if cfg.packets.count.is_none() {
        slots.resize(budget, false);
    }
    let pulse = PulseString::new(slots, codec.slot_us)?;
    Ok(Transmission {
        packets,
        packet_airtime_us: packet_slots as u64 * codec.slot_us,
        duration_us: airtime(&pulse),
        pulse,
    })
}

/// Result of the frame-based RoI search.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSearch {
    pub bbox: Option<BoundingBox>,
    /// Frame with the most events, used for detection.
    pub frame: Option<EventFrame>,
    pub mask: Option<BinaryImage>,
}

/// Builds periodic frames and boxes the largest blob of the busiest one.
pub fn locate_roi(stream: &[Event], geometry: SensorGeometry, duration_us: u64, frames: &FramesConfig) -> Result<RoiSearch> {
    let all = periodic_frames(stream, geometry, duration_us, frames.accumulation_us, frames.rate()?, CountMode::All)?;
    let mut best: Option<EventFrame> = None;
    for f in all {
        if best.as_ref().is_none_or(|b| f.total() > b.total()) {
            best = Some(f);
        }
    }
    let Some(frame) = best else {
        return Ok(RoiSearch { bbox: None, frame: None, mask: None });
    };
    let mask = binarize(&frame, frames.threshold, frames.cap)?;
    Ok(RoiSearch { bbox: largest_contour_bbox(&mask), frame: Some(frame), mask: Some(mask) })
}

/// Receiver output for one stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reception {
    pub hot_pixel: Option<(u32, u32)>,
    pub slot_bits: Bits,
    pub packets: Vec<Bits>,
    pub log: DecodeLog,
}

/// Hot pixel, slot bits and packets of a stream restricted to `roi`.
/// `payload_length` is only used by the OOK ID scheme.
pub fn receive(
    stream: &[Event],
    roi: Option<BoundingBox>,
    scheme: Scheme,
    codec: &SchemeConfig,
    payload_length: usize,
) -> Result<Reception> {
    let (x, y) = match hot_pixel(stream, roi) {
        Ok(p) => p,
        Err(Error::NoSignal(_)) => return Ok(Reception::default()),
        Err(e) => return Err(e),
    };
    let slot_bits = sliding_demodulator(&pixel_events(stream, x, y), codec.slot_us)?;
    let (packets, log) = match scheme {
        Scheme::OokId => (scan_payloads(&slot_bits, &codec.ook_start, &codec.ook_stop, payload_length), DecodeLog::default()),
        _ => {
            let d = decode_npulse(scheme, &slot_bits, codec)?;
            (d.packets, d.log)
        }
    };
    Ok(Reception { hot_pixel: Some((x, y)), slot_bits, packets, log })
}

/// Scores a reception against what was sent.
pub fn score(scheme: Scheme, codec: &SchemeConfig, tx: &Transmission, rx: &Reception) -> Result<LinkReport> {
    match scheme {
        Scheme::OokId => {
            let id = &tx.packets[0];
            let (total, wrong) = decode_payload(&rx.slot_bits, &codec.ook_start, &codec.ook_stop, id.len(), id);
            Ok(id_link_report(tx.packets.len(), total, wrong, id.len(), tx.packet_airtime_us))
        }
        _ => evaluate_link(&tx.packets, &rx.packets, tx.packet_airtime_us),
    }
}

/// Per-seed summary written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub scheme: Scheme,
    pub report: LinkReport,
    pub roi: BoundingBox,
    pub roi_found: bool,
    pub hot_pixel: Option<(u32, u32)>,
    /// No event reached the decoder.
    pub no_signal: bool,
    pub event_count: usize,
    pub roi_event_count: usize,
    pub packets_decoded: usize,
    pub warnings: Vec<String>,
}

/// In-memory artifacts of one run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub transmission: Transmission,
    /// Events inside the RoI, exactly as handed to the decoder.
    pub roi_events: Vec<Event>,
    pub roi_search: RoiSearch,
    pub reception: Reception,
    pub object_box: Option<BoundingBox>,
}

/// Runs the whole chain for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(RunOutcome, RunArtifacts)> {
    cfg.validate()?;
    let tx = build_transmission(cfg, seed)?;
    let scene = cfg.scene_spec(tx.pulse.clone())?;
    let geometry = scene.geometry;
    let field = compose_scene(&scene, tx.duration_us, seed)?;
    let stream = simulate_sensor(&field, &cfg.sensor, geometry, None, seed)?;

    let mut warnings = Vec::new();
    let search = locate_roi(&stream, geometry, tx.duration_us, &cfg.frames)?;
    let roi = search.bbox.unwrap_or_else(|| {
        let msg = format!("seed {seed}: no region of interest found, using the full frame");
        warn!("{msg}");
        warnings.push(msg);
        BoundingBox::full(geometry)
    });
    let roi_events = match cfg.roi_mode {
        RoiMode::Filter => restrict(&stream, Some(roi)),
        RoiMode::Hardware => simulate_sensor(&field, &cfg.sensor, geometry, Some(roi), seed)?,
    };

    let payload_length = tx.packets[0].len();
    let rx = receive(&roi_events, None, cfg.scheme, &cfg.codec, payload_length)?;
    if rx.hot_pixel.is_none() {
        let msg = format!("seed {seed}: no events inside the region of interest, no packets detected");
        warn!("{msg}");
        warnings.push(msg);
    }
    let report = score(cfg.scheme, &cfg.codec, &tx, &rx)?;
    let outcome = RunOutcome {
        seed,
        scheme: cfg.scheme,
        report,
        roi,
        roi_found: search.bbox.is_some(),
        hot_pixel: rx.hot_pixel,
        no_signal: rx.hot_pixel.is_none(),
        event_count: stream.len(),
        roi_event_count: roi_events.len(),
        packets_decoded: rx.packets.len(),
        warnings,
    };
    let artifacts = RunArtifacts {
        object_box: mask_bbox(&scene.object_mask),
        transmission: tx,
        roi_events,
        roi_search: search,
        reception: rx,
    };
    Ok((outcome, artifacts))
}

#[derive(Serialize)]
struct DecodeLogFile<'a> {
    hot_pixel: Option<(u32, u32)>,
    slot_bits: usize,
    sent: Vec<String>,
    decoded: Vec<String>,
    #[serde(flatten)]
    log: &'a DecodeLog,
}

/// Writes the artifacts of one run into `dir`.
pub fn write_run(dir: &Path, outcome: &RunOutcome, art: &RunArtifacts, cap: u32) -> Result<()> {
    write_events(&dir.join("events.csv"), &art.roi_events)?;
    if let Some(frame) = &art.roi_search.frame {
        write_atomic(&dir.join("frames/busiest.pgm"), frame_to_pgm(frame, cap)?.as_bytes())?;
    }
    if let Some(mask) = &art.roi_search.mask {
        let mut counts = EventFrame::zeros(SensorGeometry { width: mask.width, height: mask.height }, 0);
        counts.counts = mask.data.iter().map(|&b| b as u32).collect();
        write_atomic(&dir.join("frames/mask.pgm"), frame_to_pgm(&counts, 1)?.as_bytes())?;
    }
    let log = DecodeLogFile {
        hot_pixel: art.reception.hot_pixel,
        slot_bits: art.reception.slot_bits.len(),
        sent: art.transmission.packets.iter().map(|p| to_hex(p)).collect(),
        decoded: art.reception.packets.iter().map(|p| to_hex(p)).collect(),
        log: &art.reception.log,
    };
    write_atomic(&dir.join("decode_log.json"), &serde_json::to_vec_pretty(&log)?)?;
    write_atomic(&dir.join("report.json"), &serde_json::to_vec_pretty(outcome)?)?;
    write_atomic(&dir.join("sent.txt"), packets_to_text(&art.transmission.packets).as_bytes())?;
    let mut ann = vec![Annotation::new("roi", outcome.roi)];
    if let Some(b) = art.object_box {
        ann.push(Annotation::new("object", b));
    }
    write_annotations(&dir.join("annotations.csv"), &ann)?;
    Ok(())
}

/// Spread of one metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            stddev: var.sqrt(),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub metrics: BTreeMap<String, Stats>,
}

pub fn aggregate(reports: &[LinkReport]) -> Summary {
    let mut by_name: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (k, v) in r.metrics() {
            by_name.entry(k.to_string()).or_default().push(v);
        }
    }
    Summary {
        runs: reports.len(),
        metrics: by_name.into_iter().filter_map(|(k, v)| Stats::of(&v).map(|s| (k, s))).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub outcomes: Vec<RunOutcome>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn mean(&self, metric: &str) -> f64 {
        self.summary.metrics.get(metric).map_or(f64::NAN, |s| s.mean)
    }
}

/// Runs every seed (in parallel) and writes artifacts when `out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let outcomes: Vec<RunOutcome> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (outcome, art) = run_seed(cfg, seed)?;
            if let Some(dir) = &cfg.out_dir {
                write_run(&dir.join(format!("seed_{seed}")), &outcome, &art, cfg.frames.cap)?;
            }
            Ok(outcome)
        })
        .collect::<Result<_>>()?;
    let reports: Vec<LinkReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    let summary = aggregate(&reports);
    if let Some(dir) = &cfg.out_dir {
        write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
        write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    }
    Ok(ExperimentResult { outcomes, summary })
}
