//! Parameter sweeps. The transmitter-frequency sweep measures the event rate
//! of a 10×10 pixel patch lit by a square wave; the other sweeps rerun the
//! link experiment once per value.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::run_experiment;
use crate::codec::Scheme;
use crate::detect::BoundingBox;
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::metrics::LinkReport;
use crate::channel::AmbientLight;
use crate::sensor::{average_event_rate, pixel_seed, simulate_sensor, IntensityField, IntensitySignal, SensorBiases};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TransmitterHz,
    AmbientSigma,
    SurfacePreset,
    Scheme,
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transmitter_hz" => Ok(Self::TransmitterHz),
            "ambient_sigma" => Ok(Self::AmbientSigma),
            "surface_preset" => Ok(Self::SurfacePreset),
            "scheme" => Ok(Self::Scheme),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TransmitterHz => "transmitter_hz",
            Self::AmbientSigma => "ambient_sigma",
            Self::SurfacePreset => "surface_preset",
            Self::Scheme => "scheme",
        })
    }
}

const PATCH_SALT: u64 = 0x5eed_0f_1a7c_40e1;

/// Side of the square patch used for event-rate measurements.
pub const RATE_PATCH: u32 = 10;

/// Same transmitter signal on every pixel of a box, plus per-pixel ambient light.
struct PatchField<'a> {
    patch: BoundingBox,
    signal: &'a IntensitySignal<f64>,
    ambient: AmbientLight<f64>,
    seed: u64,
}

impl IntensityField<f64> for PatchField<'_> {
    fn pixels(&self) -> Vec<(u32, u32)> {
        let b = self.patch;
        (b.y..b.y + b.h).flat_map(|y| (b.x..b.x + b.w).map(move |x| (x, y))).collect()
    }

    fn signal(&self, x: u32, y: u32) -> Result<Cow<'_, IntensitySignal<f64>>> {
        if !self.patch.contains(x, y) {
            return Err(Error::InvalidSignal(format!("({x}, {y}) is outside the patch")));
        }
        if self.ambient == AmbientLight::none() {
            return Ok(Cow::Borrowed(self.signal));
        }
        let mut samples = self.signal.samples().to_vec();
        self.ambient.add_to(&mut samples, self.signal.slot_us(), self.signal.t0_us(), pixel_seed(self.seed ^ PATCH_SALT, x, y));
        Ok(Cow::Owned(IntensitySignal::new(samples, self.signal.slot_us(), self.signal.t0_us())?))
    }
}

/// Square wave of `freq_hz` sampled every µs, starting high.
pub fn square_wave(freq_hz: f64, duration_us: u64, on: f64, off: f64) -> Result<IntensitySignal<f64>> {
    if !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(Error::InvalidConfig(format!("frequency {freq_hz} must be > 0")));
    }
    let samples = (0..duration_us)
        .map(|t| if ((t as f64 * 2.0 * freq_hz / 1e6).floor() as u64) % 2 == 0 { on } else { off })
        .collect();
    IntensitySignal::new(samples, 1, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub freq_hz: f64,
    pub events: usize,
    /// Events per second over the whole patch.
    pub event_rate: f64,
    pub per_pixel_rate: f64,
}

/// Average event rate of a 10×10 patch for each transmitter frequency.
pub fn frequency_response(
    biases: &SensorBiases<f64>,
    ambient: &AmbientLight<f64>,
    on: f64,
    off: f64,
    freqs: &[f64],
    duration_us: u64,
    seed: u64,
) -> Result<Vec<RateSample>> {
    if freqs.is_empty() {
        return Err(Error::InvalidConfig("empty frequency list".into()));
    }
    let geometry = SensorGeometry::new(RATE_PATCH, RATE_PATCH)?;
    let patch = BoundingBox::full(geometry);
    freqs
        .iter()
        .map(|&f| {
            let signal = square_wave(f, duration_us, on, off)?;
            let stream = simulate_sensor(&PatchField { patch, signal: &signal, ambient: *ambient, seed }, biases, geometry, Some(patch), seed)?;
            let rate = average_event_rate(&stream, duration_us);
            Ok(RateSample {
                freq_hz: f,
                events: stream.len(),
                event_rate: rate,
                per_pixel_rate: rate / patch.area() as f64,
            })
        })
        .collect()
}

/// CSV-ready sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs `cfg` once per value of `parameter`.
pub fn sweep(cfg: &ExperimentConfig, parameter: SweepParameter, values: &[String]) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let num = |v: &String| {
        v.parse::<f64>()
            .map_err(|e| Error::InvalidConfig(format!("bad {parameter} value `{v}`: {e}")))
    };
    if parameter == SweepParameter::TransmitterHz {
        let freqs = values.iter().map(num).collect::<Result<Vec<_>>>()?;
        let seed = cfg.seeds.first().copied().unwrap_or(0);
        cfg.validate()?;
        let (on, off) = cfg.rate_sweep.levels(&cfg.sensor);
        let samples = frequency_response(&cfg.sensor, &AmbientLight::none(), on, off, &freqs, cfg.rate_sweep.duration_us, seed)?;
        return Ok(SweepTable {
            parameter,
            header: ["transmitter_hz", "events", "event_rate", "per_pixel_rate"].map(String::from).to_vec(),
            rows: samples
                .iter()
                .map(|s| vec![s.freq_hz.to_string(), s.events.to_string(), s.event_rate.to_string(), s.per_pixel_rate.to_string()])
                .collect(),
        });
    }

    let mut header = vec![parameter.to_string()];
    header.extend(LinkReport::CSV_HEADER.iter().map(|h| format!("mean_{h}")));
    header.push("stddev_packet_error_rate".into());
    let mut rows = Vec::new();
    for v in values {
        let mut point = cfg.clone();
        point.out_dir = cfg.out_dir.as_ref().map(|d| d.join(format!("{parameter}_{v}")));
        match parameter {
            SweepParameter::AmbientSigma => point.ambient.sigma = Some(num(v)?),
            SweepParameter::SurfacePreset => point.scene.preset = v.clone(),
            SweepParameter::Scheme => point.scheme = v.parse::<Scheme>()?,
            SweepParameter::TransmitterHz => unreachable!(),
        }
        let result = run_experiment(&point)?;
        let mut row = vec![v.clone()];
        row.extend(LinkReport::CSV_HEADER.iter().map(|h| result.mean(h).to_string()));
        row.push(result.summary.metrics["packet_error_rate"].stddev.to_string());
        rows.push(row);
    }
    Ok(SweepTable { parameter, header, rows })
}
