//! Experiment configuration, read from TOML.
//!
//! ```toml
//! scheme = "adaptive"
//! duration_us = 3000000
//! seeds = [1, 2, 3]
//! out_dir = "runs/ball"
//!
//! [packets]
//! source = "random"     # all_combos | fixed | random
//! count = 50
//!
//! [scene]
//! preset = "ball"
//! width = 64
//! height = 48
//!
//! [ambient]
//! preset = "room"
//! sigma = 0.2
//! ```
//!
//! Every key is optional. `[codec]` holds the slot and sync settings,
//! `[sensor]` the biases and `[frames]` the RoI framing parameters.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{parse_bits, Bits};
use crate::channel::{disc_mask, AmbientLight, SceneSpec, SurfaceProfile, Tap, TransmitterWaveform};
use crate::codec::{PulseString, Scheme, SchemeConfig};
use crate::detect::{DEFAULT_CAP, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::framing::{parse_fps, FrameRate};
use crate::sensor::SensorBiases;

/// Where packets come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketSource {
    /// 64 bits made of every 4-bit value from `0000` to `1111`.
    #[default]
    AllCombos,
    /// The `bits` string, repeated.
    Fixed,
    /// Seeded uniform packets of `length` bits.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub source: PacketSource,
    pub bits: Option<String>,
    pub length: usize,
    /// Fixed packet count; otherwise packets fill `duration_us`.
    pub count: Option<usize>,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self { source: PacketSource::AllCombos, bits: None, length: 64, count: None }
    }
}

/// Every 4-bit value in ascending order, concatenated.
pub fn all_combos_packet() -> Bits {
    (0u8..16).flat_map(|v| (0..4).rev().map(move |i| (v >> i) & 1 == 1)).collect()
}

impl PacketConfig {
    /// The `k`-th packet for a seed.
    pub fn packet(&self, seed: u64, k: usize) -> Result<Bits> {
        match self.source {
            PacketSource::AllCombos => Ok(all_combos_packet()),
            PacketSource::Fixed => {
                let s = self
                    .bits
                    .as_deref()
                    .ok_or_else(|| Error::InvalidConfig("packets.source = \"fixed\" needs packets.bits".into()))?;
                parse_bits(s)
            }
            PacketSource::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                Ok((0..self.length).map(|_| rng.random_bool(0.5)).collect())
            }
        }
    }
}

/// Object placement and surface. Explicit values override the preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    /// Disc centre; defaults to the sensor centre.
    pub cx: Option<f64>,
    pub cy: Option<f64>,
    pub radius: f64,
    pub preset: String,
    pub reflectivity: Option<f64>,
    pub gloss: Option<f64>,
    /// `[[delay_us, gain], ...]`
    pub taps: Option<Vec<(u64, f64)>>,
    pub matte_spread_us: Option<u64>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            cx: None,
            cy: None,
            radius: 8.0,
            preset: "mirror".into(),
            reflectivity: None,
            gloss: None,
            taps: None,
            matte_spread_us: None,
        }
    }
}

impl SceneConfig {
    pub fn geometry(&self) -> Result<SensorGeometry> {
        SensorGeometry::new(self.width, self.height)
    }

    pub fn surface(&self) -> Result<SurfaceProfile<f64>> {
        let mut s = SurfaceProfile::preset(&self.preset)?;
        if let Some(r) = self.reflectivity {
            s.reflectivity = r;
        }
        if let Some(g) = self.gloss {
            s.gloss = g;
        }
        if let Some(taps) = &self.taps {
            s.multipath_taps = taps.iter().map(|&(delay_us, gain)| Tap { delay_us, gain }).collect();
        }
        if let Some(m) = self.matte_spread_us {
            s.matte_spread_us = m;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbientConfig {
    pub preset: String,
    pub dc: Option<f64>,
    pub flicker_hz: Option<f64>,
    pub flicker_amplitude: Option<f64>,
    pub sigma: Option<f64>,
}

impl Default for AmbientConfig {
    fn default() -> Self {
        Self { preset: "dark".into(), dc: None, flicker_hz: None, flicker_amplitude: None, sigma: None }
    }
}

impl AmbientConfig {
    pub fn light(&self) -> Result<AmbientLight<f64>> {
        let mut a = AmbientLight::preset(&self.preset)?;
        if let Some(v) = self.dc {
            a.dc_level = v;
        }
        if let Some(v) = self.flicker_hz {
            a.flicker_hz = v;
        }
        if let Some(v) = self.flicker_amplitude {
            a.flicker_amplitude = v;
        }
        if let Some(v) = self.sigma {
            a.shot_noise_sigma = v;
        }
        a.validate()?;
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmitterConfig {
    pub on: f64,
    pub off: f64,
}

impl Default for TransmitterConfig {
    fn default() -> Self {
        Self { on: 2.0, off: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramesConfig {
    pub accumulation_us: u64,
    /// Integer or ratio, e.g. `"100"` or `"30000/1001"`.
    pub fps: String,
    pub threshold: u32,
    pub cap: u32,
}

impl Default for FramesConfig {
    fn default() -> Self {
        Self { accumulation_us: 10_000, fps: "100".into(), threshold: DEFAULT_THRESHOLD, cap: DEFAULT_CAP }
    }
}

impl FramesConfig {
    pub fn rate(&self) -> Result<FrameRate> {
        parse_fps(&self.fps)
    }
}

/// Transmitter-frequency sweep on a small patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSweepConfig {
    /// On/off log contrast of the square wave, in units of `diff_on`.
    pub contrast: f64,
    pub duration_us: u64,
}

impl Default for RateSweepConfig {
    fn default() -> Self {
        Self { contrast: 1.2, duration_us: 200_000 }
    }
}

impl RateSweepConfig {
    /// `(on, off)` intensity levels for the given biases.
    pub fn levels(&self, biases: &SensorBiases<f64>) -> (f64, f64) {
        ((self.contrast * biases.diff_on).exp(), 1.0)
    }
}

/// How the RoI restricts the decoder input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiMode {
    /// Drop events outside the RoI after simulation.
    #[default]
    Filter,
    /// Simulate again with only the RoI pixels read out.
    Hardware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub duration_us: u64,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub roi_mode: RoiMode,
    /// Idle slots before the first packet.
    pub lead_in_slots: usize,
    pub codec: SchemeConfig,
    pub packets: PacketConfig,
    pub scene: SceneConfig,
    pub ambient: AmbientConfig,
    pub transmitter: TransmitterConfig,
    pub sensor: SensorBiases<f64>,
    pub frames: FramesConfig,
    pub rate_sweep: RateSweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Adaptive,
            duration_us: 3_000_000,
            seeds: vec![0],
            out_dir: None,
            roi_mode: RoiMode::Filter,
            lead_in_slots: 10,
            codec: SchemeConfig::default(),
            packets: PacketConfig::default(),
            scene: SceneConfig::default(),
            ambient: AmbientConfig::default(),
            transmitter: TransmitterConfig::default(),
            sensor: SensorBiases::default(),
            frames: FramesConfig::default(),
            rate_sweep: RateSweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_toml(&text).map_err(|msg| Error::Parse { path: path.to_path_buf(), msg })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.sensor.validate()?;
        self.scene.surface()?;
        self.ambient.light()?;
        self.frames.rate()?;
        self.scene.geometry()?;
        if self.frames.cap == 0 || self.frames.accumulation_us == 0 {
            return Err(Error::InvalidConfig("frames.cap and frames.accumulation_us must be > 0".into()));
        }
        if !(self.rate_sweep.contrast > 0.0 && self.rate_sweep.contrast.is_finite()) || self.rate_sweep.duration_us == 0 {
            return Err(Error::InvalidConfig("rate_sweep.contrast and rate_sweep.duration_us must be > 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.duration_us == 0 && self.packets.count.is_none() {
            return Err(Error::InvalidConfig("duration_us must be > 0 unless packets.count is set".into()));
        }
        let len = self.packets.packet(0, 0)?.len();
        if len == 0 {
            return Err(Error::InvalidConfig("packets must not be empty".into()));
        }
        if matches!(self.scheme, Scheme::Npulse4 | Scheme::Adaptive) && len % 2 != 0 {
            return Err(Error::InvalidConfig(format!("{} packets need an even length, got {len}", self.scheme)));
        }
        Ok(())
    }

    /// Scene for a given transmitter slot string.
    pub fn scene_spec(&self, pulse_string: PulseString) -> Result<SceneSpec<f64>> {
        let geometry = self.scene.geometry()?;
        let cx = self.scene.cx.unwrap_or(geometry.width as f64 / 2.0);
        let cy = self.scene.cy.unwrap_or(geometry.height as f64 / 2.0);
        Ok(SceneSpec {
            geometry,
            object_mask: disc_mask(geometry, cx, cy, self.scene.radius),
            surface: self.scene.surface()?,
            ambient: self.ambient.light()?,
            transmitter: TransmitterWaveform::new(pulse_string, self.transmitter.on, self.transmitter.off)?,
        })
    }
}
