//! Optical path: transmitter waveform, surface reflection and ambient light.
//!
//! A reflection is a specular copy, a matte blur and a set of delayed echoes:
//!
//! ```text
//! out(t) = r · [g · in(t) + (1 − g) · blur(in, spread)(t)] + Σ gain_k · in(t − delay_k)
//! ```
//!
//! where the blur is a causal moving average over `spread` and the input
//! holds its first sample before the start. Ambient light adds
//! `dc + a · sin(2π f t) + N(0, σ²)` per slot, clamped at zero.

use std::borrow::Cow;
use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::PulseString;
use crate::detect::BoundingBox;
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::scalar::{us, Scalar};
use crate::sensor::{pixel_seed, IntensityField, IntensitySignal};

/// Default matte blur length.
pub const DEFAULT_MATTE_SPREAD_US: u64 = 300;

/// Salt separating ambient noise draws from sensor background draws.
const AMBIENT_SALT: u64 = 0xa3b1_e7c4_0d2f_5960;

/// Transmitter drive: slot string plus the emitted on and off levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterWaveform<T> {
    pub pulse_string: PulseString,
    pub on_level: T,
    pub off_level: T,
}

impl<T: Scalar> TransmitterWaveform<T> {
    pub fn new(pulse_string: PulseString, on_level: T, off_level: T) -> Result<Self> {
        if !(off_level >= T::zero() && on_level > off_level && on_level.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "transmitter levels need on > off >= 0, got on {on_level}, off {off_level}"
            )));
        }
        if pulse_string.slot_us == 0 {
            return Err(Error::InvalidConfig("slot_us must be > 0".into()));
        }
        Ok(Self { pulse_string, on_level, off_level })
    }

    pub fn slot_us(&self) -> u64 {
        self.pulse_string.slot_us
    }
}

/// Intensity emitted by the transmitter, one sample per slot.
pub fn waveform_to_signal<T: Scalar>(w: &TransmitterWaveform<T>) -> Result<IntensitySignal<T>> {
    if w.pulse_string.is_empty() {
        return Err(Error::InvalidSignal("empty pulse string".into()));
    }
    let samples = w
        .pulse_string
        .slots
        .iter()
        .map(|&s| if s { w.on_level } else { w.off_level })
        .collect();
    IntensitySignal::new(samples, w.slot_us(), 0)
}

/// Delayed echo of the reflected light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap<T> {
    pub delay_us: u64,
    pub gain: T,
}

/// Reflective behaviour of the illuminated object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceProfile<T> {
    pub label: String,
    pub reflectivity: T,
    /// 1 is a perfect mirror, 0 fully matte.
    pub gloss: T,
    #[serde(default)]
    pub multipath_taps: Vec<Tap<T>>,
    #[serde(default = "default_spread")]
    pub matte_spread_us: u64,
}

fn default_spread() -> u64 {
    DEFAULT_MATTE_SPREAD_US
}

/// Names accepted by [`SurfaceProfile::preset`].
pub const SURFACE_PRESETS: [&str; 6] = ["mirror", "ball", "nest", "flask", "tape", "foam"];

impl<T: Scalar> SurfaceProfile<T> {
    pub fn new(label: &str, reflectivity: f64, gloss: f64, taps: &[(u64, f64)]) -> Self {
        Self {
            label: label.to_string(),
            reflectivity: T::lit(reflectivity),
            gloss: T::lit(gloss),
            multipath_taps: taps.iter().map(|&(delay_us, g)| Tap { delay_us, gain: T::lit(g) }).collect(),
            matte_spread_us: DEFAULT_MATTE_SPREAD_US,
        }
    }

    /// Shipped calibration for the six reference objects.
    pub fn preset(name: &str) -> Result<Self> {
        let s = match name {
            "mirror" => Self::new("mirror", 0.95, 1.0, &[]),
            "ball" => Self::new("ball", 0.85, 0.92, &[(100, 0.03)]),
            "nest" => Self::new("nest", 0.6, 0.66, &[(100, 0.04), (200, 0.06)]),
            "flask" => Self::new("flask", 0.7, 0.67, &[(100, 0.05), (300, 0.04)]),
            "tape" => Self::new("tape", 0.45, 0.1, &[(100, 0.25), (200, 0.2), (300, 0.15)]),
            "foam" => Self::new("foam", 0.0, 0.0, &[]),
            other => return Err(Error::InvalidConfig(format!("unknown surface preset `{other}`"))),
        };
        Ok(s)
    }

    /// Unit-gain specular surface.
    pub fn identity() -> Self {
        Self::new("identity", 1.0, 1.0, &[])
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.reflectivity) {
            return Err(Error::InvalidConfig(format!("{}: reflectivity must be in [0, 1]", self.label)));
        }
        if !unit(self.gloss) {
            return Err(Error::InvalidConfig(format!("{}: gloss must be in [0, 1]", self.label)));
        }
        if self.multipath_taps.iter().any(|t| !(t.gain >= T::zero() && t.gain.is_finite())) {
            return Err(Error::InvalidConfig(format!("{}: tap gains must be >= 0", self.label)));
        }
        let total: T = self.multipath_taps.iter().map(|t| t.gain).sum();
        if total > T::one() {
            return Err(Error::InvalidConfig(format!("{}: tap gains sum to {total} > 1", self.label)));
        }
        Ok(())
    }
}

/// Applies a surface to a signal. Tap delays and the matte spread are
/// rounded to whole slots; the blur spans at least one slot.
pub fn reflect<T: Scalar>(signal: &IntensitySignal<T>, surface: &SurfaceProfile<T>) -> Result<IntensitySignal<T>> {
    surface.validate()?;
    let input = signal.samples();
    let Some(&first) = input.first() else {
        return Err(Error::InvalidSignal("empty signal".into()));
    };
    let slot = signal.slot_us();
    let slots_of = |d: u64| ((d + slot / 2) / slot) as usize;
    let at = |i: isize| if i < 0 { first } else { input[i as usize] };

    let width = slots_of(surface.matte_spread_us).max(1);
    let inv_width = T::one() / T::from_usize(width).unwrap();
    let taps: Vec<(usize, T)> = surface
        .multipath_taps
        .iter()
        .map(|t| (slots_of(t.delay_us), t.gain))
        .collect();

    let mut out = Vec::with_capacity(input.len());
    // running sum of the trailing `width` samples
    let mut window = first * T::from_usize(width).unwrap();
    for (i, &x) in input.iter().enumerate() {
        let i = i as isize;
        window = window + x - at(i - width as isize);
        let blur = window * inv_width;
        let mut y = surface.reflectivity * (surface.gloss * x + (T::one() - surface.gloss) * blur);
        for &(d, g) in &taps {
            y = y + g * at(i - d as isize);
        }
        out.push(y.max(T::zero()));
    }
    IntensitySignal::new(out, slot, signal.t0_us())
}

/// Scene illumination not coming from the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmbientLight<T> {
    pub dc_level: T,
    pub flicker_hz: T,
    pub flicker_amplitude: T,
    pub shot_noise_sigma: T,
}

impl<T: Scalar> Default for AmbientLight<T> {
    fn default() -> Self {
        Self::none()
    }
}

/// Names accepted by [`AmbientLight::preset`].
pub const AMBIENT_PRESETS: [&str; 3] = ["none", "dark", "room"];

impl<T: Scalar> AmbientLight<T> {
    pub fn none() -> Self {
        Self {
            dc_level: T::zero(),
            flicker_hz: T::lit(120.0),
            flicker_amplitude: T::zero(),
            shot_noise_sigma: T::zero(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (dc, amp, sigma) = match name {
            "none" => (0.0, 0.0, 0.0),
            "dark" => (0.5, 0.0, 0.02),
            "room" => (1.5, 0.1, 0.05),
            other => return Err(Error::InvalidConfig(format!("unknown ambient preset `{other}`"))),
        };
        Ok(Self {
            dc_level: T::lit(dc),
            flicker_hz: T::lit(120.0),
            flicker_amplitude: T::lit(amp),
            shot_noise_sigma: T::lit(sigma),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dc_level >= T::zero() && self.dc_level.is_finite()) {
            return Err(Error::InvalidConfig("ambient dc_level must be >= 0".into()));
        }
        if !(self.flicker_amplitude >= T::zero() && self.flicker_amplitude <= self.dc_level) {
            return Err(Error::InvalidConfig("ambient flicker_amplitude must be in [0, dc_level]".into()));
        }
        if !(self.shot_noise_sigma >= T::zero() && self.shot_noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("ambient shot_noise_sigma must be >= 0".into()));
        }
        if !(self.flicker_hz >= T::zero() && self.flicker_hz.is_finite()) {
            return Err(Error::InvalidConfig("ambient flicker_hz must be >= 0".into()));
        }
        Ok(())
    }

    fn is_static(&self) -> bool {
        self.shot_noise_sigma == T::zero() && (self.flicker_amplitude == T::zero() || self.flicker_hz == T::zero())
    }

    /// Adds ambient light to `base` in place. Varying light is clamped at
    /// [`AMBIENT_FLOOR`] so noise never drives a pixel to zero; static light
    /// is clamped at zero.
    pub(crate) fn add_to(&self, base: &mut [T], slot_us: u64, t0_us: u64, seed: u64) {
        let two_pi_f = T::lit(2e-6) * T::PI() * self.flicker_hz;
        let flicker = self.flicker_amplitude > T::zero() && self.flicker_hz > T::zero();
        let noise = (self.shot_noise_sigma > T::zero())
            .then(|| Normal::new(0.0, self.shot_noise_sigma.as_f64()).expect("finite sigma"));
        let floor = if self.is_static() { T::zero() } else { T::lit(AMBIENT_FLOOR) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, v) in base.iter_mut().enumerate() {
            let mut a = self.dc_level;
            if flicker {
                a = a + self.flicker_amplitude * (two_pi_f * us::<T>(t0_us + i as u64 * slot_us)).sin();
            }
            if let Some(n) = &noise {
                a = a + T::lit(n.sample(&mut rng));
            }
            *v = (*v + a).max(floor);
        }
    }
}

/// Lowest intensity a pixel reaches under varying ambient light.
pub const AMBIENT_FLOOR: f64 = 1e-3;

/// Pixels covered by the illuminated object, keyed `(x, y)`.
pub type ObjectMask = BTreeSet<(u32, u32)>;

/// Filled disc of radius `r` around `(cx, cy)`, clipped to the sensor.
pub fn disc_mask(geometry: SensorGeometry, cx: f64, cy: f64, r: f64) -> ObjectMask {
    let mut mask = ObjectMask::new();
    let y0 = (cy - r).floor().max(0.0) as u32;
    let x0 = (cx - r).floor().max(0.0) as u32;
    let y1 = ((cy + r).ceil().max(0.0) as u32).min(geometry.height.saturating_sub(1));
    let x1 = ((cx + r).ceil().max(0.0) as u32).min(geometry.width.saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r && geometry.contains(x, y) {
                mask.insert((x, y));
            }
        }
    }
    mask
}

/// Tight bounding box of a mask.
pub fn mask_bbox(mask: &ObjectMask) -> Option<BoundingBox> {
    let x0 = mask.iter().map(|p| p.0).min()?;
    let x1 = mask.iter().map(|p| p.0).max()?;
    let y0 = mask.iter().map(|p| p.1).min()?;
    let y1 = mask.iter().map(|p| p.1).max()?;
    Some(BoundingBox { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 })
}

/// Everything needed to render per-pixel light.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec<T> {
    pub geometry: SensorGeometry,
    pub object_mask: ObjectMask,
    pub surface: SurfaceProfile<T>,
    pub ambient: AmbientLight<T>,
    pub transmitter: TransmitterWaveform<T>,
}

/// Rendered scene. Per-pixel signals are produced on demand.
#[derive(Debug, Clone)]
pub struct SceneField<T> {
    geometry: SensorGeometry,
    object_mask: ObjectMask,
    reflected: IntensitySignal<T>,
    ambient: AmbientLight<T>,
    seed: u64,
}

/// Builds the scene for a recording of `duration_us`. The transmitter
/// string loops (or is truncated) to cover `ceil(duration / slot)` slots.
pub fn compose_scene<T: Scalar>(scene: &SceneSpec<T>, duration_us: u64, seed: u64) -> Result<SceneField<T>> {
    scene.ambient.validate()?;
    if let Some(&(x, y)) = scene.object_mask.iter().find(|(x, y)| !scene.geometry.contains(*x, *y)) {
        return Err(Error::PixelOutOfBounds { x, y, width: scene.geometry.width, height: scene.geometry.height });
    }
    if duration_us == 0 {
        return Err(Error::InvalidConfig("duration_us must be > 0".into()));
    }
    let tx = waveform_to_signal(&scene.transmitter)?;
    let slot = tx.slot_us();
    let n = duration_us.div_ceil(slot) as usize;
    let looped: Vec<T> = tx.samples().iter().copied().cycle().take(n).collect();
    let reflected = reflect(&IntensitySignal::new(looped, slot, 0)?, &scene.surface)?;
    Ok(SceneField {
        geometry: scene.geometry,
        object_mask: scene.object_mask.clone(),
        reflected,
        ambient: scene.ambient,
        seed,
    })
}

impl<T: Scalar> SceneField<T> {
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    /// Reflected transmitter light before ambient is added.
    pub fn reflected(&self) -> &IntensitySignal<T> {
        &self.reflected
    }
}

impl<T: Scalar> IntensityField<T> for SceneField<T> {
    fn pixels(&self) -> Vec<(u32, u32)> {
        let (w, h) = (self.geometry.width, self.geometry.height);
        (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect()
    }

    fn signal(&self, x: u32, y: u32) -> Result<Cow<'_, IntensitySignal<T>>> {
        self.geometry.check(x, y)?;
        let on_object = self.object_mask.contains(&(x, y));
        let (slot, t0, n) = (self.reflected.slot_us(), self.reflected.t0_us(), self.reflected.len());
        if on_object && self.ambient.is_static() && self.ambient.dc_level == T::zero() {
            return Ok(Cow::Borrowed(&self.reflected));
        }
        let mut base = if on_object { self.reflected.samples().to_vec() } else { vec![T::zero(); n] };
        self.ambient.add_to(&mut base, slot, t0, pixel_seed(self.seed ^ AMBIENT_SALT, x, y));
        Ok(Cow::Owned(IntensitySignal::from_parts_unchecked(base, slot, t0)))
    }
}
