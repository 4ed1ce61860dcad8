//! Per-pixel event camera model.
//!
//! Each pixel takes the natural log of its light level, runs it through a
//! first-order low-pass stage (`f0_cutoff_hz`) followed by a first-order
//! high-pass stage (`hpf_cutoff_hz`), and compares the result with a stored
//! reference. Crossing `diff_on` above the reference emits an on-event,
//! crossing `diff_off` below emits an off-event, and the reference moves to
//! the crossing value. After an event the pixel is dead for `refractory_us`:
//! crossings in that window are dropped and the reference re-anchors to the
//! level held when the window closes. Background activity is an independent
//! Poisson process per pixel with uniformly random polarity.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::BoundingBox;
use crate::error::{Error, Result};
use crate::event::{Event, Polarity, SensorGeometry};
use crate::scalar::{us, Scalar};

/// Bias settings of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorBiases<T> {
    /// Positive log-contrast threshold.
    pub diff_on: T,
    /// Negative log-contrast threshold, applied as a decrease.
    pub diff_off: T,
    pub f0_cutoff_hz: T,
    pub hpf_cutoff_hz: T,
    pub refractory_us: u64,
    /// Per-pixel background event rate.
    pub background_rate_hz: T,
}

impl<T: Scalar> Default for SensorBiases<T> {
    fn default() -> Self {
        Self {
            diff_on: T::lit(0.2),
            diff_off: T::lit(0.2),
            f0_cutoff_hz: T::lit(10_000.0),
            hpf_cutoff_hz: T::lit(1.0),
            refractory_us: 50,
            background_rate_hz: T::lit(0.1),
        }
    }
}

impl<T: Scalar> SensorBiases<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("sensor biases: {msg}")));
        if !(self.diff_on > T::zero() && self.diff_on.is_finite()) {
            return bad("diff_on must be > 0");
        }
        if !(self.diff_off > T::zero() && self.diff_off.is_finite()) {
            return bad("diff_off must be > 0");
        }
        if !(self.hpf_cutoff_hz > T::zero() && self.hpf_cutoff_hz < self.f0_cutoff_hz && self.f0_cutoff_hz.is_finite()) {
            return bad("cutoffs must satisfy 0 < hpf_cutoff_hz < f0_cutoff_hz");
        }
        if !(self.background_rate_hz >= T::zero() && self.background_rate_hz.is_finite()) {
            return bad("background_rate_hz must be >= 0");
        }
        Ok(())
    }

    /// Same biases with background activity switched off.
    pub fn noise_free(mut self) -> Self {
        self.background_rate_hz = T::zero();
        self
    }
}

/// Piecewise-constant light level seen by one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySignal<T> {
    samples: Vec<T>,
    slot_us: u64,
    t0_us: u64,
}

impl<T: Scalar> IntensitySignal<T> {
    pub fn new(samples: Vec<T>, slot_us: u64, t0_us: u64) -> Result<Self> {
        if slot_us == 0 {
            return Err(Error::InvalidSignal("slot_us must be > 0".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(s.is_finite() && **s >= T::zero())) {
            return Err(Error::InvalidSignal(format!("sample {bad} is negative or not finite")));
        }
        Ok(Self { samples, slot_us, t0_us })
    }

    pub fn constant(level: T, len: usize, slot_us: u64, t0_us: u64) -> Result<Self> {
        Self::new(vec![level; len], slot_us, t0_us)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn slot_us(&self) -> u64 {
        self.slot_us
    }

    pub fn t0_us(&self) -> u64 {
        self.t0_us
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time at which sample `i` starts.
    pub fn time_of(&self, i: usize) -> u64 {
        self.t0_us + i as u64 * self.slot_us
    }

    /// End of the last sample.
    pub fn end_us(&self) -> u64 {
        self.time_of(self.samples.len())
    }

    pub fn is_constant(&self) -> bool {
        self.samples.windows(2).all(|w| w[0] == w[1])
    }

    /// Splits every sample into `factor` shorter samples of the same level.
    pub fn upsample(&self, factor: u64) -> Result<Self> {
        if factor == 0 || self.slot_us % factor != 0 {
            return Err(Error::InvalidSignal(format!(
                "cannot split {} µs slots by {factor}",
                self.slot_us
            )));
        }
        let samples = self
            .samples
            .iter()
            .flat_map(|s| std::iter::repeat_n(*s, factor as usize))
            .collect();
        Ok(Self { samples, slot_us: self.slot_us / factor, t0_us: self.t0_us })
    }

    pub fn scaled(&self, gain: T) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| *s * gain).collect(), self.slot_us, self.t0_us)
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<T>, slot_us: u64, t0_us: u64) -> Self {
        debug_assert!(slot_us > 0);
        Self { samples, slot_us, t0_us }
    }
}

fn stage_decay<T: Scalar>(cutoff_hz: T, slot_us: u64) -> T {
    // exp(-dt / tau) with tau = 1 / (2 pi fc)
    let tau_us = T::lit(1e6) / (T::lit(2.0) * T::PI() * cutoff_hz);
    (-(us::<T>(slot_us)) / tau_us).exp()
}

/// Band-pass filters a log-intensity series sampled every `slot_us`.
///
/// Low-pass at `f0_cutoff_hz` then high-pass at `hpf_cutoff_hz`, both
/// first-order and exact for a zero-order-hold input. Filters start in steady
/// state on the first sample, so a constant series maps to zeros.
pub fn apply_band_filter<T: Scalar>(series: &[T], slot_us: u64, biases: &SensorBiases<T>) -> Result<Vec<T>> {
    if slot_us == 0 {
        return Err(Error::InvalidSignal("slot_us must be > 0".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSignal("non-finite sample in log-intensity series".into()));
    }
    let Some(&first) = series.first() else {
        return Ok(Vec::new());
    };
    let a_lp = stage_decay(biases.f0_cutoff_hz, slot_us);
    let a_hp = stage_decay(biases.hpf_cutoff_hz, slot_us);

    let mut out = Vec::with_capacity(series.len());
    let mut lp = first;
    let mut hp = T::zero();
    out.push(hp);
    for &x in &series[1..] {
        let prev_lp = lp;
        lp = a_lp * lp + (T::one() - a_lp) * x;
        hp = a_hp * (hp + lp - prev_lp);
        out.push(hp);
    }
    Ok(out)
}

/// Simulates one pixel. Returns `(t_us, polarity)` pairs sorted by time.
pub fn simulate_pixel<T: Scalar>(
    signal: &IntensitySignal<T>,
    biases: &SensorBiases<T>,
    seed: u64,
) -> Result<Vec<(u64, Polarity)>> {
    if signal.is_empty() {
        return Err(Error::InvalidSignal("empty signal".into()));
    }
    let mut events = if signal.is_constant() {
        // No contrast change: the log is never needed, even for a dark pixel.
        Vec::new()
    } else {
        contrast_events(signal, biases)?
    };

    if biases.background_rate_hz > T::zero() {
        let noise = background_events(biases.background_rate_hz.as_f64(), signal.t0_us(), signal.end_us(), seed);
        if !noise.is_empty() {
            events.extend(noise);
            events.sort_unstable();
        }
    }
    Ok(events)
}

fn contrast_events<T: Scalar>(signal: &IntensitySignal<T>, biases: &SensorBiases<T>) -> Result<Vec<(u64, Polarity)>> {
    let mut log = Vec::with_capacity(signal.len());
    for (i, &s) in signal.samples().iter().enumerate() {
        if s <= T::zero() {
            return Err(Error::InvalidSignal(format!(
                "non-positive intensity {s} at t = {} µs",
                signal.time_of(i)
            )));
        }
        log.push(s.ln());
    }
    let filtered = apply_band_filter(&log, signal.slot_us(), biases)?;

    let mut events = Vec::new();
    let mut reference = filtered[0];
    let mut last_event: Option<u64> = None;
    let mut reanchor = false;
    for i in 1..filtered.len() {
        let t = signal.time_of(i);
        if let Some(te) = last_event {
            if t - te < biases.refractory_us {
                continue;
            }
        }
        if reanchor {
            // level held at the end of the dead time
            reference = filtered[i - 1];
            reanchor = false;
        }
        let level = filtered[i];
        let (polarity, step) = if level - reference >= biases.diff_on {
            (Polarity::On, biases.diff_on)
        } else if reference - level >= biases.diff_off {
            (Polarity::Off, -biases.diff_off)
        } else {
            continue;
        };

        if biases.refractory_us == 0 {
            // every threshold crossing inside the sample fires at time t
            loop {
                events.push((t, polarity));
                reference = reference + step;
                let again = match polarity {
                    Polarity::On => level - reference >= biases.diff_on,
                    Polarity::Off => reference - level >= biases.diff_off,
                };
                if !again {
                    break;
                }
            }
        } else {
            events.push((t, polarity));
            reference = level;
            last_event = Some(t);
            reanchor = true;
        }
    }
    Ok(events)
}

/// Poisson background activity on `[t0, t1)` with uniform polarity.
fn background_events(rate_hz: f64, t0: u64, t1: u64, seed: u64) -> Vec<(u64, Polarity)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = Exp::new(rate_hz * 1e-6).expect("positive background rate");
    let mut out = Vec::new();
    let mut t = t0 as f64;
    loop {
        t += gaps.sample(&mut rng);
        if t >= t1 as f64 {
            break;
        }
        let polarity = if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
        out.push((t as u64, polarity));
    }
    out
}

/// splitmix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-pixel seed: `seed ^ hash(x, y)`.
pub fn pixel_seed(seed: u64, x: u32, y: u32) -> u64 {
    seed ^ mix64(((y as u64) << 32) | x as u64)
}

/// Source of per-pixel light signals.
pub trait IntensityField<T: Scalar>: Sync {
    /// Pixels carrying a signal, in `(y, x)` order.
    fn pixels(&self) -> Vec<(u32, u32)>;

    fn signal(&self, x: u32, y: u32) -> Result<Cow<'_, IntensitySignal<T>>>;
}

/// Explicit per-pixel map keyed by `(x, y)`.
pub type PixelMap<T> = BTreeMap<(u32, u32), IntensitySignal<T>>;

impl<T: Scalar> IntensityField<T> for PixelMap<T> {
    fn pixels(&self) -> Vec<(u32, u32)> {
        let mut px: Vec<_> = self.keys().copied().collect();
        px.sort_by_key(|&(x, y)| (y, x));
        px
    }

    fn signal(&self, x: u32, y: u32) -> Result<Cow<'_, IntensitySignal<T>>> {
        self.get(&(x, y))
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::InvalidSignal(format!("no signal mapped at ({x}, {y})")))
    }
}

/// Simulates every pixel of `field` and merges the result into one stream
/// sorted by `(t, y, x, polarity)`. Pixels outside `roi` emit nothing.
pub fn simulate_sensor<T: Scalar, F: IntensityField<T> + ?Sized>(
    field: &F,
    biases: &SensorBiases<T>,
    geometry: SensorGeometry,
    roi: Option<BoundingBox>,
    seed: u64,
) -> Result<Vec<Event>> {
    biases.validate()?;
    if let Some(r) = roi {
        if !r.fits(geometry) {
            return Err(Error::InvalidRoi(format!("{r:?} is outside {}x{}", geometry.width, geometry.height)));
        }
    }
    let pixels = field.pixels();
    for &(x, y) in &pixels {
        geometry.check(x, y)?;
    }

    let per_pixel: Vec<Vec<Event>> = pixels
        .par_iter()
        .filter(|(x, y)| roi.is_none_or(|r| r.contains(*x, *y)))
        .map(|&(x, y)| {
            let signal = field.signal(x, y)?;
            let events = simulate_pixel(&signal, biases, pixel_seed(seed, x, y))?;
            Ok(events.into_iter().map(|(t, p)| Event::new(t, x, y, p)).collect())
        })
        .collect::<Result<_>>()?;

    let mut stream: Vec<Event> = per_pixel.into_iter().flatten().collect();
    stream.par_sort_unstable();
    Ok(stream)
}

/// Events per second over a recording of `duration_us`.
pub fn average_event_rate(stream: &[Event], duration_us: u64) -> f64 {
    event_rate(stream.len(), duration_us)
}

pub(crate) fn event_rate(count: usize, duration_us: u64) -> f64 {
    assert!(duration_us > 0, "duration must be positive");
    count as f64 / (duration_us as f64 * 1e-6)
}
