//! Simulation of an optical link received by an event camera.
//!
//! The transmit side turns packets into slot strings ([`codec`]), the
//! [`channel`] renders the light reaching each pixel, [`sensor`] turns it
//! into events, [`framing`] and [`detect`] locate the illuminated region,
//! [`demod`] recovers packets from the hottest pixel and [`metrics`] scores
//! the result. [`harness`] wires the stages together for experiments.
//!
//! Signal-path types are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix them to `f64`.

pub mod bits;
pub mod channel;
pub mod codec;
pub mod demod;
pub mod detect;
pub mod error;
pub mod event;
pub mod framing;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod scalar;
pub mod sensor;

pub use bits::Bits;
pub use codec::{PulseString, Scheme, SchemeConfig};
pub use detect::BoundingBox;
pub use error::{Error, Result};
pub use event::{Event, Polarity, SensorGeometry};
pub use framing::{EventFrame, FrameRate};
pub use metrics::LinkReport;
pub use scalar::Scalar;

pub type Signal = sensor::IntensitySignal<f64>;
pub type Biases = sensor::SensorBiases<f64>;
pub type Surface = channel::SurfaceProfile<f64>;
pub type Ambient = channel::AmbientLight<f64>;
pub type Scene = channel::SceneSpec<f64>;
pub type Waveform = channel::TransmitterWaveform<f64>;

pub type Signal32 = sensor::IntensitySignal<f32>;
pub type Biases32 = sensor::SensorBiases<f32>;
pub type Surface32 = channel::SurfaceProfile<f32>;
pub type Ambient32 = channel::AmbientLight<f32>;
pub type Scene32 = channel::SceneSpec<f32>;
pub type Waveform32 = channel::TransmitterWaveform<f32>;
