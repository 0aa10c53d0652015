//! Simulator for a dual-frequency resonant-beam integrated sensing and
//! communication (RB-ISAC) link.
//!
//! Two retro-directive planar arrays (a base station and a passive user
//! terminal) exchange phase-conjugated, frequency-shifted waves until the
//! loop settles into a resonant steady state. The crate models the full
//! chain: PLL frequency planning, dual-spacing array geometry, free-space
//! channel matrices, the power-circulation loop, link-quality metrics,
//! spatial field maps, and passive MUSIC direction-of-arrival estimation.

pub mod channel;
pub mod config;
pub mod doa;
pub mod fieldmap;
pub mod freqplan;
pub mod geometry;
pub mod metrics;
pub mod resonance;
pub mod rng;

pub use config::{PhysicalConstants, ScenarioConfig};
