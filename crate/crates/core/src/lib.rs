//! Simulation and analysis of Hong-Ou-Mandel interference between photons
//! emitted by two independent atomic nodes: a heralded DLCZ memory and a
//! Rydberg-blockaded ensemble.
//!
//! The crate is organised bottom-up:
//!
//! - [`photonics`]: temporal modes on a discrete grid, overlaps, mixed states
//!   and the two-photon coincidence density.
//! - [`sources`]: per-trial photon-number models of both nodes.
//! - [`detection`]: beamsplitter sampling, detector model and the closed-form
//!   coincidence expressions.
//! - [`sequencer`]: the experimental cycle, herald-trigger scheduling, drift and
//!   recalibration.
//! - [`analysis`]: the binary timestamp format, trial-binned correlations,
//!   visibility/indistinguishability estimators, window sweeps and curve fits.
//! - [`config`]: the experiment configuration file shared by every entry point.

pub mod analysis;
pub mod config;
pub mod detection;
mod error;
pub mod photonics;
pub mod rng;
pub mod sequencer;
pub mod sources;
pub mod stats;

pub use error::{Error, Result};

pub use analysis::{
    AnalysisWindow, Channel, DetectionLog, G2Curve, Gate, HomReport, TimestampRecord,
};
pub use detection::{DetectorConfig, HomOutcome, Port};
pub use photonics::{Density2D, PhotonStateMixture, TemporalMode, TimeGrid};
pub use sequencer::{CalibrationState, DriftModel, RunMode, SequenceConfig};
pub use sources::{DlczConfig, NumberStats, RydbergConfig, TrialEmission};
pub use stats::Measured;
