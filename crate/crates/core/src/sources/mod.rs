//! Per-trial photon-number models of the two nodes.
//!
//! Both sources emit at most two photons per trial into the beamsplitter.
//! [`NumberStats`] holds the probabilities of one and two photons arriving,
//! and the heralded autocorrelation follows as `g² ≈ 2·p2/p1²`.

mod dlcz;
mod rydberg;

pub use dlcz::{
    dlcz_number_stats, dlcz_sample_trial, dlcz_state, excitation_for_g2, g2_from_excitation,
    DlczConfig, DLCZ_OPTICAL_DEPTH, DLCZ_READ_DETUNING_MHZ,
};
pub use rydberg::{
    blockade_radius, blockade_radius_raw, rydberg_models, rydberg_number_stats,
    rydberg_sample_trial, rydberg_state, PurityLaw, RydbergConfig, RydbergModels,
    RYDBERG_OPTICAL_DEPTH,
};

use crate::error::{check_probability, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumberStats {
    p1: f64,
    p2: f64,
}

impl NumberStats {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        check_probability("p1", p1)?;
        check_probability("p2", p2)?;
        if p2 > p1 {
            return Err(Error::invalid("p2", format!("{p2} exceeds p1 = {p1}")));
        }
        if p1 + p2 > 1.0 {
            return Err(Error::invalid("p2", format!("p1 + p2 = {} > 1", p1 + p2)));
        }
        Ok(NumberStats { p1, p2 })
    }

    /// Statistics with single-photon probability `p1` and autocorrelation `g2`.
    pub fn from_g2(p1: f64, g2: f64) -> Result<Self> {
        if !(g2 >= 0.0 && g2.is_finite()) {
            return Err(Error::invalid("g2", format!("{g2} must be >= 0")));
        }
        NumberStats::new(p1, 0.5 * g2 * p1 * p1)
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn g2(&self) -> f64 {
        if self.p1 == 0.0 {
            0.0
        } else {
            2.0 * self.p2 / (self.p1 * self.p1)
        }
    }

    /// Photon number for a uniform draw `u` in [0, 1).
    #[inline]
    pub fn photons_for(&self, u: f64) -> u8 {
        if u < self.p2 {
            2
        } else if u < self.p2 + self.p1 {
            1
        } else {
            0
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        self.photons_for(rng.random())
    }
}

/// What one source delivers to the beamsplitter in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialEmission {
    pub heralded: bool,
    pub photons: u8,
    /// Start of the photon wavepacket, ns after the herald (DLCZ) or trigger (Rydberg).
    pub emission_time: f64,
}

impl TrialEmission {
    pub const NONE: TrialEmission = TrialEmission {
        heralded: false,
        photons: 0,
        emission_time: 0.0,
    };
}
