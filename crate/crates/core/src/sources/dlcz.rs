use super::{NumberStats, TrialEmission};
use crate::error::{check_positive, check_probability, Error, Result};
use crate::photonics::PhotonStateMixture;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Detuning of the read transition during write, MHz. Documentation only.
pub const DLCZ_READ_DETUNING_MHZ: f64 = -40.0;
/// Optical depth of the DLCZ ensemble. Documentation only.
pub const DLCZ_OPTICAL_DEPTH: f64 = 6.0;

/// Detuning of the stand-in component used to model waveform mismatch, MHz.
const MISMATCH_DETUNING_MHZ: f64 = 40.0;

/// Heralded DLCZ source. The emitted temporal mode is configured separately
/// (see [`dlcz_state`]) so that both nodes can share one target waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DlczConfig {
    /// Probability that a write attempt produces a herald click.
    pub herald_prob: f64,
    /// Read-photon generation probability conditioned on a herald.
    pub retrieval_prob: f64,
    /// Storage time between herald and read photon, ns.
    pub memory_delay_ns: f64,
    /// Excitation probability per write pulse.
    pub excitation_param: f64,
    /// Probability that a heralded read photon reaches the beamsplitter.
    pub bs_arrival_prob: f64,
    /// Weight of an orthogonal admixture to the target waveform.
    pub waveform_mismatch: f64,
}

impl Default for DlczConfig {
    fn default() -> Self {
        DlczConfig {
            herald_prob: 0.025,
            retrieval_prob: 0.25,
            memory_delay_ns: 2800.0,
            excitation_param: excitation_for_g2(0.13).expect("0.13 is attainable"),
            bs_arrival_prob: 0.028,
            waveform_mismatch: 0.0,
        }
    }
}

impl DlczConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("herald_prob", self.herald_prob)?;
        check_probability("retrieval_prob", self.retrieval_prob)?;
        check_probability("bs_arrival_prob", self.bs_arrival_prob)?;
        check_probability("waveform_mismatch", self.waveform_mismatch)?;
        check_positive("memory_delay_ns", self.memory_delay_ns)?;
        check_excitation(self.excitation_param)
    }
}

fn check_excitation(p: f64) -> Result<()> {
    if p > 0.0 && p <= 0.25 {
        Ok(())
    } else {
        Err(Error::invalid(
            "excitation_param",
            format!("{p} is not in (0, 0.25]"),
        ))
    }
}

/// Heralded autocorrelation of a two-mode squeezed source, `4p/(1+p)²`.
pub fn g2_from_excitation(p: f64) -> f64 {
    4.0 * p / ((1.0 + p) * (1.0 + p))
}

/// Inverse of [`g2_from_excitation`] on its increasing branch.
pub fn excitation_for_g2(g2: f64) -> Result<f64> {
    let gmax = g2_from_excitation(0.25);
    if !(g2 > 0.0 && g2 <= gmax) {
        return Err(Error::invalid(
            "g2",
            format!("{g2} is not in (0, {gmax:.4}]"),
        ));
    }
    // g·p² + (2g − 4)·p + g = 0, smaller root
    let b = 4.0 - 2.0 * g2;
    Ok((b - (b * b - 4.0 * g2 * g2).sqrt()) / (2.0 * g2))
}

pub fn dlcz_number_stats(cfg: &DlczConfig) -> Result<NumberStats> {
    check_excitation(cfg.excitation_param)?;
    check_probability("bs_arrival_prob", cfg.bs_arrival_prob)?;
    NumberStats::from_g2(
        cfg.bs_arrival_prob,
        g2_from_excitation(cfg.excitation_param),
    )
}

/// One write attempt. The read photon, if any, starts `memory_delay_ns` after
/// the herald.
pub fn dlcz_sample_trial<R: Rng + ?Sized>(
    cfg: &DlczConfig,
    stats: &NumberStats,
    rng: &mut R,
) -> TrialEmission {
    if rng.random::<f64>() >= cfg.herald_prob {
        return TrialEmission::NONE;
    }
    TrialEmission {
        heralded: true,
        photons: stats.sample(rng),
        emission_time: cfg.memory_delay_ns,
    }
}

/// Read-photon state: the target state with a `waveform_mismatch` admixture
/// that does not overlap the target.
pub fn dlcz_state(target: &PhotonStateMixture, cfg: &DlczConfig) -> Result<PhotonStateMixture> {
    if cfg.waveform_mismatch == 0.0 {
        return Ok(target.clone());
    }
    target.mixed_with(
        &target.shifted(MISMATCH_DETUNING_MHZ),
        cfg.waveform_mismatch,
    )
}
