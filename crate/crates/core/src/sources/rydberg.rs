use super::{NumberStats, TrialEmission};
use crate::error::{check_positive, check_probability, Error, Result};
use crate::photonics::{state_overlap, PhotonStateMixture};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Optical depth of the Rydberg ensemble. Documentation only.
pub const RYDBERG_OPTICAL_DEPTH: f64 = 12.0;

/// Detuning of the scattered-light components that carry the impurity, MHz.
const IMPURITY_DETUNING_MHZ: f64 = 25.0;

/// Shape of the purity decrease with input mean photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PurityLaw {
    /// `1 / (1 + w·μ·f)`
    Rational,
    /// `exp(−w·μ·f)`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RydbergConfig {
    /// Photon generation probability at `reference_mu`.
    pub generation_prob: f64,
    /// Mean photon number of the input probe pulse.
    pub mu: f64,
    /// Input mean photon number at which `generation_prob` was measured.
    pub reference_mu: f64,
    /// van der Waals coefficient, GHz·µm⁶.
    pub c6_ghz_um6: f64,
    /// Decay rate of the intermediate state, MHz.
    pub gamma_mhz: f64,
    /// Coupling Rabi frequency, MHz.
    pub omega_c_mhz: f64,
    pub n_level: u32,
    /// Ensemble size (FWHM), µm.
    pub cloud_size_um: f64,
    pub purity_weight: f64,
    pub purity_law: PurityLaw,
    pub g2_baseline: f64,
    /// Growth of g² per unit μ, scaled by `cloud_size / r_b`.
    pub g2_slope: f64,
    /// Saturation scale of the generation probability, in units of μ.
    pub mu_saturation: f64,
    /// Input level beyond which generation probability decreases.
    pub mu_knee: f64,
    /// e-folding of the decrease past the knee, in units of μ.
    pub mu_falloff: f64,
    /// Probability that a photon reaches the beamsplitter at `reference_mu`.
    pub bs_arrival_prob: f64,
}

impl Default for RydbergConfig {
    fn default() -> Self {
        let c6 = 1.0e5;
        let gamma = 6.07;
        RydbergConfig {
            generation_prob: 0.14,
            mu: 0.5,
            reference_mu: 0.5,
            c6_ghz_um6: c6,
            gamma_mhz: gamma,
            omega_c_mhz: omega_for_radius(c6, gamma, 15.5),
            n_level: 103,
            cloud_size_um: 13.5,
            purity_weight: 0.02,
            purity_law: PurityLaw::Rational,
            g2_baseline: 0.09,
            g2_slope: 0.0,
            mu_saturation: 0.3,
            mu_knee: 1.0,
            mu_falloff: 2.0,
            bs_arrival_prob: 0.0215,
        }
    }
}

/// Coupling Rabi frequency giving blockade radius `r_b_um`.
fn omega_for_radius(c6_ghz_um6: f64, gamma_mhz: f64, r_b_um: f64) -> f64 {
    (c6_ghz_um6 * 1e3 * gamma_mhz / r_b_um.powi(6)).sqrt()
}

impl RydbergConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("generation_prob", self.generation_prob)?;
        check_probability("bs_arrival_prob", self.bs_arrival_prob)?;
        check_positive("c6_ghz_um6", self.c6_ghz_um6)?;
        check_positive("gamma_mhz", self.gamma_mhz)?;
        check_positive("omega_c_mhz", self.omega_c_mhz)?;
        check_positive("cloud_size_um", self.cloud_size_um)?;
        check_positive("reference_mu", self.reference_mu)?;
        check_positive("mu_saturation", self.mu_saturation)?;
        check_positive("mu_falloff", self.mu_falloff)?;
        for (name, v) in [
            ("mu", self.mu),
            ("purity_weight", self.purity_weight),
            ("g2_baseline", self.g2_baseline),
            ("g2_slope", self.g2_slope),
            ("mu_knee", self.mu_knee),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} must be >= 0")));
            }
        }
        if self.n_level == 0 {
            return Err(Error::invalid("n_level", "must be positive"));
        }
        Ok(())
    }

    /// Same ensemble driven on Rydberg level `n`: `C6 ∝ n¹¹`, `Ω_c ∝ n^(−3/2)`.
    pub fn at_level(&self, n: u32) -> RydbergConfig {
        let s = n as f64 / self.n_level as f64;
        RydbergConfig {
            c6_ghz_um6: self.c6_ghz_um6 * s.powi(11),
            omega_c_mhz: self.omega_c_mhz * s.powf(-1.5),
            n_level: n,
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: f64) -> RydbergConfig {
        RydbergConfig { mu, ..self.clone() }
    }
}

/// `(C6·Γ/Ω_c²)^(1/6)` in whatever consistent units the inputs share.
pub fn blockade_radius_raw(c6: f64, gamma: f64, omega_c: f64) -> Result<f64> {
    check_positive("c6", c6)?;
    check_positive("gamma", gamma)?;
    check_positive("omega_c", omega_c)?;
    Ok((c6 * gamma / (omega_c * omega_c)).powf(1.0 / 6.0))
}

/// Blockade radius in µm.
pub fn blockade_radius(cfg: &RydbergConfig) -> Result<f64> {
    blockade_radius_raw(cfg.c6_ghz_um6 * 1e3, cfg.gamma_mhz, cfg.omega_c_mhz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RydbergModels {
    pub purity: f64,
    pub g2: f64,
    pub gen_prob: f64,
}

/// Purity, autocorrelation and generation probability at the configured μ.
pub fn rydberg_models(cfg: &RydbergConfig) -> Result<RydbergModels> {
    if !(cfg.mu >= 0.0 && cfg.mu.is_finite()) {
        return Err(Error::invalid("mu", format!("{} must be >= 0", cfg.mu)));
    }
    let r_b = blockade_radius(cfg)?;
    let fill = (r_b / cfg.cloud_size_um).clamp(0.0, 1.0);
    let load = cfg.purity_weight * cfg.mu * fill;
    let purity = match cfg.purity_law {
        PurityLaw::Rational => 1.0 / (1.0 + load),
        PurityLaw::Exponential => (-load).exp(),
    };
    let g2 = cfg.g2_baseline + cfg.g2_slope * cfg.mu * (cfg.cloud_size_um / r_b);
    let shape = |mu: f64| {
        (1.0 - (-mu / cfg.mu_saturation).exp())
            * (-(mu - cfg.mu_knee).max(0.0) / cfg.mu_falloff).exp()
    };
    let gen_prob = (cfg.generation_prob * shape(cfg.mu) / shape(cfg.reference_mu)).min(1.0);
    Ok(RydbergModels {
        purity,
        g2,
        gen_prob,
    })
}

/// Beamsplitter photon statistics: arrival probability scaled with the
/// generation probability, two-photon part from the modelled g².
pub fn rydberg_number_stats(cfg: &RydbergConfig) -> Result<NumberStats> {
    let m = rydberg_models(cfg)?;
    let p1 = if cfg.generation_prob > 0.0 {
        (cfg.bs_arrival_prob * m.gen_prob / cfg.generation_prob).min(1.0)
    } else {
        0.0
    };
    NumberStats::from_g2(p1, m.g2)
}

/// One triggered emission, starting `emission_delay_ns` after the trigger.
pub fn rydberg_sample_trial<R: Rng + ?Sized>(
    stats: &NumberStats,
    emission_delay_ns: f64,
    rng: &mut R,
) -> TrialEmission {
    TrialEmission {
        heralded: true,
        photons: stats.sample(rng),
        emission_time: emission_delay_ns,
    }
}

/// Emitted state: `base` with an admixture of two far-detuned copies whose
/// weight is chosen so that the purity drops by the modelled factor.
pub fn rydberg_state(base: &PhotonStateMixture, cfg: &RydbergConfig) -> Result<PhotonStateMixture> {
    let factor = rydberg_models(cfg)?.purity;
    if factor >= 1.0 {
        return Ok(base.clone());
    }
    let far = PhotonStateMixture::new(
        base.shifted(IMPURITY_DETUNING_MHZ)
            .components()
            .iter()
            .chain(base.shifted(-IMPURITY_DETUNING_MHZ).components())
            .map(|(w, m)| (0.5 * w, m.clone()))
            .collect(),
    )?;
    // Tr(ρ(ε)²) = (1−ε)²·A + 2ε(1−ε)·B + ε²·C
    let a = base.purity();
    let b = state_overlap(base, &far)?;
    let c = far.purity();
    let target = factor * a;
    let (qa, qb, qc) = (a - 2.0 * b + c, 2.0 * (b - a), a - target);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(Error::invalid(
            "purity_weight",
            format!("purity factor {factor:.3} is below what the impurity model reaches"),
        ));
    }
    let eps = (-qb - disc.sqrt()) / (2.0 * qa);
    base.mixed_with(&far, eps.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonics::{make_waveform, TimeGrid};

    #[test]
    fn default_radius_is_calibrated() {
        let r = blockade_radius(&RydbergConfig::default()).unwrap();
        assert!((r - 15.5).abs() < 1e-9);
    }

    #[test]
    fn identity_and_exponents() {
        assert!((blockade_radius_raw(1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let r0 = blockade_radius_raw(3.0, 2.0, 5.0).unwrap();
        let r8 = blockade_radius_raw(3.0, 2.0, 40.0).unwrap();
        assert!((r8 / r0 - 0.5).abs() < 1e-12);
        assert!(blockade_radius_raw(0.0, 1.0, 1.0).is_err());
        assert!(blockade_radius_raw(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn level_rescaling_follows_seven_thirds() {
        let cfg = RydbergConfig::default();
        let r89 = blockade_radius(&cfg.at_level(89)).unwrap();
        let expected = 15.5 * (89.0f64 / 103.0).powf(7.0 / 3.0);
        assert!((r89 - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_mu_is_pure_with_baseline_g2() {
        let m = rydberg_models(&RydbergConfig::default().with_mu(0.0)).unwrap();
        assert_eq!(m.purity, 1.0);
        assert_eq!(m.g2, 0.09);
        assert_eq!(m.gen_prob, 0.0);
        assert!(rydberg_models(&RydbergConfig::default().with_mu(-1.0)).is_err());
    }

    #[test]
    fn generation_saturates_then_drops() {
        let cfg = RydbergConfig::default();
        let g = |mu: f64| rydberg_models(&cfg.with_mu(mu)).unwrap().gen_prob;
        assert!((g(0.5) - 0.14).abs() < 1e-12);
        assert!(g(0.2) < g(0.5) && g(0.5) < g(1.0));
        assert!(g(4.0) < g(1.0));
    }

    #[test]
    fn exponential_law_is_monotone() {
        let cfg = RydbergConfig {
            purity_law: PurityLaw::Exponential,
            purity_weight: 0.3,
            ..RydbergConfig::default()
        };
        let p = |mu: f64| rydberg_models(&cfg.with_mu(mu)).unwrap().purity;
        assert!(p(0.0) == 1.0 && p(1.0) > p(2.0));
    }

    #[test]
    fn impurity_lowers_overlap_with_partner() {
        let base =
            PhotonStateMixture::pure(make_waveform(60.0, 180.0, TimeGrid::default()).unwrap());
        let cfg = RydbergConfig {
            purity_weight: 0.5,
            ..RydbergConfig::default()
        };
        let s0 = rydberg_state(&base, &cfg.with_mu(0.0)).unwrap();
        let s2 = rydberg_state(&base, &cfg.with_mu(2.0)).unwrap();
        let target = rydberg_models(&cfg.with_mu(2.0)).unwrap().purity;
        assert!((s2.purity() - target).abs() < 1e-9);
        assert!(state_overlap(&base, &s2).unwrap() < state_overlap(&base, &s0).unwrap());
    }
}
