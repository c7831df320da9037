use crate::analysis::gaussian_fit;
use crate::error::{check_positive, Error, Result};
use crate::stats::Measured;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

/// Rydberg level shift per electric field change, MHz per (mV/cm). Documentation only.
pub const STARK_SENSITIVITY_MHZ_PER_MV_CM: f64 = 0.1;

/// Slow wandering of the Rydberg node's emission frequency relative to node 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftModel {
    pub enabled: bool,
    /// Deterministic drift of the coupling laser, MHz per hour.
    pub coupling_drift_rate_mhz_per_h: f64,
    /// Random walk of the resonance, MHz per √hour.
    pub resonance_walk_sigma_mhz_per_sqrt_h: f64,
    /// Resonance shift when the node is triggered below `trigger_rate_threshold_hz`.
    pub trigger_rate_shift_mhz: f64,
    pub trigger_rate_threshold_hz: f64,
    /// Coupling laser switched on ahead of each interrogation; removes the
    /// trigger-rate shift.
    pub prewarm: bool,
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel {
            enabled: true,
            coupling_drift_rate_mhz_per_h: 0.2,
            resonance_walk_sigma_mhz_per_sqrt_h: 0.1,
            trigger_rate_shift_mhz: 0.5,
            trigger_rate_threshold_hz: 100.0,
            prewarm: true,
        }
    }
}

impl DriftModel {
    pub fn disabled() -> Self {
        DriftModel {
            enabled: false,
            ..DriftModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            (
                "resonance_walk_sigma_mhz_per_sqrt_h",
                self.resonance_walk_sigma_mhz_per_sqrt_h,
            ),
            ("trigger_rate_shift_mhz", self.trigger_rate_shift_mhz.abs()),
            ("trigger_rate_threshold_hz", self.trigger_rate_threshold_hz),
            (
                "coupling_drift_rate_mhz_per_h",
                self.coupling_drift_rate_mhz_per_h.abs(),
            ),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Extra detuning at a given herald rate.
    pub fn trigger_shift(&self, herald_rate_hz: f64) -> f64 {
        if self.enabled && !self.prewarm && herald_rate_hz < self.trigger_rate_threshold_hz {
            self.trigger_rate_shift_mhz
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationState {
    /// Node 2 emission frequency offset, MHz.
    pub current_detuning: f64,
    pub last_calibration_time: f64,
    /// `(time s, applied correction MHz)`
    pub corrections: Vec<(f64, f64)>,
}

/// Advances the detuning by `dt_s` seconds of drift.
pub fn drift_step<R: Rng + ?Sized>(
    drift: &DriftModel,
    state: &CalibrationState,
    dt_s: f64,
    rng: &mut R,
) -> Result<CalibrationState> {
    check_positive("dt", dt_s)?;
    let mut next = state.clone();
    if !drift.enabled {
        return Ok(next);
    }
    let hours = dt_s / 3600.0;
    next.current_detuning += drift.coupling_drift_rate_mhz_per_h * hours;
    let sigma = drift.resonance_walk_sigma_mhz_per_sqrt_h * hours.sqrt();
    if sigma > 0.0 {
        next.current_detuning += Normal::new(0.0, sigma)
            .map_err(|e| Error::invalid("resonance_walk_sigma", e.to_string()))?
            .sample(rng);
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub enabled: bool,
    /// Data-taking time between calibrations, minutes.
    pub period_min: f64,
    /// Length of each calibration interlude, minutes.
    pub duration_min: f64,
    /// Full width of the frequency scan, MHz.
    pub scan_range_mhz: f64,
    pub n_points: usize,
    /// Gaussian σ of the storage-efficiency resonance, MHz.
    pub resonance_width_mhz: f64,
    /// Mean counts at the top of the resonance.
    pub counts_per_point: f64,
    /// Flat background, as a fraction of `counts_per_point`.
    pub background_fraction: f64,
    /// Use expected counts instead of Poisson draws.
    pub noiseless: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            enabled: true,
            period_min: 30.0,
            duration_min: 10.0,
            scan_range_mhz: 6.0,
            n_points: 21,
            resonance_width_mhz: 1.0,
            counts_per_point: 100.0,
            background_fraction: 0.05,
            noiseless: false,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("period_min", self.period_min)?;
        check_positive("duration_min", self.duration_min)?;
        check_positive("resonance_width_mhz", self.resonance_width_mhz)?;
        check_positive("counts_per_point", self.counts_per_point)?;
        if !(self.background_fraction >= 0.0 && self.background_fraction.is_finite()) {
            return Err(Error::invalid("background_fraction", "must be >= 0"));
        }
        if self.scan_range_mhz <= self.resonance_width_mhz {
            return Err(Error::invalid(
                "scan_range_mhz",
                format!("{} must exceed the resonance width", self.scan_range_mhz),
            ));
        }
        if self.n_points < 5 {
            return Err(Error::invalid("n_points", format!("{} < 5", self.n_points)));
        }
        Ok(())
    }
}

/// Storage-efficiency scan around the current frequency setting. The fitted
/// resonance position is subtracted from the detuning and logged at `time_s`.
///
/// On a failed fit the error is returned and the caller keeps its state.
pub fn calibration_scan<R: Rng + ?Sized>(
    state: &CalibrationState,
    cfg: &CalibrationConfig,
    time_s: f64,
    rng: &mut R,
) -> Result<(Measured, CalibrationState)> {
    cfg.validate()?;
    let truth = state.current_detuning;
    let n = cfg.n_points;
    let points: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let nu = -0.5 * cfg.scan_range_mhz + cfg.scan_range_mhz * k as f64 / (n - 1) as f64;
            let d = (nu - truth) / cfg.resonance_width_mhz;
            let mean = cfg.counts_per_point * (cfg.background_fraction + (-0.5 * d * d).exp());
            let y = if cfg.noiseless {
                mean
            } else {
                Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0)
            };
            (nu, y)
        })
        .collect();
    let sigmas: Option<Vec<f64>> =
        (!cfg.noiseless).then(|| points.iter().map(|&(_, y)| y.max(1.0).sqrt()).collect());
    let fit = gaussian_fit(&points, sigmas.as_deref())?;
    if fit.amplitude.value <= 0.0 {
        return Err(Error::FitFailed("resonance fitted as a dip".into()));
    }
    let center = fit.center;
    let mut next = state.clone();
    next.current_detuning -= center.value;
    next.last_calibration_time = time_s;
    next.corrections.push((time_s, -center.value));
    Ok((center, next))
}
