//! Temporal photon modes on a discrete time grid.
//!
//! A [`TemporalMode`] is a unit-norm complex amplitude sampled at the midpoints
//! of a [`TimeGrid`], plus a frequency offset. The offset is never folded into
//! the stored amplitudes: it is applied as the phase `exp(i 2π ν t)` whenever
//! two modes are compared, so detuning sweeps reuse one envelope.
//!
//! Units: time in ns, frequency in MHz.

mod density;
mod mixture;

pub(crate) use density::sample_pair;
pub use density::{joint_coincidence_density, Density2D};
pub use mixture::{
    jitter_for_indistinguishability, state_overlap, windowed_indistinguishability,
    PhotonStateMixture,
};

use crate::error::{check_positive, Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Largest fraction of a waveform's intensity allowed to fall outside the grid.
pub const MAX_TRUNCATION: f64 = 0.02;

/// Converts MHz·ns into cycles.
const MHZ_NS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n_bins: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_bins: usize) -> Result<Self> {
        check_positive("dt", dt)?;
        if !t_start.is_finite() {
            return Err(Error::invalid("t_start", "must be finite"));
        }
        if n_bins < 2 {
            return Err(Error::invalid("n_bins", format!("{n_bins} < 2")));
        }
        Ok(TimeGrid {
            t_start,
            dt,
            n_bins,
        })
    }

    /// Grid starting at zero spanning `span` ns in bins of `dt` ns.
    pub fn spanning(span: f64, dt: f64) -> Result<Self> {
        check_positive("span", span)?;
        TimeGrid::new(0.0, dt, (span / dt).round() as usize)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn span(&self) -> f64 {
        self.dt * self.n_bins as f64
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.span()
    }

    /// Midpoint of bin `k`.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + (k as f64 + 0.5) * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_bins).map(move |k| self.time(k))
    }

    pub fn bin_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t_start) / self.dt).floor();
        (k >= 0.0 && (k as usize) < self.n_bins).then_some(k as usize)
    }

    /// Whether a window of `length` ns starting at the grid origin fits on the grid.
    pub fn covers(&self, length: f64) -> bool {
        length <= self.span() + 1e-9
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            t_start: 0.0,
            dt: 2.0,
            n_bins: 400,
        }
    }
}

/// Shared, immutable photon envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    grid: TimeGrid,
    amplitude: Vec<Complex64>,
    /// Cumulative intensity at the right edge of each bin; the last entry is 1.
    cdf: Vec<f64>,
}

impl Envelope {
    fn new(grid: TimeGrid, mut amplitude: Vec<Complex64>) -> Result<Self> {
        if amplitude.len() != grid.n_bins() {
            return Err(Error::invalid(
                "amplitude",
                format!("{} samples for {} bins", amplitude.len(), grid.n_bins()),
            ));
        }
        if amplitude
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::invalid("amplitude", "non-finite sample"));
        }
        let norm: f64 = amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dt();
        if norm <= 0.0 {
            return Err(Error::invalid("amplitude", "zero norm"));
        }
        let scale = norm.sqrt().recip();
        amplitude.iter_mut().for_each(|a| *a *= scale);

        let mut acc = 0.0;
        let mut cdf: Vec<f64> = amplitude
            .iter()
            .map(|a| {
                acc += a.norm_sqr() * grid.dt();
                acc
            })
            .collect();
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Envelope {
            grid,
            amplitude,
            cdf,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMode {
    envelope: Arc<Envelope>,
    detuning_mhz: f64,
}

impl TemporalMode {
    /// Builds a mode from raw samples, normalising to unit norm.
    pub fn from_amplitudes(grid: TimeGrid, amplitude: Vec<Complex64>) -> Result<Self> {
        Ok(TemporalMode {
            envelope: Arc::new(Envelope::new(grid, amplitude)?),
            detuning_mhz: 0.0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.envelope.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.envelope.amplitude
    }

    pub fn detuning_mhz(&self) -> f64 {
        self.detuning_mhz
    }

    pub fn with_detuning(&self, detuning_mhz: f64) -> Self {
        TemporalMode {
            envelope: Arc::clone(&self.envelope),
            detuning_mhz,
        }
    }

    pub fn shifted(&self, delta_mhz: f64) -> Self {
        self.with_detuning(self.detuning_mhz + delta_mhz)
    }

    pub fn shares_envelope(&self, other: &TemporalMode) -> bool {
        Arc::ptr_eq(&self.envelope, &other.envelope)
    }

    pub fn norm(&self) -> f64 {
        self.intensities().sum::<f64>() * self.grid().dt()
    }

    pub fn intensities(&self) -> impl Iterator<Item = f64> + '_ {
        self.envelope.amplitude.iter().map(|a| a.norm_sqr())
    }

    /// Fraction of the intensity inside `[t_lo, t_hi)`, resolved to whole bins.
    pub fn mass_between(&self, t_lo: f64, t_hi: f64) -> f64 {
        let g = self.grid();
        (0..g.n_bins())
            .filter(|&k| {
                let t = g.time(k);
                t >= t_lo && t < t_hi
            })
            .map(|k| self.envelope.amplitude[k].norm_sqr())
            .sum::<f64>()
            * g.dt()
    }

    /// Amplitude including the detuning phase.
    pub fn phased_amplitudes(&self) -> Vec<Complex64> {
        let g = *self.grid();
        if self.detuning_mhz == 0.0 {
            return self.envelope.amplitude.clone();
        }
        self.envelope
            .amplitude
            .iter()
            .enumerate()
            .map(|(k, a)| a * Complex64::cis(2.0 * PI * self.detuning_mhz * g.time(k) * MHZ_NS))
            .collect()
    }

    /// Draws a detection time from the intensity profile, uniform inside the bin.
    pub(crate) fn sample_time(&self, u_bin: f64, u_within: f64) -> f64 {
        let cdf = &self.envelope.cdf;
        let k = cdf.partition_point(|&c| c <= u_bin).min(cdf.len() - 1);
        let g = self.grid();
        g.t_start() + (k as f64 + u_within) * g.dt()
    }
}

/// Unnormalised intensity of the sine-squared rise / exponential decay pulse.
fn pulse_intensity(t: f64, rise: f64, decay: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else if t < rise {
        (PI * t / (2.0 * rise)).sin().powi(2)
    } else {
        (-(t - rise) / decay).exp()
    }
}

/// Integral of [`pulse_intensity`] from 0 to `t`.
fn pulse_cumulative(t: f64, rise: f64, decay: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= rise {
        t / 2.0 - rise / (2.0 * PI) * (PI * t / rise).sin()
    } else {
        rise / 2.0 + decay * (1.0 - (-(t - rise) / decay).exp())
    }
}

/// Photon waveform with a sine-squared leading edge of `rise_ns`, peaking at
/// `t = rise_ns`, followed by an exponential intensity decay with 1/e time
/// `decay_ns`. The pulse starts at `t = 0`.
///
/// The mode is normalised on the grid. Fails if more than [`MAX_TRUNCATION`] of
/// the continuous pulse intensity falls outside the grid.
pub fn make_waveform(rise_ns: f64, decay_ns: f64, grid: TimeGrid) -> Result<TemporalMode> {
    if !(rise_ns >= 0.0 && rise_ns.is_finite()) {
        return Err(Error::invalid(
            "rise_time",
            format!("{rise_ns} must be >= 0"),
        ));
    }
    check_positive("decay_tau", decay_ns)?;
    let total = rise_ns / 2.0 + decay_ns;
    let inside = pulse_cumulative(grid.t_end(), rise_ns, decay_ns)
        - pulse_cumulative(grid.t_start(), rise_ns, decay_ns);
    let lost = 1.0 - inside / total;
    if lost > MAX_TRUNCATION {
        return Err(Error::WaveformTruncated { lost });
    }
    let amplitude = grid
        .times()
        .map(|t| Complex64::new(pulse_intensity(t, rise_ns, decay_ns).sqrt(), 0.0))
        .collect();
    TemporalMode::from_amplitudes(grid, amplitude)
}

/// Inner product `⟨a|b⟩` including both detuning phases.
pub fn mode_overlap(a: &TemporalMode, b: &TemporalMode) -> Result<Complex64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(overlap_unchecked(a, b))
}

/// Amplitudes of `b` carrying only the detuning relative to `a`. Two-photon
/// densities depend on the relative detuning alone, so `a` can stay unphased.
pub(crate) fn relative_phased(a: &TemporalMode, b: &TemporalMode) -> Vec<Complex64> {
    let g = a.grid();
    let dnu = b.detuning_mhz - a.detuning_mhz;
    if dnu == 0.0 {
        return b.amplitude().to_vec();
    }
    let w = 2.0 * PI * dnu * MHZ_NS;
    let step = Complex64::cis(w * g.dt());
    let mut phase = Complex64::cis(w * g.time(0));
    b.amplitude()
        .iter()
        .map(|y| {
            let v = y * phase;
            phase *= step;
            v
        })
        .collect()
}

pub(crate) fn overlap_unchecked(a: &TemporalMode, b: &TemporalMode) -> Complex64 {
    let g = a.grid();
    let dnu = b.detuning_mhz - a.detuning_mhz;
    let aa = a.amplitude();
    let bb = b.amplitude();
    let sum: Complex64 = if dnu == 0.0 {
        aa.iter().zip(bb).map(|(x, y)| x.conj() * y).sum()
    } else {
        let w = 2.0 * PI * dnu * MHZ_NS;
        let step = Complex64::cis(w * g.dt());
        let mut phase = Complex64::cis(w * g.time(0));
        aa.iter()
            .zip(bb)
            .map(|(x, y)| {
                let term = x.conj() * y * phase;
                phase *= step;
                term
            })
            .sum()
    };
    sum * g.dt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_wave() -> TemporalMode {
        make_waveform(60.0, 180.0, TimeGrid::default()).unwrap()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn waveform_is_unit_norm_and_peaks_at_rise() {
        let m = default_wave();
        assert!((m.norm() - 1.0).abs() < 1e-12);
        let (kmax, _) =
            m.intensities()
                .enumerate()
                .fold((0, 0.0), |acc, (k, i)| if i > acc.1 { (k, i) } else { acc });
        assert!((m.grid().time(kmax) - 60.0).abs() <= m.grid().dt());
    }

    #[test]
    fn intensity_falls_to_one_over_e_after_decay_time() {
        let m = default_wave();
        let g = *m.grid();
        let peak_bin = g.bin_of(60.0).unwrap();
        let peak = m
            .intensities()
            .nth(peak_bin)
            .unwrap()
            .max(m.intensities().nth(peak_bin - 1).unwrap());
        let target = peak / std::f64::consts::E;
        let crossing = m
            .intensities()
            .enumerate()
            .skip(peak_bin)
            .find(|&(_, i)| i <= target)
            .map(|(k, _)| g.time(k))
            .unwrap();
        assert!((crossing - 240.0).abs() <= g.dt(), "crossing at {crossing}");
    }

    #[test]
    fn pure_exponential_without_rise() {
        let m = make_waveform(0.0, 180.0, TimeGrid::default()).unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-6);
        let first: Vec<f64> = m.intensities().take(3).collect();
        assert!(first[0] > first[1] && first[1] > first[2]);
    }

    #[test]
    fn short_grid_is_rejected() {
        let g = TimeGrid::spanning(300.0, 2.0).unwrap();
        match make_waveform(60.0, 180.0, g) {
            Err(Error::WaveformTruncated { lost }) => assert!(lost > 0.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn waveform_validates_inputs() {
        assert!(make_waveform(-1.0, 180.0, TimeGrid::default()).is_err());
        assert!(make_waveform(60.0, 0.0, TimeGrid::default()).is_err());
    }

    #[test]
    fn self_overlap_is_one() {
        let m = default_wave();
        let o = mode_overlap(&m, &m).unwrap();
        assert!((o.re - 1.0).abs() < 1e-9 && o.im.abs() < 1e-12);
        // a common detuning does not change the overlap
        let d = m.with_detuning(3.0);
        assert!((mode_overlap(&d, &d).unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mismatched_grids_error() {
        let a = default_wave();
        let b = make_waveform(60.0, 180.0, TimeGrid::new(0.0, 1.0, 800).unwrap()).unwrap();
        assert!(matches!(mode_overlap(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn disjoint_modes_are_orthogonal() {
        let g = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        let a: Vec<Complex64> = g
            .times()
            .map(|t| Complex64::new(pulse_intensity(t, 0.0, 50.0).sqrt(), 0.0))
            .collect();
        let b: Vec<Complex64> = g
            .times()
            .map(|t| Complex64::new(pulse_intensity(t - 2000.0, 0.0, 50.0).sqrt(), 0.0))
            .collect();
        let a = TemporalMode::from_amplitudes(g, a).unwrap();
        let b = TemporalMode::from_amplitudes(g, b).unwrap();
        assert!(mode_overlap(&a, &b).unwrap().norm() < 1e-3);
    }

    #[test]
    fn sample_time_follows_cdf() {
        let m = default_wave();
        assert_eq!(m.sample_time(0.0, 0.0), 0.0);
        let last = m.sample_time(0.999_999_999_9, 0.5);
        assert!(last < m.grid().t_end());
    }
}
