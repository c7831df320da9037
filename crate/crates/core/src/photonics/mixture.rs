use super::{overlap_unchecked, TemporalMode, TimeGrid};
use crate::error::{Error, Result};

/// Weight tolerance when checking that a mixture is normalised.
const WEIGHT_TOL: f64 = 1e-9;

/// Incoherent mixture of temporal modes, `ρ = Σ w_i |m_i⟩⟨m_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStateMixture {
    components: Vec<(f64, TemporalMode)>,
    /// Cumulative weights for component sampling.
    cumulative: Vec<f64>,
}

impl PhotonStateMixture {
    pub fn new(components: Vec<(f64, TemporalMode)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::invalid("components", "empty mixture"));
        };
        let grid = *first.grid();
        if components.iter().any(|(_, m)| *m.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        if components
            .iter()
            .any(|(w, _)| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::invalid("weight", "weights must be finite and >= 0"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid("weight", format!("weights sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|(w, _)| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(PhotonStateMixture {
            components,
            cumulative,
        })
    }

    pub fn pure(mode: TemporalMode) -> Self {
        PhotonStateMixture {
            components: vec![(1.0, mode)],
            cumulative: vec![1.0],
        }
    }

    /// Copies of `mode` with detunings drawn from a Gaussian law of standard
    /// deviation `sigma_mhz`, discretised on `nodes` equally spaced points
    /// covering ±3σ around the mode's own detuning.
    pub fn gaussian_jitter(mode: &TemporalMode, sigma_mhz: f64, nodes: usize) -> Result<Self> {
        if !(sigma_mhz >= 0.0 && sigma_mhz.is_finite()) {
            return Err(Error::invalid("sigma", format!("{sigma_mhz} must be >= 0")));
        }
        if nodes == 0 {
            return Err(Error::invalid("nodes", "need at least one node"));
        }
        if sigma_mhz == 0.0 || nodes == 1 {
            return Ok(PhotonStateMixture::pure(mode.clone()));
        }
        let z: Vec<f64> = (0..nodes)
            .map(|j| -3.0 + 6.0 * j as f64 / (nodes - 1) as f64)
            .collect();
        let raw: Vec<f64> = z.iter().map(|z| (-0.5 * z * z).exp()).collect();
        let norm: f64 = raw.iter().sum();
        PhotonStateMixture::new(
            z.iter()
                .zip(&raw)
                .map(|(z, w)| (w / norm, mode.shifted(sigma_mhz * z)))
                .collect(),
        )
    }

    pub fn components(&self) -> &[(f64, TemporalMode)] {
        &self.components
    }

    pub fn grid(&self) -> &TimeGrid {
        self.components[0].1.grid()
    }

    /// Every component shifted by `delta_mhz`.
    pub fn shifted(&self, delta_mhz: f64) -> Self {
        PhotonStateMixture {
            components: self
                .components
                .iter()
                .map(|(w, m)| (*w, m.shifted(delta_mhz)))
                .collect(),
            cumulative: self.cumulative.clone(),
        }
    }

    /// `(1 − ε)·self + ε·other`.
    pub fn mixed_with(&self, other: &PhotonStateMixture, epsilon: f64) -> Result<Self> {
        crate::error::check_probability("epsilon", epsilon)?;
        let mut components: Vec<_> = self
            .components
            .iter()
            .map(|(w, m)| (w * (1.0 - epsilon), m.clone()))
            .collect();
        components.extend(
            other
                .components
                .iter()
                .map(|(w, m)| (w * epsilon, m.clone())),
        );
        components.retain(|(w, _)| *w > 0.0);
        PhotonStateMixture::new(components)
    }

    pub fn purity(&self) -> f64 {
        overlap_sum(self, self)
    }

    /// Picks a component mode given a uniform draw in [0, 1).
    pub fn sample_component(&self, u: f64) -> &TemporalMode {
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1);
        &self.components[k].1
    }
}

fn overlap_sum(a: &PhotonStateMixture, b: &PhotonStateMixture) -> f64 {
    a.components
        .iter()
        .flat_map(|(w, m)| {
            b.components
                .iter()
                .map(move |(v, n)| w * v * overlap_unchecked(m, n).norm_sqr())
        })
        .sum()
}

/// `Tr(ρ1 ρ2) = Σ_ij w_i v_j |⟨m_i|n_j⟩|²`.
pub fn state_overlap(rho1: &PhotonStateMixture, rho2: &PhotonStateMixture) -> Result<f64> {
    if rho1.grid() != rho2.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(overlap_sum(rho1, rho2).clamp(0.0, 1.0))
}

/// Indistinguishability seen through a detection window `[t_lo, t_hi)`:
/// the windowed trace overlap divided by the product of the windowed
/// photon-count shares. Equals [`state_overlap`] when the window covers the grid.
pub fn windowed_indistinguishability(
    rho1: &PhotonStateMixture,
    rho2: &PhotonStateMixture,
    t_lo: f64,
    t_hi: f64,
) -> Result<f64> {
    if rho1.grid() != rho2.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *rho1.grid();
    let inside: Vec<bool> = grid.times().map(|t| t >= t_lo && t < t_hi).collect();
    let restrict = |m: &TemporalMode| -> TemporalMode {
        let amps = m
            .amplitude()
            .iter()
            .zip(&inside)
            .map(|(a, &keep)| {
                if keep {
                    *a
                } else {
                    num_complex::Complex64::new(0.0, 0.0)
                }
            })
            .collect::<Vec<_>>();
        TemporalMode {
            envelope: std::sync::Arc::new(super::Envelope {
                grid,
                amplitude: amps,
                cdf: Vec::new(),
            }),
            detuning_mhz: m.detuning_mhz(),
        }
    };
    let share = |rho: &PhotonStateMixture| -> f64 {
        rho.components
            .iter()
            .map(|(w, m)| w * m.mass_between(t_lo, t_hi))
            .sum()
    };
    let (s1, s2) = (share(rho1), share(rho2));
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(Error::invalid(
            "window",
            "no photon intensity inside the window",
        ));
    }
    let mut total = 0.0;
    for (w, m) in &rho1.components {
        let m = restrict(m);
        for (v, n) in &rho2.components {
            let n = restrict(n);
            total += w * v * overlap_unchecked(&m, &n).norm_sqr();
        }
    }
    Ok(total / (s1 * s2))
}

/// Gaussian detuning spread, applied to both of two otherwise identical
/// photons, that brings their overlap down to `target_eta`.
pub fn jitter_for_indistinguishability(
    mode: &TemporalMode,
    target_eta: f64,
    nodes: usize,
) -> Result<f64> {
    if !(target_eta > 0.0 && target_eta <= 1.0) {
        return Err(Error::invalid(
            "target_eta",
            format!("{target_eta} is not in (0, 1]"),
        ));
    }
    let eta = |sigma: f64| -> Result<f64> {
        let r = PhotonStateMixture::gaussian_jitter(mode, sigma, nodes)?;
        state_overlap(&r, &r)
    };
    let (mut lo, mut hi) = (0.0, 0.05);
    while eta(hi)? > target_eta {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::invalid(
                "target_eta",
                "not reachable by detuning jitter",
            ));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eta(mid)? > target_eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::super::make_waveform;
    use super::*;

    fn wave() -> TemporalMode {
        make_waveform(60.0, 180.0, TimeGrid::default()).unwrap()
    }

    #[test]
    fn weights_are_validated() {
        let m = wave();
        assert!(PhotonStateMixture::new(vec![(0.7, m.clone()), (0.2, m.clone())]).is_err());
        assert!(PhotonStateMixture::new(vec![(-0.1, m.clone()), (1.1, m.clone())]).is_err());
        assert!(PhotonStateMixture::new(vec![]).is_err());
    }

    #[test]
    fn pure_state_has_unit_purity() {
        let r = PhotonStateMixture::pure(wave());
        assert!((r.purity() - 1.0).abs() < 1e-9);
        assert!((state_overlap(&r, &r).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn far_detuned_admixture_halves_overlap() {
        let m = wave();
        let pure = PhotonStateMixture::pure(m.clone());
        let mixed = pure
            .mixed_with(&PhotonStateMixture::pure(m.with_detuning(200.0)), 0.5)
            .unwrap();
        assert!((state_overlap(&pure, &mixed).unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn jitter_reduces_purity() {
        let r = PhotonStateMixture::gaussian_jitter(&wave(), 0.5, 15).unwrap();
        assert_eq!(r.components().len(), 15);
        let p = r.purity();
        assert!(p < 1.0 && p > 0.5, "purity {p}");
    }

    #[test]
    fn sample_component_respects_weights() {
        let m = wave();
        let r =
            PhotonStateMixture::new(vec![(0.25, m.clone()), (0.75, m.with_detuning(5.0))]).unwrap();
        assert_eq!(r.sample_component(0.1).detuning_mhz(), 0.0);
        assert_eq!(r.sample_component(0.3).detuning_mhz(), 5.0);
    }

    #[test]
    fn jitter_tuning_hits_target() {
        let m = wave();
        let sigma = jitter_for_indistinguishability(&m, 0.9, 9).unwrap();
        let r = PhotonStateMixture::gaussian_jitter(&m, sigma, 9).unwrap();
        assert!((state_overlap(&r, &r).unwrap() - 0.9).abs() < 1e-9);
        assert!(jitter_for_indistinguishability(&m, 0.0, 9).is_err());
    }

    #[test]
    fn full_window_matches_state_overlap() {
        let a = PhotonStateMixture::gaussian_jitter(&wave(), 0.3, 9).unwrap();
        let b = a.shifted(0.2);
        let full = state_overlap(&a, &b).unwrap();
        let w = windowed_indistinguishability(&a, &b, 0.0, 800.0).unwrap();
        assert!((full - w).abs() < 1e-9);
    }

    #[test]
    fn shorter_window_is_less_sensitive_to_detuning() {
        let a = PhotonStateMixture::pure(wave());
        let b = a.shifted(0.8);
        let full = windowed_indistinguishability(&a, &b, 0.0, 800.0).unwrap();
        let short = windowed_indistinguishability(&a, &b, 0.0, 200.0).unwrap();
        assert!(short > full);
    }
}
