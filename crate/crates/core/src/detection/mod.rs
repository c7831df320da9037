//! Beamsplitter interference, detector model and closed-form coincidence
//! expressions.

mod closed_form;

pub use closed_form::{
    bunching_probability, closed_form_g2, expected_coincidence_prob, visibility_from_eta,
    ClosedFormG2,
};

use crate::error::{check_probability, Error, Result};
use crate::photonics::{
    overlap_unchecked, relative_phased, sample_pair, PhotonStateMixture, TemporalMode,
};
use crate::sources::TrialEmission;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub efficiency_a: f64,
    pub efficiency_b: f64,
    /// Dark count rate per detector, Hz.
    pub dark_rate_hz: f64,
    pub dead_time_ns: f64,
    /// Span of each trial over which dark counts are drawn, ns.
    pub gate_ns: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            efficiency_a: 0.5,
            efficiency_b: 0.5,
            dark_rate_hz: 0.0,
            dead_time_ns: 0.0,
            gate_ns: 5400.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("efficiency_a", self.efficiency_a)?;
        check_probability("efficiency_b", self.efficiency_b)?;
        for (name, v) in [
            ("dark_rate_hz", self.dark_rate_hz),
            ("dead_time_ns", self.dead_time_ns),
            ("gate_ns", self.gate_ns),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Both efficiencies multiplied by `k`.
    pub fn scaled(&self, k: f64) -> DetectorConfig {
        DetectorConfig {
            efficiency_a: self.efficiency_a * k,
            efficiency_b: self.efficiency_b * k,
            ..self.clone()
        }
    }

    fn efficiency(&self, port: Port) -> f64 {
        match port {
            Port::A => self.efficiency_a,
            Port::B => self.efficiency_b,
        }
    }
}

/// Beamsplitter output port, monitored by detector 2a or 2b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    A,
    B,
}

impl Port {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Port {
        if rng.random::<bool>() {
            Port::A
        } else {
            Port::B
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub port: Port,
    /// ns from the start of the trial.
    pub time_ns: f64,
}

/// Clicks registered in one trial, ordered by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HomOutcome {
    pub detections: Vec<Detection>,
}

impl HomOutcome {
    pub fn clear(&mut self) {
        self.detections.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn has_coincidence(&self) -> bool {
        let a = self.detections.iter().any(|d| d.port == Port::A);
        let b = self.detections.iter().any(|d| d.port == Port::B);
        a && b
    }
}

/// Photon at a beamsplitter output before detection.
#[derive(Debug, Clone, Copy)]
struct OutputPhoton {
    port: Port,
    time_ns: f64,
}

/// Samples the detector clicks of one trial.
///
/// Two single photons that start at the same time interfere according to the
/// overlap of the component modes drawn from `state1` and `state2`; photons that
/// start at least one grid span apart are independent. Any other separation is
/// rejected. Pairs from a single source, and events with three or more
/// photons, are routed photon by photon.
pub fn sample_hom_trial<R: Rng + ?Sized>(
    emis1: &TrialEmission,
    emis2: &TrialEmission,
    state1: &PhotonStateMixture,
    state2: &PhotonStateMixture,
    det: &DetectorConfig,
    rng: &mut R,
) -> Result<HomOutcome> {
    let mut out = HomOutcome::default();
    sample_hom_trial_into(emis1, emis2, state1, state2, det, rng, &mut out)?;
    Ok(out)
}

/// [`sample_hom_trial`] writing into a reusable outcome buffer.
#[allow(clippy::too_many_arguments)]
pub fn sample_hom_trial_into<R: Rng + ?Sized>(
    emis1: &TrialEmission,
    emis2: &TrialEmission,
    state1: &PhotonStateMixture,
    state2: &PhotonStateMixture,
    det: &DetectorConfig,
    rng: &mut R,
    out: &mut HomOutcome,
) -> Result<()> {
    out.clear();
    for e in [emis1, emis2] {
        if e.photons > 2 {
            return Err(Error::TooManyPhotons(e.photons));
        }
    }
    let mut photons: [Option<OutputPhoton>; 4] = [None; 4];
    let mut n = 0;
    let mut push = |p: OutputPhoton| {
        photons[n] = Some(p);
        n += 1;
    };

    let both_single = emis1.photons == 1 && emis2.photons == 1;
    let offset = emis2.emission_time - emis1.emission_time;
    let span = state1.grid().span();
    if emis1.photons > 0 && emis2.photons > 0 && offset != 0.0 && offset.abs() < span {
        return Err(Error::PartialOverlap { offset_ns: offset });
    }

    if both_single && offset == 0.0 {
        let m1 = state1.sample_component(rng.random());
        let m2 = state2.sample_component(rng.random());
        let (pa, pb, ta, tb) = interfere(m1, m2, rng);
        let t0 = emis1.emission_time;
        push(OutputPhoton {
            port: pa,
            time_ns: t0 + ta,
        });
        push(OutputPhoton {
            port: pb,
            time_ns: t0 + tb,
        });
    } else {
        for (e, state) in [(emis1, state1), (emis2, state2)] {
            if e.photons == 0 {
                continue;
            }
            let mode = state.sample_component(rng.random());
            for _ in 0..e.photons {
                let port = Port::random(rng);
                let t = mode.sample_time(rng.random(), rng.random());
                push(OutputPhoton {
                    port,
                    time_ns: e.emission_time + t,
                });
            }
        }
    }

    for p in photons.iter().take(n).flatten() {
        // one draw per photon regardless of efficiency keeps matched-seed runs aligned
        let u: f64 = rng.random();
        if u < det.efficiency(p.port) {
            out.detections.push(Detection {
                port: p.port,
                time_ns: p.time_ns,
            });
        }
    }
    if det.dark_rate_hz > 0.0 && det.gate_ns > 0.0 {
        let mean = det.dark_rate_hz * det.gate_ns * 1e-9;
        let poisson =
            Poisson::new(mean).map_err(|e| Error::invalid("dark_rate_hz", e.to_string()))?;
        for port in [Port::A, Port::B] {
            let k = poisson.sample(rng) as usize;
            for _ in 0..k {
                out.detections.push(Detection {
                    port,
                    time_ns: rng.random::<f64>() * det.gate_ns,
                });
            }
        }
    }
    out.detections
        .sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));
    if det.dead_time_ns > 0.0 {
        apply_dead_time(&mut out.detections, det.dead_time_ns);
    }
    Ok(())
}

/// Two overlapping single photons at the beamsplitter. Returns the ports and
/// mode-relative times of both photons.
fn interfere<R: Rng + ?Sized>(
    m1: &TemporalMode,
    m2: &TemporalMode,
    rng: &mut R,
) -> (Port, Port, f64, f64) {
    let o = overlap_unchecked(m1, m2);
    let p_split = 0.5 * (1.0 - o.norm_sqr());
    let split = rng.random::<f64>() < p_split;
    let (a, b) = (m1.amplitude(), relative_phased(m1, m2));
    if split {
        let (ta, tb) = sample_pair(a, &b, o, -1.0, m1.grid(), rng);
        (Port::A, Port::B, ta, tb)
    } else {
        let (t1, t2) = sample_pair(a, &b, o, 1.0, m1.grid(), rng);
        let port = Port::random(rng);
        (port, port, t1, t2)
    }
}

/// Removes clicks that follow an earlier click on the same port by less than
/// the dead time. `detections` must be time-ordered.
fn apply_dead_time(detections: &mut Vec<Detection>, dead_time: f64) {
    let mut last_a = f64::NEG_INFINITY;
    let mut last_b = f64::NEG_INFINITY;
    detections.retain(|d| {
        let last = match d.port {
            Port::A => &mut last_a,
            Port::B => &mut last_b,
        };
        if d.time_ns - *last < dead_time {
            false
        } else {
            *last = d.time_ns;
            true
        }
    });
}
