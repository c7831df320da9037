//! The two-node experimental cycle.
//!
//! Node 2 (Rydberg) runs a 1.25 s cycle with 200 ms of interrogation. During
//! that window node 1 (DLCZ) performs 17 cycles of 12 ms, each ending in 4 ms of
//! write attempts every 4 µs. A herald click on SPAD1 starts a 5.4 µs trial:
//! the read photon leaves node 1 after the memory delay and node 2 is
//! triggered to emit either on top of it or well ahead of it.
//!
//! Every trial appears in the record stream as a SPAD1 record at time zero
//! followed by the trial's SPAD2a/SPAD2b clicks. Random draws for trial `i` come
//! from the trial substream `i`, so the fast trial-level path
//! ([`simulate_trials`]) and the full event loop ([`run_experiment`]) agree
//! trial by trial.

mod drift;

pub use drift::{
    calibration_scan, drift_step, CalibrationConfig, CalibrationState, DriftModel,
    STARK_SENSITIVITY_MHZ_PER_MV_CM,
};

use crate::analysis::{Channel, DetectionLog, TimestampRecord, TimestampWriter};
use crate::detection::{sample_hom_trial_into, DetectorConfig, HomOutcome, Port};
use crate::error::{check_positive, Error, Result};
use crate::photonics::PhotonStateMixture;
use crate::rng::{substream, trial_rng, Domain};
use crate::sources::{
    dlcz_number_stats, rydberg_number_stats, rydberg_sample_trial, DlczConfig, NumberStats,
    RydbergConfig, TrialEmission,
};
use crate::stats::Measured;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Seek, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Node 2 photon ahead of node 1 by the distinguishable offset.
    Dist,
    /// Both photons arrive together.
    Indist,
    /// Node 1 alone on the beamsplitter.
    AutocorrN1,
    /// Node 2 alone on the beamsplitter.
    AutocorrN2,
}

impl RunMode {
    pub const ALL: [RunMode; 4] = [
        RunMode::Dist,
        RunMode::Indist,
        RunMode::AutocorrN1,
        RunMode::AutocorrN2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RunMode::Dist => "dist",
            RunMode::Indist => "indist",
            RunMode::AutocorrN1 => "autocorr-n1",
            RunMode::AutocorrN2 => "autocorr-n2",
        }
    }

    pub fn parse(s: &str) -> Option<RunMode> {
        RunMode::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    pub node1_cycle_ms: f64,
    pub node1_interrogation_ms: f64,
    pub write_trial_period_us: f64,
    pub node2_cycle_ms: f64,
    pub node2_interrogation_ms: f64,
    pub cycles_per_interrogation: u32,
    /// Correlation bin of one trial, ns.
    pub trial_bin_ns: f64,
    /// Node 2 photon lead in the distinguishable configuration, ns.
    pub distinguishable_offset_ns: f64,
    /// Node 1 to node 2 trigger delay, ns. Node 2 cannot emit earlier than
    /// this after the herald.
    pub trigger_latency_ns: f64,
    pub mode: RunMode,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            node1_cycle_ms: 12.0,
            node1_interrogation_ms: 4.0,
            write_trial_period_us: 4.0,
            node2_cycle_ms: 1250.0,
            node2_interrogation_ms: 200.0,
            cycles_per_interrogation: 17,
            trial_bin_ns: 5400.0,
            distinguishable_offset_ns: 2600.0,
            trigger_latency_ns: 0.0,
            mode: RunMode::Dist,
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("node1_cycle_ms", self.node1_cycle_ms),
            ("node1_interrogation_ms", self.node1_interrogation_ms),
            ("write_trial_period_us", self.write_trial_period_us),
            ("node2_cycle_ms", self.node2_cycle_ms),
            ("node2_interrogation_ms", self.node2_interrogation_ms),
            ("trial_bin_ns", self.trial_bin_ns),
            ("distinguishable_offset_ns", self.distinguishable_offset_ns),
        ] {
            check_positive(name, v)?;
        }
        if !(self.trigger_latency_ns >= 0.0) {
            return Err(Error::invalid("trigger_latency_ns", "must be >= 0"));
        }
        if self.node1_interrogation_ms > self.node1_cycle_ms {
            return Err(Error::invalid(
                "node1_interrogation_ms",
                "longer than the node 1 cycle",
            ));
        }
        if self.node2_interrogation_ms > self.node2_cycle_ms {
            return Err(Error::invalid(
                "node2_interrogation_ms",
                "longer than the node 2 cycle",
            ));
        }
        let burst = self.cycles_per_interrogation as f64 * self.node1_cycle_ms;
        if (burst / self.node2_interrogation_ms - 1.0).abs() > 0.05 {
            return Err(Error::invalid(
                "cycles_per_interrogation",
                format!(
                    "{} node 1 cycles last {burst} ms, not within 5 % of the {} ms node 2 interrogation",
                    self.cycles_per_interrogation, self.node2_interrogation_ms
                ),
            ));
        }
        let attempts = self.node1_interrogation_ms * 1e3 / self.write_trial_period_us;
        if (attempts - attempts.round()).abs() > 1e-6 {
            return Err(Error::invalid(
                "write_trial_period_us",
                "must divide the node 1 interrogation time",
            ));
        }
        if burst > self.node2_cycle_ms {
            return Err(Error::invalid(
                "cycles_per_interrogation",
                "node 1 burst exceeds the node 2 cycle",
            ));
        }
        Ok(())
    }

    pub fn attempts_per_window(&self) -> u64 {
        (self.node1_interrogation_ms * 1e3 / self.write_trial_period_us).round() as u64
    }

    /// Fraction of wall time spent in node 1 interrogation.
    pub fn duty_cycle(&self) -> f64 {
        self.cycles_per_interrogation as f64 * self.node1_interrogation_ms / self.node2_cycle_ms
    }

    /// Write attempts blocked by one trial, including the heralding attempt.
    fn attempts_per_trial(&self) -> u64 {
        (self.trial_bin_ns / (self.write_trial_period_us * 1e3))
            .ceil()
            .max(1.0) as u64
    }
}

/// Everything needed to simulate trials: sources, emitted states, detector,
/// timing and drift.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub seq: SequenceConfig,
    pub dlcz: DlczConfig,
    pub ryd: RydbergConfig,
    pub det: DetectorConfig,
    pub drift: DriftModel,
    pub calibration: CalibrationConfig,
    /// Node 1 read-photon state.
    pub state1: PhotonStateMixture,
    /// Node 2 photon state at zero drift.
    pub state2: PhotonStateMixture,
    /// Rise plus decay time of the photons, ns.
    pub photon_duration_ns: f64,
    stats1: NumberStats,
    stats2: NumberStats,
}

impl Experiment {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        seq: SequenceConfig,
        dlcz: DlczConfig,
        ryd: RydbergConfig,
        det: DetectorConfig,
        drift: DriftModel,
        calibration: CalibrationConfig,
        state1: PhotonStateMixture,
        state2: PhotonStateMixture,
        photon_duration_ns: f64,
    ) -> Result<Self> {
        seq.validate()?;
        dlcz.validate()?;
        ryd.validate()?;
        det.validate()?;
        drift.validate()?;
        calibration.validate()?;
        check_positive("photon_duration_ns", photon_duration_ns)?;
        if state1.grid() != state2.grid() {
            return Err(Error::GridMismatch);
        }
        let stats1 = dlcz_number_stats(&dlcz)?;
        let stats2 = rydberg_number_stats(&ryd)?;
        let exp = Experiment {
            seq,
            dlcz,
            ryd,
            det,
            drift,
            calibration,
            state1,
            state2,
            photon_duration_ns,
            stats1,
            stats2,
        };
        exp.check_timing()?;
        Ok(exp)
    }

    fn check_timing(&self) -> Result<()> {
        let span = self.state1.grid().span();
        if self.dlcz.memory_delay_ns + span > self.seq.trial_bin_ns {
            return Err(Error::invalid(
                "trial_bin_ns",
                "node 1 photon does not fit inside the trial",
            ));
        }
        if self.seq.mode == RunMode::Dist {
            let offset = self.seq.distinguishable_offset_ns;
            if offset < 5.0 * self.photon_duration_ns || offset < span {
                return Err(Error::invalid(
                    "distinguishable_offset_ns",
                    format!(
                        "{offset} ns is below 5 photon durations ({} ns) or the grid span",
                        5.0 * self.photon_duration_ns
                    ),
                ));
            }
        }
        if self.node2_start_ns() < self.seq.trigger_latency_ns {
            let field = match self.seq.mode {
                RunMode::Dist => "distinguishable_offset_ns",
                _ => "trigger_latency_ns",
            };
            return Err(Error::invalid(
                field,
                format!(
                    "node 2 photon at {} ns would precede its trigger at {} ns",
                    self.node2_start_ns(),
                    self.seq.trigger_latency_ns
                ),
            ));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: RunMode) -> Result<Experiment> {
        let mut e = self.clone();
        e.seq.mode = mode;
        e.check_timing()?;
        Ok(e)
    }

    pub fn stats1(&self) -> &NumberStats {
        &self.stats1
    }

    pub fn stats2(&self) -> &NumberStats {
        &self.stats2
    }

    /// Start of the node 1 photon, ns after the herald.
    pub fn node1_start_ns(&self) -> f64 {
        self.dlcz.memory_delay_ns
    }

    /// Start of the node 2 photon, ns after the herald.
    pub fn node2_start_ns(&self) -> f64 {
        match self.seq.mode {
            RunMode::Dist => self.dlcz.memory_delay_ns - self.seq.distinguishable_offset_ns,
            _ => self.dlcz.memory_delay_ns,
        }
    }

    /// Photon start times that carry counts in this mode.
    pub fn anchors_ns(&self) -> Vec<f64> {
        match self.seq.mode {
            RunMode::Dist => vec![self.node2_start_ns(), self.node1_start_ns()],
            _ => vec![self.node1_start_ns()],
        }
    }

    /// Herald rate during node 1 interrogation, Hz.
    pub fn herald_rate_hz(&self) -> f64 {
        self.dlcz.herald_prob / (self.seq.write_trial_period_us * 1e-6)
    }

    /// Samples heralded trial `trial_index` with node 2 detuned by
    /// `node2_detuning` MHz.
    pub fn sample_trial(
        &self,
        seed: u64,
        trial_index: u64,
        node2_state: &PhotonStateMixture,
        out: &mut HomOutcome,
    ) -> Result<()> {
        let mut rng = trial_rng(seed, trial_index);
        let n1 = self.stats1.sample(&mut rng);
        let e2 = rydberg_sample_trial(&self.stats2, self.node2_start_ns(), &mut rng);
        let mut e1 = TrialEmission {
            heralded: true,
            photons: n1,
            emission_time: self.node1_start_ns(),
        };
        let mut e2 = e2;
        match self.seq.mode {
            RunMode::AutocorrN1 => e2.photons = 0,
            RunMode::AutocorrN2 => e1.photons = 0,
            RunMode::Dist | RunMode::Indist => {}
        }
        sample_hom_trial_into(
            &e1,
            &e2,
            &self.state1,
            node2_state,
            &self.det,
            &mut rng,
            out,
        )
    }

    /// Node 2 state at a given drift detuning, including the trigger-rate shift.
    pub fn node2_state_at(&self, detuning_mhz: f64) -> PhotonStateMixture {
        let shift = detuning_mhz + self.drift.trigger_shift(self.herald_rate_hz());
        if shift == 0.0 {
            self.state2.clone()
        } else {
            self.state2.shifted(shift)
        }
    }
}

/// Simulates `n_trials` consecutive heralded trials starting at `first_trial`,
/// ignoring the cycle timing, with a fixed node 2 detuning.
pub fn simulate_trials(
    exp: &Experiment,
    seed: u64,
    first_trial: u64,
    n_trials: u64,
    node2_detuning_mhz: f64,
) -> Result<DetectionLog> {
    let state2 = exp.node2_state_at(node2_detuning_mhz);
    let mut log = DetectionLog::new();
    let mut out = HomOutcome::default();
    for i in first_trial..first_trial + n_trials {
        exp.sample_trial(seed, i, &state2, &mut out)?;
        log.push_trial(&out);
    }
    Ok(log)
}

/// Destination of the record stream.
pub trait RecordSink {
    fn push(&mut self, rec: TimestampRecord) -> Result<()>;
}

impl<W: Write + Seek> RecordSink for TimestampWriter<W> {
    fn push(&mut self, rec: TimestampRecord) -> Result<()> {
        self.write(&rec)
    }
}

impl RecordSink for Vec<TimestampRecord> {
    fn push(&mut self, rec: TimestampRecord) -> Result<()> {
        self.push(rec);
        Ok(())
    }
}

impl RecordSink for DetectionLog {
    fn push(&mut self, rec: TimestampRecord) -> Result<()> {
        self.push_record(&rec);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEvent {
    /// Wall time at the end of the interlude, s.
    pub time_s: f64,
    /// First trial recorded after the interlude.
    pub first_trial: u64,
    pub fitted_center_mhz: Option<Measured>,
    /// Detuning left after the correction, MHz.
    pub residual_mhz: f64,
    pub failure: Option<String>,
}

/// Trial range and drift state of one node 2 cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMark {
    pub time_s: f64,
    pub first_trial: u64,
    pub detuning_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub mode: RunMode,
    pub duration_s: f64,
    pub n_cycles: u64,
    pub n_trials: u64,
    /// Trials with clicks on both SPAD2a and SPAD2b.
    pub coincidence_trials: u64,
    /// Node 1 interrogation time spent taking data, s.
    pub interrogation_time_s: f64,
    pub node1_start_ns: f64,
    pub node2_start_ns: f64,
    pub calibrations: Vec<CalibrationEvent>,
    pub time_marks: Vec<TimeMark>,
    pub corrections: Vec<(f64, f64)>,
}

impl RunLog {
    /// Trial ranges `[start, end)` grouped into blocks of `block_s` wall-clock seconds.
    pub fn trial_blocks(&self, block_s: f64) -> Vec<(f64, u64, u64)> {
        let mut blocks: Vec<(f64, u64, u64)> = Vec::new();
        for (k, mark) in self.time_marks.iter().enumerate() {
            let end = self
                .time_marks
                .get(k + 1)
                .map_or(self.n_trials, |m| m.first_trial);
            let idx = (mark.time_s / block_s).floor();
            let t = idx * block_s;
            match blocks.last_mut() {
                Some(last) if last.0 == t => last.2 = end,
                _ => blocks.push((t, mark.first_trial, end)),
            }
        }
        blocks
    }
}

enum Phase {
    Data { elapsed_s: f64 },
    Calibrating { remaining_s: f64 },
}

/// Runs the full cycle for `duration_s` seconds of wall time, streaming
/// records into `sink`.
///
/// Node 2 cycles are simulated whole; a cycle that would end after
/// `duration_s` is not started. With calibration enabled every
/// `period_min` of data-taking is followed by `duration_min` without data,
/// after which a scan corrects the drift.
pub fn run_experiment<S: RecordSink>(
    exp: &Experiment,
    seed: u64,
    duration_s: f64,
    sink: &mut S,
) -> Result<RunLog> {
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid(
            "duration",
            format!("{duration_s} must be >= 0"),
        ));
    }
    let seq = &exp.seq;
    let cycle_s = seq.node2_cycle_ms * 1e-3;
    let n_cycles = (duration_s / cycle_s + 1e-9).floor() as u64;
    let attempts = seq.attempts_per_window();
    let blocked = seq.attempts_per_trial();
    let p_herald = exp.dlcz.herald_prob;
    let ln_miss = (1.0 - p_herald).ln();

    let mut state = CalibrationState::default();
    let mut phase = Phase::Data { elapsed_s: 0.0 };
    let mut log = RunLog {
        seed,
        mode: seq.mode,
        duration_s,
        n_cycles,
        n_trials: 0,
        coincidence_trials: 0,
        interrogation_time_s: 0.0,
        node1_start_ns: exp.node1_start_ns(),
        node2_start_ns: exp.node2_start_ns(),
        calibrations: Vec::new(),
        time_marks: Vec::new(),
        corrections: Vec::new(),
    };
    let mut pending_marker = false;
    let mut out = HomOutcome::default();
    let mut window_index = 0u64;

    for cycle in 0..n_cycles {
        let t_cycle = cycle as f64 * cycle_s;
        match phase {
            Phase::Calibrating { remaining_s } => {
                let remaining_s = remaining_s - cycle_s;
                phase = if remaining_s > 1e-9 {
                    Phase::Calibrating { remaining_s }
                } else {
                    let mut rng =
                        substream(seed, Domain::Calibration, log.calibrations.len() as u64);
                    let t_end = t_cycle + cycle_s;
                    let event = match calibration_scan(&state, &exp.calibration, t_end, &mut rng) {
                        Ok((center, next)) => {
                            state = next;
                            CalibrationEvent {
                                time_s: t_end,
                                first_trial: log.n_trials,
                                fitted_center_mhz: Some(center),
                                residual_mhz: state.current_detuning,
                                failure: None,
                            }
                        }
                        Err(e) => CalibrationEvent {
                            time_s: t_end,
                            first_trial: log.n_trials,
                            fitted_center_mhz: None,
                            residual_mhz: state.current_detuning,
                            failure: Some(e.to_string()),
                        },
                    };
                    log.calibrations.push(event);
                    pending_marker = true;
                    Phase::Data { elapsed_s: 0.0 }
                };
            }
            Phase::Data { elapsed_s } => {
                log.time_marks.push(TimeMark {
                    time_s: t_cycle,
                    first_trial: log.n_trials,
                    detuning_mhz: state.current_detuning,
                });
                let state2 = exp.node2_state_at(state.current_detuning);
                for _ in 0..seq.cycles_per_interrogation {
                    let mut rng = substream(seed, Domain::Herald, window_index);
                    window_index += 1;
                    let mut k = 0u64;
                    while p_herald > 0.0 && k < attempts {
                        if p_herald < 1.0 {
                            let u: f64 = rng.random();
                            let skip = ((1.0 - u).ln() / ln_miss).floor();
                            if !skip.is_finite() || skip >= (attempts - k) as f64 {
                                break;
                            }
                            k += skip as u64;
                        }
                        let trial = log.n_trials;
                        exp.sample_trial(seed, trial, &state2, &mut out)?;
                        sink.push(TimestampRecord::new(Channel::Spad1, trial, 0))?;
                        if pending_marker {
                            sink.push(TimestampRecord::new(Channel::Marker, trial, 0))?;
                            pending_marker = false;
                        }
                        let (mut a, mut b) = (false, false);
                        for d in &out.detections {
                            let channel = match d.port {
                                Port::A => {
                                    a = true;
                                    Channel::Spad2a
                                }
                                Port::B => {
                                    b = true;
                                    Channel::Spad2b
                                }
                            };
                            let ps = (d.time_ns * 1e3).round().max(0.0) as u64;
                            sink.push(TimestampRecord::new(channel, trial, ps))?;
                        }
                        if a && b {
                            log.coincidence_trials += 1;
                        }
                        log.n_trials += 1;
                        k += blocked;
                    }
                    log.interrogation_time_s += seq.node1_interrogation_ms * 1e-3;
                }
                let elapsed_s = elapsed_s + cycle_s;
                phase = if exp.calibration.enabled
                    && elapsed_s >= exp.calibration.period_min * 60.0 - 1e-9
                {
                    Phase::Calibrating {
                        remaining_s: exp.calibration.duration_min * 60.0,
                    }
                } else {
                    Phase::Data { elapsed_s }
                };
            }
        }
        let mut rng = substream(seed, Domain::Drift, cycle);
        state = drift_step(&exp.drift, &state, cycle_s, &mut rng)?;
    }
    log.corrections = state.corrections.clone();
    Ok(log)
}
