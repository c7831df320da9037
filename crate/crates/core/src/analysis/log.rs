use super::format::{Channel, TimestampRecord};
use crate::detection::{HomOutcome, Port};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Coincidence window relative to a photon's leading edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    pub offset_ns: f64,
    pub length_ns: f64,
}

impl AnalysisWindow {
    pub fn new(offset_ns: f64, length_ns: f64) -> Result<Self> {
        if !(length_ns > 0.0 && length_ns.is_finite()) {
            return Err(Error::invalid(
                "window.length_ns",
                format!("{length_ns} must be positive"),
            ));
        }
        if !offset_ns.is_finite() {
            return Err(Error::invalid("window.offset_ns", "must be finite"));
        }
        Ok(AnalysisWindow {
            offset_ns,
            length_ns,
        })
    }

    pub fn with_length(&self, length_ns: f64) -> Result<Self> {
        AnalysisWindow::new(self.offset_ns, length_ns)
    }

    #[inline]
    pub fn contains(&self, relative_ns: f64) -> bool {
        relative_ns >= self.offset_ns && relative_ns < self.offset_ns + self.length_ns
    }
}

impl Default for AnalysisWindow {
    fn default() -> Self {
        AnalysisWindow {
            offset_ns: 0.0,
            length_ns: 800.0,
        }
    }
}

/// An analysis window replicated at every photon start time of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    anchors_ns: Vec<f64>,
    window: AnalysisWindow,
}

impl Gate {
    pub fn new(mut anchors_ns: Vec<f64>, window: AnalysisWindow) -> Result<Self> {
        if anchors_ns.is_empty() {
            return Err(Error::invalid("anchors", "need at least one anchor"));
        }
        anchors_ns.sort_by(f64::total_cmp);
        Ok(Gate { anchors_ns, window })
    }

    pub fn single(anchor_ns: f64, window: AnalysisWindow) -> Self {
        Gate {
            anchors_ns: vec![anchor_ns],
            window,
        }
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors_ns
    }

    pub fn window(&self) -> &AnalysisWindow {
        &self.window
    }

    pub fn with_window(&self, window: AnalysisWindow) -> Gate {
        Gate {
            anchors_ns: self.anchors_ns.clone(),
            window,
        }
    }

    /// Time relative to the anchor whose window contains `t_ns`.
    #[inline]
    pub fn relative(&self, t_ns: f64) -> Option<f64> {
        self.anchors_ns
            .iter()
            .map(|a| t_ns - a)
            .find(|&r| self.window.contains(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedClick {
    pub trial: u64,
    pub port: Port,
    /// ns from the start of the trial.
    pub time_ns: f64,
}

/// Beamsplitter-side clicks of a run, keyed by trial. Only trials with a
/// click are stored; `n_trials` counts all of them.
///
/// Logs of consecutive trial ranges combine with [`DetectionLog::append`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionLog {
    n_trials: u64,
    clicks: Vec<LoggedClick>,
}

impl DetectionLog {
    pub fn new() -> Self {
        DetectionLog::default()
    }

    pub fn n_trials(&self) -> u64 {
        self.n_trials
    }

    pub fn clicks(&self) -> &[LoggedClick] {
        &self.clicks
    }

    /// Adds the next trial.
    pub fn push_trial(&mut self, outcome: &HomOutcome) {
        let trial = self.n_trials;
        self.clicks
            .extend(outcome.detections.iter().map(|d| LoggedClick {
                trial,
                port: d.port,
                time_ns: d.time_ns,
            }));
        self.n_trials += 1;
    }

    /// Adds `n` trials without clicks.
    pub fn skip_trials(&mut self, n: u64) {
        self.n_trials += n;
    }

    /// Appends a log whose trials follow this one's.
    pub fn append(&mut self, other: &DetectionLog) {
        let shift = self.n_trials;
        self.clicks.extend(other.clicks.iter().map(|c| LoggedClick {
            trial: c.trial + shift,
            ..*c
        }));
        self.n_trials += other.n_trials;
    }

    /// Adds one record of a time-ordered stream. The trial count becomes one
    /// past the largest trial index seen.
    pub fn push_record(&mut self, rec: &TimestampRecord) {
        self.n_trials = self.n_trials.max(rec.trial_index + 1);
        let port = match rec.channel {
            Channel::Spad2a => Port::A,
            Channel::Spad2b => Port::B,
            Channel::Spad1 | Channel::Marker => return,
        };
        self.clicks.push(LoggedClick {
            trial: rec.trial_index,
            port,
            time_ns: rec.time_ns(),
        });
    }

    /// Builds a log from a record stream.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = Result<TimestampRecord>>,
    {
        let mut log = DetectionLog::new();
        for rec in records {
            log.push_record(&rec?);
        }
        Ok(log)
    }

    /// Sorted, de-duplicated trials with at least one `port` click in the gate.
    pub fn trials_with_click(&self, port: Port, gate: &Gate) -> Vec<u64> {
        let mut v: Vec<u64> = self
            .clicks
            .iter()
            .filter(|c| c.port == port && gate.relative(c.time_ns).is_some())
            .map(|c| c.trial)
            .collect();
        v.dedup();
        v
    }

    /// Number of clicks on either port inside the gate.
    pub fn singles(&self, gate: &Gate) -> u64 {
        self.clicks
            .iter()
            .filter(|c| gate.relative(c.time_ns).is_some())
            .count() as u64
    }

    /// Anchor-relative times of the first gated click on each port, for
    /// every trial that has both.
    pub fn gated_pairs(&self, gate: &Gate) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.clicks.len() {
            let trial = self.clicks[i].trial;
            let (mut a, mut b) = (None, None);
            while i < self.clicks.len() && self.clicks[i].trial == trial {
                let c = &self.clicks[i];
                if let Some(r) = gate.relative(c.time_ns) {
                    match c.port {
                        Port::A if a.is_none() => a = Some(r),
                        Port::B if b.is_none() => b = Some(r),
                        _ => {}
                    }
                }
                i += 1;
            }
            if let (Some(a), Some(b)) = (a, b) {
                out.push((a, b));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Detection;

    fn outcome(d: &[(Port, f64)]) -> HomOutcome {
        HomOutcome {
            detections: d
                .iter()
                .map(|&(port, time_ns)| Detection { port, time_ns })
                .collect(),
        }
    }

    #[test]
    fn gate_uses_any_anchor() {
        let g = Gate::new(
            vec![2800.0, 200.0],
            AnalysisWindow::new(0.0, 100.0).unwrap(),
        )
        .unwrap();
        assert_eq!(g.relative(250.0), Some(50.0));
        assert_eq!(g.relative(2850.0), Some(50.0));
        assert_eq!(g.relative(350.0), None);
        assert!(AnalysisWindow::new(0.0, 0.0).is_err());
    }

    #[test]
    fn append_shifts_trials() {
        let mut a = DetectionLog::new();
        a.push_trial(&outcome(&[(Port::A, 10.0)]));
        a.skip_trials(2);
        let mut b = DetectionLog::new();
        b.push_trial(&outcome(&[(Port::B, 20.0)]));
        a.append(&b);
        assert_eq!(a.n_trials(), 4);
        assert_eq!(a.clicks()[1].trial, 3);
    }

    #[test]
    fn pairs_and_singles() {
        let mut log = DetectionLog::new();
        log.push_trial(&outcome(&[
            (Port::A, 10.0),
            (Port::A, 30.0),
            (Port::B, 50.0),
        ]));
        log.push_trial(&outcome(&[(Port::B, 900.0)]));
        let g = Gate::single(0.0, AnalysisWindow::default());
        assert_eq!(log.singles(&g), 3);
        assert_eq!(log.gated_pairs(&g), vec![(10.0, 50.0)]);
        assert_eq!(log.trials_with_click(Port::A, &g), vec![0]);
    }

    #[test]
    fn records_round_trip_into_log() {
        let recs = vec![
            Ok(TimestampRecord::new(Channel::Spad1, 0, 0)),
            Ok(TimestampRecord::new(Channel::Spad2b, 0, 2_850_000)),
            Ok(TimestampRecord::new(Channel::Spad1, 4, 0)),
        ];
        let log = DetectionLog::from_records(recs).unwrap();
        assert_eq!(log.n_trials(), 5);
        assert_eq!(log.clicks().len(), 1);
        assert!((log.clicks()[0].time_ns - 2850.0).abs() < 1e-9);
    }
}
