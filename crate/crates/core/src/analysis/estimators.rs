use super::correlation::trial_g2;
use super::log::{AnalysisWindow, DetectionLog, Gate};
use crate::detection::Port;
use crate::error::{Error, Result};
use crate::stats::Measured;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `V = 1 − g2_i/g2_d` with first-order error propagation.
pub fn visibility(g2_i: Measured, g2_d: Measured) -> Result<Measured> {
    if !(g2_d.value > 0.0) {
        return Err(Error::invalid(
            "g2_d",
            format!("{} must be positive", g2_d.value),
        ));
    }
    let r = Measured::ratio(g2_i, g2_d);
    Ok(Measured::new(1.0 - r.value, r.error))
}

/// `η = V·(g2n1·x + g2n2/x + 2)/2` with first-order error propagation.
/// Values above one are returned unchanged.
pub fn indistinguishability(
    v: Measured,
    g2n1: Measured,
    g2n2: Measured,
    x: Measured,
) -> Result<Measured> {
    if !(x.value > 0.0 && x.value.is_finite()) {
        return Err(Error::invalid("x", format!("{} must be positive", x.value)));
    }
    let (g1, g2, xv, vv) = (g2n1.value, g2n2.value, x.value, v.value);
    let f = (g1 * xv + g2 / xv + 2.0) / 2.0;
    let terms = [
        f * v.error,
        vv * xv / 2.0 * g2n1.error,
        vv / (2.0 * xv) * g2n2.error,
        vv * (g1 - g2 / (xv * xv)) / 2.0 * x.error,
    ];
    Ok(Measured::new(
        vv * f,
        terms.iter().map(|t| t * t).sum::<f64>().sqrt(),
    ))
}

/// A matched pair of distinguishable and indistinguishable runs plus the
/// heralded autocorrelations of both sources.
#[derive(Debug, Clone)]
pub struct HomRuns<'a> {
    pub dist: &'a DetectionLog,
    pub indist: &'a DetectionLog,
    /// Start of the node 1 photon, ns into the trial, in both runs.
    pub node1_start_ns: f64,
    /// Start of the node 2 photon in the distinguishable run.
    pub node2_start_dist_ns: f64,
    pub g2n1: Measured,
    pub g2n2: Measured,
    /// Window length that contains all photon counts.
    pub full_length_ns: f64,
    pub max_lag: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomReport {
    pub schema_version: u32,
    pub window: AnalysisWindow,
    /// Fraction of photon counts inside the window.
    pub count_share: Measured,
    /// Singles ratio node 1 / node 2.
    pub x: Measured,
    pub g2_d: Measured,
    pub g2_i: Measured,
    pub visibility: Measured,
    pub eta: Measured,
    pub g2n1: Measured,
    pub g2n2: Measured,
    pub coincidences_d: u64,
    pub coincidences_i: u64,
}

impl HomReport {
    pub const CSV_HEADER: &'static str = "window_offset_ns,window_length_ns,count_share,count_share_err,x,x_err,g2_d,g2_d_err,g2_i,g2_i_err,visibility,visibility_err,eta,eta_err,coincidences_d,coincidences_i";

    pub fn csv_row(&self) -> String {
        let m = |v: &Measured| format!("{:.6},{:.6}", v.value, v.error);
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.window.offset_ns,
            self.window.length_ns,
            m(&self.count_share),
            m(&self.x),
            m(&self.g2_d),
            m(&self.g2_i),
            m(&self.visibility),
            m(&self.eta),
            self.coincidences_d,
            self.coincidences_i
        )
    }
}

impl HomRuns<'_> {
    pub fn dist_gate(&self, window: AnalysisWindow) -> Gate {
        Gate::new(vec![self.node1_start_ns, self.node2_start_dist_ns], window).expect("two anchors")
    }

    pub fn indist_gate(&self, window: AnalysisWindow) -> Gate {
        Gate::single(self.node1_start_ns, window)
    }

    /// Share of distinguishable-run singles inside `window`.
    pub fn count_share(&self, window: AnalysisWindow) -> Result<Measured> {
        let full = window.with_length(self.full_length_ns)?;
        let total = self.dist.singles(&self.dist_gate(full));
        if total == 0 {
            return Err(Error::InsufficientStatistics(
                "no singles in the full window".into(),
            ));
        }
        let inside = self.dist.singles(&self.dist_gate(window));
        let p = inside as f64 / total as f64;
        Ok(Measured::new(p, (p * (1.0 - p) / total as f64).sqrt()))
    }

    /// Singles ratio of the two nodes in the distinguishable run.
    pub fn singles_ratio(&self, window: AnalysisWindow) -> Result<Measured> {
        let n1 = self
            .dist
            .singles(&Gate::single(self.node1_start_ns, window));
        let n2 = self
            .dist
            .singles(&Gate::single(self.node2_start_dist_ns, window));
        if n1 == 0 || n2 == 0 {
            return Err(Error::InsufficientStatistics(
                "a node has no singles in the window".into(),
            ));
        }
        Ok(Measured::ratio(Measured::counts(n1), Measured::counts(n2)))
    }
}

pub fn hom_report(runs: &HomRuns<'_>, window: AnalysisWindow) -> Result<HomReport> {
    let d = trial_g2(
        runs.dist,
        Port::A,
        Port::B,
        &runs.dist_gate(window),
        runs.max_lag,
    )?;
    let i = trial_g2(
        runs.indist,
        Port::A,
        Port::B,
        &runs.indist_gate(window),
        runs.max_lag,
    )?;
    let (g2_d, g2_i) = (d.zero(), i.zero());
    let v = visibility(g2_i, g2_d)?;
    let x = runs.singles_ratio(window)?;
    let eta = indistinguishability(v, runs.g2n1, runs.g2n2, x)?;
    let zero_count = |c: &super::G2Curve| c.counts[c.delays.iter().position(|&l| l == 0).unwrap()];
    Ok(HomReport {
        schema_version: REPORT_SCHEMA_VERSION,
        window,
        count_share: runs.count_share(window)?,
        x,
        g2_d,
        g2_i,
        visibility: v,
        eta,
        g2n1: runs.g2n1,
        g2n2: runs.g2n2,
        coincidences_d: zero_count(&d),
        coincidences_i: zero_count(&i),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub length_ns: f64,
    pub report: Option<HomReport>,
    /// Why the row has no report.
    pub flag: Option<String>,
}

/// One report per window length, anchored at the photon leading edge.
/// Rows that cannot be evaluated are flagged instead of failing the sweep.
pub fn window_sweep(runs: &HomRuns<'_>, offset_ns: f64, lengths: &[f64]) -> Vec<SweepRow> {
    lengths
        .iter()
        .map(|&length_ns| {
            match AnalysisWindow::new(offset_ns, length_ns).and_then(|w| hom_report(runs, w)) {
                Ok(report) => SweepRow {
                    length_ns,
                    report: Some(report),
                    flag: None,
                },
                Err(e) => SweepRow {
                    length_ns,
                    report: None,
                    flag: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Sweep values linearly interpolated to the window length whose count share
/// equals `share`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedRow {
    pub length_ns: f64,
    pub count_share: f64,
    pub visibility: Measured,
    pub eta: Measured,
}

pub fn interpolate_at_share(rows: &[SweepRow], share: f64) -> Option<InterpolatedRow> {
    let reports: Vec<(f64, &HomReport)> = rows
        .iter()
        .filter_map(|r| r.report.as_ref().map(|rep| (r.length_ns, rep)))
        .collect();
    reports.windows(2).find_map(|w| {
        let (l0, r0) = w[0];
        let (l1, r1) = w[1];
        let (s0, s1) = (r0.count_share.value, r1.count_share.value);
        if !(s0 <= share && share <= s1) || s1 == s0 {
            return None;
        }
        let f = (share - s0) / (s1 - s0);
        let lerp = |a: f64, b: f64| a + f * (b - a);
        let lerp_m = |a: Measured, b: Measured| {
            Measured::new(lerp(a.value, b.value), lerp(a.error, b.error))
        };
        Some(InterpolatedRow {
            length_ns: lerp(l0, l1),
            count_share: share,
            visibility: lerp_m(r0.visibility, r1.visibility),
            eta: lerp_m(r0.eta, r1.eta),
        })
    })
}

/// Histogram of `t_b − t_a` over trials with a gated click on both ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub errors: Vec<f64>,
}

impl DeltaHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

/// Time-resolved coincidences. Times are taken relative to the anchor of the
/// window they fall in; the bins cover every possible difference.
pub fn time_resolved_hom(
    log: &DetectionLog,
    gate: &Gate,
    bin_width_ns: f64,
) -> Result<DeltaHistogram> {
    if !(bin_width_ns > 0.0 && bin_width_ns.is_finite()) {
        return Err(Error::invalid(
            "bin_width",
            format!("{bin_width_ns} must be positive"),
        ));
    }
    let half = (gate.window().length_ns / bin_width_ns).ceil() as usize;
    let edges: Vec<f64> = (0..=2 * half)
        .map(|k| (k as f64 - half as f64) * bin_width_ns)
        .collect();
    let mut counts = vec![0u64; 2 * half];
    for (a, b) in log.gated_pairs(gate) {
        let k = ((b - a) / bin_width_ns + half as f64).floor() as isize;
        counts[k.clamp(0, 2 * half as isize - 1) as usize] += 1;
    }
    let errors = counts.iter().map(|&c| (c.max(1) as f64).sqrt()).collect();
    Ok(DeltaHistogram {
        edges,
        counts,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::closed_form_g2;

    #[test]
    fn visibility_arithmetic() {
        let v = visibility(Measured::new(0.11, 0.02), Measured::new(0.57, 0.05)).unwrap();
        assert!((v.value - (1.0 - 0.11 / 0.57)).abs() < 1e-12);
        assert!(v.error > 0.0);
        let v = visibility(Measured::exact(0.0), Measured::new(0.57, 0.05)).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(visibility(Measured::exact(0.1), Measured::exact(0.0)).is_err());
    }

    #[test]
    fn eta_arithmetic() {
        let e = indistinguishability(
            Measured::exact(0.802),
            Measured::exact(0.13),
            Measured::exact(0.09),
            Measured::exact(1.3),
        )
        .unwrap();
        assert!((e.value - 0.802 * (0.13 * 1.3 + 0.09 / 1.3 + 2.0) / 2.0).abs() < 1e-12);
        let z = indistinguishability(
            Measured::exact(0.0),
            Measured::exact(0.4),
            Measured::exact(0.2),
            Measured::exact(0.7),
        )
        .unwrap();
        assert_eq!(z.value, 0.0);
        assert!(indistinguishability(
            Measured::exact(0.5),
            Measured::exact(0.0),
            Measured::exact(0.0),
            Measured::exact(0.0)
        )
        .is_err());
    }

    #[test]
    fn closed_form_round_trip() {
        for &x in &[0.4, 1.0, 2.2] {
            for &g in &[0.0, 0.05, 0.4] {
                for &eta in &[0.0, 0.3, 0.9, 1.0] {
                    let c = closed_form_g2(x, g, 0.7 * g, eta).unwrap();
                    let back = indistinguishability(
                        Measured::exact(c.visibility),
                        Measured::exact(g),
                        Measured::exact(0.7 * g),
                        Measured::exact(x),
                    )
                    .unwrap();
                    assert!((back.value - eta).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn interpolation_brackets_share() {
        let mk = |len: f64, share: f64, v: f64| SweepRow {
            length_ns: len,
            report: Some(HomReport {
                schema_version: 1,
                window: AnalysisWindow::new(0.0, len).unwrap(),
                count_share: Measured::exact(share),
                x: Measured::exact(1.0),
                g2_d: Measured::exact(0.5),
                g2_i: Measured::exact(0.1),
                visibility: Measured::exact(v),
                eta: Measured::exact(v),
                g2n1: Measured::exact(0.0),
                g2n2: Measured::exact(0.0),
                coincidences_d: 0,
                coincidences_i: 0,
            }),
            flag: None,
        };
        let rows = vec![
            mk(300.0, 0.8, 0.95),
            mk(400.0, 0.9, 0.93),
            mk(500.0, 0.95, 0.9),
        ];
        let r = interpolate_at_share(&rows, 0.85).unwrap();
        assert!((r.length_ns - 350.0).abs() < 1e-9);
        assert!((r.visibility.value - 0.94).abs() < 1e-12);
        assert!(interpolate_at_share(&rows, 0.99).is_none());
    }
}
