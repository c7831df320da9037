use super::log::{DetectionLog, Gate};
use crate::detection::Port;
use crate::error::{Error, Result};
use crate::stats::Measured;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Smallest accepted number of side lags on each side of zero.
pub const MIN_LAG: u32 = 5;

/// Trial-binned normalised coincidence rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub delays: Vec<i64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Raw coincidence counts per delay.
    pub counts: Vec<u64>,
    /// Mean accidental coincidence probability per trial pair at non-zero lag.
    pub normalization: Measured,
}

impl G2Curve {
    pub fn at(&self, delay: i64) -> Option<Measured> {
        self.delays
            .iter()
            .position(|&d| d == delay)
            .map(|k| Measured::new(self.values[k], self.errors[k]))
    }

    /// `g²(0)`, including the uncertainty of the side-lag normalisation.
    pub fn zero(&self) -> Measured {
        let k = self
            .delays
            .iter()
            .position(|&d| d == 0)
            .expect("zero lag present");
        let raw = Measured::new(self.values[k], self.errors[k]);
        let norm_rel = self.normalization.relative_error();
        Measured::new(raw.value, raw.error.hypot(raw.value * norm_rel))
    }

    /// Mean of the non-zero lags. Equal to one by construction.
    pub fn side_mean(&self) -> f64 {
        let side: Vec<f64> = self
            .delays
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| **d != 0)
            .map(|(_, v)| *v)
            .collect();
        side.iter().sum::<f64>() / side.len() as f64
    }
}

/// Coincidences between click indicators on `port_a` in trial `t` and
/// `port_b` in trial `t + lag`, for `|lag| ≤ max_lag`, normalised by the mean
/// accidental rate at the non-zero lags.
pub fn trial_g2(
    log: &DetectionLog,
    port_a: Port,
    port_b: Port,
    gate: &Gate,
    max_lag: u32,
) -> Result<G2Curve> {
    if max_lag < MIN_LAG {
        return Err(Error::invalid("max_lag", format!("{max_lag} < {MIN_LAG}")));
    }
    let n = log.n_trials();
    if n <= max_lag as u64 {
        return Err(Error::InsufficientStatistics(format!(
            "{n} trials for lags up to {max_lag}"
        )));
    }
    let a = log.trials_with_click(port_a, gate);
    let b: HashSet<u64> = log.trials_with_click(port_b, gate).into_iter().collect();
    let lags: Vec<i64> = (-(max_lag as i64)..=max_lag as i64).collect();
    let counts: Vec<u64> = lags
        .iter()
        .map(|&lag| {
            a.iter()
                .filter(|&&t| {
                    let partner = t as i64 + lag;
                    partner >= 0 && b.contains(&(partner as u64))
                })
                .count() as u64
        })
        .collect();
    let pairs = |lag: i64| (n - lag.unsigned_abs()) as f64;

    let side_counts: u64 = lags
        .iter()
        .zip(&counts)
        .filter(|(l, _)| **l != 0)
        .map(|(_, c)| c)
        .sum();
    if side_counts == 0 {
        return Err(Error::InsufficientStatistics(
            "no coincidences at non-zero lag".into(),
        ));
    }
    let side_rates: f64 = lags
        .iter()
        .zip(&counts)
        .filter(|(l, _)| **l != 0)
        .map(|(&l, &c)| c as f64 / pairs(l))
        .sum::<f64>()
        / (2 * max_lag) as f64;
    let normalization = Measured::new(side_rates, side_rates / (side_counts as f64).sqrt());
    let (values, errors) = lags
        .iter()
        .zip(&counts)
        .map(|(&l, &c)| {
            let rate = Measured::counts(c);
            let scale = pairs(l) * normalization.value;
            let value = rate.value / scale;
            let error = if c == 0 {
                1.0 / scale
            } else {
                rate.error / scale
            };
            (value, error)
        })
        .unzip();
    Ok(G2Curve {
        delays: lags,
        values,
        errors,
        counts,
        normalization,
    })
}

/// Heralded `g²(0)` of a run in which a single source feeds the beamsplitter.
pub fn heralded_autocorrelation(log: &DetectionLog, gate: &Gate, max_lag: u32) -> Result<Measured> {
    Ok(trial_g2(log, Port::A, Port::B, gate, max_lag)?.zero())
}
