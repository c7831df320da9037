//! The experiment configuration file.
//!
//! One TOML file drives every entry point. Every section and key is optional
//! and falls back to its default; unknown keys are rejected. The config hash
//! is the SHA-256 of the canonical JSON rendering (sorted keys) of the parsed
//! file, so formatting and key order do not change it.

use crate::analysis::AnalysisWindow;
use crate::detection::DetectorConfig;
use crate::error::{check_positive, Error, Result};
use crate::photonics::{make_waveform, PhotonStateMixture, TemporalMode, TimeGrid};
use crate::sequencer::{CalibrationConfig, DriftModel, Experiment, RunMode, SequenceConfig};
use crate::sources::{dlcz_state, rydberg_state, DlczConfig, RydbergConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotonConfig {
    pub rise_ns: f64,
    pub decay_ns: f64,
    pub grid_start_ns: f64,
    pub grid_dt_ns: f64,
    pub grid_bins: usize,
    /// Gaussian detuning spread of node 1 photons, MHz.
    pub node1_jitter_mhz: f64,
    /// Gaussian detuning spread of node 2 photons, MHz.
    pub node2_jitter_mhz: f64,
    /// Components used to discretise each detuning spread.
    pub jitter_nodes: usize,
    /// Static frequency offset of node 1 photons, MHz.
    pub node1_detuning_mhz: f64,
}

impl Default for PhotonConfig {
    fn default() -> Self {
        PhotonConfig {
            rise_ns: 60.0,
            decay_ns: 180.0,
            grid_start_ns: 0.0,
            grid_dt_ns: 2.0,
            grid_bins: 400,
            node1_jitter_mhz: DEFAULT_JITTER_MHZ,
            node2_jitter_mhz: DEFAULT_JITTER_MHZ,
            jitter_nodes: 15,
            node1_detuning_mhz: 0.0,
        }
    }
}

/// Per-node detuning spread giving an overall mode overlap near 0.89 with the
/// default sources.
pub const DEFAULT_JITTER_MHZ: f64 = 0.265;

impl PhotonConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid_start_ns, self.grid_dt_ns, self.grid_bins)
    }

    pub fn waveform(&self) -> Result<TemporalMode> {
        make_waveform(self.rise_ns, self.decay_ns, self.grid()?)
    }

    pub fn duration_ns(&self) -> f64 {
        self.rise_ns + self.decay_ns
    }

    /// Jittered single-photon states of node 1 and node 2 before any source
    /// imperfection.
    pub fn base_states(&self) -> Result<(PhotonStateMixture, PhotonStateMixture)> {
        let mode = self.waveform()?;
        let s1 = PhotonStateMixture::gaussian_jitter(
            &mode.with_detuning(self.node1_detuning_mhz),
            self.node1_jitter_mhz,
            self.jitter_nodes,
        )?;
        let s2 =
            PhotonStateMixture::gaussian_jitter(&mode, self.node2_jitter_mhz, self.jitter_nodes)?;
        Ok((s1, s2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub window_offset_ns: f64,
    /// Window that holds every photon count.
    pub window_length_ns: f64,
    pub max_lag: u32,
    pub sweep_lengths_ns: Vec<f64>,
    pub histogram_bin_ns: f64,
    /// Heralded trials simulated per sweep point.
    pub trials_per_point: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window_offset_ns: 0.0,
            window_length_ns: 800.0,
            max_lag: 10,
            sweep_lengths_ns: (2..=16).map(|k| 50.0 * k as f64).collect(),
            histogram_bin_ns: 20.0,
            trials_per_point: 2_000_000,
        }
    }
}

impl AnalysisConfig {
    pub fn window(&self) -> Result<AnalysisWindow> {
        AnalysisWindow::new(self.window_offset_ns, self.window_length_ns)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub sequence: SequenceConfig,
    pub dlcz: DlczConfig,
    pub rydberg: RydbergConfig,
    pub detector: DetectorConfig,
    pub drift: DriftModel,
    pub calibration: CalibrationConfig,
    pub photon: PhotonConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

/// Prefixes a parameter error with its section.
fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            path: format!("{section}.{name}"),
            message: reason,
        },
        Error::WaveformTruncated { .. } | Error::GridMismatch => Error::Config {
            path: section.to_string(),
            message: e.to_string(),
        },
        other => other,
    })
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: e
                .span()
                .map(|s| format!("byte {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<file>".into()),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Config {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        })?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Checks every section; errors carry the offending key path.
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config {
                path: "duration_s".into(),
                message: format!("{} must be >= 0", self.duration_s),
            });
        }
        in_section("sequence", self.sequence.validate())?;
        in_section("dlcz", self.dlcz.validate())?;
        in_section("rydberg", self.rydberg.validate())?;
        in_section("detector", self.detector.validate())?;
        in_section("drift", self.drift.validate())?;
        in_section("calibration", self.calibration.validate())?;
        in_section("photon", self.photon.waveform().map(|_| ()))?;
        in_section("analysis", self.analysis.window().map(|_| ()))?;
        in_section(
            "analysis",
            check_positive("histogram_bin_ns", self.analysis.histogram_bin_ns),
        )?;
        if self.analysis.max_lag < crate::analysis::MIN_LAG {
            return Err(Error::Config {
                path: "analysis.max_lag".into(),
                message: format!("{} < {}", self.analysis.max_lag, crate::analysis::MIN_LAG),
            });
        }
        in_section("sequence", self.build_experiment().map(|_| ()))
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> [u8; 32] {
        let value = serde_json::to_value(self).expect("config serialises");
        let canonical = serde_json::to_string(&value).expect("json value serialises");
        Sha256::digest(canonical.as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex_string(&self.hash())
    }

    pub fn with_mode(&self, mode: RunMode) -> ExperimentConfig {
        let mut c = self.clone();
        c.sequence.mode = mode;
        c
    }

    /// Source states and timing assembled into a runnable experiment.
    pub fn build_experiment(&self) -> Result<Experiment> {
        let (base1, base2) = in_section("photon", self.photon.base_states())?;
        let state1 = in_section("dlcz", dlcz_state(&base1, &self.dlcz))?;
        let state2 = in_section("rydberg", rydberg_state(&base2, &self.rydberg))?;
        Experiment::new(
            self.sequence.clone(),
            self.dlcz.clone(),
            self.rydberg.clone(),
            self.detector.clone(),
            self.drift.clone(),
            self.calibration.clone(),
            state1,
            state2,
            self.photon.duration_ns(),
        )
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = ExperimentConfig::from_toml("seed = 3\n[dlcz]\nherald_prob = 0.02\n").unwrap();
        let b = ExperimentConfig::from_toml("seed=3\n\n[dlcz]\n  herald_prob=0.020\n").unwrap();
        let c = ExperimentConfig::from_toml("seed = 4\n[dlcz]\nherald_prob = 0.02\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash_hex().len(), 64);
    }

    #[test]
    fn errors_carry_field_paths() {
        match ExperimentConfig::from_toml("[dlcz]\nherald_prob = 1.5\n") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "dlcz.herald_prob"),
            other => panic!("unexpected {other:?}"),
        }
        match ExperimentConfig::from_toml("[sequence]\ncycles_per_interrogation = 30\n") {
            Err(Error::Config { path, .. }) => {
                assert_eq!(path, "sequence.cycles_per_interrogation")
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::from_toml("[dlcz]\nbogus = 1\n"),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[photon]\ngrid_bins = 100\n"),
            Err(Error::Config { .. })
        ));
    }
}
