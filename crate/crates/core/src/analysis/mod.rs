//! Timestamp files, trial-binned correlations and the estimators built on them.

mod correlation;
mod estimators;
mod fit;
mod format;
mod log;

pub use correlation::{heralded_autocorrelation, trial_g2, G2Curve, MIN_LAG};
pub use estimators::{
    hom_report, indistinguishability, interpolate_at_share, time_resolved_hom, visibility,
    window_sweep, DeltaHistogram, HomReport, HomRuns, InterpolatedRow, SweepRow,
    REPORT_SCHEMA_VERSION,
};
pub use fit::{
    gaussian, gaussian_fit, lorentzian, lorentzian_fit, FitQuality, GaussianFit, LorentzianFit,
};
pub use format::{
    parse_timestamps, Channel, FileHeader, TimestampReader, TimestampRecord, TimestampWriter,
    FORMAT_VERSION, HEADER_LEN, MAX_TRIAL_INDEX, RECORD_LEN,
};
pub use log::{AnalysisWindow, DetectionLog, Gate, LoggedClick};
