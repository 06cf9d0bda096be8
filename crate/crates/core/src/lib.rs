//! Simulation and analysis of a long-distance entanglement distribution link:
//! polarization-entangled pairs, time-tag streams, coincidence extraction,
//! CHSH statistics and pump-phase alignment.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chsh;
pub mod coincidence;
pub mod config;
pub mod error;
pub mod io;
pub mod phase;
pub mod pipeline;
pub mod polarization;
pub mod sim;
pub mod timetag;

pub use chsh::{
    analyze_counts, budget_report, chsh_with_error, correlation_with_error, loss_db, noise_visibility_from_snr,
    predict_s_max, qber_from_s, BudgetInputs, ChshAnalysis, ChshResult, CorrelationResult, LossBudget, QberEstimate,
    SettingCounts,
};
pub use coincidence::{
    count_windowed_coincidences, cross_correlogram, cross_correlogram_stream, find_peaks, ChannelPair,
    CoincidenceWindows, Correlogram, PeakReport, PeakSearch,
};
pub use config::{
    AnalysisParams, AnalyzerConfig, ChannelParams, DetectorParams, LinkConfig, PlanEntry, RunParams, Scintillation,
    SourceParams,
};
pub use error::{Error, Result};
pub use io::{Format, StreamHeader};
pub use phase::{fit_cosine, target_setting, CosineFit, VisibilityPoint};
pub use polarization::{
    combine_visibilities, AnalyzerSetting, BellFamily, BellLabel, Convention, JointProbabilities, Port, TwoQubitState,
    VisibilityBudget,
};
pub use sim::{simulate_run, simulate_setting, Origin, SimOutput, TruthEntry};
pub use timetag::{Detector, TickDuration, TimeTag};
