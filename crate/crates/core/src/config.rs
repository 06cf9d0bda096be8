//! Link configuration. Every field name carries its unit.

use std::f64::consts::FRAC_PI_8;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{AnalyzerSetting, BellLabel, Convention};
use crate::timetag::{TickDuration, DEFAULT_TICK_FS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    /// Pair rate as it would be detected locally by detectors of
    /// `reference_efficiency`.
    pub pair_rate_hz: f64,
    /// Efficiency of the local (source-side) detectors that define
    /// `pair_rate_hz`. Receiver efficiencies are applied relative to it.
    pub reference_efficiency: f64,
    /// Extra delay of photon 2 before it enters the link.
    pub fibre_delay_s: f64,
    pub state: BellLabel,
    pub intrinsic_visibility: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            pair_rate_hz: 1e6,
            reference_efficiency: 0.40,
            fibre_delay_s: 50e-9,
            state: BellLabel::psi_minus(),
            intrinsic_visibility: 0.992,
        }
    }
}

/// Log-normal fluctuation of the link loss, piecewise constant over
/// `coherence_time_s` and shared by both photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scintillation {
    pub log_std_db: f64,
    pub coherence_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub loss_db_per_photon: f64,
    #[serde(default)]
    pub scintillation: Option<Scintillation>,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            loss_db_per_photon: 32.0,
            scintillation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub background_rate_hz: f64,
    pub jitter_sigma_s: f64,
    #[serde(default)]
    pub dead_time_s: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            efficiency: 0.25,
            dark_rate_hz: 200.0,
            background_rate_hz: 200.0,
            // two detectors in quadrature give a 560 ps FWHM coincidence peak
            jitter_sigma_s: 168e-12,
            dead_time_s: 0.0,
        }
    }
}

impl DetectorParams {
    pub fn noise_rate_hz(&self) -> f64 {
        self.dark_rate_hz + self.background_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        check(
            (0.0..=1.0).contains(&self.efficiency),
            format!("detector efficiency {} outside [0, 1]", self.efficiency),
        )?;
        for (name, v) in [
            ("dark_rate_hz", self.dark_rate_hz),
            ("background_rate_hz", self.background_rate_hz),
            ("jitter_sigma_s", self.jitter_sigma_s),
            ("dead_time_s", self.dead_time_s),
        ] {
            check(
                v >= 0.0 && v.is_finite(),
                format!("{name} = {v} must be finite and ≥ 0"),
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerConfig {
    pub a: AnalyzerSetting,
    pub b: AnalyzerSetting,
    /// Polarization contrast of the detection module, applied as isotropic
    /// mixing on top of the source visibility.
    pub polarization_contrast: f64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            a: AnalyzerSetting::new(0.0, Convention::Mirrored),
            b: AnalyzerSetting::new(FRAC_PI_8, Convention::Relative),
            polarization_contrast: 0.995,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub duration_s: f64,
    pub seed: u64,
    pub path_length_m: f64,
    /// Time-tagger resolution.
    pub tick_fs: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            duration_s: 900.0,
            seed: 1,
            path_length_m: 144e3,
            tick_fs: DEFAULT_TICK_FS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub theta_a_rad: f64,
    pub theta_b_rad: f64,
    pub duration_s: f64,
}

/// Coincidence extraction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    /// Full width of each coincidence window (closed interval).
    pub window_ticks: u64,
    pub bin_ticks: u64,
    pub correlogram_range_ticks: u64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            // 1.25 ns
            window_ticks: 8,
            bin_ticks: 1,
            // ±100 ns
            correlogram_range_ticks: 640,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    #[serde(default)]
    pub source: SourceParams,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default = "default_detectors")]
    pub detectors: [DetectorParams; 4],
    #[serde(default)]
    pub analyzers: AnalyzerConfig,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default = "default_plan")]
    pub chsh_plan: Vec<PlanEntry>,
    #[serde(default)]
    pub analysis: AnalysisParams,
}

fn default_detectors() -> [DetectorParams; 4] {
    [DetectorParams::default(); 4]
}

/// `(α,β), (α,β′), (α′,β), (α′,β′)` = `(0,π/8), (0,3π/8), (π/4,π/8), (π/4,3π/8)`.
pub fn default_plan() -> Vec<PlanEntry> {
    [(0.0, 1.0), (0.0, 3.0), (2.0, 1.0), (2.0, 3.0)]
        .into_iter()
        .map(|(a, b)| PlanEntry {
            theta_a_rad: a * FRAC_PI_8,
            theta_b_rad: b * FRAC_PI_8,
            duration_s: 900.0,
        })
        .collect()
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            source: SourceParams::default(),
            channel: ChannelParams::default(),
            detectors: default_detectors(),
            analyzers: AnalyzerConfig::default(),
            run: RunParams::default(),
            chsh_plan: default_plan(),
            analysis: AnalysisParams::default(),
        }
    }
}

fn check(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

impl LinkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn tick(&self) -> Result<TickDuration> {
        TickDuration::from_femtoseconds(self.run.tick_fs).map_err(|e| Error::Config(e.to_string()))
    }

    /// Time of flight over the free-space path.
    pub fn flight_time_s(&self) -> f64 {
        self.run.path_length_m / crate::chsh::SPEED_OF_LIGHT
    }

    /// Largest receiver efficiency relative to the reference detectors.
    pub fn relative_efficiency(&self) -> f64 {
        let eta = self.detectors.iter().map(|d| d.efficiency).fold(0.0, f64::max);
        eta / self.source.reference_efficiency
    }

    /// Probability that one photon survives link and detection at the
    /// static (median) loss.
    pub fn photon_survival(&self) -> f64 {
        10f64.powf(-self.channel.loss_db_per_photon / 10.0) * self.relative_efficiency()
    }

    /// Source visibility times analyzer contrast.
    pub fn state_visibility(&self) -> f64 {
        self.source.intrinsic_visibility * self.analyzers.polarization_contrast
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        check(
            s.pair_rate_hz > 0.0 && s.pair_rate_hz.is_finite(),
            format!("pair_rate_hz = {} must be positive", s.pair_rate_hz),
        )?;
        check(
            s.reference_efficiency > 0.0 && s.reference_efficiency <= 1.0,
            format!("reference_efficiency = {} outside (0, 1]", s.reference_efficiency),
        )?;
        check(
            s.fibre_delay_s >= 0.0 && s.fibre_delay_s.is_finite(),
            format!("fibre_delay_s = {} must be ≥ 0", s.fibre_delay_s),
        )?;
        check(
            (0.0..=1.0).contains(&s.intrinsic_visibility),
            format!("intrinsic_visibility = {} outside [0, 1]", s.intrinsic_visibility),
        )?;
        check(
            (0.0..=1.0).contains(&self.analyzers.polarization_contrast),
            format!(
                "polarization_contrast = {} outside [0, 1]",
                self.analyzers.polarization_contrast
            ),
        )?;
        check(
            self.channel.loss_db_per_photon >= 0.0 && self.channel.loss_db_per_photon.is_finite(),
            format!("loss_db_per_photon = {} must be ≥ 0", self.channel.loss_db_per_photon),
        )?;
        if let Some(sc) = self.channel.scintillation {
            check(
                sc.log_std_db >= 0.0 && sc.log_std_db.is_finite(),
                format!("scintillation log_std_db = {} must be ≥ 0", sc.log_std_db),
            )?;
            check(
                sc.coherence_time_s > 0.0,
                format!("scintillation coherence_time_s = {} must be > 0", sc.coherence_time_s),
            )?;
        }
        for (k, d) in self.detectors.iter().enumerate() {
            d.validate()
                .map_err(|e| Error::Config(format!("detector {}: {e}", k + 1)))?;
        }
        check(
            self.relative_efficiency() <= 1.0,
            "receiver efficiency exceeds the reference efficiency",
        )?;
        check(
            self.run.duration_s >= 0.0 && self.run.duration_s.is_finite(),
            format!("run duration_s = {} must be ≥ 0", self.run.duration_s),
        )?;
        check(
            self.run.path_length_m >= 0.0 && self.run.path_length_m.is_finite(),
            "path_length_m must be ≥ 0",
        )?;
        check(self.run.tick_fs > 0, "tick_fs must be positive")?;
        let a = &self.analysis;
        check(a.bin_ticks >= 1, "bin_ticks must be ≥ 1")?;
        check(
            a.correlogram_range_ticks >= a.bin_ticks,
            "correlogram_range_ticks must be ≥ bin_ticks",
        )?;
        for p in &self.chsh_plan {
            check(
                p.duration_s >= 0.0 && p.duration_s.is_finite(),
                format!("plan duration {} must be ≥ 0", p.duration_s),
            )?;
            check(
                p.theta_a_rad.is_finite() && p.theta_b_rad.is_finite(),
                "plan angles must be finite",
            )?;
        }
        Ok(())
    }

    /// The plan must hold 4 distinct angle pairs for a CHSH evaluation.
    pub fn validate_chsh_plan(&self) -> Result<()> {
        check(
            self.chsh_plan.len() == 4,
            format!("chsh_plan needs exactly 4 settings, has {}", self.chsh_plan.len()),
        )?;
        for (i, p) in self.chsh_plan.iter().enumerate() {
            for q in &self.chsh_plan[..i] {
                check(
                    (p.theta_a_rad - q.theta_a_rad).abs() > 1e-12 || (p.theta_b_rad - q.theta_b_rad).abs() > 1e-12,
                    "chsh_plan settings must be distinct",
                )?;
            }
        }
        Ok(())
    }

    /// Analyzer pair for one plan entry, keeping the configured conventions.
    pub fn plan_analyzers(&self, entry: &PlanEntry) -> (AnalyzerSetting, AnalyzerSetting) {
        (
            AnalyzerSetting::new(entry.theta_a_rad, self.analyzers.a.convention()),
            AnalyzerSetting::new(entry.theta_b_rad, self.analyzers.b.convention()),
        )
    }
}
