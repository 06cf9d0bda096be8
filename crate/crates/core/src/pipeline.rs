//! Glue between the simulator and the analysis: per-setting coincidence
//! extraction, accidental estimates and simulated CHSH experiments.

use serde::{Deserialize, Serialize};

use crate::chsh::{analyze_counts, BudgetInputs, ChshAnalysis, SettingCounts};
use crate::coincidence::{effective_window, estimate_accidentals, CoincidenceWindows, PairScanner};
use crate::config::{LinkConfig, PlanEntry};
use crate::error::{analysis, Result};
use crate::sim::{derive_seed, simulate_setting};
use crate::timetag::TimeTag;

pub const ANALYZER_A_CHANNELS: [u8; 2] = [1, 2];
pub const ANALYZER_B_CHANNELS: [u8; 2] = [3, 4];

/// Windows at `±fibre_delay` with the configured width.
pub fn chsh_windows(config: &LinkConfig) -> Result<CoincidenceWindows> {
    let offset = config.tick()?.ticks(config.source.fibre_delay_s)?;
    CoincidenceWindows::symmetric(offset, config.analysis.window_ticks)
}

/// Coincidences and singles of one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingTally {
    pub counts: SettingCounts,
    /// Tags per channel 1–4.
    pub singles: [u64; 4],
    pub span_ticks: u64,
}

impl SettingTally {
    pub fn coincidences(&self) -> u64 {
        self.counts.total()
    }
}

/// Counts A–B coincidences, sorted into T/R port combinations, in one pass.
pub fn tally_stream<I>(tags: I, windows: &CoincidenceWindows, theta_a: f64, theta_b: f64) -> Result<SettingTally>
where
    I: IntoIterator<Item = Result<TimeTag>>,
{
    let mut scanner = PairScanner::new(&ANALYZER_A_CHANNELS, &ANALYZER_B_CHANNELS, windows.reach())?;
    let mut grid = [[0u64; 2]; 2];
    let mut singles = [0u64; 4];
    for tag in tags {
        let tag = tag?;
        singles[(tag.channel() - 1) as usize] += 1;
        scanner.push(tag, |a, b, delay| {
            if windows.contains(delay) {
                grid[(a.channel() - 1) as usize][(b.channel() - 3) as usize] += 1;
            }
        })?;
    }
    Ok(SettingTally {
        counts: SettingCounts {
            theta_a,
            theta_b,
            c_tt: grid[0][0],
            c_tr: grid[0][1],
            c_rt: grid[1][0],
            c_rr: grid[1][1],
        },
        singles,
        span_ticks: scanner.span(),
    })
}

pub fn tally(tags: &[TimeTag], windows: &CoincidenceWindows, theta_a: f64, theta_b: f64) -> Result<SettingTally> {
    tally_stream(tags.iter().map(|&t| Ok(t)), windows, theta_a, theta_b)
}

/// Accidental coincidences expected over `duration` from the singles of
/// all four A–B channel pairs.
pub fn expected_accidentals(singles: &[u64; 4], duration: f64, windows: &CoincidenceWindows, tick_s: f64) -> f64 {
    if !(duration > 0.0) {
        return 0.0;
    }
    let rate = |c: usize| singles[c] as f64 / duration;
    let pairs: Vec<(f64, f64)> = [(0, 2), (0, 3), (1, 2), (1, 3)]
        .iter()
        .map(|&(i, j)| (rate(i), rate(j)))
        .collect();
    estimate_accidentals(
        &pairs,
        effective_window(windows, tick_s),
        windows.centers().len() as u32,
    ) * duration
}

/// `(coincidences − accidentals) / accidentals` over the same windows.
pub fn coincidence_snr(coincidences: u64, accidentals: f64) -> Result<f64> {
    if !(accidentals > 0.0) {
        return analysis("no accidental floor to compare against");
    }
    Ok((coincidences as f64 - accidentals) / accidentals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRun {
    pub entry: PlanEntry,
    pub seed: u64,
    pub tally: SettingTally,
    pub accidentals_expected: f64,
}

impl SettingRun {
    pub fn snr(&self) -> Result<f64> {
        coincidence_snr(self.tally.coincidences(), self.accidentals_expected)
    }
}

/// Simulates and tallies plan entry `index` with its derived seed.
pub fn simulate_plan_entry(config: &LinkConfig, index: usize, seed: u64) -> Result<SettingRun> {
    let Some(&entry) = config.chsh_plan.get(index) else {
        return analysis(format!("plan has no entry {index}"));
    };
    let (a, b) = config.plan_analyzers(&entry);
    let run_seed = derive_seed(seed, index as u64);
    let out = simulate_setting(config, a, b, entry.duration_s, run_seed, false)?;
    let windows = chsh_windows(config)?;
    let tally = tally(&out.tags, &windows, entry.theta_a_rad, entry.theta_b_rad)?;
    let tick_s = config.tick()?.seconds();
    Ok(SettingRun {
        entry,
        seed: run_seed,
        accidentals_expected: expected_accidentals(&tally.singles, entry.duration_s, &windows, tick_s),
        tally,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedChsh {
    pub runs: Vec<SettingRun>,
    pub analysis: ChshAnalysis,
}

impl SimulatedChsh {
    pub fn from_runs(runs: Vec<SettingRun>) -> Result<Self> {
        let counts: Vec<SettingCounts> = runs.iter().map(|r| r.tally.counts).collect();
        Ok(Self {
            analysis: analyze_counts(&counts)?,
            runs,
        })
    }

    /// SNR of all settings pooled.
    pub fn snr(&self) -> Result<f64> {
        let c = self.runs.iter().map(|r| r.tally.coincidences()).sum();
        coincidence_snr(c, self.runs.iter().map(|r| r.accidentals_expected).sum())
    }
}

/// Full four-setting experiment, sequentially.
pub fn simulate_chsh(config: &LinkConfig, seed: u64) -> Result<SimulatedChsh> {
    config.validate_chsh_plan()?;
    let runs = (0..config.chsh_plan.len())
        .map(|i| simulate_plan_entry(config, i, seed))
        .collect::<Result<Vec<_>>>()?;
    SimulatedChsh::from_runs(runs)
}

/// Rates for an attenuation ledger measured from simulated runs.
///
/// Accidentals are subtracted from the coincidences and the configured noise
/// rates from the singles.
pub fn measured_budget_inputs(config: &LinkConfig, runs: &[SettingRun]) -> Result<BudgetInputs> {
    let duration: f64 = runs.iter().map(|r| r.entry.duration_s).sum();
    if !(duration > 0.0) {
        return analysis("runs cover no time");
    }
    let coincidences: u64 = runs.iter().map(|r| r.tally.coincidences()).sum();
    let accidentals: f64 = runs.iter().map(|r| r.accidentals_expected).sum();
    let singles: u64 = runs.iter().flat_map(|r| r.tally.singles).sum();
    let noise_hz: f64 = config.detectors.iter().map(|d| d.noise_rate_hz()).sum();
    let receiver_efficiency = config.detectors.iter().map(|d| d.efficiency).fold(0.0, f64::max);
    Ok(BudgetInputs {
        local_pair_rate_hz: config.source.pair_rate_hz,
        received_pair_rate_hz: (coincidences as f64 - accidentals) / duration,
        // the model has no unpaired singles, so each arm sees the pair rate
        local_singles_hz: config.source.pair_rate_hz,
        received_singles_hz: singles as f64 / duration - noise_hz,
        beamsplitter_db: 10.0 * 2f64.log10(),
        source_efficiency: config.source.reference_efficiency,
        receiver_efficiency,
        path_length_m: config.run.path_length_m,
    })
}
