//! CHSH statistics, visibility-limited predictions and attenuation budgets.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{analysis, domain, Result};

/// Quantum-mechanical maximum of the CHSH parameter, 2√2.
pub const S_QM: f64 = 2.0 * SQRT_2;
/// Local hidden-variable bound.
pub const S_CLASSICAL: f64 = 2.0;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Coincidence counts between the T/R ports of analyzers A and B at one
/// angle pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    #[serde(rename = "theta_a_rad")]
    pub theta_a: f64,
    #[serde(rename = "theta_b_rad")]
    pub theta_b: f64,
    pub c_tt: u64,
    pub c_tr: u64,
    pub c_rt: u64,
    pub c_rr: u64,
}

impl SettingCounts {
    pub fn total(&self) -> u64 {
        self.c_tt + self.c_tr + self.c_rt + self.c_rr
    }

    /// Counts multiplied by `k`, e.g. for a longer integration.
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            c_tt: self.c_tt * k,
            c_tr: self.c_tr * k,
            c_rt: self.c_rt * k,
            c_rr: self.c_rr * k,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub e: f64,
    pub delta_e: f64,
}

/// `E = (C_TT + C_RR − C_TR − C_RT)/N` with first-order Poisson error
/// `ΔE = 2·√(C₊·C₋/N³)`.
pub fn correlation_with_error(counts: &SettingCounts) -> Result<CorrelationResult> {
    let n = counts.total();
    if n == 0 {
        return analysis("no coincidences at this setting");
    }
    let plus = (counts.c_tt + counts.c_rr) as f64;
    let minus = (counts.c_tr + counts.c_rt) as f64;
    let n = n as f64;
    Ok(CorrelationResult {
        e: (plus - minus) / n,
        delta_e: 2.0 * (plus * minus / (n * n * n)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub s: f64,
    pub delta_s: f64,
    /// `(S − 2)/ΔS`; infinite when ΔS is zero.
    pub sigmas_above_2: f64,
    pub qber: f64,
    pub delta_qber: f64,
    /// S exceeded 2√2; QBER was clamped to zero.
    pub exceeds_quantum_bound: bool,
}

/// `S = |E(α,β) − E(α,β′)| + |E(α′,β′) + E(α′,β)|`, with inputs ordered
/// `[E(α,β), E(α,β′), E(α′,β), E(α′,β′)]`, and `ΔS = √ΣΔE²`.
pub fn chsh_with_error(e: &[CorrelationResult; 4]) -> ChshResult {
    let [ab, ab2, a2b, a2b2] = *e;
    let s = (ab.e - ab2.e).abs() + (a2b2.e + a2b.e).abs();
    let delta_s = e.iter().map(|r| r.delta_e * r.delta_e).sum::<f64>().sqrt();
    let sigmas_above_2 = if delta_s > 0.0 {
        (s - S_CLASSICAL) / delta_s
    } else {
        f64::INFINITY.copysign(s - S_CLASSICAL)
    };
    let q = qber_from_s(s, delta_s).expect("S is a sum of absolute values");
    ChshResult {
        s,
        delta_s,
        sigmas_above_2,
        qber: q.qber,
        delta_qber: q.delta_qber,
        exceeds_quantum_bound: q.clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub qber: f64,
    pub delta_qber: f64,
    pub clamped: bool,
}

/// `QBER = (1 − S/2√2)/2`, `ΔQBER = ΔS/(4√2)`.
pub fn qber_from_s(s: f64, delta_s: f64) -> Result<QberEstimate> {
    if !(s >= 0.0) || !(delta_s >= 0.0) {
        return domain(format!("invalid S = {s} ± {delta_s}"));
    }
    let clamped = s > S_QM;
    let qber = if clamped { 0.0 } else { (1.0 - s / S_QM) / 2.0 };
    Ok(QberEstimate {
        qber,
        delta_qber: delta_s / (4.0 * SQRT_2),
        clamped,
    })
}

/// Largest S reachable at total visibility `v_tot`.
pub fn predict_s_max(v_tot: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_tot) {
        return domain(format!("visibility {v_tot} outside [0, 1]"));
    }
    Ok(v_tot * S_QM)
}

/// Visibility left after a flat accidental floor at the given
/// signal-to-accidental ratio is spread over all outcomes.
pub fn noise_visibility_from_snr(snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return domain(format!("SNR must be positive, got {snr}"));
    }
    if snr.is_infinite() {
        return Ok(1.0);
    }
    Ok(snr / (snr + 1.0))
}

pub fn loss_db(rate_in: f64, rate_out: f64) -> Result<f64> {
    if !(rate_in > 0.0) || !(rate_out > 0.0) {
        return domain(format!("rates must be positive, got {rate_in} → {rate_out}"));
    }
    Ok(10.0 * (rate_in / rate_out).log10())
}

/// Orders four settings on a 2×2 angle grid as `(α,β), (α,β′), (α′,β), (α′,β′)`
/// with `α < α′` and `β < β′`.
pub fn arrange_settings(settings: &[SettingCounts]) -> Result<[SettingCounts; 4]> {
    if settings.len() != 4 {
        return analysis(format!("CHSH needs exactly 4 settings, got {}", settings.len()));
    }
    let distinct = |vals: Vec<f64>| -> Vec<f64> {
        let mut v = vals;
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        v
    };
    let alphas = distinct(settings.iter().map(|s| s.theta_a).collect());
    let betas = distinct(settings.iter().map(|s| s.theta_b).collect());
    if alphas.len() != 2 || betas.len() != 2 {
        return analysis("settings must form a 2×2 grid of analyzer angles");
    }
    let find = |a: f64, b: f64| {
        settings
            .iter()
            .find(|s| (s.theta_a - a).abs() < 1e-12 && (s.theta_b - b).abs() < 1e-12)
            .copied()
    };
    let grid = [
        find(alphas[0], betas[0]),
        find(alphas[0], betas[1]),
        find(alphas[1], betas[0]),
        find(alphas[1], betas[1]),
    ];
    match grid {
        [Some(a), Some(b), Some(c), Some(d)] => Ok([a, b, c, d]),
        _ => analysis("settings must form a 2×2 grid of analyzer angles"),
    }
}

/// Per-setting correlations plus the combined CHSH result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshAnalysis {
    pub settings: Vec<SettingCounts>,
    pub correlations: Vec<CorrelationResult>,
    pub result: ChshResult,
}

pub fn analyze_counts(settings: &[SettingCounts]) -> Result<ChshAnalysis> {
    let ordered = arrange_settings(settings)?;
    let mut correlations = [CorrelationResult { e: 0.0, delta_e: 0.0 }; 4];
    for (slot, counts) in correlations.iter_mut().zip(&ordered) {
        *slot = correlation_with_error(counts)?;
    }
    Ok(ChshAnalysis {
        settings: ordered.to_vec(),
        correlations: correlations.to_vec(),
        result: chsh_with_error(&correlations),
    })
}

/// Measured or configured rates feeding an attenuation ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    pub local_pair_rate_hz: f64,
    pub received_pair_rate_hz: f64,
    /// Singles per arm at the source.
    pub local_singles_hz: f64,
    /// Signal singles summed over the receiver detectors.
    pub received_singles_hz: f64,
    /// Pair loss from random routing at the receiver beamsplitter.
    pub beamsplitter_db: f64,
    pub source_efficiency: f64,
    pub receiver_efficiency: f64,
    pub path_length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetStage {
    pub name: String,
    pub rate_in: f64,
    pub rate_out: f64,
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub stages: Vec<BudgetStage>,
    pub pair_total_db: f64,
    pub singles_total_db: f64,
    pub beamsplitter_db: f64,
    /// Receiver-vs-source detector efficiency penalty, per photon.
    pub detector_delta_db: f64,
    /// Pair loss left after beamsplitter and detector penalties.
    pub pair_link_db: f64,
    /// Per-photon link loss implied by the pair budget (half of it).
    pub single_link_db: f64,
    /// Per-photon link loss from the singles rates alone.
    pub single_link_from_singles_db: f64,
    /// `pair_link_db / single_link_from_singles_db`; 2 for a consistent budget.
    pub pair_to_single_ratio: f64,
    pub flight_time_s: f64,
}

fn stage(name: &str, rate_in: f64, rate_out: f64) -> Result<BudgetStage> {
    Ok(BudgetStage {
        name: name.to_owned(),
        rate_in,
        rate_out,
        attenuation_db: loss_db(rate_in, rate_out)?,
    })
}

pub fn budget_report(inputs: &BudgetInputs) -> Result<LossBudget> {
    if inputs.path_length_m < 0.0 || inputs.beamsplitter_db < 0.0 {
        return domain("path length and beamsplitter loss must be non-negative");
    }
    let pairs = stage(
        "pairs source→receiver",
        inputs.local_pair_rate_hz,
        inputs.received_pair_rate_hz,
    )?;
    let singles = stage(
        "singles source→receiver",
        2.0 * inputs.local_singles_hz,
        inputs.received_singles_hz,
    )?;
    let detector = stage(
        "detector efficiency (per photon)",
        inputs.source_efficiency,
        inputs.receiver_efficiency,
    )?;
    let pair_link_db = pairs.attenuation_db - inputs.beamsplitter_db - 2.0 * detector.attenuation_db;
    let single_link_from_singles_db = singles.attenuation_db - detector.attenuation_db;
    Ok(LossBudget {
        pair_total_db: pairs.attenuation_db,
        singles_total_db: singles.attenuation_db,
        beamsplitter_db: inputs.beamsplitter_db,
        detector_delta_db: detector.attenuation_db,
        pair_link_db,
        single_link_db: pair_link_db / 2.0,
        single_link_from_singles_db,
        pair_to_single_ratio: pair_link_db / single_link_from_singles_db,
        flight_time_s: inputs.path_length_m / SPEED_OF_LIGHT,
        stages: vec![pairs, singles, detector],
    })
}

/// Reference rates of a 144 km free-space link.
pub fn reference_budget_inputs() -> BudgetInputs {
    BudgetInputs {
        local_pair_rate_hz: 1e6,
        received_pair_rate_hz: 0.071,
        local_singles_hz: 3.3e6,
        received_singles_hz: 2500.0,
        beamsplitter_db: 3.0,
        source_efficiency: 0.40,
        receiver_efficiency: 0.25,
        path_length_m: 144e3,
    }
}
