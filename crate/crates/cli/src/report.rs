use std::path::PathBuf;

use clap::{ArgGroup, Args};
use qlink_core::chsh::{budget_report, reference_budget_inputs};
use qlink_core::pipeline::measured_budget_inputs;
use qlink_core::{combine_visibilities, noise_visibility_from_snr, predict_s_max, LossBudget, VisibilityBudget};
use serde::Serialize;

use crate::analyze::{render_chsh, ChshReport, PeaksReport, PhaseReport};
use crate::error::CliResult;
use crate::files::{self, Emitted};

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("artifacts").required(true).multiple(true).args(["chsh", "peaks", "phase"])))]
pub struct ReportArgs {
    /// `chsh.json` written by `qlink chsh`.
    #[arg(long)]
    pub chsh: Option<PathBuf>,
    /// `peaks.json` written by `qlink correlate`.
    #[arg(long)]
    pub peaks: Option<PathBuf>,
    /// `phase_fit.json` written by `qlink phase-fit`.
    #[arg(long)]
    pub phase: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Figure {
    pub name: &'static str,
    pub value: f64,
    pub uncertainty: Option<f64>,
    pub unit: &'static str,
    pub provenance: String,
}

#[derive(Debug, Serialize)]
pub struct BudgetSection {
    pub provenance: String,
    pub budget: LossBudget,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub figures: Vec<Figure>,
    pub chsh: Option<ChshReport>,
    pub budgets: Vec<BudgetSection>,
    pub peaks: Option<PeaksReport>,
    pub phase: Option<PhaseReport>,
}

fn figure(name: &'static str, value: f64, uncertainty: Option<f64>, unit: &'static str, provenance: &str) -> Figure {
    Figure {
        name,
        value,
        uncertainty,
        unit,
        provenance: provenance.to_owned(),
    }
}

pub fn run(args: &ReportArgs) -> CliResult<Emitted> {
    let chsh: Option<ChshReport> = args.chsh.as_deref().map(files::read_json).transpose()?;
    let peaks: Option<PeaksReport> = args.peaks.as_deref().map(files::read_json).transpose()?;
    let phase: Option<PhaseReport> = args.phase.as_deref().map(files::read_json).transpose()?;

    let mut figures = Vec::new();
    let mut budgets = Vec::new();
    if let Some(c) = &chsh {
        let from = c.provenance.label();
        let r = &c.analysis.result;
        figures.push(figure("S", r.s, Some(r.delta_s), "", &from));
        figures.push(figure("violation", r.sigmas_above_2, None, "σ", &from));
        figures.push(figure("QBER", 100.0 * r.qber, Some(100.0 * r.delta_qber), "%", &from));
        if let Some(st) = &c.streams {
            let duration: f64 = st.settings.iter().map(|s| s.entry.duration_s).sum();
            let coincidences: u64 = st.settings.iter().map(|s| s.tally.coincidences()).sum();
            figures.push(figure(
                "coincidence rate",
                coincidences as f64 / duration,
                None,
                "1/s",
                &from,
            ));
            if let Some(snr) = st.pooled_snr {
                figures.push(figure("SNR", snr, None, ":1", &from));
                let v_noise = noise_visibility_from_snr(snr)?;
                let v_tot = combine_visibilities(&VisibilityBudget {
                    v_noise,
                    v_source: st.config.source.intrinsic_visibility,
                    v_polarization: st.config.analyzers.polarization_contrast,
                })?;
                let derived = format!("derived from SNR and configured visibilities, {from}");
                figures.push(figure("V_tot", v_tot, None, "", &derived));
                figures.push(figure("S_max", predict_s_max(v_tot)?, None, "", &derived));
            }
            let inputs = measured_budget_inputs(&st.config, &st.runs())?;
            budgets.push(BudgetSection {
                provenance: from.clone(),
                budget: budget_report(&inputs)?,
            });
        }
    }
    budgets.push(BudgetSection {
        provenance: "reference rates of the 144 km link".into(),
        budget: budget_report(&reference_budget_inputs())?,
    });
    if let Some(p) = &peaks {
        let from = format!("correlogram of {}", p.input.display());
        for (k, line) in p.peaks.iter().enumerate().take(2) {
            let name = if k == 0 { "peak 1 centre" } else { "peak 2 centre" };
            figures.push(figure(name, line.center_ns, None, "ns", &from));
            let name = if k == 0 { "peak 1 FWHM" } else { "peak 2 FWHM" };
            figures.push(figure(name, line.fwhm_ps, None, "ps", &from));
        }
    }
    if let Some(p) = &phase {
        let from = format!("cosine fit of {}", p.input.display());
        figures.push(figure("V0", p.fit.v0, Some(p.v0_sigma), "", &from));
        figures.push(figure("χ0", p.fit.phi0, Some(p.phi0_sigma), "rad", &from));
    }

    let report = Report {
        figures,
        chsh,
        budgets,
        peaks,
        phase,
    };
    let text = render(&report);
    let json = files::to_json(&report);
    if let Some(dir) = &args.out {
        files::write(dir, "report.txt", &text)?;
        files::write(dir, "report.json", &json)?;
    }
    Ok(Emitted { text, json })
}

fn render(r: &Report) -> String {
    let mut s = String::new();
    if let Some(c) = &r.chsh {
        s.push_str(&render_chsh(c));
        s.push('\n');
    }
    s.push_str("figure                 value             provenance\n");
    for f in &r.figures {
        let value = match f.uncertainty {
            Some(u) => format!("{:.4} ± {:.4}", f.value, u),
            None => format!("{:.4}", f.value),
        };
        s.push_str(&format!(
            "{:<22} {:<17} {}\n",
            f.name,
            format!("{value} {}", f.unit).trim_end(),
            f.provenance
        ));
    }
    for b in &r.budgets {
        let l = &b.budget;
        s.push_str(&format!("\nloss budget ({})\n", b.provenance));
        for st in &l.stages {
            s.push_str(&format!(
                "  {:<34} {:>10.4e} → {:<10.4e} {:6.2} dB\n",
                st.name, st.rate_in, st.rate_out, st.attenuation_db
            ));
        }
        s.push_str(&format!(
            "  pair link {:.2} dB, single link {:.2} dB (from singles), ratio {:.2}, flight time {:.3} ms\n",
            l.pair_link_db,
            l.single_link_from_singles_db,
            l.pair_to_single_ratio,
            1e3 * l.flight_time_s
        ));
    }
    s
}
