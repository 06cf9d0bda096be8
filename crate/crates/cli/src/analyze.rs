use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use clap::Args;
use qlink_core::io::open;
use qlink_core::pipeline::{self, SettingRun, SettingTally};
use qlink_core::{
    analyze_counts, cross_correlogram_stream, find_peaks, fit_cosine, target_setting, BellLabel, ChannelPair,
    ChshAnalysis, CosineFit, Error, LinkConfig, PeakSearch, PlanEntry, SettingCounts, VisibilityPoint,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{self, Emitted};
use crate::simulate::{Manifest, MANIFEST};

// ------------------------------------------------------------------ correlate

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Tag file (`.csv` or binary).
    pub input: PathBuf,
    /// Channel pair `FIRST,SECOND`; repeat to sum several pairs.
    /// Defaults to the four A–B pairs.
    #[arg(long = "pair", value_parser = parse_pair)]
    pub pairs: Vec<ChannelPair>,
    /// Half range in ticks; defaults to `analysis.correlogram_range_ticks`.
    #[arg(long)]
    pub range: Option<u64>,
    /// Bin width in ticks; defaults to `analysis.bin_ticks`.
    #[arg(long)]
    pub bin: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<ChannelPair, String> {
    let (a, b) = s.split_once(',').ok_or("expected FIRST,SECOND")?;
    let channel = |x: &str| match x.trim().parse::<u8>() {
        Ok(c @ 1..=4) => Ok(c),
        _ => Err(format!("channel must be 1–4, got {x:?}")),
    };
    Ok(ChannelPair::new(channel(a)?, channel(b)?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PeakLine {
    pub center_ticks: f64,
    pub center_ns: f64,
    pub fwhm_ticks: f64,
    pub fwhm_ps: f64,
    pub height: f64,
    pub background_per_bin: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PeaksReport {
    pub input: PathBuf,
    pub pairs: Vec<ChannelPair>,
    pub range_ticks: u64,
    pub bin_ticks: u64,
    pub tick_fs: u64,
    pub coincidences_in_range: u64,
    pub span_ticks: u64,
    pub peaks: Vec<PeakLine>,
}

pub fn correlate(args: &CorrelateArgs) -> CliResult<Emitted> {
    let config = files::load_config(args.config.as_deref())?;
    let range = args.range.unwrap_or(config.analysis.correlogram_range_ticks);
    let bin = args.bin.unwrap_or(config.analysis.bin_ticks);
    let pairs = if args.pairs.is_empty() {
        pipeline::ANALYZER_A_CHANNELS
            .iter()
            .flat_map(|&a| {
                pipeline::ANALYZER_B_CHANNELS
                    .iter()
                    .map(move |&b| ChannelPair::new(a, b))
            })
            .collect()
    } else {
        args.pairs.clone()
    };

    let path = args.input.as_path();
    let mut total = None;
    let mut tick_fs = 0;
    // one streaming pass per pair keeps memory flat on large files
    for &pair in &pairs {
        let reader = open(path).map_err(CliError::at(path))?;
        tick_fs = reader.header().tick_femtoseconds;
        let (g, _) = cross_correlogram_stream(reader, pair, range, bin).map_err(CliError::at(path))?;
        match &mut total {
            None => total = Some(g),
            Some(t) => qlink_core::Correlogram::accumulate(t, &g)?,
        }
    }
    let g = total.expect("at least one pair");
    let tick_ps = tick_fs as f64 / 1e3;
    let peaks = find_peaks(&g, &PeakSearch::default())?
        .into_iter()
        .map(|p| PeakLine {
            center_ticks: p.center,
            center_ns: p.center * tick_ps / 1e3,
            fwhm_ticks: p.fwhm,
            fwhm_ps: p.fwhm * tick_ps,
            height: p.height,
            background_per_bin: p.background_per_bin,
        })
        .collect();
    let report = PeaksReport {
        input: args.input.clone(),
        pairs,
        range_ticks: range,
        bin_ticks: bin,
        tick_fs,
        coincidences_in_range: g.total(),
        span_ticks: g.span_ticks,
        peaks,
    };
    let json = files::to_json(&report);
    if let Some(dir) = &args.out {
        files::write(dir, "correlogram.csv", &g.to_csv())?;
        files::write(dir, "peaks.json", &json)?;
    }
    let mut text = format!(
        "{}: {} coincidences within ±{} ticks over {} pair(s), {} peak(s)\n",
        report.input.display(),
        report.coincidences_in_range,
        range,
        report.pairs.len(),
        report.peaks.len()
    );
    for p in &report.peaks {
        text.push_str(&format!(
            "  {:+9.3} ns  FWHM {:6.0} ps  height {:6.0}  background {:.2}/bin\n",
            p.center_ns, p.fwhm_ps, p.height, p.background_per_bin
        ));
    }
    Ok(Emitted { text, json })
}

// ------------------------------------------------------------------ chsh

#[derive(Debug, Args)]
pub struct ChshArgs {
    /// Four tag files in CHSH-plan order, or one `simulate.json` manifest.
    pub inputs: Vec<PathBuf>,
    /// JSON list of four `{theta_a_rad, theta_b_rad, c_tt, c_tr, c_rt, c_rr}` objects.
    #[arg(long, conflicts_with = "inputs")]
    pub counts: Option<PathBuf>,
    /// Supplies the plan angles, durations and windows for bare tag files.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the counts behind a CHSH result came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Provenance {
    SuppliedCounts { file: PathBuf },
    TagStreams { files: Vec<PathBuf> },
    Simulated { manifest: PathBuf, seed: u64 },
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::SuppliedCounts { file } => format!("supplied counts ({})", file.display()),
            Provenance::TagStreams { files } => format!("measured from {} tag streams", files.len()),
            Provenance::Simulated { seed, .. } => format!("simulated (seed {seed})"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamSetting {
    pub file: PathBuf,
    pub entry: PlanEntry,
    pub tally: SettingTally,
    pub accidentals_expected: f64,
    pub snr: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Streams {
    pub settings: Vec<StreamSetting>,
    pub pooled_snr: Option<f64>,
    pub config: LinkConfig,
}

impl Streams {
    pub fn runs(&self) -> Vec<SettingRun> {
        self.settings
            .iter()
            .map(|s| SettingRun {
                entry: s.entry,
                seed: 0,
                tally: s.tally,
                accidentals_expected: s.accidentals_expected,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChshReport {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub analysis: ChshAnalysis,
    pub streams: Option<Streams>,
}

fn tally_file(path: &Path, entry: PlanEntry, config: &LinkConfig) -> CliResult<StreamSetting> {
    let windows = pipeline::chsh_windows(config)?;
    let reader = open(path).map_err(CliError::at(path))?;
    if reader.header().tick_femtoseconds != config.run.tick_fs {
        return Err(CliError::at(path)(Error::Config(format!(
            "stream tick {} fs differs from configured {} fs",
            reader.header().tick_femtoseconds,
            config.run.tick_fs
        ))));
    }
    let tally =
        pipeline::tally_stream(reader, &windows, entry.theta_a_rad, entry.theta_b_rad).map_err(CliError::at(path))?;
    let accidentals =
        pipeline::expected_accidentals(&tally.singles, entry.duration_s, &windows, config.tick()?.seconds());
    Ok(StreamSetting {
        file: path.to_owned(),
        entry,
        snr: pipeline::coincidence_snr(tally.coincidences(), accidentals).ok(),
        tally,
        accidentals_expected: accidentals,
    })
}

pub fn chsh(args: &ChshArgs) -> CliResult<Emitted> {
    let report = match (&args.counts, args.inputs.as_slice()) {
        (Some(file), _) => {
            let counts: Vec<SettingCounts> = files::read_json(file)?;
            ChshReport {
                provenance: Provenance::SuppliedCounts { file: file.clone() },
                analysis: analyze_counts(&counts)?,
                streams: None,
            }
        }
        (None, []) => return Err(CliError::Usage("chsh needs --counts or tag-stream inputs".into())),
        (None, [manifest])
            if manifest.file_name().is_some_and(|n| n == MANIFEST)
                || manifest.extension().is_some_and(|e| e == "json") =>
        {
            let m: Manifest = files::read_json(manifest)?;
            let base = manifest.parent().unwrap_or(Path::new(""));
            let jobs = m
                .runs
                .iter()
                .map(|r| {
                    let entry = PlanEntry {
                        theta_a_rad: r.theta_a_rad,
                        theta_b_rad: r.theta_b_rad,
                        duration_s: r.duration_s,
                    };
                    (base.join(&r.file), entry)
                })
                .collect();
            from_streams(
                jobs,
                m.config,
                Provenance::Simulated {
                    manifest: manifest.clone(),
                    seed: m.seed,
                },
            )?
        }
        (None, inputs) => {
            let config = files::load_config(args.config.as_deref())?;
            config.validate_chsh_plan()?;
            if inputs.len() != config.chsh_plan.len() {
                return Err(CliError::Usage(format!(
                    "expected {} tag files (one per plan entry), got {}",
                    config.chsh_plan.len(),
                    inputs.len()
                )));
            }
            let jobs = inputs.iter().cloned().zip(config.chsh_plan.iter().copied()).collect();
            from_streams(jobs, config, Provenance::TagStreams { files: inputs.to_vec() })?
        }
    };

    let json = files::to_json(&report);
    if let Some(dir) = &args.out {
        files::write(dir, "chsh.json", &json)?;
    }
    Ok(Emitted {
        text: render_chsh(&report),
        json,
    })
}

fn from_streams(jobs: Vec<(PathBuf, PlanEntry)>, config: LinkConfig, provenance: Provenance) -> CliResult<ChshReport> {
    let settings = jobs
        .par_iter()
        .map(|(path, entry)| tally_file(path, *entry, &config))
        .collect::<CliResult<Vec<_>>>()?;
    let counts: Vec<SettingCounts> = settings.iter().map(|s| s.tally.counts).collect();
    let analysis = analyze_counts(&counts)?;
    let c: u64 = settings.iter().map(|s| s.tally.coincidences()).sum();
    let acc: f64 = settings.iter().map(|s| s.accidentals_expected).sum();
    Ok(ChshReport {
        provenance,
        analysis,
        streams: Some(Streams {
            pooled_snr: pipeline::coincidence_snr(c, acc).ok(),
            settings,
            config,
        }),
    })
}

pub fn render_chsh(r: &ChshReport) -> String {
    let mut s = format!("CHSH from {}\n", r.provenance.label());
    s.push_str("  θA (rad)  θB (rad)      N        E       ΔE\n");
    for (c, e) in r.analysis.settings.iter().zip(&r.analysis.correlations) {
        s.push_str(&format!(
            "  {:8.4}  {:8.4}  {:5}  {:+7.3}  {:7.3}\n",
            c.theta_a,
            c.theta_b,
            c.total(),
            e.e,
            e.delta_e
        ));
    }
    let res = &r.analysis.result;
    s.push_str(&format!(
        "  S = {:.3} ± {:.3} ({:.1}σ above 2), QBER = {:.2}% ± {:.2}%\n",
        res.s,
        res.delta_s,
        res.sigmas_above_2,
        100.0 * res.qber,
        100.0 * res.delta_qber
    ));
    if let Some(snr) = r.streams.as_ref().and_then(|st| st.pooled_snr) {
        s.push_str(&format!("  coincidence SNR = {snr:.1}:1\n"));
    }
    s
}

// ------------------------------------------------------------------ phase-fit

#[derive(Debug, Args)]
pub struct PhaseFitArgs {
    /// CSV with columns `pump_phase_rad,visibility,sigma`.
    pub input: PathBuf,
    /// Bell state to steer the source to.
    #[arg(long, default_value = "psi-minus")]
    pub target: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PhaseReport {
    pub input: PathBuf,
    pub points: usize,
    pub fit: CosineFit,
    pub v0_sigma: f64,
    pub phi0_sigma: f64,
    pub target: BellLabel,
    pub target_pump_phase_rad: Option<f64>,
}

pub fn phase_fit(args: &PhaseFitArgs) -> CliResult<Emitted> {
    let target: BellLabel = serde_json::from_value(serde_json::Value::String(args.target.clone()))
        .map_err(|e| CliError::Usage(format!("--target: {e}")))?;
    let path = &args.input;
    let mut reader = csv::Reader::from_path(path).map_err(|source| CliError::Csv {
        path: path.clone(),
        source,
    })?;
    let points = reader
        .deserialize::<VisibilityPoint>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| CliError::Csv {
            path: path.clone(),
            source,
        })?;
    let fit = fit_cosine(&points).map_err(CliError::at(path))?;
    let report = PhaseReport {
        input: path.clone(),
        points: points.len(),
        v0_sigma: fit.v0_sigma(),
        phi0_sigma: fit.phi0_sigma(),
        target,
        target_pump_phase_rad: target_setting(&fit, target).ok(),
        fit,
    };
    let json = files::to_json(&report);
    if let Some(dir) = &args.out {
        files::write(dir, "phase_fit.json", &json)?;
        let mut curve = String::from("pump_phase_rad,visibility_fit\n");
        for k in 0..=180 {
            let chi = TAU * k as f64 / 180.0;
            curve.push_str(&format!("{chi},{}\n", fit.evaluate(chi)));
        }
        files::write(dir, "phase_fit_curve.csv", &curve)?;
    }
    let mut text = format!(
        "{}: {} points, V(χ) = {:.3}·cos(χ − {:.3})  [V₀ ± {:.3}, χ₀ ± {:.3} rad, rms residual {:.4}]\n",
        path.display(),
        report.points,
        fit.v0,
        fit.phi0,
        report.v0_sigma,
        report.phi0_sigma,
        fit.residual_rms
    );
    match report.target_pump_phase_rad {
        Some(chi) => text.push_str(&format!("  set pump phase to {chi:.3} rad for {}\n", args.target)),
        None => text.push_str("  fitted amplitude is zero; target phase undefined\n"),
    }
    Ok(Emitted { text, json })
}
