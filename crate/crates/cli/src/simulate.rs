use std::path::{Path, PathBuf};

use clap::Args;
use qlink_core::io::write_all;
use qlink_core::sim::derive_seed;
use qlink_core::{simulate_setting, Format, LinkConfig, Origin, SimOutput};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{self, Emitted};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Link configuration (JSON); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Bin)]
    pub format: FormatArg,
    /// One acquisition with the configured analyzers for `run.duration_s`
    /// instead of the four-setting CHSH plan.
    #[arg(long)]
    pub single: bool,
    /// Skip the ground-truth sidecar files.
    #[arg(long)]
    pub no_truth: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FormatArg {
    Bin,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Bin => Format::Bin,
            FormatArg::Csv => Format::Csv,
        }
    }
}

/// Index of a simulation written by `qlink simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: String,
    pub seed: u64,
    pub format: Format,
    pub runs: Vec<ManifestRun>,
    pub config: LinkConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRun {
    /// Relative to the manifest's directory.
    pub file: String,
    pub truth: Option<String>,
    pub theta_a_rad: f64,
    pub theta_b_rad: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub tags: u64,
    pub pair_events: u64,
}

pub const MANIFEST: &str = "simulate.json";

#[derive(Serialize)]
struct TruthRow {
    tick: u64,
    channel: u8,
    origin: &'static str,
    pair_id: Option<u64>,
    photon: Option<u8>,
    emitted_time_s: f64,
    partner_detected: bool,
}

fn write_truth(path: &Path, out: &SimOutput) -> CliResult<()> {
    let csv_err = |source| CliError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (tag, t) in out.tags.iter().zip(out.truth.iter().flatten()) {
        let (origin, pair_id, photon) = match t.origin {
            Origin::Pair { id, photon } => ("pair", Some(id), Some(photon)),
            Origin::Dark => ("dark", None, None),
            Origin::Background => ("background", None, None),
        };
        w.serialize(TruthRow {
            tick: tag.tick(),
            channel: tag.channel(),
            origin,
            pair_id,
            photon,
            emitted_time_s: t.emitted_time_s,
            partner_detected: t.partner_detected,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn run(args: &SimulateArgs) -> CliResult<Emitted> {
    let mut config = files::load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    config.validate()?;
    let format = Format::from(args.format);
    let seed = config.run.seed;

    // (stem, θ_A, θ_B, duration, seed)
    let jobs: Vec<(String, f64, f64, f64, u64)> = if args.single {
        let (a, b) = (config.analyzers.a, config.analyzers.b);
        vec![("run".into(), a.angle(), b.angle(), config.run.duration_s, seed)]
    } else {
        config.validate_chsh_plan()?;
        config
            .chsh_plan
            .iter()
            .enumerate()
            .map(|(k, e)| {
                (
                    format!("setting_{k}"),
                    e.theta_a_rad,
                    e.theta_b_rad,
                    e.duration_s,
                    derive_seed(seed, k as u64),
                )
            })
            .collect()
    };

    files::create_dir(&args.out)?;
    let mut runs = Vec::new();
    for (k, (stem, theta_a, theta_b, duration, run_seed)) in jobs.into_iter().enumerate() {
        let (a, b) = if args.single {
            (config.analyzers.a, config.analyzers.b)
        } else {
            config.plan_analyzers(&config.chsh_plan[k])
        };
        let out = simulate_setting(&config, a, b, duration, run_seed, !args.no_truth)?;
        let file = format!("{stem}.{}", format.extension());
        let path = args.out.join(&file);
        write_all(&path, format, &out.header, &out.tags).map_err(CliError::at(&path))?;
        let truth = if args.no_truth {
            None
        } else {
            let name = format!("{stem}_truth.csv");
            write_truth(&args.out.join(&name), &out)?;
            Some(name)
        };
        runs.push(ManifestRun {
            file,
            truth,
            theta_a_rad: theta_a,
            theta_b_rad: theta_b,
            duration_s: duration,
            seed: run_seed,
            tags: out.tags.len() as u64,
            pair_events: out.stats.pair_events,
        });
    }

    let manifest = Manifest {
        provenance: "simulated".into(),
        seed,
        format,
        runs,
        config,
    };
    let json = files::to_json(&manifest);
    files::write(&args.out, MANIFEST, &json)?;

    let mut text = format!(
        "simulated {} acquisition(s), seed {seed}, into {}\n",
        manifest.runs.len(),
        args.out.display()
    );
    for r in &manifest.runs {
        text.push_str(&format!(
            "  {:<16} θA = {:.4} rad, θB = {:.4} rad, {:>7.1} s, {} tags\n",
            r.file, r.theta_a_rad, r.theta_b_rad, r.duration_s, r.tags
        ));
    }
    Ok(Emitted { text, json })
}
