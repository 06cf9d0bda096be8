//! Monte-Carlo model of the link: pair source, lossy free-space channel,
//! beamsplitter, two polarization analyzers and four detectors feeding one
//! time tagger.
//!
//! Only pairs with at least one surviving photon are ever generated (see
//! [`thin_pair_process`]). The acquisition covers `[0, duration)` in steady
//! state: pairs are emitted from slightly before `0` so that photons still in
//! flight at the start are recorded too.

mod detector;
mod outcome;
mod poisson;

pub use detector::{detect_photon, generate_noise_tags, DetectorModel};
pub use outcome::{sample_pair_outcome, Analyzer, OutcomeSampler};
pub use poisson::{sample_poisson_events, thin_pair_process, ThinnedPairs};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::LinkConfig;
use crate::error::{Error, Result};
use crate::io::StreamHeader;
use crate::polarization::{apply_werner, make_bell_state, AnalyzerSetting, Photon};
use crate::timetag::{Detector, TimeTag, TICK_LIMIT};

pub type SimRng = ChaCha8Rng;

/// Independent, reproducible random stream `stream` of `seed`.
pub fn component_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `index`-th sub-run of a multi-run experiment.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_PAIRS: u64 = 1;
const STREAM_OPTICS: u64 = 2;
const STREAM_JITTER: u64 = 3;
const STREAM_SCINTILLATION: u64 = 4;
const STREAM_NOISE: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Origin {
    Pair { id: u64, photon: u8 },
    Dark,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub origin: Origin,
    /// Emission time of the pair (noise: the detection time itself).
    /// Negative for pairs emitted before the acquisition started.
    pub emitted_time_s: f64,
    /// Whether the other photon of the same pair also produced a tag.
    pub partner_detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub duration_s: f64,
    pub pair_rate_hz: f64,
    /// Static per-photon survival including relative detector efficiency.
    pub photon_survival: f64,
    pub flight_time_s: f64,
    /// Pairs with at least one surviving photon.
    pub pair_events: u64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub header: StreamHeader,
    /// Sorted by `(tick, channel)`, no duplicates.
    pub tags: Vec<TimeTag>,
    /// Aligned with `tags` when truth recording was requested.
    pub truth: Option<Vec<TruthEntry>>,
    pub stats: SimStats,
}

#[derive(Clone, Copy)]
struct RawEvent {
    time: f64,
    channel: u8,
    truth: u32,
}

const NO_TRUTH: u32 = u32::MAX;

/// Full run at the configured analyzer angles and run duration, with truth.
pub fn simulate_run(config: &LinkConfig, seed: u64) -> Result<SimOutput> {
    simulate_setting(
        config,
        config.analyzers.a,
        config.analyzers.b,
        config.run.duration_s,
        seed,
        true,
    )
}

/// Simulates one acquisition at fixed analyzer settings.
pub fn simulate_setting(
    config: &LinkConfig,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
    duration: f64,
    seed: u64,
    record_truth: bool,
) -> Result<SimOutput> {
    config.validate()?;
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::Config(format!("duration {duration} must be finite and ≥ 0")));
    }
    let tick = config.tick()?;
    if tick.quantize(duration)? >= TICK_LIMIT {
        return Err(Error::Range(format!(
            "duration {duration} s overflows the tick counter"
        )));
    }

    let state = apply_werner(&make_bell_state(config.source.state), config.state_visibility())?;
    let sampler = OutcomeSampler::new(&state, a, b)?;

    let flight = config.flight_time_s();
    let delay = config.source.fibre_delay_s;
    let eta_max = config.detectors.iter().map(|d| d.efficiency).fold(0.0, f64::max);
    let accept: Vec<f64> = config
        .detectors
        .iter()
        .map(|d| if eta_max > 0.0 { d.efficiency / eta_max } else { 0.0 })
        .collect();
    let uniform_efficiency = accept.iter().all(|&x| x == 1.0);
    let jitter: Vec<Option<Normal<f64>>> = config
        .detectors
        .iter()
        .map(|d| detector::jitter_distribution(d.jitter_sigma_s))
        .collect();
    let max_jitter = config.detectors.iter().map(|d| d.jitter_sigma_s).fold(0.0, f64::max);
    let lead = flight + delay + 12.0 * max_jitter;

    let p_static = config.photon_survival();
    let rate = config.source.pair_rate_hz;

    let mut pair_rng = component_rng(seed, STREAM_PAIRS);
    let mut optics_rng = component_rng(seed, STREAM_OPTICS);
    let mut jitter_rng = component_rng(seed, STREAM_JITTER);
    let mut scint_rng = component_rng(seed, STREAM_SCINTILLATION);

    let mut raw: Vec<RawEvent> = Vec::new();
    let mut truth_raw: Vec<(Origin, f64)> = Vec::new();
    let mut next_id: u64 = 0;
    let mut pair_tags: Vec<u8> = Vec::new();

    let segments = segments(config, -lead, duration, p_static, &mut scint_rng)?;
    for (s0, s1, p) in segments {
        let thinned = poisson::thin_window(rate, p, p, s0, s1, &mut pair_rng);
        let mut merged: Vec<(f64, u8)> = Vec::with_capacity(thinned.len());
        merged.extend(thinned.both.iter().map(|&t| (t, 0b11)));
        merged.extend(thinned.only_first.iter().map(|&t| (t, 0b01)));
        merged.extend(thinned.only_second.iter().map(|&t| (t, 0b10)));
        merged.sort_by(|x, y| x.0.total_cmp(&y.0));

        for (emitted, mask) in merged {
            let id = next_id;
            next_id += 1;
            let hits: [Option<Detector>; 2] = match mask {
                0b11 => {
                    let route = (Analyzer::random(&mut optics_rng), Analyzer::random(&mut optics_rng));
                    let (d1, d2) = sampler.sample_pair(route, &mut optics_rng);
                    [Some(d1), Some(d2)]
                }
                0b01 => [
                    Some(sampler.sample_single(Photon::First, Analyzer::random(&mut optics_rng), &mut optics_rng)),
                    None,
                ],
                _ => [
                    None,
                    Some(sampler.sample_single(Photon::Second, Analyzer::random(&mut optics_rng), &mut optics_rng)),
                ],
            };
            for (k, hit) in hits.into_iter().enumerate() {
                let Some(det) = hit else { continue };
                let di = det.index();
                if !uniform_efficiency && optics_rng.random::<f64>() >= accept[di] {
                    continue;
                }
                let arrival = emitted + flight + if k == 1 { delay } else { 0.0 };
                let t = arrival + jitter[di].map_or(0.0, |n| n.sample(&mut jitter_rng));
                if !(0.0..duration).contains(&t) {
                    continue;
                }
                let truth = if record_truth {
                    truth_raw.push((
                        Origin::Pair {
                            id,
                            photon: k as u8 + 1,
                        },
                        emitted,
                    ));
                    (truth_raw.len() - 1) as u32
                } else {
                    NO_TRUTH
                };
                raw.push(RawEvent {
                    time: t,
                    channel: det.channel(),
                    truth,
                });
            }
        }
    }

    for (k, (params, det)) in config.detectors.iter().zip(Detector::ALL).enumerate() {
        let mut noise_rng = component_rng(seed, STREAM_NOISE + k as u64);
        for (origin, rate) in [
            (Origin::Dark, params.dark_rate_hz),
            (Origin::Background, params.background_rate_hz),
        ] {
            for t in poisson::poisson_times(rate, 0.0, duration, &mut noise_rng) {
                let truth = if record_truth {
                    truth_raw.push((origin, t));
                    (truth_raw.len() - 1) as u32
                } else {
                    NO_TRUTH
                };
                raw.push(RawEvent {
                    time: t,
                    channel: det.channel(),
                    truth,
                });
            }
        }
    }
    if truth_raw.len() >= NO_TRUTH as usize {
        return Err(Error::Range("too many events to record truth for".into()));
    }

    // the vector is a handful of presorted runs, which a stable sort merges cheaply
    raw.sort_by(|x, y| x.time.total_cmp(&y.time));

    let dead: Vec<f64> = config.detectors.iter().map(|d| d.dead_time_s).collect();
    let mut last = [f64::NEG_INFINITY; 4];
    let mut words: Vec<(u64, u32)> = Vec::with_capacity(raw.len());
    for ev in &raw {
        let ci = (ev.channel - 1) as usize;
        if dead[ci] > 0.0 && ev.time - last[ci] < dead[ci] {
            continue;
        }
        last[ci] = ev.time;
        let tag = TimeTag::new(tick.quantize(ev.time)?, ev.channel)?;
        words.push((tag.word(), ev.truth));
    }
    drop(raw);
    words.sort_by_key(|w| w.0);
    // two events on one channel within one tick register once
    words.dedup_by_key(|w| w.0);

    let tags: Vec<TimeTag> = words
        .iter()
        .map(|&(w, _)| TimeTag::new(w >> 4, (w & 0xf) as u8))
        .collect::<Result<_>>()?;

    let truth = if record_truth {
        pair_tags.resize(next_id as usize, 0);
        for &(_, idx) in &words {
            if let (Origin::Pair { id, .. }, _) = truth_raw[idx as usize] {
                pair_tags[id as usize] += 1;
            }
        }
        Some(
            words
                .iter()
                .map(|&(_, idx)| {
                    let (origin, emitted) = truth_raw[idx as usize];
                    let partner_detected = match origin {
                        Origin::Pair { id, .. } => pair_tags[id as usize] >= 2,
                        _ => false,
                    };
                    TruthEntry {
                        origin,
                        emitted_time_s: emitted,
                        partner_detected,
                    }
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(SimOutput {
        header: StreamHeader {
            tick_femtoseconds: tick.femtoseconds(),
            channel_count: 4,
        },
        tags,
        truth,
        stats: SimStats {
            duration_s: duration,
            pair_rate_hz: rate,
            photon_survival: p_static,
            flight_time_s: flight,
            pair_events: next_id,
        },
    })
}

/// Piecewise-constant survival probability over `[start, end)`.
fn segments(
    config: &LinkConfig,
    start: f64,
    end: f64,
    p_static: f64,
    rng: &mut SimRng,
) -> Result<Vec<(f64, f64, f64)>> {
    let Some(sc) = config.channel.scintillation.filter(|s| s.log_std_db > 0.0) else {
        return Ok(vec![(start, end, p_static)]);
    };
    let n = ((end - start) / sc.coherence_time_s).ceil();
    if n > 1e8 {
        return Err(Error::Config(format!(
            "scintillation coherence time {} s is too short for a {} s run",
            sc.coherence_time_s,
            end - start
        )));
    }
    let fade = Normal::new(0.0, sc.log_std_db).expect("validated");
    let mut out = Vec::with_capacity(n as usize);
    let mut s0 = start;
    while s0 < end {
        let s1 = (s0 + sc.coherence_time_s).min(end);
        let extra_db = fade.sample(rng);
        out.push((s0, s1, (p_static * 10f64.powf(-extra_db / 10.0)).min(1.0)));
        s0 = s1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DetectorParams;

    fn lossless() -> LinkConfig {
        let mut c = LinkConfig::default();
        c.source.pair_rate_hz = 2000.0;
        c.source.reference_efficiency = 1.0;
        c.channel.loss_db_per_photon = 0.0;
        c.run.path_length_m = 0.0;
        c.detectors = [DetectorParams {
            efficiency: 1.0,
            dark_rate_hz: 0.0,
            background_rate_hz: 0.0,
            jitter_sigma_s: 0.0,
            dead_time_s: 0.0,
        }; 4];
        c
    }

    #[test]
    fn lossless_pairs_give_two_tags() {
        let c = lossless();
        let out = simulate_setting(&c, c.analyzers.a, c.analyzers.b, 1.0, 5, true).unwrap();
        let truth = out.truth.unwrap();
        assert!(truth
            .iter()
            .all(|t| t.partner_detected || t.emitted_time_s + c.source.fibre_delay_s >= 1.0 || t.emitted_time_s < 0.0));
        assert!(out.tags.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn deterministic_per_seed() {
        let c = LinkConfig::default();
        let a = simulate_setting(&c, c.analyzers.a, c.analyzers.b, 2.0, 11, false).unwrap();
        let b = simulate_setting(&c, c.analyzers.a, c.analyzers.b, 2.0, 11, false).unwrap();
        let d = simulate_setting(&c, c.analyzers.a, c.analyzers.b, 2.0, 12, false).unwrap();
        assert_eq!(a.tags, b.tags);
        assert_ne!(a.tags, d.tags);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = LinkConfig::default();
        c.detectors[0].jitter_sigma_s = -1.0;
        assert!(matches!(simulate_run(&c, 1), Err(Error::Config(_))));
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..4).map(|i| derive_seed(7, i)).collect();
        for i in 0..4 {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
