use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::poisson::poisson_times;
use crate::config::DetectorParams;
use crate::error::Result;
use crate::timetag::{Detector, TickDuration, TimeTag, TICK_LIMIT};

/// Single-photon detector with efficiency, Gaussian jitter, dead time and a
/// quantizing time tagger. Arrivals must be fed in time order for the dead
/// time to be meaningful.
#[derive(Debug, Clone)]
pub struct DetectorModel {
    detector: Detector,
    params: DetectorParams,
    tick: TickDuration,
    jitter: Option<Normal<f64>>,
    last_accepted: Option<f64>,
}

impl DetectorModel {
    pub fn new(detector: Detector, params: DetectorParams, tick: TickDuration) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            detector,
            params,
            tick,
            jitter: jitter_distribution(params.jitter_sigma_s),
            last_accepted: None,
        })
    }

    pub fn params(&self) -> &DetectorParams {
        &self.params
    }

    pub fn detect<R: Rng + ?Sized>(&mut self, arrival: f64, rng: &mut R) -> Result<Option<TimeTag>> {
        if rng.random::<f64>() >= self.params.efficiency {
            return Ok(None);
        }
        let t = arrival + self.jitter.map_or(0.0, |n| n.sample(rng));
        if t < 0.0 {
            return Ok(None);
        }
        if let Some(last) = self.last_accepted {
            if t - last < self.params.dead_time_s {
                return Ok(None);
            }
        }
        self.last_accepted = Some(t);
        Ok(Some(TimeTag::from_detector(self.tick.quantize(t)?, self.detector)?))
    }
}

pub(crate) fn jitter_distribution(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma validated"))
}

/// Detection of one isolated photon (no dead-time history).
pub fn detect_photon<R: Rng + ?Sized>(
    arrival: f64,
    detector: Detector,
    params: &DetectorParams,
    tick: TickDuration,
    rng: &mut R,
) -> Result<Option<TimeTag>> {
    DetectorModel::new(detector, *params, tick)?.detect(arrival, rng)
}

/// Dark counts plus background light on all four channels over
/// `[0, duration)`, merged and sorted.
pub fn generate_noise_tags<R: Rng + ?Sized>(
    detectors: &[DetectorParams; 4],
    duration: f64,
    tick: TickDuration,
    rng: &mut R,
) -> Result<Vec<TimeTag>> {
    let mut tags = Vec::new();
    for (params, detector) in detectors.iter().zip(Detector::ALL) {
        params.validate()?;
        for t in poisson_times(params.noise_rate_hz(), 0.0, duration, rng) {
            let tick_count = tick.quantize(t)?;
            if tick_count < TICK_LIMIT {
                tags.push(TimeTag::from_detector(tick_count, detector)?);
            }
        }
    }
    tags.sort_unstable();
    tags.dedup();
    Ok(tags)
}
