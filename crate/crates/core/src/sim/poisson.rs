use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{component_rng, SimRng};
use crate::error::{domain, Result};

/// Arrival times of a homogeneous Poisson process on `[start, end)`.
pub(crate) fn poisson_times<R: Rng + ?Sized>(rate: f64, start: f64, end: f64, rng: &mut R) -> Vec<f64> {
    if !(rate > 0.0) || !(end > start) {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("rate is positive");
    let mut times = Vec::with_capacity((rate * (end - start) * 1.01 + 16.0) as usize);
    let mut t = start;
    loop {
        let next = t + exp.sample(rng);
        if next >= end {
            break;
        }
        // a zero gap is possible in floating point; keep times strictly increasing
        if next > t || times.is_empty() {
            times.push(next);
        }
        t = next;
    }
    times
}

/// Sorted event times of a Poisson process of `rate` events/s over
/// `[0, duration)`.
pub fn sample_poisson_events(rate: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    if rate.is_nan() || rate < 0.0 || rate.is_infinite() {
        return domain(format!("event rate {rate} must be finite and ≥ 0"));
    }
    if duration.is_nan() || duration < 0.0 || duration.is_infinite() {
        return domain(format!("duration {duration} must be finite and ≥ 0"));
    }
    Ok(poisson_times(rate, 0.0, duration, &mut component_rng(seed, 0)))
}

/// Emission times of pairs with at least one surviving photon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThinnedPairs {
    pub both: Vec<f64>,
    pub only_first: Vec<f64>,
    pub only_second: Vec<f64>,
}

impl ThinnedPairs {
    pub fn len(&self) -> usize {
        self.both.len() + self.only_first.len() + self.only_second.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn thin_window<R: Rng + ?Sized>(
    pair_rate: f64,
    p1: f64,
    p2: f64,
    start: f64,
    end: f64,
    rng: &mut R,
) -> ThinnedPairs {
    ThinnedPairs {
        both: poisson_times(pair_rate * p1 * p2, start, end, rng),
        only_first: poisson_times(pair_rate * p1 * (1.0 - p2), start, end, rng),
        only_second: poisson_times(pair_rate * (1.0 - p1) * p2, start, end, rng),
    }
}

/// Splits a pair process into its three surviving sub-processes.
///
/// Independent Bernoulli thinning of a Poisson process yields independent
/// Poisson processes, so sampling the three rates directly is exact.
/// Probabilities outside `[0, 1]` are clamped.
pub fn thin_pair_process(pair_rate: f64, p1: f64, p2: f64, duration: f64, rng: &mut SimRng) -> ThinnedPairs {
    let (p1, p2) = (p1.clamp(0.0, 1.0), p2.clamp(0.0, 1.0));
    thin_window(pair_rate, p1, p2, 0.0, duration, rng)
}
