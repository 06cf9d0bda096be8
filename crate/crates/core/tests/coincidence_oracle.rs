mod support;

use proptest::prelude::*;
use qlink_core::coincidence::*;
use qlink_core::timetag::TimeTag;
use support::*;

const PAIRS: [(u8, u8); 4] = [(1, 3), (2, 4), (3, 1), (1, 2)];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streaming_matches_naive(seed in any::<u64>(), n in 0usize..2000, bin in 1u64..12, window in 0u64..20) {
        let tags = random_stream(&mut rng(seed), n, 320, 12);
        for (a, b) in PAIRS {
            let pair = ChannelPair::new(a, b);
            let corr = cross_correlogram(&tags, pair, 400, bin).unwrap();
            prop_assert_eq!(&corr.counts, &naive_correlogram(&tags, pair, 400, bin));

            let w = CoincidenceWindows::symmetric(320, window).unwrap();
            let fast = count_windowed_coincidences(&tags, pair, &w).unwrap();
            prop_assert_eq!(fast, naive_coincidence_oracle(&tags, pair, &w).unwrap());
            prop_assert_eq!(fast, naive_windowed(&tags, pair, &[-320, 320], (window / 2) as i64));
        }
    }

    #[test]
    fn translation_invariant(seed in any::<u64>(), shift in 0u64..1_000_000) {
        let tags = random_stream(&mut rng(seed), 500, 320, 8);
        let moved: Vec<TimeTag> = tags.iter().map(|t| t.shifted(shift).unwrap()).collect();
        let pair = ChannelPair::new(1, 4);
        let a = cross_correlogram(&tags, pair, 400, 3).unwrap();
        let b = cross_correlogram(&moved, pair, 400, 3).unwrap();
        prop_assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn swapping_pair_mirrors(seed in any::<u64>()) {
        let tags = random_stream(&mut rng(seed), 800, 320, 8);
        let a = cross_correlogram(&tags, ChannelPair::new(2, 3), 400, 1).unwrap();
        let b = cross_correlogram(&tags, ChannelPair::new(3, 2), 400, 1).unwrap();
        let mut rev = b.counts.clone();
        rev.reverse();
        prop_assert_eq!(a.counts, rev);
    }
}

#[test]
fn single_pair_lands_in_plus_320() {
    let tags = [TimeTag::new(0, 1).unwrap(), TimeTag::new(320, 2).unwrap()];
    let c = cross_correlogram(&tags, ChannelPair::new(1, 2), 640, 1).unwrap();
    assert_eq!(c.total(), 1);
    assert_eq!(c.tau(c.counts.iter().position(|&x| x == 1).unwrap()), 320);
}

#[test]
fn window_boundary_is_closed() {
    let w = CoincidenceWindows::symmetric(320, 8).unwrap();
    let pair = ChannelPair::new(1, 3);
    let at = |d: u64| {
        let tags = [TimeTag::new(1000, 1).unwrap(), TimeTag::new(1000 + d, 3).unwrap()];
        count_windowed_coincidences(&tags, pair, &w).unwrap()
    };
    assert_eq!(at(320), 1);
    assert_eq!(at(324), 1);
    assert_eq!(at(325), 0);
    assert!(CoincidenceWindows::new(vec![0, 8], 8).is_err());
}

#[test]
fn oracle_guards() {
    let w = CoincidenceWindows::symmetric(320, 8).unwrap();
    let pair = ChannelPair::new(1, 3);
    assert_eq!(naive_coincidence_oracle(&[], pair, &w).unwrap(), 0);
    let single: Vec<TimeTag> = (0..100).map(|k| TimeTag::new(k * 10, 1).unwrap()).collect();
    assert_eq!(naive_coincidence_oracle(&single, pair, &w).unwrap(), 0);
    let big: Vec<TimeTag> = (0..NAIVE_ORACLE_LIMIT as u64 + 1)
        .map(|k| TimeTag::new(k, 1).unwrap())
        .collect();
    assert!(naive_coincidence_oracle(&big, pair, &w).is_err());
}

#[test]
fn unsorted_stream_is_an_error() {
    let tags = [TimeTag::new(10, 1).unwrap(), TimeTag::new(5, 2).unwrap()];
    assert!(cross_correlogram(&tags, ChannelPair::new(1, 2), 20, 1).is_err());
}

/// Independent Poisson streams give a flat floor at `r1·r2·T·bin`.
#[test]
fn independent_streams_give_flat_floor() {
    let (r1, r2, duration, tick) = (20_000.0, 30_000.0, 50.0, 156.25e-12);
    let mut tags = Vec::new();
    for (ch, r) in [(1u8, r1), (2u8, r2)] {
        for t in qlink_core::sim::sample_poisson_events(r, duration, ch as u64).unwrap() {
            tags.push(TimeTag::new((t / tick).round() as u64, ch).unwrap());
        }
    }
    tags.sort();
    let c = cross_correlogram(&tags, ChannelPair::new(1, 2), 640, 4).unwrap();
    let expected = r1 * r2 * duration * 4.0 * tick;
    let outliers = c
        .counts
        .iter()
        .filter(|&&n| (n as f64 - expected).abs() > 4.0 * expected.sqrt())
        .count();
    assert!(outliers <= 1, "{outliers} bins outside 4σ of {expected}");
    assert!(find_peaks(&c, &PeakSearch::default()).unwrap().is_empty());

    let w = CoincidenceWindows::symmetric(320, 8).unwrap();
    let n = count_windowed_coincidences(&tags, ChannelPair::new(1, 2), &w).unwrap() as f64;
    let rate = estimate_accidentals(&[(r1, r2)], effective_window(&w, tick), 2);
    assert!((n - rate * duration).abs() < 4.0 * (rate * duration).sqrt());
}

#[test]
fn accidental_estimate_properties() {
    assert_eq!(estimate_accidentals(&[(1025.0, 1025.0)], 0.0, 2), 0.0);
    let one = estimate_accidentals(&[(100.0, 200.0)], 1e-9, 1);
    assert!((estimate_accidentals(&[(200.0, 400.0)], 1e-9, 1) - 4.0 * one).abs() < 1e-15);
    let four = estimate_accidentals(&[(1025.0, 1025.0); 4], 1.25e-9, 1);
    assert!((four - 5.25e-3).abs() < 1e-4);
    assert!((0.071 / four - 13.5).abs() < 0.1);
}

/// Gaussian peak injected on a flat floor.
#[test]
fn synthetic_peak_is_recovered() {
    let mut r = rng(77);
    let sigma_ticks = 238e-12 / 156.25e-12;
    let mut c = cross_correlogram(&[], ChannelPair::new(1, 2), 640, 1).unwrap();
    for (k, n) in c.counts.iter_mut().enumerate() {
        let tau = k as f64 - 640.0;
        let lambda = 20.0 + 4000.0 * (-(tau - 100.0).powi(2) / (2.0 * sigma_ticks * sigma_ticks)).exp();
        *n = rand_distr::Distribution::sample(&rand_distr::Poisson::new(lambda).unwrap(), &mut r) as u64;
    }
    let peaks = find_peaks(&c, &PeakSearch::default()).unwrap();
    assert_eq!(peaks.len(), 1);
    assert!((peaks[0].center - 100.0).abs() <= 1.0);
    let fwhm = 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma_ticks;
    assert!((peaks[0].fwhm / fwhm - 1.0).abs() < 0.15, "{} vs {fwhm}", peaks[0].fwhm);
}

#[test]
fn flat_noise_has_no_false_peaks() {
    let mut hits = 0;
    for seed in 0..200 {
        let mut r = rng(seed);
        let mut c = cross_correlogram(&[], ChannelPair::new(1, 2), 640, 1).unwrap();
        let law = rand_distr::Poisson::new(50.0).unwrap();
        for n in c.counts.iter_mut() {
            *n = rand_distr::Distribution::sample(&law, &mut r) as u64;
        }
        hits += !find_peaks(&c, &PeakSearch::default()).unwrap().is_empty() as usize;
    }
    assert!(hits <= 2, "{hits} of 200 flat correlograms produced peaks");
}
