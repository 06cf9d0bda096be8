//! Cross-correlation and windowed coincidence counting over sorted tag streams.
//!
//! Every routine here is a single forward pass. A [`PairScanner`] keeps, for
//! each side of a channel pair, only the tags younger than the correlation
//! range, so memory is bounded by `rate × range` regardless of stream length.
//! Delays are always `t_second − t_first`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{analysis, Error, Result};
use crate::timetag::TimeTag;

/// Ordered channel pair; delays are measured from `first` to `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelPair {
    pub first: u8,
    pub second: u8,
}

impl ChannelPair {
    pub fn new(first: u8, second: u8) -> Self {
        Self { first, second }
    }

    pub fn swapped(self) -> Self {
        Self {
            first: self.second,
            second: self.first,
        }
    }
}

/// Streaming enumerator of all cross-group tag pairs within `±range` ticks.
///
/// Each unordered pair of tags is reported exactly once, when the later of the
/// two is pushed.
#[derive(Debug)]
pub struct PairScanner {
    first_mask: u16,
    second_mask: u16,
    range: u64,
    first_buf: VecDeque<TimeTag>,
    second_buf: VecDeque<TimeTag>,
    pushed: u64,
    last_tick: Option<u64>,
    first_tick: Option<u64>,
    totals: (u64, u64),
    peak_buffered: usize,
}

fn mask(channels: &[u8]) -> u16 {
    channels.iter().fold(0, |m, &c| m | 1 << c.min(15))
}

fn prune(buf: &mut VecDeque<TimeTag>, tick: u64, range: u64) {
    while let Some(front) = buf.front() {
        if front.tick() + range < tick {
            buf.pop_front();
        } else {
            break;
        }
    }
}

impl PairScanner {
    pub fn new(first: &[u8], second: &[u8], range: u64) -> Result<Self> {
        let (first_mask, second_mask) = (mask(first), mask(second));
        if first_mask == 0 || second_mask == 0 {
            return analysis("channel groups must be non-empty");
        }
        if first_mask & second_mask != 0 {
            return analysis("channel groups must be disjoint");
        }
        Ok(Self {
            first_mask,
            second_mask,
            range,
            first_buf: VecDeque::new(),
            second_buf: VecDeque::new(),
            pushed: 0,
            last_tick: None,
            first_tick: None,
            totals: (0, 0),
            peak_buffered: 0,
        })
    }

    pub fn for_pair(pair: ChannelPair, range: u64) -> Result<Self> {
        Self::new(&[pair.first], &[pair.second], range)
    }

    /// Feeds one tag; `on_pair(first, second, delay)` is called for every new
    /// pair it completes.
    pub fn push(&mut self, tag: TimeTag, mut on_pair: impl FnMut(TimeTag, TimeTag, i64)) -> Result<()> {
        let tick = tag.tick();
        if let Some(last) = self.last_tick {
            if tick < last {
                return Err(Error::Unsorted {
                    index: self.pushed,
                    tick,
                    previous: last,
                });
            }
        }
        self.pushed += 1;
        self.last_tick = Some(tick);
        self.first_tick.get_or_insert(tick);

        let bit = 1u16 << tag.channel();
        if bit & self.first_mask != 0 {
            self.totals.0 += 1;
            prune(&mut self.second_buf, tick, self.range);
            for &other in &self.second_buf {
                on_pair(tag, other, other.tick() as i64 - tick as i64);
            }
            prune(&mut self.first_buf, tick, self.range);
            self.first_buf.push_back(tag);
        } else if bit & self.second_mask != 0 {
            self.totals.1 += 1;
            prune(&mut self.first_buf, tick, self.range);
            for &other in &self.first_buf {
                on_pair(other, tag, tick as i64 - other.tick() as i64);
            }
            prune(&mut self.second_buf, tick, self.range);
            self.second_buf.push_back(tag);
        }
        self.peak_buffered = self.peak_buffered.max(self.first_buf.len() + self.second_buf.len());
        Ok(())
    }

    /// Tags seen in the first and second group.
    pub fn totals(&self) -> (u64, u64) {
        self.totals
    }

    /// Ticks between the first and last tag pushed (any channel).
    pub fn span(&self) -> u64 {
        match (self.first_tick, self.last_tick) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }

    /// Largest number of tags held at once.
    pub fn peak_buffered(&self) -> usize {
        self.peak_buffered
    }
}

/// Delay histogram between two channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlogram {
    pub channel_pair: ChannelPair,
    pub bin_width: u64,
    pub range: u64,
    pub counts: Vec<u64>,
    pub total_tags: (u64, u64),
    /// Ticks spanned by the input stream.
    pub span_ticks: u64,
}

impl Correlogram {
    fn empty(channel_pair: ChannelPair, range: u64, bin_width: u64) -> Result<Self> {
        if bin_width == 0 || range < bin_width {
            return analysis(format!("need range ≥ bin ≥ 1, got range {range}, bin {bin_width}"));
        }
        let half_bins = (range / bin_width) as usize;
        Ok(Self {
            channel_pair,
            bin_width,
            range,
            counts: vec![0; 2 * half_bins + 1],
            total_tags: (0, 0),
            span_ticks: 0,
        })
    }

    fn half_bins(&self) -> i64 {
        (self.counts.len() / 2) as i64
    }

    /// Bin `k` holds delays in `[τ_k − ⌊w/2⌋, τ_k − ⌊w/2⌋ + w − 1]`.
    pub fn bin_index(&self, delay: i64) -> Option<usize> {
        if delay.unsigned_abs() > self.range {
            return None;
        }
        let w = self.bin_width as i64;
        let shifted = delay + self.half_bins() * w + w / 2;
        if shifted < 0 {
            return None;
        }
        let idx = (shifted / w) as usize;
        (idx < self.counts.len()).then_some(idx)
    }

    /// Delay at the centre of bin `k`, in ticks.
    pub fn tau(&self, k: usize) -> i64 {
        (k as i64 - self.half_bins()) * self.bin_width as i64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_ticks,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.tau(k), c));
        }
        out
    }

    /// Bin-wise sum of correlograms with identical binning.
    pub fn accumulate(&mut self, other: &Correlogram) -> Result<()> {
        if other.bin_width != self.bin_width || other.counts.len() != self.counts.len() {
            return analysis("cannot add correlograms with different binning");
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_tags.0 += other.total_tags.0;
        self.total_tags.1 += other.total_tags.1;
        self.span_ticks = self.span_ticks.max(other.span_ticks);
        Ok(())
    }
}

/// Builds a correlogram from a fallible tag stream (e.g. a file reader).
pub fn cross_correlogram_stream<I>(tags: I, pair: ChannelPair, range: u64, bin: u64) -> Result<(Correlogram, usize)>
where
    I: IntoIterator<Item = Result<TimeTag>>,
{
    let mut corr = Correlogram::empty(pair, range, bin)?;
    let mut scanner = PairScanner::for_pair(pair, range)?;
    for tag in tags {
        scanner.push(tag?, |_, _, delay| {
            if let Some(k) = corr.bin_index(delay) {
                corr.counts[k] += 1;
            }
        })?;
    }
    corr.total_tags = scanner.totals();
    corr.span_ticks = scanner.span();
    Ok((corr, scanner.peak_buffered()))
}

pub fn cross_correlogram(tags: &[TimeTag], pair: ChannelPair, range: u64, bin: u64) -> Result<Correlogram> {
    cross_correlogram_stream(tags.iter().map(|&t| Ok(t)), pair, range, bin).map(|(c, _)| c)
}

/// Closed coincidence windows `[c − w/2, c + w/2]` around each centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceWindows {
    centers: Vec<i64>,
    half_width: u64,
}

impl CoincidenceWindows {
    pub fn new(mut centers: Vec<i64>, window_ticks: u64) -> Result<Self> {
        if centers.is_empty() {
            return analysis("at least one window centre is required");
        }
        centers.sort_unstable();
        let half_width = window_ticks / 2;
        for w in centers.windows(2) {
            if (w[1] - w[0]).unsigned_abs() <= 2 * half_width {
                return analysis(format!(
                    "windows around {} and {} overlap (width {window_ticks} ticks)",
                    w[0], w[1]
                ));
            }
        }
        Ok(Self { centers, half_width })
    }

    /// Windows at `±offset`.
    pub fn symmetric(offset: u64, window_ticks: u64) -> Result<Self> {
        Self::new(vec![-(offset as i64), offset as i64], window_ticks)
    }

    pub fn centers(&self) -> &[i64] {
        &self.centers
    }

    pub fn half_width(&self) -> u64 {
        self.half_width
    }

    /// Number of distinct integer delays covered by one window.
    pub fn ticks_per_window(&self) -> u64 {
        2 * self.half_width + 1
    }

    #[inline]
    pub fn contains(&self, delay: i64) -> bool {
        self.centers
            .iter()
            .any(|&c| (delay - c).unsigned_abs() <= self.half_width)
    }

    /// Largest |delay| any window can accept.
    pub fn reach(&self) -> u64 {
        self.centers
            .iter()
            .map(|c| c.unsigned_abs() + self.half_width)
            .max()
            .unwrap_or(0)
    }
}

pub fn count_windowed_coincidences_stream<I>(tags: I, pair: ChannelPair, windows: &CoincidenceWindows) -> Result<u64>
where
    I: IntoIterator<Item = Result<TimeTag>>,
{
    let mut scanner = PairScanner::for_pair(pair, windows.reach())?;
    let mut count = 0;
    for tag in tags {
        scanner.push(tag?, |_, _, delay| {
            if windows.contains(delay) {
                count += 1;
            }
        })?;
    }
    Ok(count)
}

/// All tag pairs whose delay lies in any window (no pairing exclusivity).
pub fn count_windowed_coincidences(tags: &[TimeTag], pair: ChannelPair, windows: &CoincidenceWindows) -> Result<u64> {
    count_windowed_coincidences_stream(tags.iter().map(|&t| Ok(t)), pair, windows)
}

/// Largest stream the quadratic oracle will accept.
pub const NAIVE_ORACLE_LIMIT: usize = 100_000;

/// Reference counter that checks every pair of tags.
pub fn naive_coincidence_oracle(tags: &[TimeTag], pair: ChannelPair, windows: &CoincidenceWindows) -> Result<u64> {
    if tags.len() > NAIVE_ORACLE_LIMIT {
        return analysis(format!(
            "naive oracle refuses {} tags (limit {NAIVE_ORACLE_LIMIT})",
            tags.len()
        ));
    }
    let firsts: Vec<i64> = tags
        .iter()
        .filter(|t| t.channel() == pair.first)
        .map(|t| t.tick() as i64)
        .collect();
    let seconds: Vec<i64> = tags
        .iter()
        .filter(|t| t.channel() == pair.second)
        .map(|t| t.tick() as i64)
        .collect();
    let mut count = 0;
    for &a in &firsts {
        for &b in &seconds {
            count += windows.contains(b - a) as u64;
        }
    }
    Ok(count)
}

/// Expected accidental coincidence rate (per second).
///
/// Each `(r_i, r_j)` entry is the singles-rate pair of one channel pair; every
/// pair contributes `n_centers · r_i · r_j · window` for uncorrelated streams.
pub fn estimate_accidentals(rate_pairs: &[(f64, f64)], window_s: f64, n_centers: u32) -> f64 {
    rate_pairs
        .iter()
        .map(|&(ri, rj)| n_centers as f64 * ri * rj * window_s)
        .sum()
}

/// Duration in seconds that uncorrelated tags "see" through one closed window
/// on an integer tick grid: `(2·⌊w/2⌋ + 1)` ticks.
pub fn effective_window(windows: &CoincidenceWindows, tick_s: f64) -> f64 {
    windows.ticks_per_window() as f64 * tick_s
}

/// Peak-search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSearch {
    /// Detection threshold above background in Poisson standard deviations.
    pub sigmas: f64,
    /// Bins closer than this to a peak are excluded from the background
    /// estimate, and weaker maxima within it are merged into the peak.
    pub exclusion_ticks: u64,
}

impl Default for PeakSearch {
    fn default() -> Self {
        // 5 ns at the default 156.25 ps tick
        Self {
            sigmas: 5.0,
            exclusion_ticks: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    /// Background-subtracted centroid of the bins above half height, in ticks.
    pub center: f64,
    /// Count in the highest bin.
    pub height: f64,
    pub fwhm: f64,
    pub background_per_bin: f64,
}

fn median(values: &[u64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

fn threshold(background: f64, sigmas: f64) -> f64 {
    // a floor of one count of variance keeps empty backgrounds from
    // turning every single count into a peak
    background + sigmas * background.max(1.0).sqrt()
}

fn candidates(corr: &Correlogram, background: f64, search: &PeakSearch) -> Vec<usize> {
    let c = &corr.counts;
    let thr = threshold(background, search.sigmas);
    let mut maxima: Vec<usize> = (0..c.len())
        .filter(|&k| {
            let v = c[k] as f64;
            v > thr && (k == 0 || c[k - 1] <= c[k]) && (k + 1 == c.len() || c[k + 1] <= c[k])
        })
        .collect();
    maxima.sort_by(|&a, &b| c[b].cmp(&c[a]).then(a.cmp(&b)));
    let exclusion = (search.exclusion_ticks / corr.bin_width).max(1) as usize;
    let mut kept: Vec<usize> = Vec::new();
    for k in maxima {
        if kept.iter().all(|&p| p.abs_diff(k) > exclusion) {
            kept.push(k);
        }
    }
    kept.sort_unstable();
    kept
}

fn off_peak_background(corr: &Correlogram, peaks: &[usize], exclusion: usize) -> Option<f64> {
    let (sum, n) = corr
        .counts
        .iter()
        .enumerate()
        .filter(|(k, _)| peaks.iter().all(|p| p.abs_diff(*k) >= exclusion))
        .fold((0u64, 0usize), |(s, n), (_, &v)| (s + v, n + 1));
    (n > 0).then(|| sum as f64 / n as f64)
}

/// Locates coincidence peaks standing out of a flat accidental floor.
pub fn find_peaks(corr: &Correlogram, search: &PeakSearch) -> Result<Vec<PeakReport>> {
    if corr.counts.is_empty() {
        return analysis("empty correlogram");
    }
    let exclusion = (search.exclusion_ticks / corr.bin_width).max(1) as usize;
    let mut background = median(&corr.counts);
    let mut peaks = candidates(corr, background, search);
    // refine once with the floor measured away from the candidates
    if let Some(bg) = off_peak_background(corr, &peaks, exclusion) {
        background = bg;
        peaks = candidates(corr, background, search);
        if let Some(bg) = off_peak_background(corr, &peaks, exclusion) {
            background = bg;
        }
    }
    Ok(peaks
        .into_iter()
        .filter(|&k| corr.counts[k] as f64 > threshold(background, search.sigmas))
        .map(|k| describe_peak(corr, k, background))
        .collect())
}

fn describe_peak(corr: &Correlogram, k: usize, background: f64) -> PeakReport {
    let c: Vec<f64> = corr.counts.iter().map(|&v| v as f64).collect();
    let w = corr.bin_width as f64;
    let height = c[k];
    let half = background + (height - background) / 2.0;

    // walk outward to the first bins below half height and interpolate
    let mut left = k;
    while left > 0 && c[left - 1] >= half {
        left -= 1;
    }
    let left_edge = if left == 0 {
        0.0
    } else {
        let (lo, hi) = (c[left - 1], c[left]);
        (left - 1) as f64 + (half - lo) / (hi - lo)
    };
    let mut right = k;
    while right + 1 < c.len() && c[right + 1] >= half {
        right += 1;
    }
    let right_edge = if right + 1 == c.len() {
        right as f64
    } else {
        let (hi, lo) = (c[right], c[right + 1]);
        right as f64 + (hi - half) / (hi - lo)
    };

    let (mut moment, mut weight) = (0.0, 0.0);
    for (j, &v) in c.iter().enumerate().take(right + 1).skip(left) {
        let excess = v - background;
        moment += excess * corr.tau(j) as f64;
        weight += excess;
    }
    let center = if weight > 0.0 {
        moment / weight
    } else {
        corr.tau(k) as f64
    };

    PeakReport {
        center,
        height,
        fwhm: (right_edge - left_edge) * w,
        background_per_bin: background,
    }
}
