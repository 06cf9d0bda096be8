//! Independent reference implementations used by the integration tests and
//! the acceptance suite. Nothing here calls into the algorithm under test.
#![allow(dead_code)]

use nalgebra::Matrix4;
use num_complex::Complex64;
use qlink_core::polarization::{AnalyzerSetting, Convention, TwoQubitState};
use qlink_core::timetag::TimeTag;
use qlink_core::ChannelPair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pure state as amplitudes over (HH, HV, VH, VV).
pub type Ket = [Complex64; 4];

pub fn random_ket<R: Rng>(rng: &mut R) -> Ket {
    let mut k = [Complex64::new(0.0, 0.0); 4];
    for c in &mut k {
        *c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    let norm = k.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    k.map(|c| c / norm)
}

/// A mixture `Σ w_k |ψ_k⟩⟨ψ_k|` kept in ensemble form for the oracles.
#[derive(Debug, Clone)]
pub struct Ensemble(pub Vec<(f64, Ket)>);

pub fn random_ensemble<R: Rng>(rng: &mut R) -> Ensemble {
    let n = rng.random_range(1..=4);
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ensemble(weights.into_iter().map(|w| (w, random_ket(rng))).collect())
}

impl Ensemble {
    pub fn matrix(&self) -> Matrix4<Complex64> {
        let mut m = Matrix4::zeros();
        for (w, k) in &self.0 {
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] += k[i] * k[j].conj() * *w;
                }
            }
        }
        m
    }

    pub fn state(&self) -> TwoQubitState {
        TwoQubitState::from_matrix(self.matrix()).expect("ensemble is a valid state")
    }

    /// `[p_TT, p_TR, p_RT, p_RR]` via amplitudes `⟨x_a ⊗ y_b|ψ⟩`, where T is
    /// `cos θ|H⟩ + sin θ|V⟩` and R is `−sin θ|H⟩ + cos θ|V⟩` at the physical
    /// angle `θ` the analyzer sees.
    pub fn joint(&self, theta_a: f64, theta_b: f64) -> [f64; 4] {
        let basis = |t: f64| [[t.cos(), t.sin()], [-t.sin(), t.cos()]];
        let (ba, bb) = (basis(theta_a), basis(theta_b));
        let mut p = [0.0; 4];
        for (w, k) in &self.0 {
            for x in 0..2 {
                for y in 0..2 {
                    let amp = k[0] * ba[x][0] * bb[y][0]
                        + k[1] * ba[x][0] * bb[y][1]
                        + k[2] * ba[x][1] * bb[y][0]
                        + k[3] * ba[x][1] * bb[y][1];
                    p[2 * x + y] += w * amp.norm_sqr();
                }
            }
        }
        p
    }
}

/// Angle the waveplate/PBS pair actually projects onto.
pub fn physical_angle(angle: f64, convention: Convention) -> f64 {
    match convention {
        Convention::Relative => angle,
        Convention::Mirrored => -angle,
    }
}

pub fn physical(setting: AnalyzerSetting) -> f64 {
    physical_angle(setting.angle(), setting.convention())
}

/// `(|HV⟩ + e^{iφ}|VH⟩)/√2`
pub fn psi_ket(phi: f64) -> Ket {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
        Complex64::from_polar(s, phi),
        Complex64::new(0.0, 0.0),
    ]
}

// ---------------------------------------------------------------- time tags

/// Sorted random stream over channels 1–4 with correlated pairs near
/// `±offset` and occasional same-tick ties.
pub fn random_stream<R: Rng>(rng: &mut R, n: usize, offset: i64, spread: i64) -> Vec<TimeTag> {
    let span = (n as u64) * 40;
    let mut tags = Vec::with_capacity(n);
    while tags.len() < n {
        let t = rng.random_range(0..span);
        let ch = rng.random_range(1..=4u8);
        tags.push(TimeTag::new(t, ch).unwrap());
        match rng.random_range(0..10) {
            0..=2 => {
                let d = offset * if rng.random::<bool>() { 1 } else { -1 } + rng.random_range(-spread..=spread);
                let t2 = t as i64 + d;
                if t2 >= 0 {
                    tags.push(TimeTag::new(t2 as u64, rng.random_range(1..=4u8)).unwrap());
                }
            }
            3 => tags.push(TimeTag::new(t, rng.random_range(1..=4u8)).unwrap()),
            _ => {}
        }
    }
    tags.truncate(n);
    tags.sort();
    tags
}

/// All-pairs delay histogram, locating each delay by scanning every bin.
pub fn naive_correlogram(tags: &[TimeTag], pair: ChannelPair, range: u64, bin: u64) -> Vec<u64> {
    let k = (range / bin) as i64;
    let w = bin as i64;
    let mut counts = vec![0u64; (2 * k + 1) as usize];
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
    for &a in &firsts {
        for &b in &seconds {
            let d = b - a;
            if d.abs() > range as i64 {
                continue;
            }
            for (idx, c) in counts.iter_mut().enumerate() {
                let lo = (idx as i64 - k) * w - w / 2;
                if (lo..lo + w).contains(&d) {
                    *c += 1;
                    break;
                }
            }
        }
    }
    counts
}

/// All-pairs windowed count with closed windows of half width `half`.
pub fn naive_windowed(tags: &[TimeTag], pair: ChannelPair, centers: &[i64], half: i64) -> u64 {
    let mut n = 0;
    for a in tags.iter().filter(|t| t.channel() == pair.first) {
        for b in tags.iter().filter(|t| t.channel() == pair.second) {
            let d = b.tick() as i64 - a.tick() as i64;
            if centers.iter().any(|&c| d >= c - half && d <= c + half) {
                n += 1;
            }
        }
    }
    n
}

// ---------------------------------------------------------------- statistics

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Std of `E` when each count is redrawn from a Poisson law with its
/// observed value as mean.
pub fn poisson_resampled_e_std<R: Rng>(counts: [u64; 4], trials: usize, rng: &mut R) -> f64 {
    let laws: Vec<Poisson<f64>> = counts.iter().map(|&c| Poisson::new(c as f64).unwrap()).collect();
    let mut es = Vec::with_capacity(trials);
    while es.len() < trials {
        let c: Vec<f64> = laws.iter().map(|l| l.sample(rng)).collect();
        let n = c.iter().sum::<f64>();
        if n > 0.0 {
            es.push((c[0] + c[3] - c[1] - c[2]) / n);
        }
    }
    std_dev(&es)
}

/// Kolmogorov–Smirnov statistic of samples against `Exp(rate)`.
pub fn ks_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at α = 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Least-squares cosine fit by brute-force search over `(v0, phi0)`.
pub fn grid_search_cosine(points: &[(f64, f64, f64)], v_step: f64, phi_step: f64) -> (f64, f64) {
    let cost = |v0: f64, phi0: f64| {
        points
            .iter()
            .map(|&(x, v, s)| ((v - v0 * (x - phi0).cos()) / s).powi(2))
            .sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut v0 = 0.0;
    while v0 <= 1.2 {
        let mut phi = 0.0;
        while phi < std::f64::consts::TAU {
            let c = cost(v0, phi);
            if c < best.0 {
                best = (c, v0, phi);
            }
            phi += phi_step;
        }
        v0 += v_step;
    }
    (best.1, best.2)
}

pub fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    Normal::new(0.0, sigma).unwrap().sample(rng)
}

/// Smallest distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}
