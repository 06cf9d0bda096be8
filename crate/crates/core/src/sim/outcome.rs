use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::polarization::{
    joint_outcome_probabilities, marginal_probability, AnalyzerSetting, Photon, Port, TwoQubitState,
};
use crate::timetag::Detector;

/// Output arm of the 50/50 beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Analyzer {
    A,
    B,
}

impl Analyzer {
    pub fn detector(self, port: Port) -> Detector {
        match (self, port) {
            (Analyzer::A, Port::T) => Detector::AT,
            (Analyzer::A, Port::R) => Detector::AR,
            (Analyzer::B, Port::T) => Detector::BT,
            (Analyzer::B, Port::R) => Detector::BR,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Analyzer::A
        } else {
            Analyzer::B
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

const PORT_PAIRS: [(Port, Port); 4] = [
    (Port::T, Port::T),
    (Port::T, Port::R),
    (Port::R, Port::T),
    (Port::R, Port::R),
];

/// Precomputed outcome tables for one state and analyzer pair.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    /// Joint table with photon 1 at A and photon 2 at B, and the reverse.
    joint: [[f64; 4]; 2],
    /// `p_T` per `[photon][analyzer]`.
    transmit: [[f64; 2]; 2],
}

impl OutcomeSampler {
    pub fn new(state: &TwoQubitState, a: AnalyzerSetting, b: AnalyzerSetting) -> Result<Self> {
        let settings = [a, b];
        let mut transmit = [[0.0; 2]; 2];
        for (pi, photon) in [Photon::First, Photon::Second].into_iter().enumerate() {
            for (ai, &setting) in settings.iter().enumerate() {
                transmit[pi][ai] = marginal_probability(state, photon, setting, Port::T)?;
            }
        }
        Ok(Self {
            joint: [
                joint_outcome_probabilities(state, a, b)?.as_array(),
                joint_outcome_probabilities(state, b, a)?.as_array(),
            ],
            transmit,
        })
    }

    /// Detectors hit by photons 1 and 2 for the given routes.
    pub fn sample_pair<R: Rng + ?Sized>(&self, route: (Analyzer, Analyzer), rng: &mut R) -> (Detector, Detector) {
        match route {
            (first, second) if first != second => {
                let table = &self.joint[first.index()];
                let mut u = rng.random::<f64>() * table.iter().sum::<f64>();
                let mut pick = PORT_PAIRS[3];
                for (k, &p) in table.iter().enumerate() {
                    if u < p {
                        pick = PORT_PAIRS[k];
                        break;
                    }
                    u -= p;
                }
                (first.detector(pick.0), second.detector(pick.1))
            }
            (first, second) => (
                self.sample_single(Photon::First, first, rng),
                self.sample_single(Photon::Second, second, rng),
            ),
        }
    }

    /// Detector hit by a lone photon.
    pub fn sample_single<R: Rng + ?Sized>(&self, photon: Photon, analyzer: Analyzer, rng: &mut R) -> Detector {
        let pi = match photon {
            Photon::First => 0,
            Photon::Second => 1,
        };
        let port = if rng.random::<f64>() < self.transmit[pi][analyzer.index()] {
            Port::T
        } else {
            Port::R
        };
        analyzer.detector(port)
    }
}

/// One-shot version of [`OutcomeSampler::sample_pair`].
pub fn sample_pair_outcome<R: Rng + ?Sized>(
    state: &TwoQubitState,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
    route: (Analyzer, Analyzer),
    rng: &mut R,
) -> Result<(Detector, Detector)> {
    Ok(OutcomeSampler::new(state, a, b)?.sample_pair(route, rng))
}
