//! Two-qubit polarization algebra.
//!
//! States live in the ordered basis `(HH, HV, VH, VV)`, first qubit = photon 1.
//! Analyzers are a half-wave plate in front of a polarizing beam splitter; the
//! transmitted port `T` projects onto `cos(a)|H> + sin(a)|V>` and the reflected
//! port `R` onto the orthogonal polarization.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-9;
/// Negative probabilities down to this magnitude are rounding noise.
const CLAMP_TOL: f64 = 1e-12;

/// Index of a two-qubit basis ket in `(HH, HV, VH, VV)` order.
#[inline]
fn basis(first_v: usize, second_v: usize) -> usize {
    2 * first_v + second_v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BellFamily {
    /// `(|HV> + e^{iφ}|VH>)/√2`
    Psi,
    /// `(|HH> + e^{iφ}|VV>)/√2`
    Phi,
}

/// A Bell state family plus its relative phase φ, normalized to `[0, 2π)`.
///
/// `φ = 0` is the `+` member of the family and `φ = π` the `−` member; any
/// other phase is a continuous interpolation between the two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BellRepr", into = "BellRepr")]
pub struct BellLabel {
    family: BellFamily,
    phase: f64,
}

impl BellLabel {
    pub fn new(family: BellFamily, phase: f64) -> Self {
        Self {
            family,
            phase: normalize_angle(phase, TAU),
        }
    }

    pub fn psi_minus() -> Self {
        Self::new(BellFamily::Psi, PI)
    }

    pub fn psi_plus() -> Self {
        Self::new(BellFamily::Psi, 0.0)
    }

    pub fn phi_minus() -> Self {
        Self::new(BellFamily::Phi, PI)
    }

    pub fn phi_plus() -> Self {
        Self::new(BellFamily::Phi, 0.0)
    }

    pub fn family(&self) -> BellFamily {
        self.family
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Canonical name when the phase is exactly 0 or π.
    pub fn name(&self) -> Option<&'static str> {
        match (self.family, self.phase) {
            (BellFamily::Psi, 0.0) => Some("psi-plus"),
            (BellFamily::Psi, p) if p == PI => Some("psi-minus"),
            (BellFamily::Phi, 0.0) => Some("phi-plus"),
            (BellFamily::Phi, p) if p == PI => Some("phi-minus"),
            _ => None,
        }
    }

    /// State-vector amplitudes in `(HH, HV, VH, VV)` order.
    pub fn amplitudes(&self) -> [Complex64; 4] {
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let b = Complex64::from_polar(FRAC_1_SQRT_2, self.phase);
        let zero = Complex64::new(0.0, 0.0);
        let mut amp = [zero; 4];
        match self.family {
            BellFamily::Psi => {
                amp[basis(0, 1)] = a;
                amp[basis(1, 0)] = b;
            }
            BellFamily::Phi => {
                amp[basis(0, 0)] = a;
                amp[basis(1, 1)] = b;
            }
        }
        amp
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(name) => f.write_str(name),
            None => write!(f, "{:?}(φ={:.6})", self.family, self.phase),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BellRepr {
    Named(String),
    Phased { family: BellFamily, phase_rad: f64 },
}

impl TryFrom<BellRepr> for BellLabel {
    type Error = String;

    fn try_from(repr: BellRepr) -> Result<Self, String> {
        match repr {
            BellRepr::Named(name) => match name.as_str() {
                "psi-minus" => Ok(Self::psi_minus()),
                "psi-plus" => Ok(Self::psi_plus()),
                "phi-minus" => Ok(Self::phi_minus()),
                "phi-plus" => Ok(Self::phi_plus()),
                other => Err(format!("unknown Bell state `{other}`")),
            },
            BellRepr::Phased { family, phase_rad } => {
                if !phase_rad.is_finite() {
                    return Err("Bell phase must be finite".into());
                }
                Ok(Self::new(family, phase_rad))
            }
        }
    }
}

impl From<BellLabel> for BellRepr {
    fn from(label: BellLabel) -> Self {
        match label.name() {
            Some(name) => BellRepr::Named(name.to_owned()),
            None => BellRepr::Phased {
                family: label.family,
                phase_rad: label.phase,
            },
        }
    }
}

/// Which way the half-wave plate angle maps onto the analyzed polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Port T analyzes linear polarization at `+angle`.
    Relative,
    /// Port T analyzes linear polarization at `−angle` (wave-plate parity flip).
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AnalyzerRepr", into = "AnalyzerRepr")]
pub struct AnalyzerSetting {
    angle: f64,
    convention: Convention,
}

impl AnalyzerSetting {
    /// The angle is reduced modulo π (a linear analyzer has period π).
    pub fn new(angle: f64, convention: Convention) -> Self {
        Self {
            angle: normalize_angle(angle, PI),
            convention,
        }
    }

    pub fn relative(angle: f64) -> Self {
        Self::new(angle, Convention::Relative)
    }

    pub fn mirrored(angle: f64) -> Self {
        Self::new(angle, Convention::Mirrored)
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Polarization angle analyzed by port T.
    pub fn effective_angle(&self) -> f64 {
        match self.convention {
            Convention::Relative => self.angle,
            Convention::Mirrored => -self.angle,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AnalyzerRepr {
    angle_rad: f64,
    convention: Convention,
}

impl TryFrom<AnalyzerRepr> for AnalyzerSetting {
    type Error = String;

    fn try_from(repr: AnalyzerRepr) -> Result<Self, String> {
        if !repr.angle_rad.is_finite() {
            return Err("analyzer angle must be finite".into());
        }
        Ok(Self::new(repr.angle_rad, repr.convention))
    }
}

impl From<AnalyzerSetting> for AnalyzerRepr {
    fn from(s: AnalyzerSetting) -> Self {
        Self {
            angle_rad: s.angle,
            convention: s.convention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    T,
    R,
}

impl Port {
    pub const BOTH: [Port; 2] = [Port::T, Port::R];
}

fn normalize_angle(angle: f64, period: f64) -> f64 {
    let r = angle.rem_euclid(period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs
    if r >= period {
        0.0
    } else {
        r
    }
}

/// A validated two-qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    matrix: Matrix4<Complex64>,
}

impl TwoQubitState {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn from_matrix(matrix: Matrix4<Complex64>) -> Result<Self> {
        let state = Self { matrix };
        state.check()?;
        Ok(state)
    }

    /// Wraps a matrix without any validation. Downstream operations that
    /// depend on normalization still check it.
    pub fn from_matrix_unchecked(matrix: Matrix4<Complex64>) -> Self {
        Self { matrix }
    }

    /// `|ψ><ψ|` for a normalized state vector.
    pub fn from_pure(amplitudes: [Complex64; 4]) -> Result<Self> {
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = amplitudes[i] * amplitudes[j].conj();
            }
        }
        Self::from_matrix(m)
    }

    pub fn maximally_mixed() -> Self {
        Self {
            matrix: Matrix4::identity() * Complex64::new(0.25, 0.0),
        }
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `tr(ρ²)`
    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    pub fn check(&self) -> Result<()> {
        let m = &self.matrix;
        for i in 0..4 {
            for j in 0..4 {
                let diff = m[(i, j)] - m[(j, i)].conj();
                if diff.norm() > HERMITIAN_TOL {
                    return domain(format!("density matrix not Hermitian at ({i},{j})"));
                }
            }
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() >= TRACE_TOL {
            return domain(format!("density matrix trace {tr} differs from 1"));
        }
        let min_eig = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return domain(format!("density matrix has negative eigenvalue {min_eig:e}"));
        }
        Ok(())
    }
}

/// Pure-state density matrix of a Bell state.
pub fn make_bell_state(label: BellLabel) -> TwoQubitState {
    TwoQubitState::from_pure(label.amplitudes()).expect("Bell amplitudes are normalized")
}

/// Isotropic mixing `v·ρ + (1−v)·I/4`.
pub fn apply_werner(state: &TwoQubitState, v: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&v) {
        return domain(format!("Werner visibility {v} outside [0, 1]"));
    }
    let noise = Matrix4::<Complex64>::identity() * Complex64::new((1.0 - v) / 4.0, 0.0);
    TwoQubitState::from_matrix(state.matrix * Complex64::new(v, 0.0) + noise)
}

/// Single-qubit projector for one output port of an analyzer.
pub fn analyzer_projector(setting: AnalyzerSetting, port: Port) -> Matrix2<Complex64> {
    let a = setting.effective_angle();
    let (s, c) = match port {
        Port::T => a.sin_cos(),
        // orthogonal polarization: -sin(a)|H> + cos(a)|V>
        Port::R => {
            let (s, c) = a.sin_cos();
            (c, -s)
        }
    };
    Matrix2::new(c * c, c * s, s * c, s * s).map(|x| Complex64::new(x, 0.0))
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Joint port probabilities for photon 1 at analyzer `a` and photon 2 at `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointProbabilities {
    pub tt: f64,
    pub tr: f64,
    pub rt: f64,
    pub rr: f64,
}

impl JointProbabilities {
    pub fn get(&self, first: Port, second: Port) -> f64 {
        match (first, second) {
            (Port::T, Port::T) => self.tt,
            (Port::T, Port::R) => self.tr,
            (Port::R, Port::T) => self.rt,
            (Port::R, Port::R) => self.rr,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.tt, self.tr, self.rt, self.rr]
    }

    pub fn sum(&self) -> f64 {
        self.tt + self.tr + self.rt + self.rr
    }

    pub fn correlation(&self) -> f64 {
        self.tt + self.rr - self.tr - self.rt
    }
}

fn clamp_probability(p: f64) -> Result<f64> {
    if p >= 0.0 {
        Ok(p)
    } else if p >= -CLAMP_TOL {
        Ok(0.0)
    } else {
        domain(format!("negative probability {p:e}"))
    }
}

fn expectation(state: &TwoQubitState, op: &Matrix4<Complex64>) -> f64 {
    // tr(ρ·O) without forming the product
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            acc += state.matrix[(i, j)] * op[(j, i)];
        }
    }
    acc.re
}

fn require_normalized(state: &TwoQubitState) -> Result<()> {
    let tr = state.trace();
    if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
        return domain(format!("state is not normalized (trace {tr})"));
    }
    Ok(())
}

pub fn joint_outcome_probabilities(
    state: &TwoQubitState,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
) -> Result<JointProbabilities> {
    require_normalized(state)?;
    let pa = [analyzer_projector(a, Port::T), analyzer_projector(a, Port::R)];
    let pb = [analyzer_projector(b, Port::T), analyzer_projector(b, Port::R)];
    let p = |i: usize, j: usize| clamp_probability(expectation(state, &kron(&pa[i], &pb[j])));
    Ok(JointProbabilities {
        tt: p(0, 0)?,
        tr: p(0, 1)?,
        rt: p(1, 0)?,
        rr: p(1, 1)?,
    })
}

/// Which photon of the pair a single-photon quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Photon {
    First,
    Second,
}

/// Probability that one photon alone exits `port` of `setting`.
pub fn marginal_probability(
    state: &TwoQubitState,
    photon: Photon,
    setting: AnalyzerSetting,
    port: Port,
) -> Result<f64> {
    require_normalized(state)?;
    let proj = analyzer_projector(setting, port);
    let id = Matrix2::identity();
    let op = match photon {
        Photon::First => kron(&proj, &id),
        Photon::Second => kron(&id, &proj),
    };
    clamp_probability(expectation(state, &op))
}

/// `E = p_TT + p_RR − p_TR − p_RT`
pub fn ideal_correlation(state: &TwoQubitState, a: AnalyzerSetting, b: AnalyzerSetting) -> Result<f64> {
    Ok(joint_outcome_probabilities(state, a, b)?.correlation())
}

/// Signed visibility in the diagonal basis as a function of the state phase.
pub fn visibility_vs_phase(phi: f64, v0: f64) -> f64 {
    v0 * phi.cos()
}

/// Independent contributions to the system visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityBudget {
    /// Background and multi-pair limited visibility.
    pub v_noise: f64,
    pub v_source: f64,
    /// Polarization contrast of the detection module.
    pub v_polarization: f64,
}

impl VisibilityBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_noise", self.v_noise),
            ("v_source", self.v_source),
            ("v_polarization", self.v_polarization),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The factors are independent, so the total visibility is their product.
pub fn combine_visibilities(budget: &VisibilityBudget) -> Result<f64> {
    budget.validate()?;
    Ok(budget.v_noise * budget.v_source * budget.v_polarization)
}
