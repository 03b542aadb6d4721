//! Classical probabilistic and quantum single-qubit circuits on one work
//! channel.
//!
//! Gate `G_k` acts on the work channel whenever `k` is a submask of the
//! input. In the classical circuit it is the identity with probability
//! `p_k` and NOT otherwise. In the quantum circuit it is the unitary
//!
//! ```text
//!   [  √p            e^{iφ}·√(1−p) ]
//!   [ −e^{−iφ}·√(1−p)      √p      ]
//! ```
//!
//! Activated gates are applied in ascending index order, `G_0` first. The
//! work channel always starts in 0.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::task::{dimension, InputWord, Submasks};

/// Tolerance for probabilities that leave `[0, 1]` by rounding.
const PROB_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitKind {
    Classical,
    Quantum,
}

impl CircuitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CircuitKind::Classical => "classical",
            CircuitKind::Quantum => "quantum",
        }
    }
}

impl fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CircuitKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" | "c" => Ok(CircuitKind::Classical),
            "quantum" | "q" => Ok(CircuitKind::Quantum),
            other => Err(invalid_arg(format!("unknown circuit kind {other:?}"))),
        }
    }
}

fn width_of(len: usize) -> Result<u32> {
    if len < 2 || !len.is_power_of_two() {
        return Err(invalid_arg(format!(
            "vector length {len} is not 2^N for N >= 1"
        )));
    }
    Ok(len.trailing_zeros())
}

/// Gate probabilities `p_k`, one per gate, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        width_of(probs.len())?;
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(invalid_arg(format!("p_{k} = {p} is outside [0, 1]")));
        }
        Ok(Self(probs))
    }

    /// All `2^N` gates set to the same probability.
    pub fn uniform(n_bits: u32, p: f64) -> Result<Self> {
        Self::new(vec![p; dimension(n_bits)])
    }

    pub fn n_bits(&self) -> u32 {
        self.0.len().trailing_zeros()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Relative phases `φ_k`, reduced into `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        width_of(phases.len())?;
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(invalid_arg("phases must be finite"));
        }
        Ok(Self(
            phases.into_iter().map(|p| p.rem_euclid(2.0 * PI)).collect(),
        ))
    }

    pub fn n_bits(&self) -> u32 {
        self.0.len().trailing_zeros()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `φ_k = 0` when `k` has an even number of set bits, `π` otherwise.
pub fn optimized_phases(n_bits: u32) -> PhaseVector {
    PhaseVector(
        (0..dimension(n_bits))
            .map(|k| if k.count_ones() % 2 == 0 { 0.0 } else { PI })
            .collect(),
    )
}

/// A 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateUnitary(pub [[Complex64; 2]; 2]);

impl GateUnitary {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        GateUnitary([[one, zero], [zero, one]])
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        GateUnitary([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    /// Largest entry-wise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (*self * self.adjoint()).max_abs_diff(&Self::identity()) <= tol
    }

    pub fn apply(&self, state: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [
            m[0][0] * state[0] + m[0][1] * state[1],
            m[1][0] * state[0] + m[1][1] * state[1],
        ]
    }
}

impl Mul for GateUnitary {
    type Output = GateUnitary;

    fn mul(self, rhs: GateUnitary) -> GateUnitary {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        GateUnitary(out)
    }
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid_arg(format!("probability {p} is outside [0, 1]")));
    }
    Ok(())
}

pub fn gate_unitary(p: f64, phi: f64) -> Result<GateUnitary> {
    check_prob(p)?;
    let a = Complex64::new(p.sqrt(), 0.0);
    let b = Complex64::from_polar((1.0 - p).sqrt(), phi);
    Ok(GateUnitary([[a, b], [-b.conj(), a]]))
}

/// `(√p_k, e^{iφ_k}·√(1−p_k))` per gate, enough to apply the unitary
/// without forming the matrix.
#[derive(Debug, Clone)]
pub(crate) struct QuantumGates {
    diag: Vec<f64>,
    off: Vec<Complex64>,
}

impl QuantumGates {
    pub(crate) fn new(probs: &[f64], phases: &[f64]) -> Self {
        debug_assert_eq!(probs.len(), phases.len());
        let mut gates = QuantumGates {
            diag: Vec::with_capacity(probs.len()),
            off: Vec::with_capacity(probs.len()),
        };
        gates.refill(probs, phases);
        gates
    }

    pub(crate) fn refill(&mut self, probs: &[f64], phases: &[f64]) {
        self.diag.clear();
        self.off.clear();
        for (&p, &phi) in probs.iter().zip(phases) {
            self.diag.push(p.sqrt());
            self.off.push(Complex64::from_polar((1.0 - p).sqrt(), phi));
        }
    }

    /// `⟨0| G_{k_m} ⋯ G_{k_1} |0⟩` over the submasks of `x`, ascending.
    pub(crate) fn amplitude(&self, x: usize) -> Complex64 {
        let mut u = Complex64::new(1.0, 0.0);
        let mut v = Complex64::new(0.0, 0.0);
        for k in Submasks::new(x) {
            let a = self.diag[k];
            let b = self.off[k];
            let nu = u * a + b * v;
            let nv = -b.conj() * u + v * a;
            u = nu;
            v = nv;
        }
        u
    }
}

/// `P_C(0|x) = 1/2 + 1/2·∏_{k∈A_x}(2p_k − 1)`, no width checks.
#[inline]
pub(crate) fn classical_zero_raw(probs: &[f64], x: usize) -> f64 {
    let prod: f64 = Submasks::new(x).map(|k| 2.0 * probs[k] - 1.0).product();
    0.5 + 0.5 * prod
}

fn check_width(params_bits: u32, x: InputWord) -> Result<()> {
    if params_bits != x.n_bits() {
        return Err(invalid_arg(format!(
            "parameters cover {params_bits} bits but input has {}",
            x.n_bits()
        )));
    }
    Ok(())
}

/// Probability that the classical circuit outputs 0 on `x`: the chance of
/// an even number of NOT flips among the activated gates.
pub fn classical_prob_zero(params: &ParameterVector, x: InputWord) -> Result<f64> {
    check_width(params.n_bits(), x)?;
    Ok(classical_zero_raw(params.as_slice(), x.value()))
}

pub fn quantum_amplitude(
    params: &ParameterVector,
    phases: &PhaseVector,
    x: InputWord,
) -> Result<Complex64> {
    check_width(params.n_bits(), x)?;
    if phases.n_bits() != params.n_bits() {
        return Err(invalid_arg(format!(
            "{} phases for {} gates",
            phases.as_slice().len(),
            params.as_slice().len()
        )));
    }
    // Only the activated gates are needed; build them on the fly.
    let mut u = Complex64::new(1.0, 0.0);
    let mut v = Complex64::new(0.0, 0.0);
    for k in Submasks::new(x.value()) {
        let [nu, nv] = gate_unitary(params.as_slice()[k], phases.as_slice()[k])?.apply([u, v]);
        u = nu;
        v = nv;
    }
    Ok(u)
}

/// The set `{P(y|x)}` for every input. Only `P(0|x)` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    n_bits: u32,
    prob_zero: Vec<f64>,
}

impl ConditionalDistribution {
    /// Values within `1e-12` of `[0, 1]` are snapped onto it.
    pub fn from_prob_zero(prob_zero: Vec<f64>) -> Result<Self> {
        let n_bits = width_of(prob_zero.len())?;
        let prob_zero = prob_zero
            .into_iter()
            .enumerate()
            .map(|(x, p)| {
                if p.is_nan() || !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
                    Err(invalid_arg(format!("P(0|{x}) = {p} is not a probability")))
                } else {
                    Ok(p.clamp(0.0, 1.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_bits, prob_zero })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn prob_zero(&self) -> &[f64] {
        &self.prob_zero
    }

    /// `P(y|x)`.
    pub fn prob(&self, x: usize, y: bool) -> f64 {
        let p0 = self.prob_zero[x];
        if y {
            1.0 - p0
        } else {
            p0
        }
    }

    /// `(x, P(0|x), P(1|x))` for each input.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.prob_zero
            .iter()
            .enumerate()
            .map(|(x, &p0)| (x, p0, 1.0 - p0))
    }
}

pub fn circuit_distribution(
    kind: CircuitKind,
    params: &ParameterVector,
    phases: Option<&PhaseVector>,
) -> Result<ConditionalDistribution> {
    let probs = params.as_slice();
    let prob_zero: Vec<f64> = match (kind, phases) {
        (CircuitKind::Classical, None) => (0..probs.len())
            .map(|x| classical_zero_raw(probs, x))
            .collect(),
        (CircuitKind::Classical, Some(_)) => {
            return Err(invalid_arg("the classical circuit takes no phases"))
        }
        (CircuitKind::Quantum, None) => {
            return Err(invalid_arg("the quantum circuit needs phases"))
        }
        (CircuitKind::Quantum, Some(phases)) => {
            if phases.n_bits() != params.n_bits() {
                return Err(invalid_arg("phase and parameter widths differ"));
            }
            let gates = QuantumGates::new(probs, phases.as_slice());
            (0..probs.len())
                .map(|x| gates.amplitude(x).norm_sqr())
                .collect()
        }
    };
    ConditionalDistribution::from_prob_zero(prob_zero)
}
