//! Dense statevector simulation from `|0…0⟩`, single-qubit reduced purities
//! and the Meyer-Wallach global entanglement `Q = (2/n) Σ_i (1 - Tr ρ_i²)`.
//!
//! Amplitude index bit `i` is the computational-basis value of qubit `i`.
//! Amplitudes are `f64` by default; `StateVector<f32>` halves memory for
//! large registers. All reductions run in `f64` with blocked pairwise
//! summation, so results do not depend on thread count.

use std::fmt::Debug;

use num_complex::Complex;
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{describe_violations, Circuit, Gate, Violation};

/// Largest register the dense simulator accepts (2^26 amplitudes, ~1 GiB at f64).
pub const MAX_QUBITS: usize = 26;

/// Largest register the density-matrix oracle accepts.
pub const ORACLE_MAX_QUBITS: usize = 10;

const NORM_TOLERANCE: f64 = 1e-10;
const BLOCK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("wire {wire} out of range for {num_qubits} qubits")]
    WireOutOfRange { wire: usize, num_qubits: usize },
    #[error("resource limit: {num_qubits} qubits exceeds the {what} limit of {limit}")]
    TooManyQubits {
        num_qubits: usize,
        limit: usize,
        what: &'static str,
    },
    #[error("invalid circuit: {}", describe_violations(.0))]
    InvalidCircuit(Vec<Violation>),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Scalar type for amplitudes.
pub trait Real: Float + Into<f64> + Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

/// `2^n` complex amplitudes of an `n`-qubit pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<F: Real = f64> {
    num_qubits: usize,
    amplitudes: Vec<Complex<F>>,
}

impl<F: Real> StateVector<F> {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self, SimError> {
        check_size(num_qubits, MAX_QUBITS, "simulator")?;
        let mut amplitudes = vec![Complex::new(F::zero(), F::zero()); 1 << num_qubits];
        amplitudes[0] = Complex::new(F::one(), F::zero());
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps explicit amplitudes; length must be `2^num_qubits` and the norm 1.
    pub fn from_amplitudes(
        num_qubits: usize,
        amplitudes: Vec<Complex<F>>,
    ) -> Result<Self, SimError> {
        check_size(num_qubits, MAX_QUBITS, "simulator")?;
        if amplitudes.len() != 1 << num_qubits {
            return Err(SimError::InvalidState(format!(
                "expected {} amplitudes, got {}",
                1usize << num_qubits,
                amplitudes.len()
            )));
        }
        let state = Self {
            num_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE.max(16.0 * F::epsilon().into()) {
            return Err(SimError::InvalidState(format!(
                "norm² is {norm}, expected 1"
            )));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<F>] {
        &self.amplitudes
    }

    /// `Σ |a|²`.
    pub fn norm_sqr(&self) -> f64 {
        blocked_sum(
            self.amplitudes
                .chunks(BLOCK)
                .map(|chunk| chunk.iter().map(|a| to_c64(*a).norm_sqr()).sum::<f64>()),
        )
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        assert_eq!(
            self.num_qubits, other.num_qubits,
            "fidelity of mismatched registers"
        );
        let re = blocked_sum(
            self.amplitudes
                .chunks(BLOCK)
                .zip(other.amplitudes.chunks(BLOCK))
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| (to_c64(*x).conj() * to_c64(*y)).re)
                        .sum::<f64>()
                }),
        );
        let im = blocked_sum(
            self.amplitudes
                .chunks(BLOCK)
                .zip(other.amplitudes.chunks(BLOCK))
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| (to_c64(*x).conj() * to_c64(*y)).im)
                        .sum::<f64>()
                }),
        );
        re * re + im * im
    }

    /// Applies one gate in place.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<(), SimError> {
        for wire in gate.wires() {
            if wire >= self.num_qubits {
                return Err(SimError::WireOutOfRange {
                    wire,
                    num_qubits: self.num_qubits,
                });
            }
        }
        match *gate {
            Gate::H { target } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                self.apply_real_1q(target, [[s, s], [s, -s]]);
            }
            Gate::Ry { angle, target } => {
                let (sin, cos) = (angle / 2.0).sin_cos();
                self.apply_real_1q(target, [[cos, -sin], [sin, cos]]);
            }
            Gate::Cnot { control, target } => {
                if control == target {
                    return Err(SimError::InvalidState("CNOT control equals target".into()));
                }
                self.apply_cnot(control, target);
            }
        }
        Ok(())
    }

    fn apply_real_1q(&mut self, target: usize, m: [[f64; 2]; 2]) {
        let stride = 1usize << target;
        let [[m00, m01], [m10, m11]] = m.map(|row| row.map(F::from_f64));
        for block in self.amplitudes.chunks_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a0, *a1);
                *a0 = x * m00 + y * m01;
                *a1 = x * m10 + y * m11;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let stride = 1usize << target;
        let control_mask = 1usize << control;
        for (b, block) in self.amplitudes.chunks_mut(2 * stride).enumerate() {
            let base = b * 2 * stride;
            let (lo, hi) = block.split_at_mut(stride);
            if control > target {
                // The control bit is constant across this block.
                if base & control_mask != 0 {
                    lo.swap_with_slice(hi);
                }
            } else {
                for (j, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    if (base + j) & control_mask != 0 {
                        std::mem::swap(a0, a1);
                    }
                }
            }
        }
    }

    /// Entries `(ρ00, ρ11, ρ01)` of qubit `qubit`'s reduced density matrix.
    pub fn reduced_density(&self, qubit: usize) -> (f64, f64, Complex<f64>) {
        let stride = 1usize << qubit;
        let mut partials = Vec::with_capacity(self.amplitudes.len() / (2 * BLOCK) + 1);
        let mut acc = [0.0f64; 4];
        let mut count = 0usize;
        for block in self.amplitudes.chunks(2 * stride) {
            let (lo, hi) = block.split_at(stride);
            for (a0, a1) in lo.iter().zip(hi) {
                let (x, y) = (to_c64(*a0), to_c64(*a1));
                let cross = x * y.conj();
                acc[0] += x.norm_sqr();
                acc[1] += y.norm_sqr();
                acc[2] += cross.re;
                acc[3] += cross.im;
                count += 1;
                if count == BLOCK {
                    partials.push(acc);
                    acc = [0.0; 4];
                    count = 0;
                }
            }
        }
        partials.push(acc);
        let sum = |k: usize| pairwise(&partials.iter().map(|p| p[k]).collect::<Vec<_>>());
        (sum(0), sum(1), Complex::new(sum(2), sum(3)))
    }
}

impl StateVector<f64> {
    /// Converts to single precision.
    pub fn to_f32(&self) -> StateVector<f32> {
        StateVector {
            num_qubits: self.num_qubits,
            amplitudes: self
                .amplitudes
                .iter()
                .map(|a| Complex::new(a.re as f32, a.im as f32))
                .collect(),
        }
    }
}

fn to_c64<F: Real>(a: Complex<F>) -> Complex<f64> {
    Complex::new(a.re.into(), a.im.into())
}

fn check_size(num_qubits: usize, limit: usize, what: &'static str) -> Result<(), SimError> {
    if num_qubits == 0 {
        return Err(SimError::InvalidState("register has no qubits".into()));
    }
    if num_qubits > limit {
        return Err(SimError::TooManyQubits {
            num_qubits,
            limit,
            what,
        });
    }
    Ok(())
}

/// Pairwise (cascade) summation.
pub fn pairwise(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise(a) + pairwise(b)
}

fn blocked_sum(partials: impl Iterator<Item = f64>) -> f64 {
    pairwise(&partials.collect::<Vec<_>>())
}

/// Runs `circuit` on `|0…0⟩` in double precision.
pub fn simulate(circuit: &Circuit) -> Result<StateVector<f64>, SimError> {
    simulate_with_precision::<f64>(circuit)
}

/// Runs `circuit` on `|0…0⟩` with amplitudes of type `F`.
pub fn simulate_with_precision<F: Real>(circuit: &Circuit) -> Result<StateVector<F>, SimError> {
    check_size(circuit.num_qubits, MAX_QUBITS, "simulator")?;
    circuit.validate().map_err(SimError::InvalidCircuit)?;
    let mut state = StateVector::<F>::zero(circuit.num_qubits)?;
    for gate in &circuit.gates {
        state.apply_gate(gate)?;
    }
    Ok(state)
}

/// `Tr ρ_i²` for every qubit `i`.
pub fn qubit_purities<F: Real>(state: &StateVector<F>) -> Vec<f64> {
    (0..state.num_qubits())
        .map(|q| {
            let (r00, r11, r01) = state.reduced_density(q);
            r00 * r00 + r11 * r11 + 2.0 * r01.norm_sqr()
        })
        .collect()
}

/// Meyer-Wallach value together with the purities it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwReport {
    pub q: f64,
    pub purities: Vec<f64>,
}

impl MwReport {
    /// `q = 2 (1 - mean purity)`.
    pub fn from_purities(purities: Vec<f64>) -> Self {
        let n = purities.len() as f64;
        let deficit = pairwise(&purities.iter().map(|p| 1.0 - p).collect::<Vec<_>>());
        Self {
            // Rounding can leave q a few ulps outside [0, 1].
            q: (2.0 * deficit / n).clamp(0.0, 1.0),
            purities,
        }
    }
}

pub fn meyer_wallach<F: Real>(state: &StateVector<F>) -> MwReport {
    MwReport::from_purities(qubit_purities(state))
}

/// Independent Meyer-Wallach route: builds the full `2^n × 2^n` density
/// matrix and traces out everything but each qubit explicitly. Only for
/// `n <= 10`.
#[allow(clippy::needless_range_loop)]
pub fn meyer_wallach_oracle(state: &StateVector<f64>) -> Result<f64, SimError> {
    let n = state.num_qubits();
    check_size(n, ORACLE_MAX_QUBITS, "density-matrix oracle")?;
    let dim = 1usize << n;
    let psi = state.amplitudes();
    let mut rho = vec![Complex::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            rho[r * dim + c] = psi[r] * psi[c].conj();
        }
    }
    let mut total = 0.0;
    for qubit in 0..n {
        let mut reduced = [[Complex::new(0.0, 0.0); 2]; 2];
        for rest in 0..dim / 2 {
            // Insert the kept bit into position `qubit` of the traced index.
            let low = rest & ((1 << qubit) - 1);
            let high = (rest >> qubit) << (qubit + 1);
            for a in 0..2 {
                for b in 0..2 {
                    let row = high | (a << qubit) | low;
                    let col = high | (b << qubit) | low;
                    reduced[a][b] += rho[row * dim + col];
                }
            }
        }
        let mut purity = Complex::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                purity += reduced[a][b] * reduced[b][a];
            }
        }
        total += 1.0 - purity.re;
    }
    Ok(2.0 * total / n as f64)
}
