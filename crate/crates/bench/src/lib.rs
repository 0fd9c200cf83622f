//! Inputs shared by the benchmarks.

use qsynth_core::{curate, parse, random_circuit, AngleSet, Circuit};

pub const BELL_GHZ3: &str = include_str!("../../../fixtures/bell_ghz3.txt");
pub const DISCONNECTED_B: &str = include_str!("../../../fixtures/disconnected_b.txt");

/// A fixture listing as a 25-qubit circuit.
pub fn load(raw: &str) -> Circuit {
    parse(&curate(raw).expect("curate"), 25).expect("parse")
}

/// Seeded random circuit over the default angle set.
pub fn random(num_qubits: usize, gates: usize, seed: u64) -> Circuit {
    random_circuit(num_qubits, gates, &AngleSet::default(), seed).expect("random circuit")
}
