#![allow(dead_code)]

use qsynth_core::{curate, parse, Circuit};

pub const BELL_GHZ3: &str = include_str!("../../../../fixtures/bell_ghz3.txt");
pub const RY_CHAIN: &str = include_str!("../../../../fixtures/ry_chain.txt");
pub const DISCONNECTED_A: &str = include_str!("../../../../fixtures/disconnected_a.txt");
pub const DISCONNECTED_B: &str = include_str!("../../../../fixtures/disconnected_b.txt");

pub const ALL: [(&str, &str); 4] = [
    ("bell_ghz3", BELL_GHZ3),
    ("ry_chain", RY_CHAIN),
    ("disconnected_a", DISCONNECTED_A),
    ("disconnected_b", DISCONNECTED_B),
];

/// Curates and parses a listing as a 25-qubit circuit.
pub fn load(raw: &str) -> Circuit {
    let text = curate(raw).expect("curate");
    let c = parse(&text, 25).expect("parse");
    c.validate().expect("valid");
    c
}

pub mod stub;
