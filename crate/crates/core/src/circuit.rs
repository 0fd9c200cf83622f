//! Gates, fixed-length circuits over `n` qubits, the discrete RY angle set,
//! and the random-circuit ensemble the search starts from.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One gate of the restricted set `{H, RY, CNOT}`.
///
/// Wire indices are zero-based. RY angles are in radians and follow the
/// `exp(-i θ Y / 2)` convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H { target: usize },
    Ry { angle: f64, target: usize },
    Cnot { control: usize, target: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    H,
    Ry,
    Cnot,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::Cnot, GateKind::H, GateKind::Ry];

    /// Canonical upper-case name used by the gate-list format.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::Ry => "RY",
            GateKind::Cnot => "CNOT",
        }
    }

    /// Number of wires the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::Ry => 1,
            GateKind::Cnot => 2,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Gate {
    pub fn h(target: usize) -> Self {
        Gate::H { target }
    }

    pub fn ry(angle: f64, target: usize) -> Self {
        Gate::Ry { angle, target }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H { .. } => GateKind::H,
            Gate::Ry { .. } => GateKind::Ry,
            Gate::Cnot { .. } => GateKind::Cnot,
        }
    }

    /// Wires in argument order: `[target]` or `[control, target]`.
    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Gate::H { target } | Gate::Ry { target, .. } => vec![target],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Same gate with every wire passed through `map`.
    pub fn map_wires(&self, mut map: impl FnMut(usize) -> usize) -> Gate {
        match *self {
            Gate::H { target } => Gate::H {
                target: map(target),
            },
            Gate::Ry { angle, target } => Gate::Ry {
                angle,
                target: map(target),
            },
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map(control),
                target: map(target),
            },
        }
    }

    fn violations(&self, index: usize, num_qubits: usize, out: &mut Vec<Violation>) {
        for wire in self.wires() {
            if wire >= num_qubits {
                out.push(Violation {
                    gate: Some(index),
                    kind: ViolationKind::WireOutOfRange { wire, num_qubits },
                });
            }
        }
        if let Gate::Cnot { control, target } = *self {
            if control == target {
                out.push(Violation {
                    gate: Some(index),
                    kind: ViolationKind::ControlEqualsTarget,
                });
            }
        }
        if let Gate::Ry { angle, .. } = *self {
            if !angle.is_finite() {
                out.push(Violation {
                    gate: Some(index),
                    kind: ViolationKind::NonFiniteAngle,
                });
            }
        }
    }
}

/// Why a circuit failed validation.
#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    NoQubits,
    WireOutOfRange { wire: usize, num_qubits: usize },
    ControlEqualsTarget,
    NonFiniteAngle,
    AngleNotAllowed { angle: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Offending gate index, `None` for circuit-level problems.
    pub gate: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::NoQubits => f.write_str("circuit has no qubits")?,
            ViolationKind::WireOutOfRange { wire, num_qubits } => {
                write!(f, "wire {wire} out of range (n = {num_qubits})")?
            }
            ViolationKind::ControlEqualsTarget => f.write_str("control equals target")?,
            ViolationKind::NonFiniteAngle => f.write_str("angle is not finite")?,
            ViolationKind::AngleNotAllowed { angle } => {
                write!(f, "angle {angle} not in the allowed set")?
            }
        }
        if let Some(i) = self.gate {
            write!(f, " at gate {i}")?;
        }
        Ok(())
    }
}

/// Renders a violation list as `a; b; c`.
pub fn describe_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("invalid parameter: {0}")]
    Param(String),
}

/// An ordered gate list over `num_qubits` wires, applied to `|0…0⟩` in list order.
///
/// Construction never validates; call [`Circuit::validate`] to get the list
/// of violations.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize, gates: Vec<Gate>) -> Self {
        Self { num_qubits, gates }
    }

    pub fn empty(num_qubits: usize) -> Self {
        Self::new(num_qubits, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Checks wire ranges, CNOT distinctness and angle finiteness.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.num_qubits == 0 {
            out.push(Violation {
                gate: None,
                kind: ViolationKind::NoQubits,
            });
        }
        for (i, gate) in self.gates.iter().enumerate() {
            gate.violations(i, self.num_qubits, &mut out);
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Every RY angle must be an exact member of `angles`.
    pub fn validate_against_angle_set(&self, angles: &AngleSet) -> Result<(), Vec<Violation>> {
        let out: Vec<_> = self
            .gates
            .iter()
            .enumerate()
            .filter_map(|(i, g)| match g.angle() {
                Some(angle) if !angles.contains(angle) => Some(Violation {
                    gate: Some(i),
                    kind: ViolationKind::AngleNotAllowed { angle },
                }),
                _ => None,
            })
            .collect();
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Sub-circuit acting only on `qubits`, relabelled to `0..qubits.len()`
    /// in the order given. Gates touching any other wire are dropped.
    pub fn restrict(&self, qubits: &[usize]) -> Circuit {
        let position = |w: usize| qubits.iter().position(|&q| q == w);
        let gates = self
            .gates
            .iter()
            .filter(|g| g.wires().iter().all(|&w| position(w).is_some()))
            .map(|g| g.map_wires(|w| position(w).unwrap()))
            .collect();
        Circuit::new(qubits.len(), gates)
    }

    /// Applies the wire relabelling `old -> perm[old]`.
    pub fn permute_wires(&self, perm: &[usize]) -> Circuit {
        Circuit::new(
            self.num_qubits,
            self.gates
                .iter()
                .map(|g| g.map_wires(|w| perm[w]))
                .collect(),
        )
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::serialize(self))
    }
}

// Circuits travel through run files as canonical gate-list text.
#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    num_qubits: usize,
    gates: String,
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CircuitRepr {
            num_qubits: self.num_qubits,
            gates: crate::dsl::serialize(self),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = CircuitRepr::deserialize(deserializer)?;
        crate::dsl::parse(&repr.gates, repr.num_qubits).map_err(serde::de::Error::custom)
    }
}

/// The finite set of angles (radians) an RY gate may use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngleSet(Vec<f64>);

impl AngleSet {
    /// Non-empty, all finite. Duplicates are dropped; order is kept.
    pub fn new(angles: impl IntoIterator<Item = f64>) -> Result<Self, CircuitError> {
        let mut out: Vec<f64> = Vec::new();
        for a in angles {
            if !a.is_finite() {
                return Err(CircuitError::Param(format!("angle {a} is not finite")));
            }
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if out.is_empty() {
            return Err(CircuitError::Param("angle set is empty".into()));
        }
        Ok(Self(out))
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.0.contains(&angle)
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for AngleSet {
    /// `{3.0, 10.0, 25.0}`.
    fn default() -> Self {
        Self(vec![3.0, 10.0, 25.0])
    }
}

impl TryFrom<Vec<f64>> for AngleSet {
    type Error = CircuitError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AngleSet> for Vec<f64> {
    fn from(s: AngleSet) -> Self {
        s.0
    }
}

impl FromStr for AngleSet {
    type Err = CircuitError;

    /// Accepts `3,10,25`, `{3.0, 10.0, 25.0}` or `[0.1 0.42 1]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .trim_matches(|c| matches!(c, '{' | '}' | '[' | ']'));
        let angles = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| CircuitError::Param(format!("bad angle {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(angles)
    }
}

impl fmt::Display for AngleSet {
    /// Comma-separated, in gate-list number format: `3.0, 10.0, 25.0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<_> = self
            .0
            .iter()
            .map(|&a| crate::dsl::format_angle(a))
            .collect();
        f.write_str(&parts.join(", "))
    }
}

/// Draws one gate: kind uniform over `{H, RY, CNOT}`, wires uniform without
/// replacement, angle uniform over `angles`. Needs `num_qubits >= 2`.
pub fn random_gate<R: Rng + ?Sized>(num_qubits: usize, angles: &AngleSet, rng: &mut R) -> Gate {
    match GateKind::ALL[rng.random_range(0..3)] {
        GateKind::H => Gate::h(rng.random_range(0..num_qubits)),
        GateKind::Ry => {
            let angle = angles.0[rng.random_range(0..angles.len())];
            Gate::ry(angle, rng.random_range(0..num_qubits))
        }
        GateKind::Cnot => {
            let pair = index::sample(rng, num_qubits, 2);
            Gate::cnot(pair.index(0), pair.index(1))
        }
    }
}

/// A seeded sample from the random-circuit ensemble with `num_gates` gates.
pub fn random_circuit(
    num_qubits: usize,
    num_gates: usize,
    angles: &AngleSet,
    seed: u64,
) -> Result<Circuit, CircuitError> {
    if num_qubits < 2 {
        return Err(CircuitError::Param(format!(
            "random circuits need at least 2 qubits, got {num_qubits}"
        )));
    }
    if num_gates < 1 {
        return Err(CircuitError::Param(
            "random circuits need at least 1 gate".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = (0..num_gates)
        .map(|_| random_gate(num_qubits, angles, &mut rng))
        .collect();
    Ok(Circuit::new(num_qubits, gates))
}
