//! Structure of synthesized states.
//!
//! CNOTs are the only coupling gates, so the qubits split into connected
//! components of the CNOT interaction graph and the output state is a
//! tensor product over those components. Each component is simulated on its
//! own and matched against a small dictionary of canonical states.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::sim::{self, MwReport, SimError, StateVector};

/// Components larger than this are not classified.
pub const MAX_COMPONENT_QUBITS: usize = 12;

/// Minimum fidelity for a component to take a dictionary label.
pub const CLASSIFY_THRESHOLD: f64 = 0.999;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionGraph {
    pub num_qubits: usize,
    /// Undirected CNOT couplings as `(low, high)` pairs.
    pub edges: BTreeSet<(usize, usize)>,
    /// Partition of `0..num_qubits`; members ascending, components ordered
    /// by their smallest member.
    pub components: Vec<Vec<usize>>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Builds the CNOT interaction graph. Wires outside the register are ignored.
pub fn interaction_graph(circuit: &Circuit) -> InteractionGraph {
    let n = circuit.num_qubits;
    let mut uf = UnionFind::new(n);
    let mut edges = BTreeSet::new();
    for gate in &circuit.gates {
        if let Gate::Cnot { control, target } = *gate {
            if control != target && control < n && target < n {
                edges.insert((control.min(target), control.max(target)));
                uf.union(control, target);
            }
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for q in 0..n {
        let root = uf.find(q);
        if slot[root] == usize::MAX {
            slot[root] = components.len();
            components.push(Vec::new());
        }
        components[slot[root]].push(q);
    }
    InteractionGraph {
        num_qubits: n,
        edges,
        components,
    }
}

/// True when every RY angle is a multiple of 2π, so the circuit is built
/// from H and CNOT alone (up to global phase).
pub fn is_clifford(circuit: &Circuit) -> bool {
    circuit.gates.iter().all(|g| match g.angle() {
        Some(angle) => {
            let r = angle.rem_euclid(TAU);
            r < 1e-9 || TAU - r < 1e-9
        }
        None => true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StateClass {
    /// `(|0…0⟩ + |1…1⟩)/√2` on `k >= 3` qubits.
    Ghz(usize),
    Bell,
    Plus,
    Zero,
    /// `cos(θ/2)|00⟩ + sin(θ/2)|11⟩`, `θ ∈ [0, 2π)`.
    RotatedPair {
        theta: f64,
    },
    Unclassified {
        reason: Option<String>,
    },
}

impl StateClass {
    /// Label without parameters, used for summaries.
    pub fn label(&self) -> String {
        match self {
            StateClass::Ghz(k) => format!("GHZ_{k}"),
            StateClass::Bell => "BELL".into(),
            StateClass::Plus => "PLUS".into(),
            StateClass::Zero => "ZERO".into(),
            StateClass::RotatedPair { .. } => "ROTATED_PAIR".into(),
            StateClass::Unclassified { .. } => "UNCLASSIFIED".into(),
        }
    }
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateClass::RotatedPair { theta } => write!(f, "ROTATED_PAIR(θ={theta:.4})"),
            StateClass::Unclassified { reason: Some(r) } => write!(f, "UNCLASSIFIED ({r})"),
            other => f.write_str(&other.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub qubits: Vec<usize>,
    pub class: StateClass,
    /// Fidelity with the assigned (or best-matching) dictionary state.
    pub fidelity: f64,
    /// Meyer-Wallach value of the component on its own.
    pub mw: MwReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// Global report, purities in original qubit order.
    pub mw: MwReport,
    pub clifford: bool,
    pub components: Vec<ComponentReport>,
}

impl AnalysisReport {
    /// Counts per label in order of first appearance, e.g. `11 × BELL, 1 × GHZ_3`.
    pub fn summary(&self) -> String {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for c in &self.components {
            let label = c.class.label();
            match counts.iter_mut().find(|(l, _)| *l == label) {
                Some((_, n)) => *n += 1,
                None => counts.push((label, 1)),
            }
        }
        counts
            .iter()
            .map(|(l, n)| format!("{n} × {l}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Number of components carrying `label`.
    pub fn count(&self, label: &str) -> usize {
        self.components
            .iter()
            .filter(|c| c.class.label() == label)
            .count()
    }
}

/// Simulates each interaction component on its own register.
///
/// Returns `(qubits, state)` pairs in component order.
pub fn component_states(circuit: &Circuit) -> Result<Vec<(Vec<usize>, StateVector)>, SimError> {
    circuit.validate().map_err(SimError::InvalidCircuit)?;
    interaction_graph(circuit)
        .components
        .into_iter()
        .map(|qubits| {
            let state = sim::simulate(&circuit.restrict(&qubits))?;
            Ok((qubits, state))
        })
        .collect()
}

/// Meyer-Wallach report computed component by component. Equal to the dense
/// route, but only ever allocates the largest component.
pub fn factored_meyer_wallach(circuit: &Circuit) -> Result<MwReport, SimError> {
    circuit.validate().map_err(SimError::InvalidCircuit)?;
    let mut purities = vec![1.0; circuit.num_qubits];
    for qubits in interaction_graph(circuit).components {
        if qubits.len() == 1 {
            continue;
        }
        let state = sim::simulate(&circuit.restrict(&qubits))?;
        for (p, &q) in sim::qubit_purities(&state).into_iter().zip(&qubits) {
            purities[q] = p;
        }
    }
    Ok(MwReport::from_purities(purities))
}

/// Embeds component states back into one register.
pub fn assemble_product_state(
    num_qubits: usize,
    parts: &[(Vec<usize>, StateVector)],
) -> Result<StateVector, SimError> {
    if num_qubits > sim::MAX_QUBITS {
        return Err(SimError::TooManyQubits {
            num_qubits,
            limit: sim::MAX_QUBITS,
            what: "simulator",
        });
    }
    let mut amps = vec![Complex::new(1.0, 0.0); 1usize << num_qubits];
    for (qubits, state) in parts {
        let sub = state.amplitudes();
        for (index, amp) in amps.iter_mut().enumerate() {
            let local = qubits
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &q)| acc | (((index >> q) & 1) << k));
            *amp *= sub[local];
        }
    }
    StateVector::from_amplitudes(num_qubits, amps)
}

fn ghz_fidelity(state: &StateVector) -> f64 {
    let a = state.amplitudes();
    let sum = a[0] + a[a.len() - 1];
    sum.norm_sqr() / 2.0
}

fn plus_fidelity(state: &StateVector) -> f64 {
    let a = state.amplitudes();
    ((a[0] + a[1]) * FRAC_1_SQRT_2).norm_sqr()
}

fn zero_fidelity(state: &StateVector) -> f64 {
    state.amplitudes()[0].norm_sqr()
}

fn rotated_pair_overlap(state: &StateVector, theta: f64) -> f64 {
    let a = state.amplitudes();
    let (s, c) = (theta / 2.0).sin_cos();
    (a[0] * c + a[3] * s).norm_sqr()
}

/// Best `θ` for `cos(θ/2)|00⟩ + sin(θ/2)|11⟩`: a 1e-3 grid over `[0, 2π)`
/// followed by golden-section refinement around the best grid point.
fn best_rotated_pair(state: &StateVector) -> (f64, f64) {
    let step = 1e-3;
    let steps = (TAU / step).ceil() as usize;
    let (mut best_theta, mut best) = (0.0, f64::MIN);
    for k in 0..steps {
        let theta = k as f64 * step;
        let f = rotated_pair_overlap(state, theta);
        if f > best {
            best = f;
            best_theta = theta;
        }
    }
    let (mut lo, mut hi) = (best_theta - step, best_theta + step);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let m1 = hi - ratio * (hi - lo);
        let m2 = lo + ratio * (hi - lo);
        if rotated_pair_overlap(state, m1) < rotated_pair_overlap(state, m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let theta = 0.5 * (lo + hi);
    let f = rotated_pair_overlap(state, theta);
    if f >= best {
        (theta.rem_euclid(TAU), f)
    } else {
        (best_theta, best)
    }
}

fn classify(state: &StateVector) -> (StateClass, f64) {
    let mut candidates: Vec<(StateClass, f64)> = Vec::new();
    match state.num_qubits() {
        1 => {
            candidates.push((StateClass::Plus, plus_fidelity(state)));
            candidates.push((StateClass::Zero, zero_fidelity(state)));
        }
        2 => {
            candidates.push((StateClass::Bell, ghz_fidelity(state)));
            let (theta, f) = best_rotated_pair(state);
            candidates.push((StateClass::RotatedPair { theta }, f));
        }
        k => candidates.push((StateClass::Ghz(k), ghz_fidelity(state))),
    }
    if let Some((class, f)) = candidates.iter().find(|(_, f)| *f >= CLASSIFY_THRESHOLD) {
        return (class.clone(), f.min(1.0));
    }
    let best = candidates
        .iter()
        .map(|(_, f)| *f)
        .fold(0.0, f64::max)
        .min(1.0);
    (StateClass::Unclassified { reason: None }, best)
}

/// Classifies every interaction component of `circuit`'s output state.
///
/// Fails only when the circuit is invalid or a component exceeds the
/// simulator's register limit; oversized-for-classification components come
/// back as `Unclassified` with a reason.
pub fn classify_components(circuit: &Circuit) -> Result<AnalysisReport, SimError> {
    circuit.validate().map_err(SimError::InvalidCircuit)?;
    let graph = interaction_graph(circuit);
    let mut purities = vec![1.0; circuit.num_qubits];
    let mut components = Vec::with_capacity(graph.components.len());
    for qubits in graph.components {
        let state = sim::simulate(&circuit.restrict(&qubits))?;
        let mw = sim::meyer_wallach(&state);
        for (&q, &p) in qubits.iter().zip(&mw.purities) {
            purities[q] = p;
        }
        let (class, fidelity) = if qubits.len() > MAX_COMPONENT_QUBITS {
            (
                StateClass::Unclassified {
                    reason: Some(format!(
                        "component of {} qubits exceeds the {MAX_COMPONENT_QUBITS}-qubit classification limit",
                        qubits.len()
                    )),
                },
                0.0,
            )
        } else {
            classify(&state)
        };
        components.push(ComponentReport {
            qubits,
            class,
            fidelity,
            mw,
        });
    }
    Ok(AnalysisReport {
        mw: MwReport::from_purities(purities),
        clifford: is_clifford(circuit),
        components,
    })
}

/// Canonical form of a rotated pair's angle folded into `[0, π)`; the
/// state is defined only up to global phase, so `θ` and `θ + 2π` coincide.
pub fn fold_pair_angle(theta: f64) -> f64 {
    (theta / 2.0).rem_euclid(PI) * 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{random_circuit, AngleSet};
    use crate::dsl::parse;

    #[test]
    fn h_only_circuit_has_singletons() {
        let c = Circuit::new(5, (0..5).map(Gate::h).collect());
        let g = interaction_graph(&c);
        assert_eq!(g.components, (0..5).map(|q| vec![q]).collect::<Vec<_>>());
        assert!(g.edges.is_empty());
    }

    #[test]
    fn components_partition_register() {
        let c = random_circuit(20, 25, &AngleSet::default(), 3).unwrap();
        let g = interaction_graph(&c);
        let mut all: Vec<usize> = g.components.concat();
        all.sort();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        for (a, b) in &g.edges {
            assert_ne!(a, b);
        }
    }

    #[test]
    fn clifford_detection() {
        assert!(is_clifford(&Circuit::new(
            4,
            vec![Gate::h(0), Gate::cnot(0, 1)]
        )));
        assert!(is_clifford(&Circuit::new(4, vec![Gate::ry(0.0, 3)])));
        assert!(is_clifford(&Circuit::new(4, vec![Gate::ry(TAU, 3)])));
        assert!(!is_clifford(&Circuit::new(4, vec![Gate::ry(25.0, 3)])));
    }

    #[test]
    fn zero_state_is_all_zero_singletons() {
        let report = classify_components(&Circuit::empty(4)).unwrap();
        assert_eq!(report.summary(), "4 × ZERO");
        assert_eq!(report.mw.q, 0.0);
    }

    #[test]
    fn small_ghz_bell_plus() {
        let c = parse(
            "[('H', [0]), ('CNOT', [0, 1]), ('CNOT', [1, 2]), ('H', [3]), ('CNOT', [3, 4]), ('H', [5])]",
            7,
        )
        .unwrap();
        let report = classify_components(&c).unwrap();
        assert_eq!(report.summary(), "1 × GHZ_3, 1 × BELL, 1 × PLUS, 1 × ZERO");
        assert!(report.clifford);
        for comp in &report.components {
            assert!(comp.fidelity >= CLASSIFY_THRESHOLD && comp.fidelity <= 1.0);
        }
    }

    #[test]
    fn rotated_pair_recovers_angle() {
        let c = parse("[('RY', [10.0, 0]), ('CNOT', [0, 1])]", 2).unwrap();
        let report = classify_components(&c).unwrap();
        let comp = &report.components[0];
        let StateClass::RotatedPair { theta } = comp.class else {
            panic!("got {}", comp.class);
        };
        assert!((comp.fidelity - 1.0).abs() < 1e-12);
        assert!((fold_pair_angle(theta) - fold_pair_angle(10.0)).abs() < 1e-6);
        assert!(((theta / 2.0).cos().abs() - 5f64.cos().abs()).abs() < 1e-6);
    }

    #[test]
    fn unentangled_rotation_is_unclassified() {
        let c = parse("[('RY', [10.0, 0])]", 1).unwrap();
        let report = classify_components(&c).unwrap();
        assert_eq!(report.components[0].class.label(), "UNCLASSIFIED");
        assert!(report.components[0].fidelity < CLASSIFY_THRESHOLD);
    }

    #[test]
    fn oversized_component_is_reported_not_fatal() {
        let mut gates = vec![Gate::h(0)];
        gates.extend((0..13).map(|q| Gate::cnot(q, q + 1)));
        let report = classify_components(&Circuit::new(14, gates)).unwrap();
        assert_eq!(report.components.len(), 1);
        assert!(matches!(
            report.components[0].class,
            StateClass::Unclassified { reason: Some(_) }
        ));
        assert!((report.mw.q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factored_matches_dense_and_product_assembles() {
        for seed in 0..20 {
            let c = random_circuit(12, 18, &AngleSet::default(), seed).unwrap();
            let dense_state = sim::simulate(&c).unwrap();
            let dense = sim::meyer_wallach(&dense_state);
            let factored = factored_meyer_wallach(&c).unwrap();
            assert!((dense.q - factored.q).abs() < 1e-12);
            let analyzed = classify_components(&c).unwrap();
            assert!((analyzed.mw.q - dense.q).abs() < 1e-12);
            let product = assemble_product_state(12, &component_states(&c).unwrap()).unwrap();
            assert!(1.0 - product.fidelity(&dense_state) < 1e-10);
        }
    }
}
