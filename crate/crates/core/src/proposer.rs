//! Sources of candidate circuits.
//!
//! A [`Proposer`] sees the previous circuit, its score and the last score
//! change, and returns raw text plus the result of curating and parsing it.
//! Three implementations: a random-edit hill climber, a scripted replay,
//! and an LLM behind a chat-completion endpoint.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{describe_violations, random_gate, AngleSet, Circuit, Gate, Violation};
use crate::dsl::{self, ParseError};
use crate::eval::Evaluator;
use crate::llm::{self, LlmParams};

/// What a proposer gets to see at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalContext {
    pub current_circuit: Circuit,
    pub current_q: f64,
    /// Score change produced by the previous step; `None` on the first step
    /// of a query.
    pub delta_q: Option<f64>,
    pub step_index: usize,
    pub query_index: usize,
    pub allowed_angles: AngleSet,
    pub gate_budget: usize,
}

/// Why a proposal did not yield a usable circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum ProposalError {
    Transport(String),
    Exhausted,
    Parse(ParseError),
    Invalid(Vec<Violation>),
}

impl fmt::Display for ProposalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProposalError::Transport(m) => write!(f, "proposer failed: {m}"),
            ProposalError::Exhausted => f.write_str("script exhausted"),
            ProposalError::Parse(e) => write!(f, "parse error: {e}"),
            ProposalError::Invalid(v) => write!(f, "invalid circuit: {}", describe_violations(v)),
        }
    }
}

impl std::error::Error for ProposalError {}

#[derive(Clone, Debug, PartialEq)]
pub struct ProposalOutcome {
    pub raw_text: String,
    /// Curated, parsed and validated candidate.
    pub parsed: Result<Circuit, ProposalError>,
    pub latency: Duration,
    pub proposer_id: String,
}

impl ProposalOutcome {
    fn failed(proposer_id: &str, error: ProposalError, latency: Duration) -> Self {
        Self {
            raw_text: String::new(),
            parsed: Err(error),
            latency,
            proposer_id: proposer_id.to_string(),
        }
    }
}

pub trait Proposer {
    fn id(&self) -> &str;
    fn propose(&mut self, ctx: &ProposalContext) -> ProposalOutcome;
}

impl<P: Proposer + ?Sized> Proposer for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn propose(&mut self, ctx: &ProposalContext) -> ProposalOutcome {
        (**self).propose(ctx)
    }
}

/// Curate, parse against `num_qubits`, then validate.
pub fn interpret(raw: &str, num_qubits: usize) -> Result<Circuit, ProposalError> {
    let curated = dsl::curate(raw).map_err(ProposalError::Parse)?;
    let circuit = dsl::parse(&curated, num_qubits).map_err(ProposalError::Parse)?;
    circuit.validate().map_err(ProposalError::Invalid)?;
    Ok(circuit)
}

/// Relative weights of the three hill-climbing moves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveWeights {
    pub replace: f64,
    pub rewire: f64,
    pub swap: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        Self {
            replace: 0.5,
            rewire: 0.4,
            swap: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Replace,
    Rewire,
    Swap,
}

const REDRAW_ATTEMPTS: usize = 64;

fn rewire<R: Rng + ?Sized>(gate: &Gate, num_qubits: usize, rng: &mut R) -> Gate {
    match *gate {
        Gate::H { .. } => Gate::h(rng.random_range(0..num_qubits)),
        Gate::Ry { angle, .. } => Gate::ry(angle, rng.random_range(0..num_qubits)),
        Gate::Cnot { .. } => {
            let pair = rand::seq::index::sample(rng, num_qubits, 2);
            Gate::cnot(pair.index(0), pair.index(1))
        }
    }
}

/// Applies exactly one random move and returns the edited circuit.
///
/// `replace` overwrites a uniformly chosen gate with a fresh random gate,
/// `rewire` redraws one gate's wires keeping kind and angle, `swap`
/// exchanges two distinct positions. Replace and rewire redraw until the
/// gate actually changes. Swap is excluded for single-gate circuits. Gate
/// count is always preserved.
pub fn hillclimb_mutate<R: Rng + ?Sized>(
    circuit: &Circuit,
    angles: &AngleSet,
    weights: &MoveWeights,
    rng: &mut R,
) -> Circuit {
    let mut out = circuit.clone();
    let m = circuit.gates.len();
    let n = circuit.num_qubits;
    if m == 0 || n < 2 {
        return out;
    }
    let swap_weight = if m >= 2 { weights.swap } else { 0.0 };
    let total = weights.replace + weights.rewire + swap_weight;
    let draw = rng.random::<f64>() * total;
    let mv = if draw < weights.replace {
        Move::Replace
    } else if draw < weights.replace + weights.rewire || swap_weight == 0.0 {
        Move::Rewire
    } else {
        Move::Swap
    };

    match mv {
        Move::Swap => {
            let pair = rand::seq::index::sample(rng, m, 2);
            out.gates.swap(pair.index(0), pair.index(1));
        }
        Move::Replace | Move::Rewire => {
            let i = rng.random_range(0..m);
            let old = circuit.gates[i];
            for _ in 0..REDRAW_ATTEMPTS {
                let candidate = match mv {
                    Move::Replace => random_gate(n, angles, rng),
                    _ => rewire(&old, n, rng),
                };
                out.gates[i] = candidate;
                if candidate != old {
                    break;
                }
            }
        }
    }
    out
}

/// Outcome of a standalone hill-climbing run.
#[derive(Clone, Debug, PartialEq)]
pub struct HillClimbResult {
    pub best: Circuit,
    pub best_q: f64,
    pub initial_q: f64,
    /// Score of every evaluated candidate, in order.
    pub trace: Vec<f64>,
    /// Incumbent score after each evaluation.
    pub incumbent: Vec<f64>,
    pub accepted: Vec<bool>,
}

/// Mutate-and-evaluate loop with strict-improvement acceptance.
///
/// Makes exactly `budget` evaluator calls; the start score is supplied by
/// the caller so it does not consume budget. Candidates whose evaluation
/// fails count against the budget and are rejected.
pub fn hillclimb_run<E: Evaluator + ?Sized>(
    initial: &Circuit,
    initial_q: f64,
    budget: usize,
    angles: &AngleSet,
    weights: &MoveWeights,
    seed: u64,
    evaluator: &mut E,
) -> HillClimbResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = initial.clone();
    let mut best_q = initial_q;
    let mut trace = Vec::with_capacity(budget);
    let mut incumbent = Vec::with_capacity(budget);
    let mut accepted = Vec::with_capacity(budget);
    for _ in 0..budget {
        let candidate = hillclimb_mutate(&best, angles, weights, &mut rng);
        let q = evaluator.evaluate(&candidate).unwrap_or(f64::NEG_INFINITY);
        trace.push(q);
        let improved = q > best_q;
        if improved {
            best = candidate;
            best_q = q;
        }
        accepted.push(improved);
        incumbent.push(best_q);
    }
    HillClimbResult {
        best,
        best_q,
        initial_q,
        trace,
        incumbent,
        accepted,
    }
}

/// Hill climbing as a loop proposer.
///
/// The loop carries every candidate forward, so the proposer keeps its own
/// incumbent: it adopts the circuit in the context only when that circuit
/// scored strictly better than the incumbent, then mutates the incumbent.
pub struct HillClimbProposer {
    rng: ChaCha8Rng,
    angles: AngleSet,
    weights: MoveWeights,
    incumbent: Option<(Circuit, f64)>,
}

impl HillClimbProposer {
    pub fn new(angles: AngleSet, weights: MoveWeights, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            angles,
            weights,
            incumbent: None,
        }
    }
}

impl Proposer for HillClimbProposer {
    fn id(&self) -> &str {
        "hillclimb"
    }

    fn propose(&mut self, ctx: &ProposalContext) -> ProposalOutcome {
        let started = Instant::now();
        let adopt = match &self.incumbent {
            None => true,
            Some((_, q)) => ctx.current_q > *q,
        };
        if adopt {
            self.incumbent = Some((ctx.current_circuit.clone(), ctx.current_q));
        }
        let base = &self.incumbent.as_ref().expect("incumbent set above").0;
        let candidate = hillclimb_mutate(base, &self.angles, &self.weights, &mut self.rng);
        let raw_text = dsl::serialize(&candidate);
        let parsed = interpret(&raw_text, ctx.current_circuit.num_qubits);
        ProposalOutcome {
            raw_text,
            parsed,
            latency: started.elapsed(),
            proposer_id: self.id().to_string(),
        }
    }
}

/// Line separating entries in a replay script file.
pub const SCRIPT_SEPARATOR: &str = "---";

/// Returns scripted texts in order, then fails with "script exhausted".
pub struct ReplayProposer {
    script: Vec<String>,
    cursor: usize,
}

impl ReplayProposer {
    pub fn new(script: Vec<String>) -> Self {
        Self { script, cursor: 0 }
    }

    /// Splits a script file on lines consisting only of `---`.
    pub fn from_script_text(text: &str) -> Self {
        let mut entries = Vec::new();
        let mut current = String::new();
        for line in text.split_inclusive('\n') {
            if line.trim_end_matches(['\n', '\r']) == SCRIPT_SEPARATOR {
                entries.push(std::mem::take(&mut current));
            } else {
                current.push_str(line);
            }
        }
        if !current.trim().is_empty() {
            entries.push(current);
        }
        Self::new(entries)
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - self.cursor
    }
}

impl Proposer for ReplayProposer {
    fn id(&self) -> &str {
        "replay"
    }

    fn propose(&mut self, ctx: &ProposalContext) -> ProposalOutcome {
        let Some(raw) = self.script.get(self.cursor).cloned() else {
            return ProposalOutcome::failed(self.id(), ProposalError::Exhausted, Duration::ZERO);
        };
        self.cursor += 1;
        let parsed = interpret(&raw, ctx.current_circuit.num_qubits);
        ProposalOutcome {
            raw_text: raw,
            parsed,
            latency: Duration::ZERO,
            proposer_id: self.id().to_string(),
        }
    }
}

/// Proposer backed by a chat-completion endpoint.
pub struct LlmProposer {
    params: LlmParams,
    feedback_enabled: bool,
    id: String,
}

impl LlmProposer {
    pub fn new(params: LlmParams, feedback_enabled: bool) -> Self {
        let id = format!("llm:{}", params.model);
        Self {
            params,
            feedback_enabled,
            id,
        }
    }
}

impl Proposer for LlmProposer {
    fn id(&self) -> &str {
        &self.id
    }

    fn propose(&mut self, ctx: &ProposalContext) -> ProposalOutcome {
        let started = Instant::now();
        let prompt = llm::build_prompt(ctx, self.feedback_enabled);
        match llm::complete(&prompt, &self.params) {
            Ok(done) => {
                let parsed = interpret(&done.text, ctx.current_circuit.num_qubits);
                ProposalOutcome {
                    raw_text: done.text,
                    parsed,
                    latency: done.latency,
                    proposer_id: self.id.clone(),
                }
            }
            Err(e) => ProposalOutcome::failed(
                &self.id,
                ProposalError::Transport(e.to_string()),
                started.elapsed(),
            ),
        }
    }
}
