//! The test-time search loop.
//!
//! Within a query each step conditions only on the previous step's circuit
//! and the score change it produced, and the chain follows every accepted
//! candidate even when its score drops. Between queries the search restarts
//! from the best circuit seen so far. The experiment stops early once the
//! score reaches 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{describe_violations, random_circuit, AngleSet, Circuit, CircuitError};
use crate::eval::Evaluator;
use crate::proposer::{hillclimb_run, MoveWeights, ProposalContext, ProposalError, Proposer};
use crate::sim::SimError;

/// Scores at or above this count as the maximum.
pub const DONE_THRESHOLD: f64 = 1.0 - 1e-9;

/// Which proposer produced a run; stored for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProposerSpec {
    Llm {
        base_url: String,
        model: String,
        temperature: f64,
    },
    HillClimb {
        weights: MoveWeights,
    },
    Replay {
        script: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCircuit {
    /// `random_circuit(num_qubits, gate_budget, angles, seed)`.
    Random,
    Given(Circuit),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub num_qubits: usize,
    pub gate_budget: usize,
    pub angles: AngleSet,
    pub queries: usize,
    pub steps_per_query: usize,
    pub feedback_enabled: bool,
    pub strict_gate_count: bool,
    pub proposer: ProposerSpec,
    pub seed: u64,
    pub initial: InitialCircuit,
}

impl OptimizerConfig {
    /// Three queries of fifteen steps, strict gate count, feedback on,
    /// hill-climbing proposer, random start.
    pub fn new(num_qubits: usize, gate_budget: usize) -> Self {
        Self {
            num_qubits,
            gate_budget,
            angles: AngleSet::default(),
            queries: 3,
            steps_per_query: 15,
            feedback_enabled: true,
            strict_gate_count: true,
            proposer: ProposerSpec::HillClimb {
                weights: MoveWeights::default(),
            },
            seed: 0,
            initial: InitialCircuit::Random,
        }
    }

    /// Total candidate evaluations allowed.
    pub fn budget(&self) -> usize {
        self.queries * self.steps_per_query
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.queries == 0 || self.steps_per_query == 0 {
            return Err(OptimizerError::Config(
                "queries and steps_per_query must be at least 1".into(),
            ));
        }
        if self.num_qubits < 2 {
            return Err(OptimizerError::Config(
                "num_qubits must be at least 2".into(),
            ));
        }
        if let InitialCircuit::Given(c) = &self.initial {
            if c.num_qubits != self.num_qubits {
                return Err(OptimizerError::Config(format!(
                    "initial circuit has {} qubits, config says {}",
                    c.num_qubits, self.num_qubits
                )));
            }
            c.validate().map_err(|v| {
                OptimizerError::Config(format!("initial circuit: {}", describe_violations(&v)))
            })?;
            if self.strict_gate_count && c.len() != self.gate_budget {
                return Err(OptimizerError::Config(format!(
                    "initial circuit has {} gates, gate budget is {}",
                    c.len(),
                    self.gate_budget
                )));
            }
        }
        Ok(())
    }

    /// The circuit query 1 starts from.
    pub fn start_circuit(&self) -> Result<Circuit, OptimizerError> {
        match &self.initial {
            InitialCircuit::Given(c) => Ok(c.clone()),
            InitialCircuit::Random => Ok(random_circuit(
                self.num_qubits,
                self.gate_budget,
                &self.angles,
                self.seed,
            )?),
        }
    }
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("evaluating the start circuit: {0}")]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// Transport failure or exhausted script.
    Proposer,
    Parse,
    /// Parsed, but wires out of range or CNOT control equals target.
    Invalid,
    GateCount,
    AngleSet,
    Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub query_index: usize,
    pub step_index: usize,
    pub raw_text: String,
    pub parse_ok: bool,
    pub circuit: Option<Circuit>,
    pub q: Option<f64>,
    pub delta_q: Option<f64>,
    pub rejected_reason: Option<RejectReason>,
    pub detail: Option<String>,
    pub is_new_best: bool,
    pub latency_secs: f64,
}

impl StepRecord {
    pub fn evaluated(&self) -> bool {
        self.q.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_index: usize,
    pub start_circuit: Circuit,
    pub start_q: f64,
    pub steps: Vec<StepRecord>,
    pub best_circuit: Circuit,
    pub best_q: f64,
    pub evaluations: usize,
}

impl QueryResult {
    pub fn improved(&self) -> bool {
        self.best_q > self.start_q
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: OptimizerConfig,
    pub proposer_id: String,
    pub initial_circuit: Circuit,
    pub initial_q: f64,
    pub queries: Vec<QueryResult>,
    pub best_circuit: Circuit,
    pub best_q: f64,
    pub evaluations: usize,
    pub early_stopped: bool,
}

/// Runs one query of `config.steps_per_query` steps from `start`.
///
/// `best_so_far` is the experiment-wide best before this query; it decides
/// `is_new_best` on step records. The query ends early once the
/// experiment-wide best reaches [`DONE_THRESHOLD`].
pub fn run_query<P, E>(
    query_index: usize,
    start: &Circuit,
    start_q: f64,
    best_so_far: f64,
    config: &OptimizerConfig,
    proposer: &mut P,
    evaluator: &mut E,
) -> QueryResult
where
    P: Proposer + ?Sized,
    E: Evaluator + ?Sized,
{
    let mut memory = (start.clone(), start_q);
    let mut delta_q = None;
    let mut global_best = best_so_far;
    let mut best = (start.clone(), start_q);
    let mut steps = Vec::with_capacity(config.steps_per_query);
    let mut evaluations = 0;

    for step_index in 0..config.steps_per_query {
        let ctx = ProposalContext {
            current_circuit: memory.0.clone(),
            current_q: memory.1,
            delta_q,
            step_index,
            query_index,
            allowed_angles: config.angles.clone(),
            gate_budget: config.gate_budget,
        };
        let outcome = proposer.propose(&ctx);
        let mut record = StepRecord {
            query_index,
            step_index,
            raw_text: outcome.raw_text,
            parse_ok: outcome.parsed.is_ok(),
            circuit: None,
            q: None,
            delta_q: None,
            rejected_reason: None,
            detail: None,
            is_new_best: false,
            latency_secs: outcome.latency.as_secs_f64(),
        };

        let verdict = match outcome.parsed {
            Err(e) => {
                let reason = match &e {
                    ProposalError::Transport(_) | ProposalError::Exhausted => {
                        RejectReason::Proposer
                    }
                    ProposalError::Parse(_) => RejectReason::Parse,
                    ProposalError::Invalid(_) => RejectReason::Invalid,
                };
                Err((reason, e.to_string()))
            }
            Ok(candidate) => {
                record.circuit = Some(candidate.clone());
                screen(&candidate, config).map(|()| candidate)
            }
        };

        match verdict.and_then(|candidate| {
            evaluations += 1;
            evaluator
                .evaluate(&candidate)
                .map(|q| (candidate, q))
                .map_err(|e| (RejectReason::Evaluation, e.to_string()))
        }) {
            Ok((candidate, q)) => {
                let dq = q - memory.1;
                record.q = Some(q);
                record.delta_q = Some(dq);
                if q > global_best {
                    global_best = q;
                    record.is_new_best = true;
                }
                if q > best.1 {
                    best = (candidate.clone(), q);
                }
                delta_q = Some(dq);
                memory = (candidate, q);
            }
            Err((reason, detail)) => {
                record.rejected_reason = Some(reason);
                record.detail = Some(detail);
                delta_q = Some(0.0);
            }
        }
        steps.push(record);
        if global_best >= DONE_THRESHOLD {
            break;
        }
    }

    QueryResult {
        query_index,
        start_circuit: start.clone(),
        start_q,
        steps,
        best_circuit: best.0,
        best_q: best.1,
        evaluations,
    }
}

fn screen(candidate: &Circuit, config: &OptimizerConfig) -> Result<(), (RejectReason, String)> {
    if config.strict_gate_count && candidate.len() != config.gate_budget {
        return Err((
            RejectReason::GateCount,
            format!(
                "proposal has {} gates, budget is {}",
                candidate.len(),
                config.gate_budget
            ),
        ));
    }
    candidate
        .validate_against_angle_set(&config.angles)
        .map_err(|v| (RejectReason::AngleSet, describe_violations(&v)))
}

/// Runs `config.queries` queries, each restarting from the best circuit so far.
pub fn run_experiment<P, E>(
    config: &OptimizerConfig,
    proposer: &mut P,
    evaluator: &mut E,
) -> Result<ExperimentResult, OptimizerError>
where
    P: Proposer + ?Sized,
    E: Evaluator + ?Sized,
{
    config.validate()?;
    let initial = config.start_circuit()?;
    let initial_q = evaluator.evaluate(&initial)?;

    let mut best = (initial.clone(), initial_q);
    let mut queries = Vec::with_capacity(config.queries);
    let mut evaluations = 0;
    let mut early_stopped = initial_q >= DONE_THRESHOLD;

    for query_index in 0..config.queries {
        if early_stopped {
            break;
        }
        let result = run_query(
            query_index,
            &best.0,
            best.1,
            best.1,
            config,
            proposer,
            evaluator,
        );
        evaluations += result.evaluations;
        if result.best_q > best.1 {
            best = (result.best_circuit.clone(), result.best_q);
        }
        queries.push(result);
        early_stopped = best.1 >= DONE_THRESHOLD;
    }

    Ok(ExperimentResult {
        config: config.clone(),
        proposer_id: proposer.id().to_string(),
        initial_circuit: initial,
        initial_q,
        queries,
        best_circuit: best.0,
        best_q: best.1,
        evaluations,
        early_stopped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub proposer_id: String,
    pub initial_q: f64,
    pub best_q: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn rows_for<'a>(&'a self, proposer_id: &'a str) -> impl Iterator<Item = &'a ComparisonRow> {
        self.rows
            .iter()
            .filter(move |r| r.proposer_id == proposer_id)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("seed | proposer | initial Q | best Q | evaluations\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{} | {} | {:.4} | {:.4} | {}\n",
                r.seed, r.proposer_id, r.initial_q, r.best_q, r.evaluations
            ));
        }
        out
    }
}

/// Budget-matched comparison from one shared start circuit.
///
/// For every seed, runs the hill-climbing baseline with `config.budget()`
/// evaluations and, when `make_proposer` is given, a full experiment with
/// the proposer it returns for that seed.
pub fn compare_budget_matched<E>(
    config: &OptimizerConfig,
    seeds: &[u64],
    evaluator: &mut E,
    mut make_proposer: Option<&mut dyn FnMut(u64) -> Box<dyn Proposer>>,
) -> Result<ComparisonTable, OptimizerError>
where
    E: Evaluator + ?Sized,
{
    if seeds.is_empty() {
        return Err(OptimizerError::Config(
            "at least one seed is required".into(),
        ));
    }
    config.validate()?;
    let initial = config.start_circuit()?;
    let initial_q = evaluator.evaluate(&initial)?;
    let weights = match &config.proposer {
        ProposerSpec::HillClimb { weights } => *weights,
        _ => MoveWeights::default(),
    };
    let mut table = ComparisonTable::default();
    for &seed in seeds {
        let hc = hillclimb_run(
            &initial,
            initial_q,
            config.budget(),
            &config.angles,
            &weights,
            seed,
            evaluator,
        );
        table.rows.push(ComparisonRow {
            seed,
            proposer_id: "hillclimb".into(),
            initial_q,
            best_q: hc.best_q,
            evaluations: hc.trace.len(),
        });
        if let Some(make) = make_proposer.as_deref_mut() {
            let mut proposer = make(seed);
            let mut cfg = config.clone();
            cfg.initial = InitialCircuit::Given(initial.clone());
            cfg.seed = seed;
            let run = run_experiment(&cfg, &mut proposer, evaluator)?;
            table.rows.push(ComparisonRow {
                seed,
                proposer_id: run.proposer_id,
                initial_q: run.initial_q,
                best_q: run.best_q,
                evaluations: run.evaluations,
            });
        }
    }
    Ok(table)
}
