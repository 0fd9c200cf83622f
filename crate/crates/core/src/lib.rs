//! Closed-loop search for highly entangling circuits.
//!
//! Circuits over `{H, RY, CNOT}` are written in a Python-style tuple list,
//! simulated on a dense statevector and scored by the Meyer-Wallach measure.
//! Proposals come from a chat-completion model, a hill climber or a fixed
//! script, and the [`optimizer`] runs them in short queries that restart from
//! the best circuit found so far.

pub mod analyzer;
pub mod circuit;
pub mod dsl;
pub mod eval;
pub mod llm;
pub mod optimizer;
pub mod proposer;
pub mod runstore;
pub mod sim;

pub use analyzer::{classify_components, AnalysisReport, StateClass};
pub use circuit::{random_circuit, AngleSet, Circuit, Gate, GateKind};
pub use dsl::{curate, parse, serialize, ParseError};
pub use eval::{DenseEvaluator, Evaluator, FactoredEvaluator};
pub use optimizer::{run_experiment, ExperimentResult, OptimizerConfig};
pub use proposer::{HillClimbProposer, LlmProposer, Proposer, ReplayProposer};
pub use sim::{meyer_wallach, simulate, MwReport, SimError, StateVector};
