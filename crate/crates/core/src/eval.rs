//! Circuit scoring. Every search path (LLM loop, hill climbing, replay
//! verification) goes through an [`Evaluator`] so that evaluation budgets are
//! counted the same way everywhere.

use crate::analyzer::factored_meyer_wallach;
use crate::circuit::Circuit;
use crate::sim::{self, SimError};

/// Maps a circuit to its Meyer-Wallach value.
pub trait Evaluator {
    fn evaluate(&mut self, circuit: &Circuit) -> Result<f64, SimError>;
}

impl<F> Evaluator for F
where
    F: FnMut(&Circuit) -> Result<f64, SimError>,
{
    fn evaluate(&mut self, circuit: &Circuit) -> Result<f64, SimError> {
        self(circuit)
    }
}

/// Full-register simulation followed by the Meyer-Wallach reduction.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseEvaluator;

impl Evaluator for DenseEvaluator {
    fn evaluate(&mut self, circuit: &Circuit) -> Result<f64, SimError> {
        Ok(sim::meyer_wallach(&sim::simulate(circuit)?).q)
    }
}

/// Simulates each CNOT-connected component separately. Gives the same value
/// as [`DenseEvaluator`] with memory bounded by the largest component.
#[derive(Clone, Copy, Debug, Default)]
pub struct FactoredEvaluator;

impl Evaluator for FactoredEvaluator {
    fn evaluate(&mut self, circuit: &Circuit) -> Result<f64, SimError> {
        Ok(factored_meyer_wallach(circuit)?.q)
    }
}

/// Counts calls into an inner evaluator.
#[derive(Debug)]
pub struct Counting<E> {
    inner: E,
    calls: usize,
}

impl<E: Evaluator> Counting<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, calls: 0 }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: Evaluator> Evaluator for Counting<E> {
    fn evaluate(&mut self, circuit: &Circuit) -> Result<f64, SimError> {
        self.calls += 1;
        self.inner.evaluate(circuit)
    }
}
