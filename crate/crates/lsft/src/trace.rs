//! Per-run convergence records shared by the iterative transformations and
//! the benchmark harness.

use std::time::Duration;

use crate::optim::LossBreakdown;

/// One gradient-descent iteration: the loss after the update, the step size
/// taken (absent when the step was skipped), and the iteration's wall time.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub loss: LossBreakdown,
    pub eta: Option<f64>,
    pub wall_time: Duration,
}

/// The loss curve of one (content, style) pair at one layer.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub method: String,
    pub layer: String,
    pub seed: Option<u64>,
    /// Objective value at the initial iterate, before any update.
    pub initial_loss: Option<LossBreakdown>,
    pub records: Vec<IterationRecord>,
    /// Set by the harness when a run blew up instead of completing.
    pub failure: Option<String>,
}

impl ConvergenceTrace {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            layer: String::new(),
            seed: None,
            initial_loss: None,
            records: Vec::new(),
            failure: None,
        }
    }

    pub fn final_loss(&self) -> Option<&LossBreakdown> {
        self.records.last().map(|r| &r.loss).or(self.initial_loss.as_ref())
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss.total).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.eta).collect()
    }
}
