use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::space::Configuration;

use super::Accounting;

pub type ConfigId = u64;

/// One completed evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Position in completion order.
    pub event_index: usize,
    pub config_id: ConfigId,
    pub config: Configuration,
    pub rung: usize,
    pub fidelity: u64,
    /// `f64::INFINITY` marks a failed evaluation.
    pub loss: f64,
    /// `None` for evaluations outside bracket promotion chains (random
    /// search and the initial prior-mode evaluation).
    pub bracket_id: Option<usize>,
    pub worker_id: usize,
    pub start: u64,
    pub end: u64,
    pub charged: u64,
    pub cumulative_budget: u64,
}

impl Observation {
    pub fn failed(&self) -> bool {
        !self.loss.is_finite()
    }
}

/// Ordering used for every "best first" selection: loss, then completion
/// time, then configuration id.
pub fn rank_order(a: &Observation, b: &Observation) -> Ordering {
    a.loss
        .total_cmp(&b.loss)
        .then(a.end.cmp(&b.end))
        .then(a.config_id.cmp(&b.config_id))
}

/// The `k` best non-failed observations, best first.
pub fn top_k<'a, I>(observations: I, k: usize) -> Vec<&'a Observation>
where
    I: IntoIterator<Item = &'a Observation>,
{
    let mut finite: Vec<&Observation> = observations.into_iter().filter(|o| !o.failed()).collect();
    finite.sort_by(|a, b| rank_order(a, b));
    finite.truncate(k);
    finite
}

/// Append-only evaluation log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    observations: Vec<Observation>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: Observation) {
        self.observations.push(obs);
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn consumed_budget(&self) -> u64 {
        self.observations.iter().map(|o| o.charged).sum()
    }

    pub fn at_rung(&self, rung: usize) -> impl Iterator<Item = &Observation> + '_ {
        self.observations.iter().filter(move |o| o.rung == rung)
    }

    pub fn has_fidelity(&self, fidelity: u64) -> bool {
        self.observations
            .iter()
            .any(|o| o.fidelity == fidelity && !o.failed())
    }

    /// Lowest-loss observation across all fidelities; ties go to the
    /// earliest completion. Failures never qualify.
    pub fn incumbent(&self) -> Option<&Observation> {
        self.observations
            .iter()
            .filter(|o| !o.failed())
            .min_by(|a, b| {
                a.loss
                    .total_cmp(&b.loss)
                    .then(a.end.cmp(&b.end))
                    .then(a.event_index.cmp(&b.event_index))
            })
    }

    /// Highest fidelity this configuration has already been trained to.
    pub fn previous_fidelity(&self, config_id: ConfigId) -> Option<u64> {
        self.observations
            .iter()
            .filter(|o| o.config_id == config_id)
            .map(|o| o.fidelity)
            .max()
    }

    /// Epochs charged for evaluating `config_id` at `fidelity`.
    pub fn charge_cost(&self, accounting: Accounting, config_id: ConfigId, fidelity: u64) -> u64 {
        match accounting {
            Accounting::Fresh => fidelity,
            Accounting::Continuation => {
                fidelity.saturating_sub(self.previous_fidelity(config_id).unwrap_or(0))
            }
        }
    }

    /// Running incumbent loss after each observation.
    pub fn incumbent_trajectory(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.observations
            .iter()
            .map(|o| {
                if o.loss < best {
                    best = o.loss;
                }
                best
            })
            .collect()
    }

    pub const CSV_HEADER: &'static str = "event_index,virtual_time,worker_id,bracket_id,rung,fidelity,config_id,loss,charged_epochs,cumulative_budget,incumbent_loss";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for (o, inc) in self.observations.iter().zip(self.incumbent_trajectory()) {
            let bracket = o.bracket_id.map(|b| b.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                o.event_index,
                o.end,
                o.worker_id,
                bracket,
                o.rung,
                o.fidelity,
                o.config_id,
                fmt_loss(o.loss),
                o.charged,
                o.cumulative_budget,
                fmt_loss(inc),
            )?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_loss(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        String::new()
    }
}

/// Incumbent as reported to callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentSummary {
    pub config_id: ConfigId,
    pub fidelity: u64,
    pub loss: f64,
}
