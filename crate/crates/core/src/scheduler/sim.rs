use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::Objective;
use crate::error::{Error, Result};
use crate::esp::TraceRecord;
use crate::space::Configuration;

use super::{Accounting, Assignment, ConfigId, Context, History, Observation, Optimizer};

/// An evaluation issued before the optimizer takes over, outside any
/// bracket chain (the prior mode for prior-aware methods).
#[derive(Debug, Clone, PartialEq)]
pub struct FirstEvaluation {
    pub config: Configuration,
    pub rung: usize,
    pub fidelity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub workers: usize,
    /// Budget cap in epochs.
    pub budget: u64,
    pub accounting: Accounting,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub history: History,
    pub trace: Vec<TraceRecord>,
}

struct Running {
    assignment: Assignment,
    from_optimizer: bool,
    start: u64,
    end: u64,
    charged: u64,
    loss: f64,
}

/// Runs `optimizer` against `objective` on `workers` virtual workers.
///
/// Each evaluation occupies its worker for as many time units as epochs it
/// is charged. No new work is issued once completed plus in-flight charges
/// reach the cap. Simultaneous completions are processed in worker order.
pub fn simulate(
    optimizer: &mut dyn Optimizer,
    first: Option<FirstEvaluation>,
    objective: &dyn Objective,
    cfg: &SimConfig,
) -> Result<SimOutcome> {
    if cfg.workers == 0 {
        return Err(Error::InvalidArgument(
            "at least one worker is required".into(),
        ));
    }
    if cfg.budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise.set_stream(1);

    let mut history = History::new();
    let mut next_id: ConfigId = 0;
    let mut first = first;
    let mut workers: Vec<Option<Running>> = (0..cfg.workers).map(|_| None).collect();
    let mut committed = 0u64;
    let mut now = 0u64;

    loop {
        for worker in workers.iter_mut().filter(|w| w.is_none()) {
            if committed >= cfg.budget {
                break;
            }
            let (assignment, from_optimizer) = match first.take() {
                Some(f) => {
                    let id = next_id;
                    next_id += 1;
                    let a = Assignment {
                        config_id: id,
                        config: f.config,
                        rung: f.rung,
                        fidelity: f.fidelity,
                        bracket_id: None,
                    };
                    (a, false)
                }
                None => {
                    let mut ctx = Context::new(&history, &mut rng, &mut next_id);
                    match optimizer.next(&mut ctx)? {
                        Some(a) => (a, true),
                        None => break,
                    }
                }
            };
            let charged =
                history.charge_cost(cfg.accounting, assignment.config_id, assignment.fidelity);
            let loss = objective
                .evaluate(&assignment.config, assignment.fidelity, &mut noise)
                .ok()
                .filter(|l| !l.is_nan())
                .unwrap_or(f64::INFINITY);
            committed += charged;
            *worker = Some(Running {
                assignment,
                from_optimizer,
                start: now,
                end: now + charged,
                charged,
                loss,
            });
        }

        let Some(t) = workers.iter().flatten().map(|r| r.end).min() else {
            break;
        };
        now = t;
        for (worker_id, slot) in workers.iter_mut().enumerate() {
            if slot.as_ref().is_none_or(|r| r.end != t) {
                continue;
            }
            let r = slot.take().expect("checked above");
            let consumed = history.consumed_budget() + r.charged;
            let obs = Observation {
                event_index: history.len(),
                config_id: r.assignment.config_id,
                config: r.assignment.config,
                rung: r.assignment.rung,
                fidelity: r.assignment.fidelity,
                loss: r.loss,
                bracket_id: r.assignment.bracket_id,
                worker_id,
                start: r.start,
                end: r.end,
                charged: r.charged,
                cumulative_budget: consumed,
            };
            if r.from_optimizer {
                optimizer.complete(&obs);
            }
            history.push(obs);
        }
    }

    Ok(SimOutcome {
        history,
        trace: optimizer.take_trace(),
    })
}
