#![allow(dead_code)]

use std::sync::Arc;

use priorband::scheduler::{Observation, RungLadder};
use priorband::space::{Configuration, Fidelity, ParameterDef, SearchSpace};

pub fn unit_space(dim: usize, z_min: u64, z_max: u64) -> Arc<SearchSpace> {
    let params = (0..dim)
        .map(|i| ParameterDef::continuous(format!("x{i}"), 0.0, 1.0, false))
        .collect();
    let fidelity = Fidelity {
        name: "epochs".into(),
        lower: z_min,
        upper: z_max,
        log: true,
    };
    Arc::new(SearchSpace::new(params, fidelity).unwrap())
}

/// A completed observation with the bookkeeping fields filled in plainly.
pub fn obs(
    id: u64,
    x: &[f64],
    rung: usize,
    ladder: &RungLadder,
    loss: f64,
    end: u64,
) -> Observation {
    let fidelity = ladder.fidelity(rung);
    Observation {
        event_index: 0,
        config_id: id,
        config: Configuration::from_reals(x),
        rung,
        fidelity,
        loss,
        bracket_id: Some(0),
        worker_id: 0,
        start: end.saturating_sub(fidelity),
        end,
        charged: fidelity,
        cumulative_budget: 0,
    }
}

/// Renumbers event indices and cumulative budgets in push order.
pub fn history_of(obs: Vec<Observation>) -> priorband::scheduler::History {
    let mut h = priorband::scheduler::History::new();
    let mut total = 0;
    for (i, mut o) in obs.into_iter().enumerate() {
        o.event_index = i;
        total += o.charged;
        o.cumulative_budget = total;
        h.push(o);
    }
    h
}

/// Noise-free quadratic bowl whose ranking is identical at every fidelity.
/// Configurations with `x0 > fail_above` make the evaluation fail.
pub struct Bowl {
    pub space: SearchSpace,
    pub fail_above: f64,
}

impl Bowl {
    pub fn new(dim: usize, z_min: u64, z_max: u64) -> Self {
        Self {
            space: (*unit_space(dim, z_min, z_max)).clone(),
            fail_above: f64::INFINITY,
        }
    }

    pub fn value(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3).powi(2)).sum()
    }
}

impl priorband::bench::Objective for Bowl {
    fn name(&self) -> &str {
        "bowl"
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(
        &self,
        config: &Configuration,
        fidelity: u64,
        _rng: &mut dyn rand::RngCore,
    ) -> priorband::Result<f64> {
        let x = config.as_reals().unwrap();
        if x[0] > self.fail_above {
            return Err(priorband::Error::Objective("diverged".into()));
        }
        Ok(Self::value(&x) + 1.0 / fidelity as f64)
    }
}
