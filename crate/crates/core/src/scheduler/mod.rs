//! Successive-halving geometry, HyperBand/ASHA optimizers and the
//! discrete-event simulator that drives them.

mod asha;
mod history;
mod hyperband;
mod ladder;
mod random;
mod sim;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::distributions::PriorDistribution;
use crate::error::{Error, Result};
use crate::esp::TraceRecord;
use crate::space::{Configuration, SearchSpace};

pub use asha::{Asha, AsyncHyperband};
pub use history::{rank_order, top_k, ConfigId, History, IncumbentSummary, Observation};
pub use hyperband::{sh_promote, Hyperband};
pub use ladder::{promotion_quota, BracketPlan, BracketSpec, RungLadder};
pub use random::RandomSearch;
pub use sim::{simulate, FirstEvaluation, SimConfig, SimOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accounting {
    /// Promotions pay only the fidelity delta (checkpoint resume).
    #[default]
    Continuation,
    /// Every evaluation pays its full fidelity.
    Fresh,
}

impl Accounting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Accounting::Continuation => "continuation",
            Accounting::Fresh => "fresh",
        }
    }
}

impl fmt::Display for Accounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Accounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuation" => Ok(Accounting::Continuation),
            "fresh" => Ok(Accounting::Fresh),
            other => Err(Error::Unknown {
                kind: "accounting mode",
                name: other.to_string(),
            }),
        }
    }
}

/// Work handed to a free worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub config_id: ConfigId,
    pub config: Configuration,
    pub rung: usize,
    pub fidelity: u64,
    pub bracket_id: Option<usize>,
}

/// Read access to the run state for one scheduling decision.
pub struct Context<'a> {
    pub history: &'a History,
    pub rng: &'a mut dyn RngCore,
    next_id: &'a mut ConfigId,
}

impl<'a> Context<'a> {
    pub fn new(history: &'a History, rng: &'a mut dyn RngCore, next_id: &'a mut ConfigId) -> Self {
        Self {
            history,
            rng,
            next_id,
        }
    }

    pub fn new_config_id(&mut self) -> ConfigId {
        let id = *self.next_id;
        *self.next_id += 1;
        id
    }
}

/// A request for a fresh configuration.
#[derive(Debug, Clone, Copy)]
pub struct SampleRequest<'a> {
    pub history: &'a History,
    pub config_id: ConfigId,
    /// Rung the new configuration will be evaluated at.
    pub rung: usize,
    /// Index of the SH bracket asking for the sample.
    pub bracket_index: usize,
}

/// Source of new configurations for an optimizer.
pub trait Sampler: Send {
    fn sample(&mut self, req: &SampleRequest<'_>, rng: &mut dyn RngCore) -> Result<Configuration>;

    /// Drains the per-draw probability trace, if the sampler keeps one.
    fn take_trace(&mut self) -> Vec<TraceRecord> {
        Vec::new()
    }
}

pub struct UniformSampler {
    space: Arc<SearchSpace>,
}

impl UniformSampler {
    pub fn new(space: Arc<SearchSpace>) -> Self {
        Self { space }
    }
}

impl Sampler for UniformSampler {
    fn sample(&mut self, _req: &SampleRequest<'_>, rng: &mut dyn RngCore) -> Result<Configuration> {
        Ok(self.space.sample_uniform(rng))
    }
}

/// Samples from the prior, falling back to uniform with probability
/// `uniform_prob`.
pub struct PriorSampler {
    prior: Arc<PriorDistribution>,
    uniform_prob: f64,
}

impl PriorSampler {
    pub fn new(prior: Arc<PriorDistribution>, uniform_prob: f64) -> Self {
        Self {
            prior,
            uniform_prob,
        }
    }
}

impl Sampler for PriorSampler {
    fn sample(&mut self, _req: &SampleRequest<'_>, rng: &mut dyn RngCore) -> Result<Configuration> {
        if self.uniform_prob > 0.0 && rng.random::<f64>() < self.uniform_prob {
            Ok(self.prior.space().sample_uniform(rng))
        } else {
            Ok(self.prior.sample(rng))
        }
    }
}

/// A scheduling policy driven by the simulator.
pub trait Optimizer: Send {
    /// Next evaluation for a free worker, or `None` when nothing can be
    /// issued until some in-flight work completes.
    fn next(&mut self, ctx: &mut Context<'_>) -> Result<Option<Assignment>>;

    /// Called once per completed evaluation that this optimizer issued.
    fn complete(&mut self, obs: &Observation);

    fn take_trace(&mut self) -> Vec<TraceRecord> {
        Vec::new()
    }
}

fn sample_new(
    sampler: &mut dyn Sampler,
    ctx: &mut Context<'_>,
    rung: usize,
    fidelity: u64,
    bracket_id: Option<usize>,
    bracket_index: usize,
) -> Result<Assignment> {
    let config_id = ctx.new_config_id();
    let req = SampleRequest {
        history: ctx.history,
        config_id,
        rung,
        bracket_index,
    };
    let config = sampler.sample(&req, ctx.rng)?;
    Ok(Assignment {
        config_id,
        config,
        rung,
        fidelity,
        bracket_id,
    })
}
