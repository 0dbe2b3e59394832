//! Named algorithms and how they are assembled from samplers and schedulers.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bench::Objective;
use crate::distributions::PriorDistribution;
use crate::error::{Error, Result};
use crate::esp::{first_evaluation_plan, EnsemblePolicy, EspConfig};
use crate::scheduler::{
    simulate, Accounting, Asha, AsyncHyperband, BracketPlan, FirstEvaluation, Hyperband, Optimizer,
    PriorSampler, RandomSearch, RungLadder, Sampler, SimConfig, SimOutcome, UniformSampler,
};
use crate::space::SearchSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rs,
    RsPrior,
    Hb,
    HbPrior,
    HbPrior50,
    Priorband,
    Asha,
    AshaEsp,
    AsyncHb,
    AsyncHbEsp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::Rs,
        Algorithm::RsPrior,
        Algorithm::Hb,
        Algorithm::HbPrior,
        Algorithm::HbPrior50,
        Algorithm::Priorband,
        Algorithm::Asha,
        Algorithm::AshaEsp,
        Algorithm::AsyncHb,
        Algorithm::AsyncHbEsp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Rs => "rs",
            Algorithm::RsPrior => "rs-prior",
            Algorithm::Hb => "hb",
            Algorithm::HbPrior => "hb-prior",
            Algorithm::HbPrior50 => "hb-prior50",
            Algorithm::Priorband => "priorband",
            Algorithm::Asha => "asha",
            Algorithm::AshaEsp => "asha-esp",
            Algorithm::AsyncHb => "async-hb",
            Algorithm::AsyncHbEsp => "async-hb-esp",
        }
    }

    pub fn uses_prior(&self) -> bool {
        !matches!(
            self,
            Algorithm::Rs | Algorithm::Hb | Algorithm::Asha | Algorithm::AsyncHb
        )
    }

    /// Whether the sampler records a per-draw probability trace.
    pub fn uses_esp(&self) -> bool {
        matches!(
            self,
            Algorithm::Priorband | Algorithm::AshaEsp | Algorithm::AsyncHbEsp
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "algorithm",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub algorithm: Algorithm,
    /// ESP settings; `esp.eta` is the reduction factor for every algorithm.
    pub esp: EspConfig,
    pub accounting: Accounting,
}

impl OptimizerSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            esp: EspConfig::default(),
            accounting: Accounting::default(),
        }
    }

    pub fn eta(&self) -> u64 {
        self.esp.eta
    }
}

/// An optimizer ready to simulate, plus the evaluation to issue first.
pub struct Built {
    pub optimizer: Box<dyn Optimizer>,
    pub first: Option<FirstEvaluation>,
    pub ladder: RungLadder,
}

pub fn ladder_for(space: &SearchSpace, eta: u64) -> Result<RungLadder> {
    let f = space.fidelity();
    RungLadder::new(f.lower, f.upper, eta)
}

pub fn build(
    spec: &OptimizerSpec,
    space: Arc<SearchSpace>,
    prior: Option<Arc<PriorDistribution>>,
) -> Result<Built> {
    spec.esp.validate()?;
    let ladder = ladder_for(&space, spec.eta())?;
    let plan = BracketPlan::new(&ladder);
    let algo = spec.algorithm;
    let prior = if algo.uses_prior() {
        Some(prior.ok_or_else(|| {
            Error::InvalidArgument(format!("algorithm `{algo}` requires a prior"))
        })?)
    } else {
        None
    };

    let sampler: Box<dyn Sampler> = match (algo, &prior) {
        (Algorithm::RsPrior | Algorithm::HbPrior, Some(p)) => {
            Box::new(PriorSampler::new(p.clone(), 0.0))
        }
        (Algorithm::HbPrior50, Some(p)) => Box::new(PriorSampler::new(p.clone(), 0.5)),
        (Algorithm::Priorband | Algorithm::AshaEsp | Algorithm::AsyncHbEsp, Some(p)) => Box::new(
            EnsemblePolicy::new(spec.esp, p.clone(), plan.clone(), spec.accounting)?,
        ),
        _ => Box::new(UniformSampler::new(space.clone())),
    };

    let optimizer: Box<dyn Optimizer> = match algo {
        Algorithm::Rs | Algorithm::RsPrior => {
            Box::new(RandomSearch::new(sampler, ladder.s_max(), ladder.z_max()))
        }
        Algorithm::Hb | Algorithm::HbPrior | Algorithm::HbPrior50 | Algorithm::Priorband => {
            Box::new(Hyperband::new(plan, sampler))
        }
        Algorithm::Asha | Algorithm::AshaEsp => Box::new(Asha::new(ladder.clone(), sampler)),
        Algorithm::AsyncHb | Algorithm::AsyncHbEsp => Box::new(AsyncHyperband::new(plan, sampler)),
    };

    let first = prior
        .as_ref()
        .and_then(|p| first_evaluation_plan(spec.esp.mode_placement, p, &ladder));
    Ok(Built {
        optimizer,
        first,
        ladder,
    })
}

/// Builds and simulates one run.
pub fn run(
    spec: &OptimizerSpec,
    objective: &dyn Objective,
    prior: Option<Arc<PriorDistribution>>,
    workers: usize,
    budget_epochs: u64,
    seed: u64,
) -> Result<SimOutcome> {
    let space = Arc::new(objective.space().clone());
    let mut built = build(spec, space, prior)?;
    let cfg = SimConfig {
        workers,
        budget: budget_epochs,
        accounting: spec.accounting,
        seed,
    };
    simulate(built.optimizer.as_mut(), built.first, objective, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("bohb".parse::<Algorithm>().is_err());
        assert!(!Algorithm::Hb.uses_prior());
        assert!(Algorithm::HbPrior50.uses_prior() && !Algorithm::HbPrior50.uses_esp());
    }
}
