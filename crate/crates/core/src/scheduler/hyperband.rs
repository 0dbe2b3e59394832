use std::collections::VecDeque;

use crate::error::Result;
use crate::esp::TraceRecord;
use crate::space::Configuration;

use super::{
    promotion_quota, sample_new, top_k, Assignment, BracketPlan, BracketSpec, ConfigId, Context,
    Observation, Optimizer, Sampler,
};

#[derive(Debug)]
struct ShBracket {
    id: usize,
    spec: BracketSpec,
    rung: usize,
    sampled: u64,
    /// Members expected to complete at the current rung.
    expected: usize,
    done: Vec<Observation>,
    queued: VecDeque<(ConfigId, Configuration)>,
    finished: bool,
}

impl ShBracket {
    fn has_pending(&self) -> bool {
        (self.rung == self.spec.base_rung && self.sampled < self.spec.n) || !self.queued.is_empty()
    }
}

/// Synchronous HyperBand. With several workers, pending work of the earliest
/// active SH bracket is always served first and a new bracket is opened only
/// when no active bracket has anything left to hand out.
pub struct Hyperband {
    plan: BracketPlan,
    sampler: Box<dyn Sampler>,
    active: Vec<ShBracket>,
    started: usize,
}

impl Hyperband {
    pub fn new(plan: BracketPlan, sampler: Box<dyn Sampler>) -> Self {
        Self {
            plan,
            sampler,
            active: Vec::new(),
            started: 0,
        }
    }

    pub fn plan(&self) -> &BracketPlan {
        &self.plan
    }

    fn open_bracket(&mut self) -> usize {
        let brackets = self.plan.brackets();
        let spec = brackets[self.started % brackets.len()];
        self.active.push(ShBracket {
            id: self.started,
            spec,
            rung: spec.base_rung,
            sampled: 0,
            expected: spec.n as usize,
            done: Vec::new(),
            queued: VecDeque::new(),
            finished: false,
        });
        self.started += 1;
        self.active.len() - 1
    }

    fn issue(&mut self, idx: usize, ctx: &mut Context<'_>) -> Result<Assignment> {
        let ladder = self.plan.ladder();
        let b = &mut self.active[idx];
        let fidelity = ladder.fidelity(b.rung);
        if let Some((config_id, config)) = b.queued.pop_front() {
            return Ok(Assignment {
                config_id,
                config,
                rung: b.rung,
                fidelity,
                bracket_id: Some(b.id),
            });
        }
        b.sampled += 1;
        let (rung, id) = (b.rung, b.id);
        sample_new(self.sampler.as_mut(), ctx, rung, fidelity, Some(id), id)
    }
}

impl Optimizer for Hyperband {
    fn next(&mut self, ctx: &mut Context<'_>) -> Result<Option<Assignment>> {
        let idx = match self.active.iter().position(ShBracket::has_pending) {
            Some(i) => i,
            None => self.open_bracket(),
        };
        self.issue(idx, ctx).map(Some)
    }

    fn complete(&mut self, obs: &Observation) {
        let Some(bid) = obs.bracket_id else { return };
        let Some(pos) = self.active.iter().position(|b| b.id == bid) else {
            return;
        };
        let eta = self.plan.ladder().eta();
        let s_max = self.plan.ladder().s_max();
        let b = &mut self.active[pos];
        debug_assert_eq!(obs.rung, b.rung);
        b.done.push(obs.clone());
        if b.done.len() < b.expected {
            return;
        }
        if b.rung == s_max {
            b.finished = true;
        } else {
            let quota = promotion_quota(b.done.len(), eta);
            let survivors: VecDeque<(ConfigId, Configuration)> = top_k(&b.done, quota)
                .into_iter()
                .map(|o| (o.config_id, o.config.clone()))
                .collect();
            if survivors.is_empty() {
                b.finished = true;
            } else {
                b.rung += 1;
                b.expected = survivors.len();
                b.queued = survivors;
                b.done.clear();
            }
        }
        if b.finished {
            self.active.remove(pos);
        }
    }

    fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.sampler.take_trace()
    }
}

/// Successive-halving promotions for a fully evaluated rung: the
/// `floor(count / eta)` best (at least one), ties by completion time then id.
pub fn sh_promote(rung_results: &[Observation], eta: u64) -> Vec<ConfigId> {
    if rung_results.is_empty() {
        return Vec::new();
    }
    top_k(rung_results, promotion_quota(rung_results.len(), eta))
        .into_iter()
        .map(|o| o.config_id)
        .collect()
}
