use crate::error::Result;

use super::{sample_new, Assignment, Context, Observation, Optimizer, Sampler};

/// Every sample evaluated once at the top fidelity.
pub struct RandomSearch {
    sampler: Box<dyn Sampler>,
    rung: usize,
    z_max: u64,
}

impl RandomSearch {
    pub fn new(sampler: Box<dyn Sampler>, top_rung: usize, z_max: u64) -> Self {
        Self {
            sampler,
            rung: top_rung,
            z_max,
        }
    }
}

impl Optimizer for RandomSearch {
    fn next(&mut self, ctx: &mut Context<'_>) -> Result<Option<Assignment>> {
        sample_new(self.sampler.as_mut(), ctx, self.rung, self.z_max, None, 0).map(Some)
    }

    fn complete(&mut self, _obs: &Observation) {}

    fn take_trace(&mut self) -> Vec<crate::esp::TraceRecord> {
        self.sampler.take_trace()
    }
}
