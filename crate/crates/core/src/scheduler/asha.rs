use std::collections::BTreeSet;

use rand::Rng;

use crate::error::Result;
use crate::esp::TraceRecord;

use super::{
    sample_new, top_k, Assignment, BracketPlan, ConfigId, Context, Observation, Optimizer,
    RungLadder, Sampler,
};

/// Asynchronous promotion state of one ASHA bracket.
#[derive(Debug, Clone)]
struct AshaBracket {
    id: usize,
    base_rung: usize,
    results: Vec<Vec<Observation>>,
    promoted: Vec<BTreeSet<ConfigId>>,
}

impl AshaBracket {
    fn new(id: usize, base_rung: usize, rungs: usize) -> Self {
        Self {
            id,
            base_rung,
            results: vec![Vec::new(); rungs],
            promoted: vec![BTreeSet::new(); rungs],
        }
    }

    /// Best promotable member, scanning rungs from the top down.
    fn promotion(&mut self, ladder: &RungLadder) -> Option<Assignment> {
        let eta = ladder.eta() as usize;
        let top = ladder.s_max();
        for rung in (self.base_rung..top).rev() {
            let results = &self.results[rung];
            if results.len() < eta {
                continue;
            }
            let candidate = top_k(results, results.len() / eta)
                .into_iter()
                .find(|o| !self.promoted[rung].contains(&o.config_id));
            if let Some(o) = candidate {
                self.promoted[rung].insert(o.config_id);
                return Some(Assignment {
                    config_id: o.config_id,
                    config: o.config.clone(),
                    rung: rung + 1,
                    fidelity: ladder.fidelity(rung + 1),
                    bracket_id: Some(self.id),
                });
            }
        }
        None
    }

    fn record(&mut self, obs: &Observation) {
        self.results[obs.rung].push(obs.clone());
    }
}

/// Asynchronous successive halving starting at rung 0.
pub struct Asha {
    ladder: RungLadder,
    sampler: Box<dyn Sampler>,
    bracket: AshaBracket,
}

impl Asha {
    pub fn new(ladder: RungLadder, sampler: Box<dyn Sampler>) -> Self {
        let bracket = AshaBracket::new(0, 0, ladder.len());
        Self {
            ladder,
            sampler,
            bracket,
        }
    }
}

impl Optimizer for Asha {
    fn next(&mut self, ctx: &mut Context<'_>) -> Result<Option<Assignment>> {
        if let Some(a) = self.bracket.promotion(&self.ladder) {
            return Ok(Some(a));
        }
        let z = self.ladder.fidelity(0);
        sample_new(self.sampler.as_mut(), ctx, 0, z, Some(0), 0).map(Some)
    }

    fn complete(&mut self, obs: &Observation) {
        if obs.bracket_id == Some(0) {
            self.bracket.record(obs);
        }
    }

    fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.sampler.take_trace()
    }
}

/// HyperBand over ASHA brackets. Each request draws a bracket with
/// probability proportional to its HB sample count and then applies the
/// ASHA rule inside it.
pub struct AsyncHyperband {
    plan: BracketPlan,
    weights: Vec<f64>,
    sampler: Box<dyn Sampler>,
    brackets: Vec<AshaBracket>,
}

impl AsyncHyperband {
    pub fn new(plan: BracketPlan, sampler: Box<dyn Sampler>) -> Self {
        let rungs = plan.ladder().len();
        let brackets = plan
            .brackets()
            .iter()
            .enumerate()
            .map(|(i, b)| AshaBracket::new(i, b.base_rung, rungs))
            .collect();
        Self {
            weights: plan.async_weights(),
            plan,
            sampler,
            brackets,
        }
    }

    fn draw_bracket(&self, rng: &mut dyn rand::RngCore) -> usize {
        if self.weights.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

impl Optimizer for AsyncHyperband {
    fn next(&mut self, ctx: &mut Context<'_>) -> Result<Option<Assignment>> {
        let i = self.draw_bracket(ctx.rng);
        let ladder = self.plan.ladder();
        if let Some(a) = self.brackets[i].promotion(ladder) {
            return Ok(Some(a));
        }
        let base = self.brackets[i].base_rung;
        let z = ladder.fidelity(base);
        sample_new(self.sampler.as_mut(), ctx, base, z, Some(i), i).map(Some)
    }

    fn complete(&mut self, obs: &Observation) {
        if let Some(b) = obs.bracket_id.and_then(|id| self.brackets.get_mut(id)) {
            b.record(obs);
        }
    }

    fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.sampler.take_trace()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::history::tests::obs;
    use super::super::{History, UniformSampler};
    use super::*;
    use crate::space::{Fidelity, ParameterDef, SearchSpace};

    fn space() -> Arc<SearchSpace> {
        Arc::new(
            SearchSpace::new(
                vec![ParameterDef::continuous("x", 0.0, 1.0, false)],
                Fidelity {
                    name: "z".into(),
                    lower: 3,
                    upper: 81,
                    log: false,
                },
            )
            .unwrap(),
        )
    }

    fn asha() -> Asha {
        let ladder = RungLadder::new(3, 81, 3).unwrap();
        Asha::new(ladder, Box::new(UniformSampler::new(space())))
    }

    fn next(opt: &mut dyn Optimizer, next_id: &mut ConfigId) -> Assignment {
        let h = History::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = Context::new(&h, &mut rng, next_id);
        opt.next(&mut ctx).unwrap().unwrap()
    }

    fn done(id: ConfigId, rung: usize, loss: f64, end: u64) -> Observation {
        let mut o = obs(id, rung, [3, 9, 27, 81][rung], loss, end);
        o.bracket_id = Some(0);
        o
    }

    #[test]
    fn fresh_state_samples_base() {
        let mut a = asha();
        let mut id = 0;
        let first = next(&mut a, &mut id);
        assert_eq!((first.rung, first.fidelity, first.config_id), (0, 3, 0));
    }

    #[test]
    fn promotes_best_after_eta_results() {
        let mut a = asha();
        let mut id = 10;
        a.complete(&done(1, 0, 0.5, 1));
        a.complete(&done(2, 0, 0.1, 2));
        assert_eq!(next(&mut a, &mut id).rung, 0);
        a.complete(&done(3, 0, 0.3, 3));
        let p = next(&mut a, &mut id);
        assert_eq!((p.config_id, p.rung, p.fidelity), (2, 1, 9));
        // quota of one slot used
        let n = next(&mut a, &mut id);
        assert_eq!(n.rung, 0);
        assert!(n.config_id >= 10);
    }

    #[test]
    fn higher_rungs_take_precedence() {
        let mut a = asha();
        let mut id = 100;
        for i in 0..9 {
            a.complete(&done(i, 0, i as f64, i));
        }
        for i in 0..3 {
            a.bracket.promoted[0].insert(i);
            a.complete(&done(i, 1, i as f64, 20 + i));
        }
        let p = next(&mut a, &mut id);
        assert_eq!((p.config_id, p.rung), (0, 2));
    }

    #[test]
    fn async_hb_single_bracket() {
        let ladder = RungLadder::new(50, 81, 3).unwrap();
        let mut h = AsyncHyperband::new(
            BracketPlan::new(&ladder),
            Box::new(UniformSampler::new(space())),
        );
        let mut id = 0;
        for _ in 0..5 {
            let a = next(&mut h, &mut id);
            assert_eq!((a.bracket_id, a.fidelity), (Some(0), 81));
        }
    }

    #[test]
    fn async_hb_promotion_precedes_sampling_within_bracket() {
        let ladder = RungLadder::new(3, 81, 3).unwrap();
        let mut h = AsyncHyperband::new(
            BracketPlan::new(&ladder),
            Box::new(UniformSampler::new(space())),
        );
        for (b, base) in [(0usize, 0usize), (1, 1), (2, 2)] {
            for i in 0..3u64 {
                let mut o = obs(b as u64 * 10 + i, base, ladder.fidelity(base), i as f64, i);
                o.bracket_id = Some(b);
                h.complete(&o);
            }
        }
        let mut id = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hist = History::new();
        let mut seen = BTreeSet::new();
        for _ in 0..200 {
            let mut ctx = Context::new(&hist, &mut rng, &mut id);
            let a = h.next(&mut ctx).unwrap().unwrap();
            let b = a.bracket_id.unwrap();
            let base = h.brackets[b].base_rung;
            if b < 3 && seen.insert(b) {
                assert_eq!((a.config_id, a.rung), (b as u64 * 10, base + 1));
            } else {
                assert_eq!(a.rung, base);
                assert!(a.config_id >= 1000);
            }
        }
        assert_eq!(seen.len(), 3);
    }
}
