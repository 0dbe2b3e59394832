//! Ensemble sampling policy: per-draw mixture of uniform, prior and
//! incumbent-local sampling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::distributions::{
    IncumbentDistribution, PriorDistribution, DEFAULT_PERTURB_PROB, DEFAULT_SIGMA,
};
use crate::error::{Error, Result};
use crate::scheduler::FirstEvaluation;
use crate::scheduler::{
    top_k, Accounting, BracketPlan, ConfigId, History, RungLadder, SampleRequest, Sampler,
};

macro_rules! string_enum {
    ($name:ident, $kind:literal, { $($variant:ident => $s:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $s),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($name::$variant),)+
                    other => Err(Error::Unknown { kind: $kind, name: other.to_string() }),
                }
            }
        }
    };
}

/// How the uniform share decays across rungs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomPolicy {
    #[default]
    Geometric,
    Linear,
    Constant50,
}

string_enum!(RandomPolicy, "random policy", {
    Geometric => "geometric",
    Linear => "linear",
    Constant50 => "constant50",
});

/// How the non-uniform share is split between prior and incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TradeoffPolicy {
    #[default]
    DensityScores,
    ConstantRatio,
    HalvingDecay,
}

string_enum!(TradeoffPolicy, "trade-off policy", {
    DensityScores => "density-scores",
    ConstantRatio => "constant-ratio",
    HalvingDecay => "halving-decay",
});

/// Where the prior mode is evaluated first, if at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModePlacement {
    #[default]
    ModeAtMax,
    ModeAtMin,
    NoMode,
}

string_enum!(ModePlacement, "mode placement", {
    ModeAtMax => "mode-at-max",
    ModeAtMin => "mode-at-min",
    NoMode => "no-mode",
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EspConfig {
    pub eta: u64,
    pub random_policy: RandomPolicy,
    pub tradeoff_policy: TradeoffPolicy,
    pub mode_placement: ModePlacement,
    /// Width of the incumbent perturbation in unit coordinates.
    pub incumbent_sigma: f64,
    pub perturb_prob: f64,
}

impl Default for EspConfig {
    fn default() -> Self {
        Self {
            eta: 3,
            random_policy: RandomPolicy::default(),
            tradeoff_policy: TradeoffPolicy::default(),
            mode_placement: ModePlacement::default(),
            incumbent_sigma: DEFAULT_SIGMA,
            perturb_prob: DEFAULT_PERTURB_PROB,
        }
    }
}

impl EspConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta < 2 {
            return Err(Error::InvalidArgument(format!(
                "eta must be at least 2, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EspProbabilities {
    pub p_u: f64,
    pub p_pi: f64,
    pub p_inc: f64,
}

impl EspProbabilities {
    pub fn is_valid(&self) -> bool {
        let all = [self.p_u, self.p_pi, self.p_inc];
        all.iter().all(|p| (0.0..=1.0).contains(p))
            && (all.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    }

    /// Strategy selected by a single uniform variate against the
    /// cumulative probabilities in the order uniform, prior, incumbent.
    pub fn choose(&self, u: f64) -> Strategy {
        if u < self.p_u {
            Strategy::Uniform
        } else if self.p_inc <= 0.0 || u < self.p_u + self.p_pi {
            Strategy::Prior
        } else {
            Strategy::Incumbent
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Uniform,
    Prior,
    Incumbent,
}

/// One policy draw, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub i: usize,
    pub rung: usize,
    pub p_u: f64,
    pub p_pi: f64,
    pub p_inc: f64,
    pub strategy: Strategy,
    pub config_id: ConfigId,
}

impl TraceRecord {
    pub fn probabilities(&self) -> EspProbabilities {
        EspProbabilities {
            p_u: self.p_u,
            p_pi: self.p_pi,
            p_inc: self.p_inc,
        }
    }
}

pub fn write_trace<W: Write>(trace: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(text: &str) -> Result<Vec<TraceRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| Error::Json {
                context: "trace record".into(),
                source,
            })
        })
        .collect()
}

/// Uniform and prior shares at rung `r` before any incumbent is trusted.
pub fn random_proportion(r: usize, s_max: usize, cfg: &EspConfig) -> Result<(f64, f64)> {
    if r > s_max {
        return Err(Error::InvalidArgument(format!(
            "rung {r} exceeds s_max = {s_max}"
        )));
    }
    let p_u = match cfg.random_policy {
        RandomPolicy::Geometric => 1.0 / (1.0 + (cfg.eta as f64).powi(r as i32)),
        RandomPolicy::Linear => {
            let ratio = if s_max == 0 {
                1.0
            } else {
                1.0 + (cfg.eta as f64 - 1.0) * r as f64 / s_max as f64
            };
            1.0 / (1.0 + ratio)
        }
        RandomPolicy::Constant50 => 0.5,
    };
    Ok((p_u, 1.0 - p_u))
}

/// Whether incumbent sampling is enabled: the first SH bracket's worth of
/// budget is spent and something has been evaluated at the top fidelity.
pub fn activate_incumbent(history: &History, plan: &BracketPlan, accounting: Accounting) -> bool {
    let z_max = plan.ladder().z_max();
    !history.is_empty()
        && history.consumed_budget() >= plan.first_bracket_cost(accounting)
        && history.has_fidelity(z_max)
}

/// Splits `p_pi_old` in proportion to rank-weighted density sums.
/// `prior_pdfs` and `inc_pdfs` are in rank order, best first.
pub fn density_split(prior_pdfs: &[f64], inc_pdfs: &[f64], p_pi_old: f64) -> (f64, f64) {
    let n = prior_pdfs.len();
    let mut s_pi = 0.0;
    let mut s_inc = 0.0;
    for (i, (p, q)) in prior_pdfs.iter().zip(inc_pdfs).enumerate() {
        let w = (n - i) as f64;
        s_pi += w * p;
        s_inc += w * q;
    }
    let total = s_pi + s_inc;
    if !total.is_finite() || total <= 0.0 {
        return (p_pi_old, 0.0);
    }
    let p_inc = p_pi_old * s_inc / total;
    (p_pi_old - p_inc, p_inc)
}

/// Density-score trade-off between prior and incumbent sampling, computed
/// over the best configurations of the highest rung holding at least `eta`
/// successful evaluations.
pub fn dynamic_weights(
    history: &History,
    prior: &PriorDistribution,
    inc: &IncumbentDistribution,
    eta: u64,
    p_pi_old: f64,
) -> Result<(f64, f64)> {
    let eta_n = eta as usize;
    let top_rung = history.observations().iter().map(|o| o.rung).max();
    let rung = top_rung.and_then(|top| {
        (0..=top)
            .rev()
            .find(|&r| history.at_rung(r).filter(|o| !o.failed()).count() >= eta_n)
    });
    let Some(rung) = rung else {
        return Err(Error::InvalidArgument(format!(
            "no rung holds {eta} successful evaluations"
        )));
    };
    let count = history.at_rung(rung).filter(|o| !o.failed()).count();
    let n = eta_n.max(count / eta_n).min(count);
    let best = top_k(history.at_rung(rung), n);
    let mut prior_pdfs = Vec::with_capacity(n);
    let mut inc_pdfs = Vec::with_capacity(n);
    for o in best {
        prior_pdfs.push(prior.pdf(&o.config)?);
        inc_pdfs.push(inc.pdf(&o.config)?);
    }
    let (p_pi, p_inc) = density_split(&prior_pdfs, &inc_pdfs, p_pi_old);
    Ok((p_pi, p_inc))
}

/// Inputs for splitting the prior share once the incumbent is active.
pub struct TradeoffContext<'a> {
    pub history: &'a History,
    pub prior: &'a PriorDistribution,
    pub incumbent: &'a IncumbentDistribution,
    pub p_pi_old: f64,
    /// Index of the SH bracket being sampled for.
    pub bracket_index: usize,
}

pub fn tradeoff_weights(cfg: &EspConfig, ctx: &TradeoffContext<'_>) -> Result<(f64, f64)> {
    let p = ctx.p_pi_old;
    match cfg.tradeoff_policy {
        TradeoffPolicy::DensityScores => {
            dynamic_weights(ctx.history, ctx.prior, ctx.incumbent, cfg.eta, p)
        }
        TradeoffPolicy::ConstantRatio => {
            let eta = cfg.eta as f64;
            Ok((p * eta / (eta + 1.0), p / (eta + 1.0)))
        }
        TradeoffPolicy::HalvingDecay => {
            let ratio = 2f64.powi(ctx.bracket_index.min(1023) as i32);
            let p_pi = p / (1.0 + ratio);
            Ok((p_pi, p - p_pi))
        }
    }
}

/// First evaluation for a prior-aware run under the given placement.
pub fn first_evaluation_plan(
    placement: ModePlacement,
    prior: &PriorDistribution,
    ladder: &RungLadder,
) -> Option<FirstEvaluation> {
    let (rung, fidelity) = match placement {
        ModePlacement::ModeAtMax => (ladder.s_max(), ladder.z_max()),
        ModePlacement::ModeAtMin => (0, ladder.fidelity(0)),
        ModePlacement::NoMode => return None,
    };
    Some(FirstEvaluation {
        config: prior.mode().clone(),
        rung,
        fidelity,
    })
}

/// The ensemble policy as a configuration source for HB-style optimizers.
pub struct EnsemblePolicy {
    cfg: EspConfig,
    prior: Arc<PriorDistribution>,
    plan: BracketPlan,
    accounting: Accounting,
    trace: Vec<TraceRecord>,
}

impl EnsemblePolicy {
    pub fn new(
        cfg: EspConfig,
        prior: Arc<PriorDistribution>,
        plan: BracketPlan,
        accounting: Accounting,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            prior,
            plan,
            accounting,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &EspConfig {
        &self.cfg
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Probabilities for the next draw at `rung`, plus the incumbent
    /// sampler when it is active.
    pub fn probabilities(
        &self,
        history: &History,
        rung: usize,
        bracket_index: usize,
    ) -> Result<(EspProbabilities, Option<IncumbentDistribution>)> {
        let s_max = self.plan.ladder().s_max();
        let (p_u, p_pi_old) = random_proportion(rung.min(s_max), s_max, &self.cfg)?;
        let mut probs = EspProbabilities {
            p_u,
            p_pi: p_pi_old,
            p_inc: 0.0,
        };
        if !activate_incumbent(history, &self.plan, self.accounting) {
            return Ok((probs, None));
        }
        let Some(best) = history.incumbent() else {
            return Ok((probs, None));
        };
        let inc = IncumbentDistribution::new(
            self.prior.space().clone(),
            best.config.clone(),
            self.cfg.incumbent_sigma,
            self.cfg.perturb_prob,
        )?;
        let ctx = TradeoffContext {
            history,
            prior: &self.prior,
            incumbent: &inc,
            p_pi_old,
            bracket_index,
        };
        match tradeoff_weights(&self.cfg, &ctx) {
            Ok((p_pi, p_inc)) => {
                probs.p_pi = p_pi;
                probs.p_inc = p_inc;
                Ok((probs, Some(inc)))
            }
            Err(_) => Ok((probs, None)),
        }
    }
}

impl Sampler for EnsemblePolicy {
    fn sample(
        &mut self,
        req: &SampleRequest<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<crate::space::Configuration> {
        let (probs, inc) = self.probabilities(req.history, req.rung, req.bracket_index)?;
        let u: f64 = rng.random();
        let strategy = match (probs.choose(u), &inc) {
            (Strategy::Incumbent, None) => Strategy::Prior,
            (s, _) => s,
        };
        let config = match strategy {
            Strategy::Uniform => self.prior.space().sample_uniform(rng),
            Strategy::Prior => self.prior.sample(rng),
            Strategy::Incumbent => inc.as_ref().expect("checked above").sample(rng),
        };
        self.trace.push(TraceRecord {
            i: self.trace.len(),
            rung: req.rung,
            p_u: probs.p_u,
            p_pi: probs.p_pi,
            p_inc: probs.p_inc,
            strategy,
            config_id: req.config_id,
        });
        Ok(config)
    }

    fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geo() -> EspConfig {
        EspConfig::default()
    }

    #[test]
    fn geometric_proportions() {
        let expect = [
            (0.5, 0.5),
            (0.25, 0.75),
            (0.1, 0.9),
            (1.0 / 28.0, 27.0 / 28.0),
        ];
        for (r, (u, p)) in expect.into_iter().enumerate() {
            let (a, b) = random_proportion(r, 3, &geo()).unwrap();
            assert_abs_diff_eq!(a, u, epsilon = 1e-12);
            assert_abs_diff_eq!(b, p, epsilon = 1e-12);
        }
        assert!(random_proportion(4, 3, &geo()).is_err());
    }

    #[test]
    fn linear_and_constant_proportions() {
        let cfg = EspConfig {
            random_policy: RandomPolicy::Linear,
            ..geo()
        };
        let (u, p) = random_proportion(3, 3, &cfg).unwrap();
        assert_abs_diff_eq!(u, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p / u, 3.0, epsilon = 1e-12);
        let (u, p) = random_proportion(0, 3, &cfg).unwrap();
        assert_abs_diff_eq!(u, p, epsilon = 1e-12);
        assert_eq!(random_proportion(0, 0, &cfg).unwrap(), (0.5, 0.5));
        let cfg = EspConfig {
            random_policy: RandomPolicy::Constant50,
            ..geo()
        };
        for r in 0..=3 {
            assert_eq!(random_proportion(r, 3, &cfg).unwrap(), (0.5, 0.5));
        }
    }

    #[test]
    fn density_split_example() {
        let (p, q) = density_split(&[0.9, 0.4, 0.1], &[0.3, 0.5, 0.8], 0.75);
        assert_abs_diff_eq!(p, 0.75 * 3.6 / 6.3, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 0.75 * 2.7 / 6.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.42857, epsilon = 1e-5);
        assert_abs_diff_eq!(q, 0.32143, epsilon = 1e-5);
        assert_abs_diff_eq!(p + q, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn density_split_identical_halves() {
        let d = [0.7, 0.2, 1.3, 0.01];
        let (p, q) = density_split(&d, &d, 0.6);
        assert_abs_diff_eq!(p, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 0.3, epsilon = 1e-12);
        assert_eq!(density_split(&[0.0], &[0.0], 0.4), (0.4, 0.0));
    }

    #[test]
    fn choose_respects_order() {
        let p = EspProbabilities {
            p_u: 0.2,
            p_pi: 0.5,
            p_inc: 0.3,
        };
        assert_eq!(p.choose(0.0), Strategy::Uniform);
        assert_eq!(p.choose(0.2), Strategy::Prior);
        assert_eq!(p.choose(0.69), Strategy::Prior);
        assert_eq!(p.choose(0.7), Strategy::Incumbent);
        let no_inc = EspProbabilities {
            p_u: 0.5,
            p_pi: 0.5 - 1e-17,
            p_inc: 0.0,
        };
        assert_eq!(no_inc.choose(0.999_999_999_999), Strategy::Prior);
    }

    #[test]
    fn names_round_trip() {
        for p in [
            RandomPolicy::Geometric,
            RandomPolicy::Linear,
            RandomPolicy::Constant50,
        ] {
            assert_eq!(p.as_str().parse::<RandomPolicy>().unwrap(), p);
        }
        for p in [
            TradeoffPolicy::DensityScores,
            TradeoffPolicy::ConstantRatio,
            TradeoffPolicy::HalvingDecay,
        ] {
            assert_eq!(p.to_string().parse::<TradeoffPolicy>().unwrap(), p);
        }
        for p in [
            ModePlacement::ModeAtMax,
            ModePlacement::ModeAtMin,
            ModePlacement::NoMode,
        ] {
            assert_eq!(p.to_string().parse::<ModePlacement>().unwrap(), p);
        }
        assert!("nope".parse::<ModePlacement>().is_err());
    }

    #[test]
    fn trace_json_keys() {
        let rec = TraceRecord {
            i: 3,
            rung: 1,
            p_u: 0.25,
            p_pi: 0.75,
            p_inc: 0.0,
            strategy: Strategy::Prior,
            config_id: 17,
        };
        let mut buf = Vec::new();
        write_trace(std::slice::from_ref(&rec), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"i\":3,\"rung\":1,\"p_u\":0.25,\"p_pi\":0.75,\"p_inc\":0.0,\"strategy\":\"prior\",\"config_id\":17}\n"
        );
        assert_eq!(read_trace(&text).unwrap(), vec![rec]);
    }
}
