//! Sampling distributions over a search space: the expert prior, the
//! incumbent-centred local perturbation, and the procedures that construct
//! synthetic prior modes for experiments.
//!
//! Numeric dimensions use Gaussians truncated to the unit interval and
//! renormalized. Categorical dimensions use a weighted pmf that gives the
//! centre choice weight `k` and every other choice weight `1`, i.e.
//! probabilities `k/(2k-1)` and `1/(2k-1)`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::function::erf::{erfc, erfc_inv};

use crate::bench::Objective;
use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace, UnitCoord, UnitVector};

pub const DEFAULT_SIGMA: f64 = 0.25;
pub const DEFAULT_PERTURB_PROB: f64 = 0.5;

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Normal distribution `N(mean, sigma^2)` restricted to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    mean: f64,
    sigma: f64,
    lower_cdf: f64,
    mass: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sigma: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive");
        let lower_cdf = std_normal_cdf(-mean / sigma);
        let mass = std_normal_cdf((1.0 - mean) / sigma) - lower_cdf;
        Self {
            mean,
            sigma,
            lower_cdf,
            mass,
        }
    }

    /// Probability mass of the untruncated Gaussian inside `[0, 1]`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let t = (x - self.mean) / self.sigma;
        (-0.5 * t * t).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt() * self.mass)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.lower_cdf + rng.random::<f64>() * self.mass;
        let x = self.mean + self.sigma * std_normal_quantile(p);
        if x.is_finite() {
            x.clamp(0.0, 1.0)
        } else {
            self.mean
        }
    }
}

/// Probability of drawing `index` from the weighted categorical pmf centred
/// on `center` with `arity` choices.
pub fn weighted_categorical_pmf(center: usize, index: usize, arity: usize) -> f64 {
    let denom = (2 * arity - 1) as f64;
    if index == center {
        arity as f64 / denom
    } else {
        1.0 / denom
    }
}

fn sample_weighted_categorical<R: Rng + ?Sized>(center: usize, arity: usize, rng: &mut R) -> usize {
    // Weight k on the centre, 1 on each of the k-1 others: 2k-1 slots.
    let slot = rng.random_range(0..2 * arity - 1);
    if slot < arity {
        center
    } else {
        let other = slot - arity;
        if other >= center {
            other + 1
        } else {
            other
        }
    }
}

#[derive(Debug, Clone)]
enum DimLaw {
    Numeric { center: f64, law: TruncatedNormal },
    Categorical { center: usize, arity: usize },
}

/// Product of per-dimension laws centred on one configuration; shared by the
/// prior and the incumbent scoring density.
#[derive(Debug, Clone)]
struct CenteredProduct {
    space: Arc<SearchSpace>,
    center: Configuration,
    dims: Vec<DimLaw>,
}

impl CenteredProduct {
    fn new(space: Arc<SearchSpace>, center: Configuration, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let unit = space.normalize(&center)?;
        let dims = unit
            .coords
            .iter()
            .map(|c| match *c {
                UnitCoord::Numeric(u) => DimLaw::Numeric {
                    center: u,
                    law: TruncatedNormal::new(u, sigma),
                },
                UnitCoord::Category { index, arity } => DimLaw::Categorical {
                    center: index,
                    arity,
                },
            })
            .collect();
        Ok(Self {
            space,
            center,
            dims,
        })
    }

    fn pdf(&self, config: &Configuration) -> Result<f64> {
        let unit = self.space.normalize(config)?;
        Ok(self
            .dims
            .iter()
            .zip(&unit.coords)
            .map(|(law, coord)| match (law, coord) {
                (DimLaw::Numeric { law, .. }, UnitCoord::Numeric(u)) => law.pdf(*u),
                (DimLaw::Categorical { center, arity }, UnitCoord::Category { index, .. }) => {
                    weighted_categorical_pmf(*center, *index, *arity)
                }
                _ => unreachable!("space kinds are fixed"),
            })
            .product())
    }
}

/// Expert belief over the location of the optimum.
#[derive(Debug, Clone)]
pub struct PriorDistribution {
    inner: CenteredProduct,
    sigma: f64,
}

impl PriorDistribution {
    pub fn new(space: Arc<SearchSpace>, mode: Configuration, sigma: f64) -> Result<Self> {
        Ok(Self {
            inner: CenteredProduct::new(space, mode, sigma)?,
            sigma,
        })
    }

    pub fn mode(&self) -> &Configuration {
        &self.inner.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn space(&self) -> &Arc<SearchSpace> {
        &self.inner.space
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let coords = self
            .inner
            .dims
            .iter()
            .map(|law| match law {
                DimLaw::Numeric { law, .. } => UnitCoord::Numeric(law.sample(rng)),
                DimLaw::Categorical { center, arity } => UnitCoord::Category {
                    index: sample_weighted_categorical(*center, *arity, rng),
                    arity: *arity,
                },
            })
            .collect();
        self.inner
            .space
            .denormalize(&UnitVector { coords })
            .expect("coordinates stay in the unit cube")
    }

    /// Joint density in normalized coordinates.
    pub fn pdf(&self, config: &Configuration) -> Result<f64> {
        self.inner.pdf(config)
    }

    /// Prior file: `{"mode": {param: value, ...}, "sigma": 0.25}`.
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "mode": Value::Object(self.inner.space.config_to_json(self.mode())),
            "sigma": self.sigma,
        })
    }

    pub fn from_json(space: Arc<SearchSpace>, value: &Value) -> Result<Self> {
        let mode = value
            .get("mode")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidArgument("prior file needs a `mode` object".into()))?;
        let sigma = match value.get("sigma") {
            None => DEFAULT_SIGMA,
            Some(s) => s
                .as_f64()
                .ok_or_else(|| Error::InvalidArgument("prior `sigma` must be a number".into()))?,
        };
        let mode = space.config_from_json(mode)?;
        Self::new(space, mode, sigma)
    }

    pub fn load(space: Arc<SearchSpace>, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: format!("prior file {}", path.display()),
            source,
        })?;
        Self::from_json(space, &value)
    }
}

/// Local perturbation around the current incumbent.
#[derive(Debug, Clone)]
pub struct IncumbentDistribution {
    inner: CenteredProduct,
    sigma: f64,
    perturb_prob: f64,
}

impl IncumbentDistribution {
    pub fn new(
        space: Arc<SearchSpace>,
        center: Configuration,
        sigma: f64,
        perturb_prob: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&perturb_prob) {
            return Err(Error::InvalidArgument(format!(
                "perturbation probability must lie in [0, 1], got {perturb_prob}"
            )));
        }
        Ok(Self {
            inner: CenteredProduct::new(space, center, sigma)?,
            sigma,
            perturb_prob,
        })
    }

    pub fn center(&self) -> &Configuration {
        &self.inner.center
    }

    /// Each dimension is perturbed independently with probability `p`:
    /// numeric coordinates get additive `N(0, sigma^2)` noise clamped to the
    /// cube, categorical ones are redrawn from the weighted pmf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut touched = Vec::with_capacity(self.inner.dims.len());
        let coords = self
            .inner
            .dims
            .iter()
            .map(|law| {
                let perturb = rng.random::<f64>() < self.perturb_prob;
                touched.push(perturb);
                match *law {
                    DimLaw::Numeric { center, .. } if perturb => {
                        let eps: f64 = StandardNormal.sample(rng);
                        UnitCoord::Numeric((center + self.sigma * eps).clamp(0.0, 1.0))
                    }
                    DimLaw::Numeric { center, .. } => UnitCoord::Numeric(center),
                    DimLaw::Categorical { center, arity } => UnitCoord::Category {
                        index: if perturb {
                            sample_weighted_categorical(center, arity, rng)
                        } else {
                            center
                        },
                        arity,
                    },
                }
            })
            .collect();
        let sampled = self
            .inner
            .space
            .denormalize(&UnitVector { coords })
            .expect("coordinates stay in the unit cube");
        // Untouched dimensions keep the exact native value rather than its
        // normalize/denormalize round trip.
        let values = sampled
            .values()
            .iter()
            .zip(self.inner.center.values())
            .zip(touched)
            .map(|((new, old), perturbed)| if perturbed { *new } else { *old })
            .collect();
        Configuration::new(values)
    }

    /// Scoring density: truncated `N(center, sigma^2)` per numeric dimension
    /// and the weighted pmf per categorical dimension. This is not the exact
    /// law of [`Self::sample`], which has an atom at the centre.
    pub fn pdf(&self, config: &Configuration) -> Result<f64> {
        self.inner.pdf(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    NearOptimum,
    Good,
    Bad,
}

impl PriorKind {
    pub const ALL: [PriorKind; 3] = [PriorKind::NearOptimum, PriorKind::Good, PriorKind::Bad];

    pub fn as_str(&self) -> &'static str {
        match self {
            PriorKind::NearOptimum => "near-optimum",
            PriorKind::Good => "good",
            PriorKind::Bad => "bad",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near-optimum" | "near_optimum" | "nearoptimum" => Ok(PriorKind::NearOptimum),
            "good" => Ok(PriorKind::Good),
            "bad" => Ok(PriorKind::Bad),
            other => Err(Error::Unknown {
                kind: "prior kind",
                name: other.to_string(),
            }),
        }
    }
}

/// Builds synthetic prior modes of a given quality for an objective.
#[derive(Debug, Clone)]
pub struct PriorGenerator {
    pub near_optimum_samples: usize,
    pub good_samples: usize,
    pub bad_samples: usize,
    /// Width of the per-seed Gaussian perturbation of near-optimum modes.
    pub perturb_sigma: f64,
    /// Probability of switching a categorical value of a near-optimum mode.
    pub switch_prob: f64,
}

impl Default for PriorGenerator {
    fn default() -> Self {
        Self {
            near_optimum_samples: 50_000,
            good_samples: 25,
            bad_samples: 50_000,
            perturb_sigma: DEFAULT_SIGMA,
            switch_prob: 0.25,
        }
    }
}

impl PriorGenerator {
    /// Unperturbed mode: the analytic optimum or best of many samples for
    /// near-optimum, best of a handful for good, worst of many for bad.
    pub fn base_mode(
        &self,
        objective: &dyn Objective,
        kind: PriorKind,
        rng: &mut dyn RngCore,
    ) -> Result<Configuration> {
        match kind {
            PriorKind::NearOptimum => match objective.analytic_optimum() {
                Some(opt) => Ok(opt),
                None => extreme_of(objective, self.near_optimum_samples, false, rng),
            },
            PriorKind::Good => extreme_of(objective, self.good_samples, false, rng),
            PriorKind::Bad => extreme_of(objective, self.bad_samples, true, rng),
        }
    }

    /// Per-seed noise applied to near-optimum modes.
    pub fn perturb<R: Rng + ?Sized>(
        &self,
        space: &SearchSpace,
        base: &Configuration,
        rng: &mut R,
    ) -> Result<Configuration> {
        let unit = space.normalize(base)?;
        let coords = unit
            .coords
            .into_iter()
            .map(|c| match c {
                UnitCoord::Numeric(u) => {
                    let eps: f64 = StandardNormal.sample(rng);
                    UnitCoord::Numeric((u + self.perturb_sigma * eps).clamp(0.0, 1.0))
                }
                UnitCoord::Category { index, arity } => {
                    if arity > 1 && rng.random::<f64>() < self.switch_prob {
                        let other = rng.random_range(0..arity - 1);
                        UnitCoord::Category {
                            index: if other >= index { other + 1 } else { other },
                            arity,
                        }
                    } else {
                        c
                    }
                }
            })
            .collect();
        space.denormalize(&UnitVector { coords })
    }

    /// Prior mode for one run. The base is drawn from `rng`; near-optimum
    /// modes are then perturbed with a stream derived from `seed`.
    pub fn generate(
        &self,
        objective: &dyn Objective,
        kind: PriorKind,
        seed: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Configuration> {
        let base = self.base_mode(objective, kind, rng)?;
        match kind {
            PriorKind::NearOptimum => {
                let mut noise = ChaCha8Rng::seed_from_u64(seed);
                self.perturb(objective.space(), &base, &mut noise)
            }
            PriorKind::Good | PriorKind::Bad => Ok(base),
        }
    }
}

pub fn generate_prior(
    objective: &dyn Objective,
    kind: PriorKind,
    seed: u64,
    rng: &mut dyn RngCore,
) -> Result<Configuration> {
    PriorGenerator::default().generate(objective, kind, seed, rng)
}

fn extreme_of(
    objective: &dyn Objective,
    n: usize,
    worst: bool,
    rng: &mut dyn RngCore,
) -> Result<Configuration> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "prior generation needs at least one sample".into(),
        ));
    }
    let space = objective.space();
    let z_max = space.fidelity().upper;
    let mut best: Option<(f64, Configuration)> = None;
    for _ in 0..n {
        let c = space.sample_uniform(rng);
        let y = objective.evaluate(&c, z_max, rng)?;
        let better = match &best {
            None => true,
            Some((b, _)) => {
                if worst {
                    y > *b
                } else {
                    y < *b
                }
            }
        };
        if better {
            best = Some((y, c));
        }
    }
    Ok(best.expect("n > 0").1)
}
