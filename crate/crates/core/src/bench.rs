//! Objectives: the multi-fidelity Hartmann family, a subprocess adapter for
//! external objectives, and a fidelity-correlation probe.

use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scheduler::RungLadder;
use crate::space::{Configuration, Fidelity, ParameterDef, SearchSpace};

/// A (possibly multi-fidelity) loss to be minimized.
///
/// Evaluation at the top fidelity must be deterministic, so that the
/// objective there equals the true target.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn space(&self) -> &SearchSpace;

    fn evaluate(&self, config: &Configuration, fidelity: u64, rng: &mut dyn RngCore)
        -> Result<f64>;

    fn analytic_optimum(&self) -> Option<Configuration> {
        None
    }
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];

const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

pub const HARTMANN3_OPTIMUM: [f64; 3] = [0.114614, 0.555649, 0.852547];
pub const HARTMANN3_MIN: f64 = -3.86278;
pub const HARTMANN6_OPTIMUM: [f64; 6] = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
pub const HARTMANN6_MIN: f64 = -3.32237;

pub const MFH_FIDELITY_MIN: u64 = 3;
pub const MFH_FIDELITY_MAX: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityScaling {
    Log,
    Linear,
}

/// Maps an integer fidelity in `[z_min, z_max]` onto `[0, 1]`.
pub fn fidelity_normalize(z: u64, z_min: u64, z_max: u64, scaling: FidelityScaling) -> Result<f64> {
    if z < z_min || z > z_max || z_min >= z_max {
        return Err(Error::validation(
            "fidelity",
            format!("{z} outside [{z_min}, {z_max}]"),
        ));
    }
    let (z, lo, hi) = (z as f64, z_min as f64, z_max as f64);
    Ok(match scaling {
        FidelityScaling::Log => (z.ln() - lo.ln()) / (hi.ln() - lo.ln()),
        FidelityScaling::Linear => (z - lo) / (hi - lo),
    })
}

/// Parameters of one multi-fidelity Hartmann function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfhVariant {
    pub dim: usize,
    /// Fidelity bias `b`: each outer coefficient is reduced by `b (1 - z)`.
    pub bias: f64,
    /// Noise scale `c`: half-normal noise with standard deviation `c (1 - z)`.
    pub noise: f64,
}

impl MfhVariant {
    pub fn good(dim: usize) -> Self {
        Self {
            dim,
            bias: 2.5,
            noise: 2.0,
        }
    }

    pub fn bad(dim: usize) -> Self {
        Self {
            dim,
            bias: 4.0,
            noise: 5.0,
        }
    }

    /// Noise-free part of the loss at normalized fidelity `z`.
    pub fn deterministic(&self, x: &[f64], z: f64) -> f64 {
        self.terms(x)
            .iter()
            .zip(HARTMANN_ALPHA)
            .map(|(e, alpha)| -(alpha - self.bias * (1.0 - z)) * e)
            .sum()
    }

    /// `exp(-sum_j A_ij (x_j - P_ij)^2)` for each of the four terms.
    fn terms(&self, x: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, slot) in out.iter_mut().enumerate() {
            let s: f64 = match self.dim {
                3 => (0..3)
                    .map(|j| HARTMANN3_A[i][j] * (x[j] - HARTMANN3_P[i][j]).powi(2))
                    .sum(),
                _ => (0..6)
                    .map(|j| HARTMANN6_A[i][j] * (x[j] - HARTMANN6_P[i][j]).powi(2))
                    .sum(),
            };
            *slot = (-s).exp();
        }
        out
    }

    /// Loss at normalized fidelity `z`; half-normal noise is drawn only when
    /// its scale is non-zero, so `z = 1` never touches `rng`.
    pub fn eval(&self, x: &[f64], z: f64, rng: &mut dyn RngCore) -> f64 {
        let scale = self.noise * (1.0 - z);
        let noise = if scale > 0.0 {
            let eps: f64 = StandardNormal.sample(rng);
            (scale * eps).abs()
        } else {
            0.0
        };
        self.deterministic(x, z) + noise
    }
}

/// Multi-fidelity Hartmann objective over `[0, 1]^dim` with fidelity in
/// `[3, 100]`.
#[derive(Debug, Clone)]
pub struct MfHartmann {
    name: String,
    variant: MfhVariant,
    space: SearchSpace,
    scaling: FidelityScaling,
}

impl MfHartmann {
    pub fn new(name: impl Into<String>, variant: MfhVariant) -> Result<Self> {
        if variant.dim != 3 && variant.dim != 6 {
            return Err(Error::InvalidArgument(format!(
                "Hartmann is defined for 3 or 6 dimensions, not {}",
                variant.dim
            )));
        }
        let params = (0..variant.dim)
            .map(|i| ParameterDef::continuous(format!("X_{i}"), 0.0, 1.0, false))
            .collect();
        let space = SearchSpace::new(
            params,
            Fidelity {
                name: "z".into(),
                lower: MFH_FIDELITY_MIN,
                upper: MFH_FIDELITY_MAX,
                log: true,
            },
        )?;
        Ok(Self {
            name: name.into(),
            variant,
            space,
            scaling: FidelityScaling::Log,
        })
    }

    pub fn with_scaling(mut self, scaling: FidelityScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn variant(&self) -> &MfhVariant {
        &self.variant
    }

    pub fn normalized_fidelity(&self, z: u64) -> Result<f64> {
        fidelity_normalize(z, MFH_FIDELITY_MIN, MFH_FIDELITY_MAX, self.scaling)
    }

    pub fn eval_point(&self, x: &[f64], z: u64, rng: &mut dyn RngCore) -> Result<f64> {
        if x.len() != self.variant.dim {
            return Err(Error::validation(
                "x",
                format!("expected {} coordinates, got {}", self.variant.dim, x.len()),
            ));
        }
        if let Some((j, v)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::validation(
                format!("X_{j}"),
                format!("value {v} outside [0, 1]"),
            ));
        }
        let z = self.normalized_fidelity(z)?;
        Ok(self.variant.eval(x, z, rng))
    }
}

impl Objective for MfHartmann {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(
        &self,
        config: &Configuration,
        fidelity: u64,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let x = config
            .as_reals()
            .ok_or_else(|| Error::validation("x", "Hartmann needs numeric values"))?;
        self.eval_point(&x, fidelity, rng)
    }

    fn analytic_optimum(&self) -> Option<Configuration> {
        Some(match self.variant.dim {
            3 => Configuration::from_reals(&HARTMANN3_OPTIMUM),
            _ => Configuration::from_reals(&HARTMANN6_OPTIMUM),
        })
    }
}

pub const BUILTIN_BENCHMARKS: [&str; 4] = ["mfh3-good", "mfh3-bad", "mfh6-good", "mfh6-bad"];

pub fn builtin(name: &str) -> Result<Arc<dyn Objective>> {
    let variant = match name {
        "mfh3-good" => MfhVariant::good(3),
        "mfh3-bad" => MfhVariant::bad(3),
        "mfh6-good" => MfhVariant::good(6),
        "mfh6-bad" => MfhVariant::bad(6),
        other => {
            return Err(Error::Unknown {
                kind: "benchmark",
                name: other.to_string(),
            })
        }
    };
    Ok(Arc::new(MfHartmann::new(name, variant)?))
}

/// External objective driven through a child process per evaluation.
///
/// The child receives one JSON object `{"config": {...}, "fidelity": z,
/// "seed": s}` on standard input and must print `{"loss": y}` on standard
/// output.
#[derive(Debug, Clone)]
pub struct SubprocessObjective {
    command: String,
    space: SearchSpace,
}

impl SubprocessObjective {
    pub fn new(command: impl Into<String>, space: SearchSpace) -> Self {
        Self {
            command: command.into(),
            space,
        }
    }
}

#[derive(Deserialize)]
struct LossReply {
    loss: f64,
}

impl Objective for SubprocessObjective {
    fn name(&self) -> &str {
        &self.command
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(
        &self,
        config: &Configuration,
        fidelity: u64,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let request = serde_json::json!({
            "config": Value::Object(self.space.config_to_json(config)),
            "fidelity": fidelity,
            "seed": rng.next_u64(),
        });
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Objective(format!("failed to start `{}`: {e}", self.command)))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            writeln!(stdin, "{request}")
                .map_err(|e| Error::Objective(format!("writing request: {e}")))?;
        }
        let output = child
            .wait_with_output()
            .map_err(|e| Error::Objective(format!("waiting for `{}`: {e}", self.command)))?;
        if !output.status.success() {
            return Err(Error::Objective(format!(
                "`{}` exited with {}",
                self.command, output.status
            )));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let reply: LossReply = serde_json::from_str(text.trim()).map_err(|source| Error::Json {
            context: format!("reply from `{}`", self.command),
            source,
        })?;
        if reply.loss.is_nan() {
            return Err(Error::Objective("objective returned NaN".into()));
        }
        Ok(reply.loss)
    }
}

/// Ranks starting at 1, tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either side has no spread.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    if a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationClass {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub fidelities: Vec<u64>,
    /// Spearman correlation of each rung's losses with the top-fidelity losses.
    pub rho: Vec<Option<f64>>,
    /// Rung whose fidelity is nearest to 10% of the top fidelity.
    pub reference_rung: usize,
    pub class: CorrelationClass,
}

pub const HIGH_CORRELATION_THRESHOLD: f64 = 0.8;

pub fn correlation_probe(
    objective: &dyn Objective,
    ladder: &RungLadder,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<ProbeResult> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation probe needs at least 3 configurations, got {n}"
        )));
    }
    let space = objective.space();
    let configs: Vec<Configuration> = (0..n).map(|_| space.sample_uniform(rng)).collect();
    let top = configs
        .iter()
        .map(|c| objective.evaluate(c, ladder.z_max(), rng))
        .collect::<Result<Vec<_>>>()?;
    let mut rho = Vec::with_capacity(ladder.len());
    for &z in ladder.fidelities() {
        let losses = configs
            .iter()
            .map(|c| objective.evaluate(c, z, rng))
            .collect::<Result<Vec<_>>>()?;
        rho.push(spearman(&losses, &top));
    }
    let target = 0.1 * ladder.z_max() as f64;
    let reference_rung = ladder
        .fidelities()
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (**a as f64 - target)
                .abs()
                .total_cmp(&(**b as f64 - target).abs())
        })
        .map(|(i, _)| i)
        .expect("ladder has at least one rung");
    let class = match rho[reference_rung] {
        Some(r) if r >= HIGH_CORRELATION_THRESHOLD => CorrelationClass::High,
        _ => CorrelationClass::Low,
    };
    Ok(ProbeResult {
        fidelities: ladder.fidelities().to_vec(),
        rho,
        reference_rung,
        class,
    })
}
