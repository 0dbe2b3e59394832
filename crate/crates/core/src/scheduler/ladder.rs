use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Accounting;

/// Geometric fidelity ladder of successive halving.
///
/// Rung `j` sits at `z_max * eta^(j - s_max)`, rounded up to an integer for
/// every rung below the top; the top rung is exactly `z_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RungLadder {
    eta: u64,
    z_min: u64,
    z_max: u64,
    fidelities: Vec<u64>,
}

impl RungLadder {
    pub fn new(z_min: u64, z_max: u64, eta: u64) -> Result<Self> {
        if eta < 2 {
            return Err(Error::InvalidArgument(format!(
                "eta must be at least 2, got {eta}"
            )));
        }
        if z_min == 0 || z_min >= z_max {
            return Err(Error::InvalidArgument(format!(
                "fidelity bounds must satisfy 0 < z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        // Largest s with z_min * eta^s <= z_max.
        let mut s_max = 0u32;
        while z_min.saturating_mul(eta.pow(s_max + 1)) <= z_max {
            s_max += 1;
        }
        let fidelities = (0..=s_max)
            .map(|j| {
                let div = eta.pow(s_max - j);
                z_max.div_ceil(div)
            })
            .collect();
        Ok(Self {
            eta,
            z_min,
            z_max,
            fidelities,
        })
    }

    pub fn eta(&self) -> u64 {
        self.eta
    }

    pub fn z_min(&self) -> u64 {
        self.z_min
    }

    pub fn z_max(&self) -> u64 {
        self.z_max
    }

    pub fn s_max(&self) -> usize {
        self.fidelities.len() - 1
    }

    pub fn len(&self) -> usize {
        self.fidelities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fidelities.is_empty()
    }

    pub fn fidelities(&self) -> &[u64] {
        &self.fidelities
    }

    pub fn fidelity(&self, rung: usize) -> u64 {
        self.fidelities[rung]
    }

    pub fn rung_of(&self, fidelity: u64) -> Option<usize> {
        self.fidelities.iter().position(|&z| z == fidelity)
    }
}

/// One SH bracket of an HB iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub s: usize,
    pub base_rung: usize,
    /// Number of configurations sampled at the base rung.
    pub n: u64,
    pub base_fidelity: u64,
}

/// The SH brackets of one HB iteration, ordered `s = s_max, ..., 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketPlan {
    ladder: RungLadder,
    brackets: Vec<BracketSpec>,
}

/// Survivors of a rung with `count` members: `floor(count / eta)`, at least one.
pub fn promotion_quota(count: usize, eta: u64) -> usize {
    (count / eta as usize).max(1)
}

impl BracketPlan {
    pub fn new(ladder: &RungLadder) -> Self {
        let s_max = ladder.s_max();
        let eta = ladder.eta();
        let brackets = (0..=s_max)
            .rev()
            .map(|s| {
                let num = (s_max as u64 + 1) * eta.pow(s as u32);
                BracketSpec {
                    s,
                    base_rung: s_max - s,
                    n: num.div_ceil(s as u64 + 1),
                    base_fidelity: ladder.fidelity(s_max - s),
                }
            })
            .collect();
        Self {
            ladder: ladder.clone(),
            brackets,
        }
    }

    pub fn brackets(&self) -> &[BracketSpec] {
        &self.brackets
    }

    pub fn ladder(&self) -> &RungLadder {
        &self.ladder
    }

    /// Population at each rung of a bracket, base rung first.
    pub fn rung_sizes(&self, bracket: &BracketSpec) -> Vec<(usize, u64)> {
        let mut n = bracket.n as usize;
        let mut out = Vec::new();
        for rung in bracket.base_rung..=self.ladder.s_max() {
            out.push((rung, n as u64));
            n = promotion_quota(n, self.ladder.eta());
        }
        out
    }

    /// Epochs charged for running one bracket to completion.
    pub fn bracket_cost(&self, bracket: &BracketSpec, accounting: Accounting) -> u64 {
        let mut prev = 0;
        self.rung_sizes(bracket)
            .into_iter()
            .map(|(rung, n)| {
                let z = self.ladder.fidelity(rung);
                let charged = match accounting {
                    Accounting::Continuation => z - prev,
                    Accounting::Fresh => z,
                };
                prev = z;
                n * charged
            })
            .sum()
    }

    /// Cost of the first (most aggressive) SH bracket.
    pub fn first_bracket_cost(&self, accounting: Accounting) -> u64 {
        self.bracket_cost(&self.brackets[0], accounting)
    }

    pub fn iteration_cost(&self, accounting: Accounting) -> u64 {
        self.brackets
            .iter()
            .map(|b| self.bracket_cost(b, accounting))
            .sum()
    }

    /// Bracket-sampling weights for asynchronous HB, proportional to `n_s`.
    pub fn async_weights(&self) -> Vec<f64> {
        let total: u64 = self.brackets.iter().map(|b| b.n).sum();
        self.brackets
            .iter()
            .map(|b| b.n as f64 / total as f64)
            .collect()
    }
}
