//! Exploration bonuses: the temporal-contrastive reward with its
//! variance-reduced suffix estimator, oracle KL rewards, and the
//! count / distillation / curiosity / temporal-distance baselines.

mod baselines;
mod ctec;
mod etd;

pub use baselines::{CountTable, IcmModule, RndModule};
pub use ctec::{ctec_reward_single, ctec_reward_suffix, ctec_reward_suffix_generic};
pub use etd::{etd_reward, EpisodicMemory};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::{exact_forward_kl_reward, OccupancyOracle};

/// Which intrinsic reward drives the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    /// Negated temporal-contrastive similarity.
    CTeC,
    /// Exact mode-seeking KL from the tabular oracle (the converged-model
    /// stand-in for the contrastive reward).
    ReverseKl,
    /// Exact mean-seeking KL ablation; tabular environments only.
    ForwardKl,
    Count,
    RndLite,
    IcmLite,
    EtdLite,
    None,
}

impl RewardSource {
    /// Label used in reward traces and metrics.
    pub fn label(self) -> &'static str {
        match self {
            RewardSource::CTeC => "ctec",
            RewardSource::ReverseKl => "reverse_kl",
            RewardSource::ForwardKl => "forward_kl",
            RewardSource::Count => "count",
            RewardSource::RndLite => "rnd_lite",
            RewardSource::IcmLite => "icm_lite",
            RewardSource::EtdLite => "etd_lite",
            RewardSource::None => "none",
        }
    }

    pub fn needs_tabular_oracle(self) -> bool {
        matches!(self, RewardSource::ReverseKl | RewardSource::ForwardKl)
    }
}

/// How the contrastive reward expectation is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// One geometrically sampled future state per anchor, relabeled at
    /// update time.
    SingleSample,
    /// Discounted suffix over the whole episode, computed at episode end.
    SuffixMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub source: RewardSource,
    pub estimator: Estimator,
    /// Normalize the suffix weights to sum to one (the truncated-geometric
    /// normalizer). Off by default: the unnormalized sum trains better.
    pub mc_normalize: bool,
    /// Bonus scale.
    pub beta: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            source: RewardSource::CTeC,
            estimator: Estimator::SingleSample,
            mc_normalize: false,
            beta: 1.0,
        }
    }
}

impl RewardSpec {
    pub fn new(source: RewardSource) -> Self {
        Self {
            source,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta <= 0.0 {
            return Err(crate::error::Error::config("reward beta must be positive"));
        }
        Ok(())
    }
}

/// Mean-seeking KL reward `-D_KL[marginal || p(s_f|s,a)]`, exact over the
/// discrete state space with the standard probability floor. Always <= 0.
pub fn forward_kl_reward(
    oracle: &OccupancyOracle,
    buffer_marginal: &[f64],
    s: usize,
    a: usize,
) -> Result<f64> {
    exact_forward_kl_reward(oracle, buffer_marginal, s, a)
}

/// One reward-trace row: global step, source, value.
pub type RewardTraceRow = (u64, RewardSource, f64);

/// Writes a reward trace as CSV `step, source, reward`.
pub fn write_reward_trace_csv<W: Write>(w: &mut W, rows: &[RewardTraceRow]) -> Result<()> {
    writeln!(w, "step,source,reward")?;
    for (step, source, reward) in rows {
        writeln!(w, "{step},{},{reward}", source.label())?;
    }
    Ok(())
}
