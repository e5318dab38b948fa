//! Future-state offset sampling and contrastive batch assembly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::TrajectoryBuffer;

/// How future-state offsets are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetStrategy {
    /// Truncated geometric with success probability `1 - gamma_cl`.
    Geometric,
    /// Uniform over the same support.
    Uniform,
    /// Geometric with gamma interpolated from `schedule_start` to
    /// `schedule_end` as training progresses.
    GammaSchedule,
}

/// Configuration of the future-state sampler.
///
/// `gamma_cl` is the contrastive discount, distinct from the RL discount.
/// Offsets live on `{0, .., remaining-1}` by default; setting
/// `include_zero_offset = false` shifts the support to start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub gamma_cl: f64,
    pub strategy: OffsetStrategy,
    pub schedule_start: f64,
    pub schedule_end: f64,
    pub include_zero_offset: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            gamma_cl: 0.99,
            strategy: OffsetStrategy::Geometric,
            schedule_start: 0.9,
            schedule_end: 0.99,
            include_zero_offset: true,
        }
    }
}

impl SamplerConfig {
    pub fn geometric(gamma_cl: f64) -> Self {
        Self {
            gamma_cl,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma_cl) {
            return Err(Error::config(format!(
                "gamma_cl must be in [0, 1), got {}",
                self.gamma_cl
            )));
        }
        if !(0.0..1.0).contains(&self.schedule_start) || !(0.0..1.0).contains(&self.schedule_end) {
            return Err(Error::config("schedule gammas must be in [0, 1)"));
        }
        if self.schedule_start > self.schedule_end {
            return Err(Error::config(format!(
                "schedule start {} must not exceed end {}",
                self.schedule_start, self.schedule_end
            )));
        }
        Ok(())
    }

    /// Discount in effect at `progress` in `[0, 1]`. Linear interpolation
    /// for the schedule, constant otherwise.
    pub fn effective_gamma(&self, progress: f64) -> f64 {
        match self.strategy {
            OffsetStrategy::GammaSchedule => {
                let p = progress.clamp(0.0, 1.0);
                self.schedule_start + (self.schedule_end - self.schedule_start) * p
            }
            _ => self.gamma_cl,
        }
    }

    /// Draws an offset given `remaining` future states (the anchor state
    /// itself plus everything after it). With the zero offset included the
    /// support is `{0, .., remaining-1}`; without it, `{1, .., remaining-1}`.
    pub fn sample_offset<R: Rng + ?Sized>(
        &self,
        remaining: usize,
        progress: f64,
        rng: &mut R,
    ) -> Result<usize> {
        if remaining == 0 {
            return Err(Error::contract("sample_offset requires remaining >= 1"));
        }
        let (shift, span) = if self.include_zero_offset {
            (0, remaining)
        } else {
            if remaining < 2 {
                return Err(Error::contract(
                    "zero offset excluded but only the anchor state remains",
                ));
            }
            (1, remaining - 1)
        };
        let delta = match self.strategy {
            OffsetStrategy::Uniform => rng.gen_range(0..span),
            OffsetStrategy::Geometric | OffsetStrategy::GammaSchedule => {
                truncated_geometric(self.effective_gamma(progress), span, rng)
            }
        };
        Ok(shift + delta)
    }
}

/// Sample from `pmf(d) ∝ gamma^d` on `{0, .., span-1}` by inverting the CDF.
fn truncated_geometric<R: Rng + ?Sized>(gamma: f64, span: usize, rng: &mut R) -> usize {
    debug_assert!((0.0..1.0).contains(&gamma));
    if span == 1 || gamma == 0.0 {
        return 0;
    }
    let u: f64 = rng.gen();
    let total = 1.0 - gamma.powi(span as i32);
    // Smallest d with CDF(d) >= u, i.e. gamma^(d+1) <= 1 - u * total.
    let q = (1.0 - u * total).ln() / gamma.ln();
    let d = (q.ceil() - 1.0).max(0.0) as usize;
    d.min(span - 1)
}

/// The exact pmf the sampler draws from on a truncated support.
pub fn truncated_geometric_pmf(gamma: f64, span: usize) -> Vec<f64> {
    if gamma == 0.0 {
        let mut p = vec![0.0; span];
        p[0] = 1.0;
        return p;
    }
    let mut weights: Vec<f64> = (0..span).map(|d| gamma.powi(d as i32)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// A batch of anchors with index-aligned positive future states.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch {
    pub anchor_states: Vec<Vec<f64>>,
    pub anchor_actions: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
    /// Source trajectory id per batch element.
    pub traj_ids: Vec<u64>,
    /// Sampled offset per batch element.
    pub offsets: Vec<usize>,
    /// Set when the batch size exceeded the number of stored transitions.
    pub with_replacement: bool,
}

impl ContrastiveBatch {
    pub fn len(&self) -> usize {
        self.anchor_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor_states.is_empty()
    }
}

/// Samples a contrastive batch of `k` anchor/positive pairs.
///
/// Trajectories are chosen in groups weighted by their transition count
/// (so with `repetition_factor = 1` anchors are uniform over buffer
/// `(trajectory, timestep)` pairs), each chosen trajectory contributing
/// `repetition_factor` anchors. Groups avoid repeating a trajectory while
/// enough distinct trajectories remain.
pub fn sample_batch<R: Rng + ?Sized>(
    buffer: &TrajectoryBuffer,
    k: usize,
    repetition_factor: usize,
    config: &SamplerConfig,
    progress: f64,
    rng: &mut R,
) -> Result<ContrastiveBatch> {
    if buffer.is_empty() {
        return Err(Error::contract("cannot sample from an empty buffer"));
    }
    if k == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    config.validate()?;
    let r = repetition_factor.clamp(1, k);
    let total = buffer.total_transitions();
    let groups_needed = k.div_ceil(r);

    let mut batch = ContrastiveBatch {
        anchor_states: Vec::with_capacity(k),
        anchor_actions: Vec::with_capacity(k),
        positives: Vec::with_capacity(k),
        traj_ids: Vec::with_capacity(k),
        offsets: Vec::with_capacity(k),
        with_replacement: k > total,
    };

    let distinct = groups_needed <= buffer.len();
    let mut used: Vec<usize> = Vec::new();
    while batch.len() < k {
        let traj_idx = if distinct {
            // Rejection keeps the transition-count weighting among unused
            // trajectories; the attempt cap guards degenerate weight splits.
            let mut attempts = 0;
            loop {
                let pos = rng.gen_range(0..total);
                let idx = buffer.locate(pos);
                if !used.contains(&idx) {
                    break idx;
                }
                attempts += 1;
                if attempts > 50 * groups_needed.max(8) {
                    match (0..buffer.len()).find(|i| !used.contains(i)) {
                        Some(idx) => break idx,
                        None => break buffer.locate(pos),
                    }
                }
            }
        } else {
            buffer.locate(rng.gen_range(0..total))
        };
        used.push(traj_idx);
        let (id, traj) = buffer.get(traj_idx).expect("index in range");
        let h = traj.len();
        let take = r.min(k - batch.len());
        for _ in 0..take {
            let t = rng.gen_range(0..h);
            let remaining = h - t + 1;
            let delta = config.sample_offset(remaining, progress, rng)?;
            batch.anchor_states.push(traj.state(t).to_vec());
            batch.anchor_actions.push(traj.action(t).to_vec());
            batch.positives.push(traj.state(t + delta).to_vec());
            batch.traj_ids.push(id);
            batch.offsets.push(delta);
        }
    }
    Ok(batch)
}
