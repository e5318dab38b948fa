//! Backward-looking temporal-distance baseline.
//!
//! A state-only anchor encoder (an action-free [`ContrastiveModel`])
//! trained with the usual InfoNCE machinery gives a learned temporal
//! distance; the reward is the minimum distance from any earlier
//! in-episode state to the current one.

use crate::contrastive::ContrastiveModel;
use crate::error::{Error, Result};

/// Representations of states visited earlier in the current episode.
#[derive(Debug, Clone, Default)]
pub struct EpisodicMemory {
    reps: Vec<Vec<f64>>,
}

impl EpisodicMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reset at episode boundaries.
    pub fn clear(&mut self) {
        self.reps.clear();
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn push(&mut self, rep: Vec<f64>) {
        self.reps.push(rep);
    }

    pub fn reps(&self) -> &[Vec<f64>] {
        &self.reps
    }
}

/// Worst-case temporal distance from memory to `s_t`:
/// `min_k -C(phi'(s_k), psi(s_t))`. The current state's anchor
/// representation is appended to the memory afterwards. An empty memory
/// yields reward 0 by convention.
pub fn etd_reward(
    memory: &mut EpisodicMemory,
    model: &ContrastiveModel,
    state: &[f64],
) -> Result<f64> {
    if model.action_dim() != 0 {
        return Err(Error::config(
            "temporal-distance reward needs a state-only anchor encoder (action_dim == 0)",
        ));
    }
    let current = model.embed_future(state)?;
    let reward = if memory.is_empty() {
        0.0
    } else {
        memory
            .reps()
            .iter()
            .map(|past| -model.critic_score(past, &current))
            .fold(f64::INFINITY, f64::min)
    };
    memory.push(model.embed_anchor(state, &[])?);
    Ok(reward)
}
