//! Coverage counting and representation-variance monitoring.

use std::collections::HashSet;

use crate::contrastive::ContrastiveModel;
use crate::env::StateKey;
use crate::error::{Error, Result};

/// How continuous states map to coverage keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discretization {
    /// Keys are already discrete indices.
    Identity,
    /// Positions are bucketed into axis-aligned cells of this size.
    Grid { cell: f64 },
}

/// Counts unique discretized states over a stream of visits.
#[derive(Debug, Clone)]
pub struct CoverageTracker {
    discretization: Discretization,
    visited: HashSet<Vec<i64>>,
    curve: Vec<usize>,
}

impl CoverageTracker {
    pub fn new(discretization: Discretization) -> Self {
        Self {
            discretization,
            visited: HashSet::new(),
            curve: Vec::new(),
        }
    }

    fn key(&self, state: &StateKey) -> Vec<i64> {
        match (state, self.discretization) {
            (StateKey::Index(i), _) => vec![*i as i64],
            (StateKey::Position(p), Discretization::Grid { cell }) => {
                p.iter().map(|&x| (x / cell).floor() as i64).collect()
            }
            (StateKey::Position(p), Discretization::Identity) => {
                // Without a cell size, fall back to bit-exact positions.
                p.iter().map(|&x| x.to_bits() as i64).collect()
            }
        }
    }

    pub fn observe(&mut self, state: &StateKey) {
        let key = self.key(state);
        self.visited.insert(key);
    }

    /// Cumulative unique count so far.
    pub fn count(&self) -> usize {
        self.visited.len()
    }

    /// Appends the current count to the curve (one point per iteration).
    pub fn mark(&mut self) {
        self.curve.push(self.count());
    }

    pub fn curve(&self) -> &[usize] {
        &self.curve
    }
}

/// Mean per-dimension variance of future-state representations over a
/// probe set: the collapse monitor. Population variance (divide by N).
pub fn representation_variance(model: &ContrastiveModel, probes: &[Vec<f64>]) -> Result<f64> {
    if probes.len() < 2 {
        return Err(Error::config("representation variance needs >= 2 probes"));
    }
    let d = model.rep_dim();
    let n = probes.len() as f64;
    let mut mean = vec![0.0; d];
    let mut reps = Vec::with_capacity(probes.len());
    for p in probes {
        let rep = model.embed_future(p)?;
        for (m, v) in mean.iter_mut().zip(rep.iter()) {
            *m += v / n;
        }
        reps.push(rep);
    }
    let mut var = vec![0.0; d];
    for rep in &reps {
        for k in 0..d {
            let diff = rep[k] - mean[k];
            var[k] += diff * diff / n;
        }
    }
    Ok(var.iter().sum::<f64>() / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrastive::CriticKind;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn repeated_state_counts_once() {
        let mut tracker = CoverageTracker::new(Discretization::Identity);
        for _ in 0..10 {
            tracker.observe(&StateKey::Index(3));
        }
        assert_eq!(tracker.count(), 1);
    }

    #[test]
    fn distinct_states_count_individually() {
        let mut tracker = CoverageTracker::new(Discretization::Identity);
        for i in 0..7 {
            tracker.observe(&StateKey::Index(i));
        }
        assert_eq!(tracker.count(), 7);
    }

    #[test]
    fn grid_discretization_merges_nearby_positions() {
        let mut tracker = CoverageTracker::new(Discretization::Grid { cell: 0.5 });
        tracker.observe(&StateKey::Position(vec![0.1, 0.1]));
        tracker.observe(&StateKey::Position(vec![0.3, 0.4]));
        assert_eq!(tracker.count(), 1);
        tracker.observe(&StateKey::Position(vec![0.7, 0.1]));
        assert_eq!(tracker.count(), 2);
    }

    #[test]
    fn curve_is_nondecreasing() {
        let mut tracker = CoverageTracker::new(Discretization::Identity);
        for i in [0usize, 0, 1, 1, 2, 0, 3] {
            tracker.observe(&StateKey::Index(i));
            tracker.mark();
        }
        let curve = tracker.curve();
        assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*curve.last().unwrap(), 4);
    }

    #[test]
    fn identical_probes_have_zero_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = ContrastiveModel::new(
            3,
            1,
            4,
            &[6],
            Activation::Tanh,
            CriticKind::L2,
            true,
            &mut rng,
        )
        .unwrap();
        let probes = vec![vec![0.5, -0.5, 1.0]; 5];
        let v = representation_variance(&model, &probes).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn variance_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = ContrastiveModel::new(
            3,
            1,
            4,
            &[6],
            Activation::Tanh,
            CriticKind::L2,
            true,
            &mut rng,
        )
        .unwrap();
        use rand::Rng;
        let probes: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let got = representation_variance(&model, &probes).unwrap();
        // Independent two-pass computation.
        let reps: Vec<Vec<f64>> = probes.iter().map(|p| model.embed_future(p).unwrap()).collect();
        let d = 4;
        let mut total = 0.0;
        for k in 0..d {
            let vals: Vec<f64> = reps.iter().map(|r| r[k]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            total += var;
        }
        let want = total / d as f64;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn fewer_than_two_probes_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = ContrastiveModel::new(
            2,
            0,
            2,
            &[],
            Activation::Identity,
            CriticKind::L2,
            false,
            &mut rng,
        )
        .unwrap();
        assert!(representation_variance(&model, &[vec![1.0, 0.0]]).is_err());
    }
}
