//! Count, random-network-distillation, and curiosity baselines.

use std::collections::HashMap;

use rand::Rng;

use crate::env::StateKey;
use crate::error::Result;
use crate::nn::{Activation, AdamState, DenseNet, Gradients};

/// Visit counts over discretized states.
#[derive(Debug, Clone, Default)]
pub struct CountTable {
    counts: HashMap<Vec<i64>, u64>,
    /// Cell size for continuous positions; indices are used as-is.
    cell: Option<f64>,
    /// Score after incrementing instead of before.
    pub increment_before_score: bool,
}

impl CountTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_cell(cell: f64) -> Self {
        Self {
            cell: Some(cell),
            ..Self::default()
        }
    }

    fn key(&self, state: &StateKey) -> Vec<i64> {
        match state {
            StateKey::Index(i) => vec![*i as i64],
            StateKey::Position(p) => {
                let cell = self.cell.unwrap_or(1.0);
                p.iter().map(|&x| (x / cell).floor() as i64).collect()
            }
        }
    }

    pub fn count(&self, state: &StateKey) -> u64 {
        self.counts.get(&self.key(state)).copied().unwrap_or(0)
    }

    /// `beta / sqrt(n(s) + 1)`, recording the visit. The config flag picks
    /// whether the visit is counted before or after scoring.
    pub fn count_bonus(&mut self, state: &StateKey, beta: f64) -> f64 {
        let key = self.key(state);
        let entry = self.counts.entry(key).or_insert(0);
        if self.increment_before_score {
            *entry += 1;
            beta / ((*entry + 1) as f64).sqrt()
        } else {
            let bonus = beta / ((*entry + 1) as f64).sqrt();
            *entry += 1;
            bonus
        }
    }
}

/// Random-network-distillation bonus: squared error of a trained predictor
/// against a frozen random target.
#[derive(Debug, Clone)]
pub struct RndModule {
    predictor: DenseNet,
    target: DenseNet,
    optimizer: AdamState,
}

impl RndModule {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        embed_dim: usize,
        hidden: &[usize],
        lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(embed_dim);
        let target = DenseNet::new(&dims, Activation::Relu, rng)?;
        let predictor = DenseNet::new(&dims, Activation::Relu, rng)?;
        let optimizer = AdamState::new(predictor.param_count(), lr);
        Ok(Self {
            predictor,
            target,
            optimizer,
        })
    }

    pub fn predictor(&self) -> &DenseNet {
        &self.predictor
    }

    pub fn predictor_mut(&mut self) -> &mut DenseNet {
        &mut self.predictor
    }

    pub fn target(&self) -> &DenseNet {
        &self.target
    }

    /// `|predictor(s) - target(s)|^2`.
    pub fn bonus(&self, state: &[f64]) -> Result<f64> {
        let p = self.predictor.infer(state)?;
        let t = self.target.infer(state)?;
        Ok(p.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    /// One regression step of the predictor toward the frozen target on a
    /// batch of visited states. Returns the mean squared error.
    pub fn train_step(&mut self, states: &[Vec<f64>]) -> Result<f64> {
        if states.is_empty() {
            return Ok(0.0);
        }
        let mut grads = Gradients::zeros_like(&self.predictor);
        let mut total = 0.0;
        let scale = 1.0 / states.len() as f64;
        for s in states {
            let (out, cache) = self.predictor.forward(s)?;
            let target = self.target.infer(s)?;
            let diff: Vec<f64> = out
                .iter()
                .zip(target.iter())
                .map(|(a, b)| 2.0 * (a - b) * scale)
                .collect();
            total += out
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            self.predictor.backward_accumulate(&cache, &diff, &mut grads)?;
        }
        self.predictor.adam_step(&mut self.optimizer, &grads)?;
        Ok(total * scale)
    }
}

/// Curiosity baseline: forward-model prediction error in a feature space
/// trained by inverse dynamics. The forward loss does not shape the
/// features, so observation noise the inverse task ignores is never
/// stripped from them; that retention is what the noisy-TV comparison
/// measures.
#[derive(Debug, Clone)]
pub struct IcmModule {
    feature: DenseNet,
    forward_model: DenseNet,
    inverse_model: DenseNet,
    opt_feature: AdamState,
    opt_forward: AdamState,
    opt_inverse: AdamState,
    n_actions: usize,
    feat_dim: usize,
    /// Weight on the forward loss in the joint objective.
    pub forward_weight: f64,
}

impl IcmModule {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        n_actions: usize,
        feat_dim: usize,
        hidden: &[usize],
        lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut feat_dims = vec![obs_dim];
        feat_dims.extend_from_slice(hidden);
        feat_dims.push(feat_dim);
        let feature = DenseNet::new(&feat_dims, Activation::Relu, rng)?;
        let mut fwd_dims = vec![feat_dim + n_actions];
        fwd_dims.extend_from_slice(hidden);
        fwd_dims.push(feat_dim);
        let forward_model = DenseNet::new(&fwd_dims, Activation::Relu, rng)?;
        let mut inv_dims = vec![2 * feat_dim];
        inv_dims.extend_from_slice(hidden);
        inv_dims.push(n_actions);
        let inverse_model = DenseNet::new(&inv_dims, Activation::Relu, rng)?;
        Ok(Self {
            opt_feature: AdamState::new(feature.param_count(), lr),
            opt_forward: AdamState::new(forward_model.param_count(), lr),
            opt_inverse: AdamState::new(inverse_model.param_count(), lr),
            feature,
            forward_model,
            inverse_model,
            n_actions,
            feat_dim,
            forward_weight: 0.2,
        })
    }

    pub fn feature(&self) -> &DenseNet {
        &self.feature
    }

    pub fn feature_mut(&mut self) -> &mut DenseNet {
        &mut self.feature
    }

    fn forward_input(&self, feat: &[f64], action_onehot: &[f64]) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.feat_dim + self.n_actions);
        input.extend_from_slice(feat);
        input.extend_from_slice(action_onehot);
        input
    }

    /// Forward prediction error `|f(feat(s), a) - feat(s')|^2`.
    pub fn bonus(&self, state: &[f64], action_onehot: &[f64], next_state: &[f64]) -> Result<f64> {
        let feat_s = self.feature.infer(state)?;
        let feat_next = self.feature.infer(next_state)?;
        let pred = self.forward_model.infer(&self.forward_input(&feat_s, action_onehot))?;
        Ok(pred
            .iter()
            .zip(feat_next.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Joint update on a batch of `(s, a_index, s')` transitions:
    /// inverse cross-entropy trains the features and the inverse head
    /// (weight `1 - w`); forward MSE trains the forward model only
    /// (weight `w`). Returns `(inverse_loss, forward_loss)`.
    pub fn train_step(&mut self, batch: &[(Vec<f64>, usize, Vec<f64>)]) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Ok((0.0, 0.0));
        }
        let scale = 1.0 / batch.len() as f64;
        let w = self.forward_weight;
        let mut feat_grads = Gradients::zeros_like(&self.feature);
        let mut inv_grads = Gradients::zeros_like(&self.inverse_model);
        let mut fwd_grads = Gradients::zeros_like(&self.forward_model);
        let mut inv_loss = 0.0;
        let mut fwd_loss = 0.0;
        for (s, a_idx, s_next) in batch {
            let (feat_s, cache_s) = self.feature.forward(s)?;
            let (feat_next, cache_next) = self.feature.forward(s_next)?;

            // Inverse dynamics: predict the action from both features.
            let mut inv_input = Vec::with_capacity(2 * self.feat_dim);
            inv_input.extend_from_slice(&feat_s);
            inv_input.extend_from_slice(&feat_next);
            let (logits, inv_cache) = self.inverse_model.forward(&inv_input)?;
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
            inv_loss -= (probs[*a_idx].max(1e-300)).ln();
            let dlogits: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(j, p)| (1.0 - w) * scale * (p - if j == *a_idx { 1.0 } else { 0.0 }))
                .collect();
            let input_grad = self
                .inverse_model
                .backward_accumulate(&inv_cache, &dlogits, &mut inv_grads)?;
            self.feature
                .backward_accumulate(&cache_s, &input_grad[..self.feat_dim], &mut feat_grads)?;
            self.feature
                .backward_accumulate(&cache_next, &input_grad[self.feat_dim..], &mut feat_grads)?;

            // Forward model regresses onto detached next features.
            let a_onehot = crate::env::one_hot(self.n_actions, *a_idx);
            let (pred, fwd_cache) = self
                .forward_model
                .forward(&self.forward_input(&feat_s, &a_onehot))?;
            let diff: Vec<f64> = pred
                .iter()
                .zip(feat_next.iter())
                .map(|(a, b)| 2.0 * w * scale * (a - b))
                .collect();
            fwd_loss += pred
                .iter()
                .zip(feat_next.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            self.forward_model
                .backward_accumulate(&fwd_cache, &diff, &mut fwd_grads)?;
        }
        self.feature.adam_step(&mut self.opt_feature, &feat_grads)?;
        self.inverse_model.adam_step(&mut self.opt_inverse, &inv_grads)?;
        self.forward_model.adam_step(&mut self.opt_forward, &fwd_grads)?;
        Ok((inv_loss * scale, fwd_loss * scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn count_bonus_first_visit_is_beta() {
        let mut table = CountTable::new();
        let s = StateKey::Index(7);
        assert_eq!(table.count_bonus(&s, 1.0), 1.0);
        assert_eq!(table.count(&s), 1);
    }

    #[test]
    fn count_bonus_at_three_visits_is_half() {
        let mut table = CountTable::new();
        let s = StateKey::Index(0);
        for _ in 0..3 {
            table.count_bonus(&s, 1.0);
        }
        // n = 3 now, so the next score-before-increment bonus is 1/2.
        assert_eq!(table.count_bonus(&s, 1.0), 0.5);
    }

    #[test]
    fn count_bonus_is_monotone_nonincreasing() {
        let mut table = CountTable::new();
        let s = StateKey::Index(1);
        let mut prev = f64::INFINITY;
        for _ in 0..10_000 {
            let b = table.count_bonus(&s, 1.0);
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn increment_before_score_shifts_schedule() {
        let mut table = CountTable::new();
        table.increment_before_score = true;
        let s = StateKey::Index(2);
        let b = table.count_bonus(&s, 1.0);
        assert!((b - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rnd_bonus_zero_for_copied_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rnd = RndModule::new(3, 4, &[8], 1e-3, &mut rng).unwrap();
        let params = rnd.target().params_flat();
        rnd.predictor_mut().set_params_flat(&params).unwrap();
        assert_eq!(rnd.bonus(&[0.1, 0.2, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn rnd_bonus_for_zero_predictor_is_target_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rnd = RndModule::new(3, 4, &[8], 1e-3, &mut rng).unwrap();
        let n = rnd.predictor().param_count();
        rnd.predictor_mut().set_params_flat(&vec![0.0; n]).unwrap();
        let s = [0.5, -0.5, 1.0];
        let t = rnd.target().infer(&s).unwrap();
        let want: f64 = t.iter().map(|v| v * v).sum();
        assert!((rnd.bonus(&s).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn rnd_training_reduces_bonus_on_visited_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rnd = RndModule::new(3, 4, &[16], 3e-3, &mut rng).unwrap();
        let s = vec![0.4, -0.7, 0.2];
        let before = rnd.bonus(&s).unwrap();
        for _ in 0..1000 {
            rnd.train_step(std::slice::from_ref(&s)).unwrap();
        }
        let after = rnd.bonus(&s).unwrap();
        assert!(after < before, "bonus {after} not below {before}");
        assert!(after < 0.1 * before);
    }

    #[test]
    fn icm_bonus_matches_independent_forward_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let icm = IcmModule::new(3, 2, 4, &[8], 1e-3, &mut rng).unwrap();
        let s = [0.2, 0.4, -0.6];
        let s_next = [0.3, 0.1, 0.0];
        let a = crate::env::one_hot(2, 1);
        let got = icm.bonus(&s, &a, &s_next).unwrap();
        let fs = icm.feature.infer(&s).unwrap();
        let fnx = icm.feature.infer(&s_next).unwrap();
        let mut input = fs.clone();
        input.extend_from_slice(&a);
        let pred = icm.forward_model.infer(&input).unwrap();
        let want: f64 = pred
            .iter()
            .zip(fnx.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn icm_converges_on_deterministic_constant_transition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut icm = IcmModule::new(2, 2, 3, &[8], 3e-3, &mut rng).unwrap();
        let batch = vec![(vec![1.0, 0.0], 0usize, vec![0.0, 1.0])];
        let a = crate::env::one_hot(2, 0);
        let before = icm.bonus(&batch[0].0, &a, &batch[0].2).unwrap();
        for _ in 0..2000 {
            icm.train_step(&batch).unwrap();
        }
        let after = icm.bonus(&batch[0].0, &a, &batch[0].2).unwrap();
        assert!(after < 0.05 * before.max(1e-6), "bonus {after} vs {before}");
    }
}
