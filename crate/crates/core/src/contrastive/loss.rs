//! Contrastive losses over a critic score matrix, with analytic gradients.
//!
//! The InfoNCE family (plain and symmetric) averages over the batch and
//! scales logits by the learned temperature; the remaining losses follow
//! their summed, temperature-free forms. Every loss can be augmented with
//! a LogSumExp regularizer `coef * mean_i (logsumexp_j C_ij)^2` on the raw
//! critic rows.

use serde::{Deserialize, Serialize};

use crate::contrastive::{critic_pair_grads, ContrastiveModel, MonolithicCritic};
use crate::error::{Error, Result};
use crate::nn::Gradients;
use crate::replay::ContrastiveBatch;

/// Which contrastive objective to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    InfoNce,
    SymmetricInfoNce,
    BinaryNce,
    FlatNce,
    /// Monte-Carlo forward-backward loss.
    Fb,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::InfoNce,
        LossKind::SymmetricInfoNce,
        LossKind::BinaryNce,
        LossKind::FlatNce,
        LossKind::Fb,
    ];

    /// Whether logits are scaled by `1/tau`.
    pub fn uses_temperature(self) -> bool {
        matches!(self, LossKind::InfoNce | LossKind::SymmetricInfoNce)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub loss_kind: LossKind,
    pub logsumexp_coef: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::InfoNce,
            logsumexp_coef: 0.1,
        }
    }
}

impl LossConfig {
    pub fn new(loss_kind: LossKind, logsumexp_coef: f64) -> Self {
        Self {
            loss_kind,
            logsumexp_coef,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.logsumexp_coef < 0.0 {
            return Err(Error::config("logsumexp_coef must be nonnegative"));
        }
        Ok(())
    }
}

/// Gradients of a separable-model loss.
#[derive(Debug, Clone)]
pub struct ContrastiveGrads {
    pub phi: Gradients,
    pub psi: Gradients,
    pub log_tau: f64,
}

/// Gradients of a monolithic-critic loss.
#[derive(Debug, Clone)]
pub struct MonolithicGrads {
    pub net: Gradients,
    pub log_tau: f64,
}

fn logsumexp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sum of `exp(C_ij - C_ii)` per row: the quantity FlatNCE detaches in its
/// denominator. Exposed so gradient verification can freeze it.
pub fn flatnce_denominators(c: &[Vec<f64>]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|&v| (v - row[i]).exp()).sum())
        .collect()
}

/// Loss value and gradients with respect to the critic matrix and the
/// log-temperature. The returned gradient matrix has the same shape as `c`.
pub fn loss_from_matrix(
    c: &[Vec<f64>],
    log_tau: f64,
    config: &LossConfig,
) -> Result<(f64, Vec<Vec<f64>>, f64)> {
    config.validate()?;
    let k = c.len();
    if k == 0 || c.iter().any(|row| row.len() != k) {
        return Err(Error::config("critic matrix must be square and non-empty"));
    }
    if config.loss_kind == LossKind::BinaryNce && k == 1 {
        return Err(Error::config(
            "binary NCE needs at least one negative (batch size >= 2)",
        ));
    }
    let kf = k as f64;
    let tau = log_tau.exp().clamp(super::TAU_MIN, super::TAU_MAX);
    let tau_clamped = !(super::TAU_MIN..=super::TAU_MAX).contains(&log_tau.exp());

    let mut loss = 0.0;
    let mut grad_c = vec![vec![0.0; k]; k];
    let mut grad_log_tau = 0.0;

    match config.loss_kind {
        LossKind::InfoNce | LossKind::SymmetricInfoNce => {
            let logits: Vec<Vec<f64>> = c
                .iter()
                .map(|row| row.iter().map(|v| v / tau).collect())
                .collect();
            let mut grad_logits = vec![vec![0.0; k]; k];
            // Row-wise classification of the positive.
            for i in 0..k {
                let p = softmax(&logits[i]);
                loss += (-logits[i][i] + logsumexp(&logits[i])) / kf;
                for j in 0..k {
                    grad_logits[i][j] += (p[j] - if i == j { 1.0 } else { 0.0 }) / kf;
                }
            }
            if config.loss_kind == LossKind::SymmetricInfoNce {
                // Column-wise term: classify the anchor given the future.
                for j in 0..k {
                    let col: Vec<f64> = (0..k).map(|i| logits[i][j]).collect();
                    let p = softmax(&col);
                    loss += (-logits[j][j] + logsumexp(&col)) / kf;
                    for i in 0..k {
                        grad_logits[i][j] += (p[i] - if i == j { 1.0 } else { 0.0 }) / kf;
                    }
                }
            }
            for i in 0..k {
                for j in 0..k {
                    grad_c[i][j] += grad_logits[i][j] / tau;
                    if !tau_clamped {
                        // d logits / d log_tau = -logits.
                        grad_log_tau -= grad_logits[i][j] * logits[i][j];
                    }
                }
            }
        }
        LossKind::BinaryNce => {
            for i in 0..k {
                for j in 0..k {
                    let s = sigmoid(c[i][j]);
                    if i == j {
                        loss -= s.max(1e-300).ln();
                        grad_c[i][j] += s - 1.0;
                    } else {
                        loss -= (1.0 - s).max(1e-300).ln();
                        grad_c[i][j] += s;
                    }
                }
            }
        }
        LossKind::FlatNce => {
            // log(u / detach(u)) is identically zero in value; its gradient
            // is grad(u) / u evaluated at the current parameters.
            let denoms = flatnce_denominators(c);
            for i in 0..k {
                let u = denoms[i];
                for j in 0..k {
                    if j != i {
                        let e = (c[i][j] - c[i][i]).exp();
                        grad_c[i][j] += e / u;
                        grad_c[i][i] -= e / u;
                    }
                }
            }
        }
        LossKind::Fb => {
            for i in 0..k {
                loss -= c[i][i].exp();
                grad_c[i][i] -= c[i][i].exp();
            }
            if k > 1 {
                let scale = 1.0 / (2.0 * (kf - 1.0));
                for i in 0..k {
                    for j in 0..k {
                        if j != i {
                            let e2 = (2.0 * c[i][j]).exp();
                            loss += scale * e2;
                            grad_c[i][j] += 2.0 * scale * e2;
                        }
                    }
                }
            }
        }
    }

    if config.logsumexp_coef > 0.0 {
        for (i, row) in c.iter().enumerate() {
            let lse = logsumexp(row);
            loss += config.logsumexp_coef * lse * lse / kf;
            let p = softmax(row);
            for j in 0..k {
                grad_c[i][j] += config.logsumexp_coef * 2.0 * lse * p[j] / kf;
            }
        }
    }

    Ok((loss, grad_c, grad_log_tau))
}

/// Loss value only, optionally with FlatNCE denominators frozen to the
/// supplied values (stop-gradient semantics for finite-difference checks).
pub fn loss_value_from_matrix(
    c: &[Vec<f64>],
    log_tau: f64,
    config: &LossConfig,
    frozen_flatnce: Option<&[f64]>,
) -> Result<f64> {
    if config.loss_kind == LossKind::FlatNce {
        config.validate()?;
        let k = c.len();
        let denoms = flatnce_denominators(c);
        let mut loss = 0.0;
        for i in 0..k {
            let frozen = frozen_flatnce.map(|f| f[i]).unwrap_or(denoms[i]);
            loss += denoms[i].ln() - frozen.ln();
        }
        if config.logsumexp_coef > 0.0 {
            for row in c {
                let lse = logsumexp(row);
                loss += config.logsumexp_coef * lse * lse / k as f64;
            }
        }
        Ok(loss)
    } else {
        loss_from_matrix(c, log_tau, config).map(|(l, _, _)| l)
    }
}

/// Full loss over a sampled batch for the separable model: embeds anchors
/// and positives, builds the critic matrix with in-batch negatives, and
/// backpropagates into both encoders and the log-temperature.
pub fn loss_and_grads(
    model: &ContrastiveModel,
    batch: &ContrastiveBatch,
    config: &LossConfig,
) -> Result<(f64, ContrastiveGrads)> {
    let k = batch.len();
    if k == 0 {
        return Err(Error::config("empty contrastive batch"));
    }
    let mut anchor_caches = Vec::with_capacity(k);
    let mut future_caches = Vec::with_capacity(k);
    for i in 0..k {
        anchor_caches.push(model.embed_anchor_cached(&batch.anchor_states[i], &batch.anchor_actions[i])?);
        future_caches.push(model.embed_future_cached(&batch.positives[i])?);
    }
    let anchors: Vec<Vec<f64>> = anchor_caches.iter().map(|e| e.rep.clone()).collect();
    let futures: Vec<Vec<f64>> = future_caches.iter().map(|e| e.rep.clone()).collect();
    let c = model.critic_matrix(&anchors, &futures);
    let (loss, grad_c, mut grad_log_tau) = loss_from_matrix(&c, model.log_tau(), config)?;
    if model.tau_is_clamped() {
        grad_log_tau = 0.0;
    }

    let d = model.rep_dim();
    let mut grad_anchor_reps = vec![vec![0.0; d]; k];
    let mut grad_future_reps = vec![vec![0.0; d]; k];
    for i in 0..k {
        for j in 0..k {
            let g = grad_c[i][j];
            if g == 0.0 {
                continue;
            }
            let (du, dv) = critic_pair_grads(model.critic_kind(), model.negate_dot(), &anchors[i], &futures[j]);
            for t in 0..d {
                grad_anchor_reps[i][t] += g * du[t];
                grad_future_reps[j][t] += g * dv[t];
            }
        }
    }

    let mut phi_grads = Gradients::zeros_like(model.phi());
    let mut psi_grads = Gradients::zeros_like(model.psi());
    for i in 0..k {
        let g_out = model.normalize_backward(&anchor_caches[i], &grad_anchor_reps[i]);
        model
            .phi()
            .backward_accumulate(&anchor_caches[i].cache, &g_out, &mut phi_grads)?;
        let g_out = model.normalize_backward(&future_caches[i], &grad_future_reps[i]);
        model
            .psi()
            .backward_accumulate(&future_caches[i].cache, &g_out, &mut psi_grads)?;
    }
    if !phi_grads.is_finite() || !psi_grads.is_finite() || !grad_log_tau.is_finite() {
        return Err(Error::numerical("non-finite contrastive gradients"));
    }
    Ok((
        loss,
        ContrastiveGrads {
            phi: phi_grads,
            psi: psi_grads,
            log_tau: grad_log_tau,
        },
    ))
}

/// Same objective with the monolithic critic: entry `(i, j)` of the score
/// matrix is one forward pass on `(s_i, a_i, s_f_j)`. Scores are computed
/// first and forwards re-run during backprop, keeping memory flat in `K^2`.
pub fn monolithic_loss_and_grads(
    critic: &MonolithicCritic,
    batch: &ContrastiveBatch,
    config: &LossConfig,
) -> Result<(f64, MonolithicGrads)> {
    let k = batch.len();
    if k == 0 {
        return Err(Error::config("empty contrastive batch"));
    }
    let mut c = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            c[i][j] = critic.score(
                &batch.anchor_states[i],
                &batch.anchor_actions[i],
                &batch.positives[j],
            )?;
        }
    }
    let (loss, grad_c, grad_log_tau) = loss_from_matrix(&c, critic.log_tau(), config)?;
    let mut net_grads = Gradients::zeros_like(critic.net());
    for i in 0..k {
        for j in 0..k {
            let g = grad_c[i][j];
            if g == 0.0 {
                continue;
            }
            let input = critic.concat(
                &batch.anchor_states[i],
                &batch.anchor_actions[i],
                &batch.positives[j],
            )?;
            let (_, cache) = critic.net().forward(&input)?;
            critic.net().backward_accumulate(&cache, &[g], &mut net_grads)?;
        }
    }
    if !net_grads.is_finite() {
        return Err(Error::numerical("non-finite monolithic gradients"));
    }
    Ok((
        loss,
        MonolithicGrads {
            net: net_grads,
            log_tau: grad_log_tau,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrastive::CriticKind;
    use crate::nn::Activation;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(kind: LossKind) -> LossConfig {
        LossConfig::new(kind, 0.0)
    }

    #[test]
    fn infonce_single_logit_is_zero_loss() {
        let (loss, _, _) = loss_from_matrix(&[vec![3.7]], 0.0, &cfg(LossKind::InfoNce)).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn infonce_matches_direct_evaluation() {
        // Two identical rows, each -log(e^2 / (e^2 + 1)).
        let c = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let (loss, _, _) = loss_from_matrix(&c, 0.0, &cfg(LossKind::InfoNce)).unwrap();
        let expected = -(2f64.exp() / (2f64.exp() + 1.0)).ln();
        assert!((loss - expected).abs() < 1e-12, "loss {loss} vs {expected}");
        assert!((loss - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn fb_loss_matches_direct_evaluation() {
        let c = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let (loss, _, _) = loss_from_matrix(&c, 0.0, &cfg(LossKind::Fb)).unwrap();
        assert!((loss - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_infonce_doubles_on_symmetric_matrix() {
        let c = vec![vec![1.2, -0.3, 0.4], vec![-0.3, 0.9, 0.1], vec![0.4, 0.1, 2.0]];
        let (plain, _, _) = loss_from_matrix(&c, 0.3, &cfg(LossKind::InfoNce)).unwrap();
        let (sym, _, _) = loss_from_matrix(&c, 0.3, &cfg(LossKind::SymmetricInfoNce)).unwrap();
        assert!((sym - 2.0 * plain).abs() < 1e-12);
    }

    #[test]
    fn binary_nce_rejects_single_element_batch() {
        let err = loss_from_matrix(&[vec![1.0]], 0.0, &cfg(LossKind::BinaryNce));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn flatnce_value_is_zero_with_live_denominator() {
        let c = vec![vec![0.5, -1.0], vec![0.3, 0.8]];
        let (loss, grad, _) = loss_from_matrix(&c, 0.0, &cfg(LossKind::FlatNce)).unwrap();
        assert_eq!(loss, 0.0);
        // Gradient pushes the positive up and negatives down.
        assert!(grad[0][0] < 0.0);
        assert!(grad[0][1] > 0.0);
    }

    #[test]
    fn logsumexp_regularizer_matches_direct_formula() {
        let c = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let with = loss_from_matrix(&c, 0.0, &LossConfig::new(LossKind::InfoNce, 0.5))
            .unwrap()
            .0;
        let without = loss_from_matrix(&c, 0.0, &cfg(LossKind::InfoNce)).unwrap().0;
        let lse = 1.0 + 2f64.ln();
        assert!((with - without - 0.5 * lse * lse).abs() < 1e-12);
    }

    /// Finite-difference check of grad_c and grad_log_tau at the matrix level.
    fn fd_matrix_check(kind: LossKind, coef: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 4;
        let c: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let log_tau = 0.2;
        let config = LossConfig::new(kind, coef);
        let (_, grad_c, grad_lt) = loss_from_matrix(&c, log_tau, &config).unwrap();
        let frozen = flatnce_denominators(&c);
        let frozen_opt = if kind == LossKind::FlatNce {
            Some(frozen.as_slice())
        } else {
            None
        };
        let h = 1e-6;
        for i in 0..k {
            for j in 0..k {
                let mut cp = c.clone();
                cp[i][j] += h;
                let plus = loss_value_from_matrix(&cp, log_tau, &config, frozen_opt).unwrap();
                cp[i][j] -= 2.0 * h;
                let minus = loss_value_from_matrix(&cp, log_tau, &config, frozen_opt).unwrap();
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grad_c[i][j];
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-4,
                    "{kind:?} d/dC[{i}][{j}]: {analytic} vs {numeric}"
                );
            }
        }
        let plus = loss_value_from_matrix(&c, log_tau + h, &config, frozen_opt).unwrap();
        let minus = loss_value_from_matrix(&c, log_tau - h, &config, frozen_opt).unwrap();
        let numeric = (plus - minus) / (2.0 * h);
        let denom = grad_lt.abs().max(numeric.abs()).max(1e-8);
        assert!(
            (grad_lt - numeric).abs() / denom < 1e-4,
            "{kind:?} d/dlog_tau: {grad_lt} vs {numeric}"
        );
    }

    #[test]
    fn matrix_gradients_match_finite_differences() {
        for (i, kind) in LossKind::ALL.into_iter().enumerate() {
            fd_matrix_check(kind, 0.0, 100 + i as u64);
            fd_matrix_check(kind, 0.1, 200 + i as u64);
        }
    }

    fn toy_batch(k: usize, state_dim: usize, action_dim: usize, seed: u64) -> ContrastiveBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_vec = |d: usize| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        ContrastiveBatch {
            anchor_states: (0..k).map(|_| rand_vec(state_dim)).collect(),
            anchor_actions: (0..k).map(|_| rand_vec(action_dim)).collect(),
            positives: (0..k).map(|_| rand_vec(state_dim)).collect(),
            traj_ids: (0..k as u64).collect(),
            offsets: vec![0; k],
            with_replacement: false,
        }
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        // Spot check through the encoders for one loss/critic combination;
        // the acceptance suite sweeps the full grid.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = ContrastiveModel::new(
            3,
            2,
            4,
            &[6],
            Activation::Tanh,
            CriticKind::L2,
            true,
            &mut rng,
        )
        .unwrap();
        model.set_log_tau(0.1);
        let batch = toy_batch(3, 3, 2, 12);
        let config = LossConfig::new(LossKind::InfoNce, 0.1);
        let (_, grads) = loss_and_grads(&model, &batch, &config).unwrap();
        let flat = grads.phi.flat();
        let h = 1e-5;
        let n = model.phi().param_count();
        for k in 0..40 {
            let idx = (k * 613) % n;
            let mut m = model.clone();
            let mut params = m.phi().params_flat();
            let orig = params[idx];
            params[idx] = orig + h;
            m.phi_mut().set_params_flat(&params).unwrap();
            let plus = loss_and_grads(&m, &batch, &config).unwrap().0;
            params[idx] = orig - h;
            m.phi_mut().set_params_flat(&params).unwrap();
            let minus = loss_and_grads(&m, &batch, &config).unwrap().0;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = flat[idx];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "phi param {idx}: {analytic} vs {numeric}"
            );
        }
    }

    #[test]
    fn monolithic_grads_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let critic = MonolithicCritic::new(3, 2, &[6], Activation::Tanh, &mut rng).unwrap();
        let batch = toy_batch(3, 3, 2, 14);
        let config = LossConfig::new(LossKind::InfoNce, 0.1);
        let (_, grads) = monolithic_loss_and_grads(&critic, &batch, &config).unwrap();
        let flat = grads.net.flat();
        let h = 1e-5;
        let n = critic.net().param_count();
        for k in 0..40 {
            let idx = (k * 331) % n;
            let mut c = critic.clone();
            let mut params = c.net().params_flat();
            let orig = params[idx];
            params[idx] = orig + h;
            c.net_mut().set_params_flat(&params).unwrap();
            let plus = monolithic_loss_and_grads(&c, &batch, &config).unwrap().0;
            params[idx] = orig - h;
            c.net_mut().set_params_flat(&params).unwrap();
            let minus = monolithic_loss_and_grads(&c, &batch, &config).unwrap().0;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = flat[idx];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "net param {idx}: {analytic} vs {numeric}"
            );
        }
    }
}
