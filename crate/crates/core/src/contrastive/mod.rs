//! Temporal contrastive model: paired encoders over `(state, action)` and
//! future states, critic similarity functions, and a learnable temperature.

mod loss;

pub use loss::{
    flatnce_denominators, loss_and_grads, loss_from_matrix, loss_value_from_matrix,
    monolithic_loss_and_grads, ContrastiveGrads, LossConfig, LossKind, MonolithicGrads,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, DenseNet, ForwardCache};

/// Critic similarity between anchor and future representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticKind {
    /// Negative l1 distance.
    L1,
    /// Negative l2 distance.
    L2,
    /// Negative squared l2 distance.
    L2NoSqrt,
    /// Inner product; sign controlled by `negate_dot` on the model.
    Dot,
}

impl CriticKind {
    /// Distance critics admit the nonnegative-reward reading `r = -C`.
    pub fn is_distance(self) -> bool {
        !matches!(self, CriticKind::Dot)
    }
}

/// Encoder pair `phi(s, a)` / `psi(s_f)` with learned log-temperature.
///
/// `action_dim` may be zero, which turns `phi` into a state-only anchor
/// encoder (used by the backward-looking temporal-distance baseline).
#[derive(Debug, Clone)]
pub struct ContrastiveModel {
    phi: DenseNet,
    psi: DenseNet,
    log_tau: f64,
    critic_kind: CriticKind,
    normalize_reps: bool,
    /// The printed form of the dot critic is `-phi . psi`; flip to get the
    /// conventional `+phi . psi`.
    negate_dot: bool,
    state_dim: usize,
    action_dim: usize,
    rep_dim: usize,
}

/// Temperature clamp bounds.
pub const TAU_MIN: f64 = 1e-3;
pub const TAU_MAX: f64 = 1e3;

/// Cache of one encoder evaluation, sufficient to backpropagate through
/// the optional unit-norm projection.
pub(crate) struct EmbedCache {
    pub cache: ForwardCache,
    pub rep: Vec<f64>,
    /// Euclidean norm of the pre-normalization output (1.0 when
    /// normalization is off).
    pub norm: f64,
}

impl ContrastiveModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        rep_dim: usize,
        hidden: &[usize],
        activation: Activation,
        critic_kind: CriticKind,
        normalize_reps: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if state_dim == 0 || rep_dim == 0 {
            return Err(Error::config("state_dim and rep_dim must be positive"));
        }
        let mut phi_dims = vec![state_dim + action_dim];
        phi_dims.extend_from_slice(hidden);
        phi_dims.push(rep_dim);
        let mut psi_dims = vec![state_dim];
        psi_dims.extend_from_slice(hidden);
        psi_dims.push(rep_dim);
        Ok(Self {
            phi: DenseNet::new(&phi_dims, activation, rng)?,
            psi: DenseNet::new(&psi_dims, activation, rng)?,
            log_tau: 0.0,
            critic_kind,
            normalize_reps,
            negate_dot: true,
            state_dim,
            action_dim,
            rep_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn rep_dim(&self) -> usize {
        self.rep_dim
    }

    pub fn critic_kind(&self) -> CriticKind {
        self.critic_kind
    }

    pub fn normalize_reps(&self) -> bool {
        self.normalize_reps
    }

    pub fn negate_dot(&self) -> bool {
        self.negate_dot
    }

    pub fn set_negate_dot(&mut self, negate: bool) {
        self.negate_dot = negate;
    }

    pub fn log_tau(&self) -> f64 {
        self.log_tau
    }

    pub fn set_log_tau(&mut self, log_tau: f64) {
        self.log_tau = log_tau;
    }

    /// Temperature clamped to `[1e-3, 1e3]`.
    pub fn tau(&self) -> f64 {
        self.log_tau.exp().clamp(TAU_MIN, TAU_MAX)
    }

    pub(crate) fn tau_is_clamped(&self) -> bool {
        let raw = self.log_tau.exp();
        !(TAU_MIN..=TAU_MAX).contains(&raw)
    }

    pub fn phi(&self) -> &DenseNet {
        &self.phi
    }

    pub fn psi(&self) -> &DenseNet {
        &self.psi
    }

    pub fn phi_mut(&mut self) -> &mut DenseNet {
        &mut self.phi
    }

    pub fn psi_mut(&mut self) -> &mut DenseNet {
        &mut self.psi
    }

    fn concat_anchor(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(Error::config(format!(
                "anchor dims ({}, {}) do not match encoder dims ({}, {})",
                state.len(),
                action.len(),
                self.state_dim,
                self.action_dim
            )));
        }
        let mut input = Vec::with_capacity(self.state_dim + self.action_dim);
        input.extend_from_slice(state);
        input.extend_from_slice(action);
        Ok(input)
    }

    fn finish_embedding(&self, net_out: Vec<f64>, cache: ForwardCache) -> Result<EmbedCache> {
        if net_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite encoder activation"));
        }
        if !self.normalize_reps {
            return Ok(EmbedCache {
                cache,
                rep: net_out,
                norm: 1.0,
            });
        }
        let norm = net_out.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let rep = net_out.iter().map(|v| v / norm).collect();
        Ok(EmbedCache { cache, rep, norm })
    }

    pub(crate) fn embed_anchor_cached(&self, state: &[f64], action: &[f64]) -> Result<EmbedCache> {
        let input = self.concat_anchor(state, action)?;
        let (out, cache) = self.phi.forward(&input)?;
        self.finish_embedding(out, cache)
    }

    pub(crate) fn embed_future_cached(&self, state: &[f64]) -> Result<EmbedCache> {
        let (out, cache) = self.psi.forward(state)?;
        self.finish_embedding(out, cache)
    }

    /// Representation of a state-action anchor (unit norm when enabled).
    pub fn embed_anchor(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        Ok(self.embed_anchor_cached(state, action)?.rep)
    }

    /// Representation of a (future) state.
    pub fn embed_future(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.embed_future_cached(state)?.rep)
    }

    /// Similarity score between two representations, per `critic_kind`.
    pub fn critic_score(&self, anchor_rep: &[f64], future_rep: &[f64]) -> f64 {
        critic_score(self.critic_kind, self.negate_dot, anchor_rep, future_rep)
    }

    /// `K x K` matrix of critic scores, entry `(i, j)` pairing anchor `i`
    /// with future `j`.
    pub fn critic_matrix(&self, anchors: &[Vec<f64>], futures: &[Vec<f64>]) -> Vec<Vec<f64>> {
        anchors
            .iter()
            .map(|u| futures.iter().map(|v| self.critic_score(u, v)).collect())
            .collect()
    }

    /// Gradient of the unit-norm projection: maps `dL/d(rep)` back to
    /// `dL/d(net output)`.
    pub(crate) fn normalize_backward(&self, embed: &EmbedCache, grad_rep: &[f64]) -> Vec<f64> {
        if !self.normalize_reps {
            return grad_rep.to_vec();
        }
        let y = &embed.rep;
        let dot: f64 = y.iter().zip(grad_rep.iter()).map(|(a, b)| a * b).sum();
        y.iter()
            .zip(grad_rep.iter())
            .map(|(yi, gi)| (gi - yi * dot) / embed.norm)
            .collect()
    }

    /// Writes the checkpoint: one `TECN` block per encoder, then `log_tau`.
    pub fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        self.phi.write_to(w)?;
        self.psi.write_to(w)?;
        crate::nn::write_f64_block(w, &[self.log_tau])?;
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }
}

pub(crate) fn critic_score(kind: CriticKind, negate_dot: bool, u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    match kind {
        CriticKind::L1 => -u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>(),
        CriticKind::L2 => -u
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        CriticKind::L2NoSqrt => -u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        CriticKind::Dot => {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            if negate_dot {
                -dot
            } else {
                dot
            }
        }
    }
}

/// Gradients of the critic score with respect to both representations.
pub(crate) fn critic_pair_grads(
    kind: CriticKind,
    negate_dot: bool,
    u: &[f64],
    v: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let d = u.len();
    let mut du = vec![0.0; d];
    let mut dv = vec![0.0; d];
    match kind {
        CriticKind::L1 => {
            for k in 0..d {
                let s = (u[k] - v[k]).signum();
                // Subgradient 0 at ties.
                let s = if u[k] == v[k] { 0.0 } else { s };
                du[k] = -s;
                dv[k] = s;
            }
        }
        CriticKind::L2 => {
            let dist = u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            for k in 0..d {
                let g = (u[k] - v[k]) / dist;
                du[k] = -g;
                dv[k] = g;
            }
        }
        CriticKind::L2NoSqrt => {
            for k in 0..d {
                let g = 2.0 * (u[k] - v[k]);
                du[k] = -g;
                dv[k] = g;
            }
        }
        CriticKind::Dot => {
            let sign = if negate_dot { -1.0 } else { 1.0 };
            for k in 0..d {
                du[k] = sign * v[k];
                dv[k] = sign * u[k];
            }
        }
    }
    (du, dv)
}

/// A single network over the concatenated `(s, a, s_f)` triple, the
/// non-factorized alternative to the encoder pair.
#[derive(Debug, Clone)]
pub struct MonolithicCritic {
    net: DenseNet,
    log_tau: f64,
    state_dim: usize,
    action_dim: usize,
}

impl MonolithicCritic {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![2 * state_dim + action_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(Self {
            net: DenseNet::new(&dims, activation, rng)?,
            log_tau: 0.0,
            state_dim,
            action_dim,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn log_tau(&self) -> f64 {
        self.log_tau
    }

    pub fn set_log_tau(&mut self, log_tau: f64) {
        self.log_tau = log_tau;
    }

    pub(crate) fn concat(&self, s: &[f64], a: &[f64], s_f: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.state_dim || a.len() != self.action_dim || s_f.len() != self.state_dim {
            return Err(Error::config("monolithic critic input dims mismatch"));
        }
        let mut input = Vec::with_capacity(2 * self.state_dim + self.action_dim);
        input.extend_from_slice(s);
        input.extend_from_slice(a);
        input.extend_from_slice(s_f);
        Ok(input)
    }

    /// Scalar critic score for one `(s, a, s_f)` triple.
    pub fn score(&self, s: &[f64], a: &[f64], s_f: &[f64]) -> Result<f64> {
        let input = self.concat(s, a, s_f)?;
        Ok(self.net.infer(&input)?[0])
    }
}

/// Applies one Adam step to every trainable part of the model.
pub struct ContrastiveOptimizer {
    pub phi: AdamState,
    pub psi: AdamState,
    pub log_tau: AdamState,
}

impl ContrastiveOptimizer {
    pub fn new(model: &ContrastiveModel, lr: f64) -> Self {
        Self {
            phi: AdamState::new(model.phi.param_count(), lr),
            psi: AdamState::new(model.psi.param_count(), lr),
            log_tau: AdamState::new(1, lr),
        }
    }

    pub fn step(&mut self, model: &mut ContrastiveModel, grads: &ContrastiveGrads) -> Result<()> {
        model.phi.adam_step(&mut self.phi, &grads.phi)?;
        model.psi.adam_step(&mut self.psi, &grads.psi)?;
        let mut lt = [model.log_tau];
        self.log_tau.step(&mut lt, &[grads.log_tau])?;
        model.log_tau = lt[0];
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn model(critic: CriticKind, normalize: bool, seed: u64) -> ContrastiveModel {
        ContrastiveModel::new(
            3,
            2,
            4,
            &[8],
            Activation::Tanh,
            critic,
            normalize,
            &mut rng(seed),
        )
        .unwrap()
    }

    #[test]
    fn normalized_embeddings_have_unit_norm() {
        let m = model(CriticKind::L2, true, 1);
        for k in 0..20 {
            let s = [k as f64 * 0.3, -1.0, 0.5];
            let a = [1.0, 0.0];
            let rep = m.embed_anchor(&s, &a).unwrap();
            let norm: f64 = rep.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_weight_phi_with_bias_embeds_to_normalized_bias() {
        let mut r = rng(2);
        let mut m = ContrastiveModel::new(
            2,
            0,
            3,
            &[],
            Activation::Identity,
            CriticKind::L2,
            true,
            &mut r,
        )
        .unwrap();
        // Single linear layer: zero the weights, set bias b.
        let flat_len = m.phi().param_count();
        m.phi_mut().set_params_flat(&vec![0.0; flat_len]).unwrap();
        let b = [0.6, -0.8, 0.0];
        for (i, &v) in b.iter().enumerate() {
            m.phi_mut().set_bias(0, i, v);
        }
        let rep = m.embed_anchor(&[5.0, -3.0], &[]).unwrap();
        let norm_b: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (r, &bv) in rep.iter().zip(b.iter()) {
            assert!((r - bv / norm_b).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_matches_independent_reevaluation() {
        let m = model(CriticKind::L2, true, 3);
        let s = [0.2, -0.4, 1.0];
        let a = [0.0, 1.0];
        let rep = m.embed_anchor(&s, &a).unwrap();
        // Straight-line: forward through phi, then normalize.
        let mut input = s.to_vec();
        input.extend_from_slice(&a);
        let raw = m.phi().infer(&input).unwrap();
        let norm: f64 = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (got, want) in rep.iter().zip(raw.iter().map(|v| v / norm)) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn critic_diagonal_zero_for_identical_reps() {
        let m = model(CriticKind::L2, true, 4);
        let reps: Vec<Vec<f64>> = (0..3)
            .map(|i| m.embed_future(&[i as f64, 0.0, 1.0]).unwrap())
            .collect();
        let c = m.critic_matrix(&reps, &reps);
        for (i, row) in c.iter().enumerate() {
            assert!(row[i].abs() < 1e-12);
        }
    }

    #[test]
    fn critic_values_on_standard_basis() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        assert_eq!(critic_score(CriticKind::L1, true, &e1, &e2), -2.0);
        assert!((critic_score(CriticKind::L2, true, &e1, &e2) + 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(critic_score(CriticKind::L2NoSqrt, true, &e1, &e2), -2.0);
        assert_eq!(critic_score(CriticKind::Dot, true, &e1, &e2), -0.0);
        let par = vec![0.5, 0.5];
        assert_eq!(critic_score(CriticKind::Dot, true, &par, &par), -0.5);
        assert_eq!(critic_score(CriticKind::Dot, false, &par, &par), 0.5);
    }

    #[test]
    fn critic_matrix_matches_bruteforce_distances() {
        let m = model(CriticKind::L1, true, 5);
        let mut r = rng(6);
        let anchors: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
                let n: f64 = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                raw.iter().map(|v| v / n).collect()
            })
            .collect();
        let futures = anchors.clone();
        let c = m.critic_matrix(&anchors, &futures);
        for i in 0..4 {
            for j in 0..4 {
                let mut l1 = 0.0;
                for k in 0..4 {
                    l1 += (anchors[i][k] - futures[j][k]).abs();
                }
                assert!((c[i][j] + l1).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn monolithic_zero_net_outputs_bias() {
        let mut r = rng(7);
        let mut critic = MonolithicCritic::new(2, 1, &[], Activation::Identity, &mut r).unwrap();
        let n = critic.net().param_count();
        critic.net_mut().set_params_flat(&vec![0.0; n]).unwrap();
        critic.net_mut().set_bias(0, 0, 0.75);
        let score = critic.score(&[1.0, 2.0], &[3.0], &[4.0, 5.0]).unwrap();
        assert_eq!(score, 0.75);
    }

    #[test]
    fn monolithic_score_is_deterministic_and_matches_forward() {
        let mut r = rng(8);
        let critic = MonolithicCritic::new(2, 1, &[6], Activation::Tanh, &mut r).unwrap();
        let (s, a, sf) = ([0.1, -0.2], [0.9], [1.1, 0.3]);
        let x = critic.score(&s, &a, &sf).unwrap();
        let y = critic.score(&s, &a, &sf).unwrap();
        assert_eq!(x, y);
        let mut input = s.to_vec();
        input.extend_from_slice(&a);
        input.extend_from_slice(&sf);
        assert_eq!(x, critic.net().infer(&input).unwrap()[0]);
    }

    #[test]
    fn checkpoint_roundtrips_through_tecn_blocks() {
        let m = model(CriticKind::L2, true, 9);
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let mut cursor = buf.as_slice();
        let phi = DenseNet::read_from(&mut cursor, Activation::Tanh).unwrap();
        let psi = DenseNet::read_from(&mut cursor, Activation::Tanh).unwrap();
        let tau = crate::nn::read_f64_block(&mut cursor).unwrap();
        assert_eq!(&phi, m.phi());
        assert_eq!(&psi, m.psi());
        assert_eq!(tau, vec![m.log_tau()]);
    }
}
