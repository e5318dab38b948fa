//! Policy representations, sampling, and the policy-gradient surrogate.

use rand::Rng;

use crate::env::{Action, ActionSpec};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, DenseNet, Gradients};

/// A stochastic policy.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Per-state action logits.
    TabularSoftmax { logits: Vec<Vec<f64>> },
    /// Network from observation to action logits.
    MlpCategorical { net: DenseNet },
    /// Network from observation to action means, with a state-independent
    /// learned log-std per dimension.
    MlpGaussian {
        net: DenseNet,
        log_std: Vec<f64>,
        bound: f64,
    },
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Standard normal draw via Box-Muller.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn one_hot_index(obs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in obs.iter().enumerate() {
        if v > obs[best] {
            best = i;
        }
    }
    best
}

impl Policy {
    pub fn tabular<R: Rng + ?Sized>(n_states: usize, n_actions: usize, _rng: &mut R) -> Self {
        Policy::TabularSoftmax {
            logits: vec![vec![0.0; n_actions]; n_states],
        }
    }

    pub fn mlp_categorical<R: Rng + ?Sized>(
        obs_dim: usize,
        n_actions: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(n_actions);
        Ok(Policy::MlpCategorical {
            net: DenseNet::new(&dims, Activation::Tanh, rng)?,
        })
    }

    pub fn mlp_gaussian<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        bound: f64,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        Ok(Policy::MlpGaussian {
            net: DenseNet::new(&dims, Activation::Tanh, rng)?,
            log_std: vec![-0.5; action_dim],
            bound,
        })
    }

    /// Builds the policy kind matching an action spec: tabular for tabular
    /// environments, otherwise an MLP head.
    pub fn for_env<R: Rng + ?Sized>(
        obs_dim: usize,
        spec: &ActionSpec,
        tabular_states: Option<usize>,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        match (spec, tabular_states) {
            (ActionSpec::Discrete(n), Some(states)) => Ok(Policy::tabular(states, *n, rng)),
            (ActionSpec::Discrete(n), None) => Policy::mlp_categorical(obs_dim, *n, hidden, rng),
            (ActionSpec::Continuous { dim, bound }, _) => {
                Policy::mlp_gaussian(obs_dim, *dim, *bound, hidden, rng)
            }
        }
    }

    fn categorical_logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Policy::TabularSoftmax { logits } => Ok(logits[one_hot_index(obs)].clone()),
            Policy::MlpCategorical { net } => net.infer(obs),
            Policy::MlpGaussian { .. } => Err(Error::config("gaussian policy has no logits")),
        }
    }

    /// Action probabilities for discrete policies.
    pub fn action_probs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.categorical_logits(obs)?))
    }

    /// Full policy table over one-hot tabular states, for the occupancy
    /// oracle.
    pub fn tabular_table(&self, n_states: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            Policy::TabularSoftmax { logits } => {
                debug_assert_eq!(logits.len(), n_states);
                Ok(logits.iter().map(|row| softmax(row)).collect())
            }
            _ => Err(Error::config("policy is not tabular")),
        }
    }

    /// Samples an action.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<Action> {
        match self {
            Policy::TabularSoftmax { .. } | Policy::MlpCategorical { .. } => {
                let probs = self.action_probs(obs)?;
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(Action::Discrete(i));
                    }
                }
                Ok(Action::Discrete(probs.len() - 1))
            }
            Policy::MlpGaussian { net, log_std, .. } => {
                let mean = net.infer(obs)?;
                let action = mean
                    .iter()
                    .zip(log_std.iter())
                    .map(|(&m, &ls)| m + ls.exp() * standard_normal(rng))
                    .collect();
                Ok(Action::Continuous(action))
            }
        }
    }

    /// Deterministic evaluation action: the mode.
    pub fn mode_action(&self, obs: &[f64]) -> Result<Action> {
        match self {
            Policy::TabularSoftmax { .. } | Policy::MlpCategorical { .. } => {
                let probs = self.action_probs(obs)?;
                Ok(Action::Discrete(one_hot_index(&probs)))
            }
            Policy::MlpGaussian { net, .. } => Ok(Action::Continuous(net.infer(obs)?)),
        }
    }

    pub fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        match (self, action) {
            (Policy::TabularSoftmax { .. } | Policy::MlpCategorical { .. }, Action::Discrete(a)) => {
                let probs = self.action_probs(obs)?;
                Ok(probs[*a].max(1e-300).ln())
            }
            (Policy::MlpGaussian { net, log_std, .. }, Action::Continuous(a)) => {
                let mean = net.infer(obs)?;
                let mut lp = 0.0;
                for k in 0..mean.len() {
                    let sigma = log_std[k].exp();
                    let z = (a[k] - mean[k]) / sigma;
                    lp += -0.5 * z * z - log_std[k] - 0.5 * (2.0 * std::f64::consts::PI).ln();
                }
                Ok(lp)
            }
            _ => Err(Error::config("action kind does not match policy")),
        }
    }

    pub fn entropy(&self, obs: &[f64]) -> Result<f64> {
        match self {
            Policy::TabularSoftmax { .. } | Policy::MlpCategorical { .. } => {
                let probs = self.action_probs(obs)?;
                Ok(-probs.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>())
            }
            Policy::MlpGaussian { log_std, .. } => {
                let c = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
                Ok(log_std.iter().map(|ls| ls + c).sum())
            }
        }
    }
}

/// Gradients shaped like a [`Policy`].
#[derive(Debug, Clone)]
pub enum PolicyGrads {
    Tabular(Vec<Vec<f64>>),
    Mlp(Gradients),
    Gaussian { net: Gradients, log_std: Vec<f64> },
}

/// Adam state for a policy.
#[derive(Debug, Clone)]
pub enum PolicyOptimizer {
    Tabular(AdamState),
    Mlp(AdamState),
    Gaussian { net: AdamState, log_std: AdamState },
}

impl PolicyOptimizer {
    pub fn new(policy: &Policy, lr: f64) -> Self {
        match policy {
            Policy::TabularSoftmax { logits } => {
                PolicyOptimizer::Tabular(AdamState::new(logits.len() * logits[0].len(), lr))
            }
            Policy::MlpCategorical { net } => PolicyOptimizer::Mlp(AdamState::new(net.param_count(), lr)),
            Policy::MlpGaussian { net, log_std, .. } => PolicyOptimizer::Gaussian {
                net: AdamState::new(net.param_count(), lr),
                log_std: AdamState::new(log_std.len(), lr),
            },
        }
    }

    pub fn apply(&mut self, policy: &mut Policy, grads: &PolicyGrads) -> Result<()> {
        match (policy, self, grads) {
            (Policy::TabularSoftmax { logits }, PolicyOptimizer::Tabular(adam), PolicyGrads::Tabular(g)) => {
                let mut flat: Vec<f64> = logits.iter().flatten().copied().collect();
                let flat_g: Vec<f64> = g.iter().flatten().copied().collect();
                adam.step(&mut flat, &flat_g)?;
                let width = logits[0].len();
                for (i, row) in logits.iter_mut().enumerate() {
                    row.copy_from_slice(&flat[i * width..(i + 1) * width]);
                }
                Ok(())
            }
            (Policy::MlpCategorical { net }, PolicyOptimizer::Mlp(adam), PolicyGrads::Mlp(g)) => {
                net.adam_step(adam, g)
            }
            (
                Policy::MlpGaussian { net, log_std, .. },
                PolicyOptimizer::Gaussian { net: adam_net, log_std: adam_ls },
                PolicyGrads::Gaussian { net: g_net, log_std: g_ls },
            ) => {
                net.adam_step(adam_net, g_net)?;
                adam_ls.step(log_std, g_ls)?;
                // Keep the policy sampleable.
                for ls in log_std.iter_mut() {
                    *ls = ls.clamp(-10.0, 3.0);
                }
                Ok(())
            }
            _ => Err(Error::config("policy, optimizer, and grads kinds must match")),
        }
    }
}

/// One policy-update batch: observations, taken actions, advantages, and
/// the log-probs recorded at collection time.
#[derive(Debug, Clone, Default)]
pub struct PolicyBatch {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub advantages: Vec<f64>,
    pub old_log_probs: Vec<f64>,
}

impl PolicyBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateConfig {
    /// PPO clip epsilon; `None` is the vanilla policy gradient.
    pub clip: Option<f64>,
    pub entropy_coef: f64,
}

/// Clipped-surrogate (or vanilla PG) loss and gradients on a frozen batch:
/// `L = -mean_i [ min(rho_i A_i, clamp(rho_i) A_i) + c_H H_i ]`.
/// Samples with non-finite advantages are skipped.
pub fn surrogate_loss_and_grads(
    policy: &Policy,
    batch: &PolicyBatch,
    config: &UpdateConfig,
) -> Result<(f64, PolicyGrads)> {
    if batch.is_empty() {
        return Err(Error::config("empty policy batch"));
    }
    let valid: Vec<usize> = (0..batch.len())
        .filter(|&i| batch.advantages[i].is_finite())
        .collect();
    if valid.len() < batch.len() {
        eprintln!(
            "warning: skipped {} samples with non-finite advantages",
            batch.len() - valid.len()
        );
    }
    if valid.is_empty() {
        return Err(Error::numerical("no finite advantages in policy batch"));
    }
    let n = valid.len() as f64;
    let mut loss = 0.0;
    let mut grads = match policy {
        Policy::TabularSoftmax { logits } => {
            PolicyGrads::Tabular(vec![vec![0.0; logits[0].len()]; logits.len()])
        }
        Policy::MlpCategorical { net } => PolicyGrads::Mlp(Gradients::zeros_like(net)),
        Policy::MlpGaussian { net, log_std, .. } => PolicyGrads::Gaussian {
            net: Gradients::zeros_like(net),
            log_std: vec![0.0; log_std.len()],
        },
    };

    for &i in &valid {
        let obs = &batch.observations[i];
        let action = &batch.actions[i];
        let adv = batch.advantages[i];
        let logp = policy.log_prob(obs, action)?;
        let (pg_coef, surr) = match config.clip {
            None => (adv, logp * adv),
            Some(eps) => {
                let rho = (logp - batch.old_log_probs[i]).exp();
                let unclipped = rho * adv;
                let clipped = rho.clamp(1.0 - eps, 1.0 + eps) * adv;
                if unclipped <= clipped {
                    (adv * rho, unclipped)
                } else {
                    (0.0, clipped)
                }
            }
        };
        let entropy = policy.entropy(obs)?;
        loss -= (surr + config.entropy_coef * entropy) / n;
        // d(-surr - cH H)/d(params), accumulated per sample.
        let logp_scale = -pg_coef / n;
        let ent_scale = -config.entropy_coef / n;
        match (policy, &mut grads) {
            (Policy::TabularSoftmax { logits }, PolicyGrads::Tabular(g)) => {
                let s = one_hot_index(obs);
                let probs = softmax(&logits[s]);
                let a = action.discrete();
                let h: f64 = -probs.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>();
                for k in 0..probs.len() {
                    let dlogp = if k == a { 1.0 - probs[k] } else { -probs[k] };
                    let dh = -probs[k] * (probs[k].max(1e-300).ln() + h);
                    g[s][k] += logp_scale * dlogp + ent_scale * dh;
                }
            }
            (Policy::MlpCategorical { net }, PolicyGrads::Mlp(g)) => {
                let (logits, cache) = net.forward(obs)?;
                let probs = softmax(&logits);
                let a = action.discrete();
                let h: f64 = -probs.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>();
                let mut dlogits = vec![0.0; probs.len()];
                for k in 0..probs.len() {
                    let dlogp = if k == a { 1.0 - probs[k] } else { -probs[k] };
                    let dh = -probs[k] * (probs[k].max(1e-300).ln() + h);
                    dlogits[k] = logp_scale * dlogp + ent_scale * dh;
                }
                net.backward_accumulate(&cache, &dlogits, g)?;
            }
            (
                Policy::MlpGaussian { net, log_std, .. },
                PolicyGrads::Gaussian { net: g_net, log_std: g_ls },
            ) => {
                let (mean, cache) = net.forward(obs)?;
                let a = match action {
                    Action::Continuous(v) => v,
                    _ => unreachable!("checked by log_prob"),
                };
                let mut dmean = vec![0.0; mean.len()];
                for k in 0..mean.len() {
                    let sigma = log_std[k].exp();
                    let z = (a[k] - mean[k]) / sigma;
                    dmean[k] = logp_scale * (z / sigma);
                    // d logp / d log_std = z^2 - 1; d H / d log_std = 1.
                    g_ls[k] += logp_scale * (z * z - 1.0) + ent_scale;
                }
                net.backward_accumulate(&cache, &dmean, g_net)?;
            }
            _ => unreachable!("grads built from the same policy"),
        }
    }
    Ok((loss, grads))
}

/// One optimizer step on the surrogate. Returns the loss.
pub fn policy_update(
    policy: &mut Policy,
    optimizer: &mut PolicyOptimizer,
    batch: &PolicyBatch,
    config: &UpdateConfig,
) -> Result<f64> {
    let (loss, grads) = surrogate_loss_and_grads(policy, batch, config)?;
    optimizer.apply(policy, &grads)?;
    Ok(loss)
}

/// State-value baseline.
#[derive(Debug, Clone)]
pub enum ValueFn {
    Table { values: Vec<f64>, lr: f64 },
    Mlp { net: DenseNet, opt: AdamState },
}

impl ValueFn {
    pub fn table(n_states: usize, lr: f64) -> Self {
        ValueFn::Table {
            values: vec![0.0; n_states],
            lr,
        }
    }

    pub fn mlp<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], lr: f64, rng: &mut R) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let net = DenseNet::new(&dims, Activation::Tanh, rng)?;
        let opt = AdamState::new(net.param_count(), lr);
        Ok(ValueFn::Mlp { net, opt })
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        match self {
            ValueFn::Table { values, .. } => Ok(values[one_hot_index(obs)]),
            ValueFn::Mlp { net, .. } => Ok(net.infer(obs)?[0]),
        }
    }

    /// Regression toward observed returns: a running average per state for
    /// the table, one Adam MSE step for the network.
    pub fn update(&mut self, observations: &[Vec<f64>], returns: &[f64]) -> Result<()> {
        match self {
            ValueFn::Table { values, lr } => {
                for (obs, &g) in observations.iter().zip(returns.iter()) {
                    let s = one_hot_index(obs);
                    values[s] += *lr * (g - values[s]);
                }
                Ok(())
            }
            ValueFn::Mlp { net, opt } => {
                let mut grads = Gradients::zeros_like(net);
                let scale = 1.0 / observations.len() as f64;
                for (obs, &g) in observations.iter().zip(returns.iter()) {
                    let (out, cache) = net.forward(obs)?;
                    net.backward_accumulate(&cache, &[2.0 * (out[0] - g) * scale], &mut grads)?;
                }
                net.adam_step(opt, &grads)
            }
        }
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

    #[test]
    fn uniform_logits_sample_uniformly() {
        let policy = Policy::tabular(1, 4, &mut rng(0));
        let obs = vec![1.0];
        let mut r = rng(1);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[policy.sample(&obs, &mut r).unwrap().discrete()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.01, "frequency {f}");
        }
    }

    #[test]
    fn dominant_logit_dominates_sampling() {
        let mut policy = Policy::tabular(1, 3, &mut rng(2));
        if let Policy::TabularSoftmax { logits } = &mut policy {
            logits[0][1] = 50.0;
        }
        let mut r = rng(3);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| policy.sample(&[1.0], &mut r).unwrap().discrete() == 1)
            .count();
        assert!(hits as f64 / n as f64 > 0.999);
        assert_eq!(policy.mode_action(&[1.0]).unwrap().discrete(), 1);
    }

    #[test]
    fn tiny_log_std_concentrates_on_mean() {
        let mut policy = Policy::mlp_gaussian(2, 2, 1.0, &[4], &mut rng(4)).unwrap();
        if let Policy::MlpGaussian { log_std, .. } = &mut policy {
            log_std.iter_mut().for_each(|v| *v = -10.0);
        }
        let obs = vec![0.3, -0.3];
        let mean = match policy.mode_action(&obs).unwrap() {
            Action::Continuous(m) => m,
            _ => unreachable!(),
        };
        let mut r = rng(5);
        for _ in 0..100 {
            if let Action::Continuous(a) = policy.sample(&obs, &mut r).unwrap() {
                for (x, m) in a.iter().zip(mean.iter()) {
                    assert!((x - m).abs() < 1e-3);
                }
            }
        }
    }

    #[test]
    fn zero_advantages_zero_entropy_leave_params_unchanged() {
        let mut policy = Policy::tabular(2, 3, &mut rng(6));
        let before = match &policy {
            Policy::TabularSoftmax { logits } => logits.clone(),
            _ => unreachable!(),
        };
        let mut opt = PolicyOptimizer::new(&policy, 0.1);
        let batch = PolicyBatch {
            observations: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            actions: vec![Action::Discrete(0), Action::Discrete(2)],
            advantages: vec![0.0, 0.0],
            old_log_probs: vec![(1.0f64 / 3.0).ln(); 2],
        };
        let cfg = UpdateConfig {
            clip: None,
            entropy_coef: 0.0,
        };
        policy_update(&mut policy, &mut opt, &batch, &cfg).unwrap();
        if let Policy::TabularSoftmax { logits } = &policy {
            assert_eq!(*logits, before);
        }
    }

    #[test]
    fn positive_advantage_increases_action_probability() {
        let mut policy = Policy::tabular(1, 3, &mut rng(7));
        let mut opt = PolicyOptimizer::new(&policy, 0.05);
        let obs = vec![1.0];
        let before = policy.action_probs(&obs).unwrap()[1];
        let batch = PolicyBatch {
            observations: vec![obs.clone()],
            actions: vec![Action::Discrete(1)],
            advantages: vec![2.0],
            old_log_probs: vec![policy.log_prob(&obs, &Action::Discrete(1)).unwrap()],
        };
        let cfg = UpdateConfig {
            clip: Some(0.2),
            entropy_coef: 0.0,
        };
        policy_update(&mut policy, &mut opt, &batch, &cfg).unwrap();
        let after = policy.action_probs(&obs).unwrap()[1];
        assert!(after > before, "{after} vs {before}");
    }

    #[test]
    fn non_finite_advantages_are_skipped() {
        let mut policy = Policy::tabular(1, 2, &mut rng(8));
        let mut opt = PolicyOptimizer::new(&policy, 0.05);
        let obs = vec![1.0];
        let batch = PolicyBatch {
            observations: vec![obs.clone(), obs.clone()],
            actions: vec![Action::Discrete(0), Action::Discrete(1)],
            advantages: vec![f64::NAN, 1.0],
            old_log_probs: vec![0.5f64.ln(), 0.5f64.ln()],
        };
        let cfg = UpdateConfig {
            clip: None,
            entropy_coef: 0.0,
        };
        // Must not error; the NaN sample is dropped.
        policy_update(&mut policy, &mut opt, &batch, &cfg).unwrap();
        assert!(policy.action_probs(&obs).unwrap()[1] > 0.5);
    }

    fn fd_surrogate_tabular(policy: &Policy, batch: &PolicyBatch, cfg: &UpdateConfig, s: usize, k: usize) -> f64 {
        let h = 1e-6;
        let eval = |p: &Policy| surrogate_loss_and_grads(p, batch, cfg).unwrap().0;
        let mut plus = policy.clone();
        if let Policy::TabularSoftmax { logits } = &mut plus {
            logits[s][k] += h;
        }
        let mut minus = policy.clone();
        if let Policy::TabularSoftmax { logits } = &mut minus {
            logits[s][k] -= h;
        }
        (eval(&plus) - eval(&minus)) / (2.0 * h)
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        for clip in [None, Some(0.2)] {
            let mut policy = Policy::tabular(2, 3, &mut rng(9));
            if let Policy::TabularSoftmax { logits } = &mut policy {
                logits[0] = vec![0.3, -0.2, 0.8];
                logits[1] = vec![-0.5, 0.1, 0.4];
            }
            let batch = PolicyBatch {
                observations: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
                actions: vec![Action::Discrete(2), Action::Discrete(0), Action::Discrete(1)],
                advantages: vec![1.5, -0.7, 0.3],
                // Old log-probs differ from current so the ratio is active.
                old_log_probs: vec![-1.2, -0.9, -1.1],
            };
            let cfg = UpdateConfig {
                clip,
                entropy_coef: 0.03,
            };
            let (_, grads) = surrogate_loss_and_grads(&policy, &batch, &cfg).unwrap();
            if let PolicyGrads::Tabular(g) = grads {
                for s in 0..2 {
                    for k in 0..3 {
                        let numeric = fd_surrogate_tabular(&policy, &batch, &cfg, s, k);
                        let denom = g[s][k].abs().max(numeric.abs()).max(1e-8);
                        assert!(
                            (g[s][k] - numeric).abs() / denom < 1e-4,
                            "clip {clip:?} grad[{s}][{k}] {} vs {numeric}",
                            g[s][k]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_surrogate_gradient_matches_finite_differences() {
        let policy = Policy::mlp_gaussian(2, 2, 1.0, &[4], &mut rng(10)).unwrap();
        let batch = PolicyBatch {
            observations: vec![vec![0.5, -0.5], vec![-0.2, 0.9]],
            actions: vec![
                Action::Continuous(vec![0.3, -0.1]),
                Action::Continuous(vec![-0.4, 0.2]),
            ],
            advantages: vec![1.0, -0.5],
            old_log_probs: vec![-2.0, -2.2],
        };
        let cfg = UpdateConfig {
            clip: Some(0.3),
            entropy_coef: 0.01,
        };
        let (_, grads) = surrogate_loss_and_grads(&policy, &batch, &cfg).unwrap();
        let (g_net, g_ls) = match &grads {
            PolicyGrads::Gaussian { net, log_std } => (net.flat(), log_std.clone()),
            _ => unreachable!(),
        };
        let h = 1e-6;
        // Net params.
        if let Policy::MlpGaussian { net, .. } = &policy {
            let n = net.param_count();
            for t in 0..30 {
                let idx = (t * 401) % n;
                let perturb = |delta: f64| {
                    let mut p = policy.clone();
                    if let Policy::MlpGaussian { net, .. } = &mut p {
                        let mut flat = net.params_flat();
                        flat[idx] += delta;
                        net.set_params_flat(&flat).unwrap();
                    }
                    surrogate_loss_and_grads(&p, &batch, &cfg).unwrap().0
                };
                let numeric = (perturb(h) - perturb(-h)) / (2.0 * h);
                let denom = g_net[idx].abs().max(numeric.abs()).max(1e-8);
                assert!((g_net[idx] - numeric).abs() / denom < 1e-4);
            }
        }
        // Log-std.
        for k in 0..2 {
            let perturb = |delta: f64| {
                let mut p = policy.clone();
                if let Policy::MlpGaussian { log_std, .. } = &mut p {
                    log_std[k] += delta;
                }
                surrogate_loss_and_grads(&p, &batch, &cfg).unwrap().0
            };
            let numeric = (perturb(h) - perturb(-h)) / (2.0 * h);
            let denom = g_ls[k].abs().max(numeric.abs()).max(1e-8);
            assert!((g_ls[k] - numeric).abs() / denom < 1e-4);
        }
    }

    #[test]
    fn value_table_regresses_to_returns() {
        let mut v = ValueFn::table(2, 0.5);
        let obs = vec![vec![1.0, 0.0]; 8];
        let returns = vec![2.0; 8];
        for _ in 0..20 {
            v.update(&obs, &returns).unwrap();
        }
        assert!((v.value(&[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-3);
        assert_eq!(v.value(&[0.0, 1.0]).unwrap(), 0.0);
    }
}
