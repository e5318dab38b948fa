//! The end-to-end training loop: rollouts feed the trajectory buffer,
//! intrinsic rewards are computed from the current model snapshot,
//! representations take their gradient steps, and the policy follows the
//! discounted intrinsic returns.

use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    policy_update, Policy, PolicyBatch, PolicyOptimizer, UpdateConfig, ValueFn,
};
use crate::contrastive::{
    loss_and_grads, monolithic_loss_and_grads, ContrastiveModel, ContrastiveOptimizer, CriticKind,
    LossConfig, MonolithicCritic,
};
use crate::env::{Action, ActionSpec, RolloutEnv, StateKey};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState};
use crate::oracle::{
    exact_forward_kl_reward, exact_reverse_kl_reward, representation_variance, CoverageTracker,
    Discretization, OccupancyOracle,
};
use crate::replay::{sample_batch, ContrastiveBatch, SamplerConfig, Trajectory, TrajectoryBuffer};
use crate::reward::{
    ctec_reward_single, ctec_reward_suffix, etd_reward, CountTable, EpisodicMemory, Estimator,
    IcmModule, RewardSource, RewardSpec, RewardTraceRow, RndModule,
};

/// Everything a training run needs besides the environment.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub total_episodes: usize,
    pub episodes_per_iter: usize,
    pub gamma_rl: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub contrastive_lr: f64,
    pub entropy_coef: f64,
    /// PPO clip epsilon; `None` runs the vanilla policy gradient.
    pub ppo_clip: Option<f64>,
    pub contrastive_updates_per_iter: usize,
    /// Contrastive batch size K.
    pub batch_size: usize,
    /// In-episode negative control: each sampled trajectory contributes
    /// this many anchors.
    pub repetition_factor: usize,
    pub reward: RewardSpec,
    pub sampler: SamplerConfig,
    pub loss: LossConfig,
    pub critic_kind: CriticKind,
    pub normalize_reps: bool,
    pub rep_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub policy_hidden: Vec<usize>,
    pub buffer_capacity: usize,
    /// Trailing-episode window for visitation statistics.
    pub window_episodes: usize,
    /// Probe-set size for the representation-variance monitor.
    pub probe_states: usize,
    /// Grid cell size for coverage of continuous states.
    pub coverage_cell: f64,
    /// Replace the encoder pair with a single network over the triple.
    pub monolithic_critic: bool,
    /// Iterations of rollout and representation training before the first
    /// policy update (the minimum-replay warmup).
    pub policy_warmup_iters: usize,
    pub record_reward_trace: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_episodes: 1000,
            episodes_per_iter: 10,
            gamma_rl: 0.99,
            policy_lr: 3e-2,
            value_lr: 1e-1,
            contrastive_lr: 3e-3,
            entropy_coef: 0.01,
            ppo_clip: Some(0.2),
            contrastive_updates_per_iter: 1,
            batch_size: 64,
            repetition_factor: 1,
            reward: RewardSpec::default(),
            sampler: SamplerConfig::default(),
            loss: LossConfig::default(),
            critic_kind: CriticKind::L2,
            normalize_reps: true,
            rep_dim: 16,
            encoder_hidden: vec![64, 64],
            policy_hidden: vec![64, 64],
            buffer_capacity: 512,
            window_episodes: 1000,
            probe_states: 256,
            coverage_cell: 0.5,
            monolithic_critic: false,
            policy_warmup_iters: 0,
            record_reward_trace: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_iter == 0 {
            return Err(Error::config("episodes_per_iter must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma_rl) {
            return Err(Error::config("gamma_rl must be in [0, 1)"));
        }
        if let Some(eps) = self.ppo_clip {
            if !(0.0..1.0).contains(&eps) || eps == 0.0 {
                return Err(Error::config("ppo clip epsilon must be in (0, 1)"));
            }
        }
        if self.policy_lr <= 0.0 || self.value_lr <= 0.0 || self.contrastive_lr <= 0.0 {
            return Err(Error::config("learning rates must be positive"));
        }
        if self.batch_size == 0 || self.rep_dim == 0 || self.buffer_capacity == 0 {
            return Err(Error::config("batch size, rep dim, and capacity must be positive"));
        }
        if self.monolithic_critic && self.reward.estimator == Estimator::SuffixMc {
            return Err(Error::unsupported(
                "the suffix estimator needs the separable critic",
            ));
        }
        self.reward.validate()?;
        self.sampler.validate()?;
        self.loss.validate()?;
        Ok(())
    }
}

/// Everything a finished run leaves behind. Curve lengths equal the
/// iteration count.
#[derive(Debug, Clone)]
pub struct TrainingArtifacts {
    pub iterations: usize,
    pub episodes: usize,
    pub coverage: Vec<f64>,
    pub contrastive_loss: Vec<f64>,
    pub mean_intrinsic_reward: Vec<f64>,
    pub rep_variance: Vec<f64>,
    pub tau: Vec<f64>,
    /// Per-state visit counts over the whole run (tabular state spaces).
    pub visitation: Vec<u64>,
    /// Per-state visit counts over the trailing episode window.
    pub window_visitation: Vec<u64>,
    /// Episode-final-state counts over the trailing episode window.
    pub window_final_states: Vec<u64>,
    pub policy: Policy,
    pub value: ValueFn,
    pub contrastive: Option<ContrastiveModel>,
    pub reward_trace: Vec<RewardTraceRow>,
}

impl TrainingArtifacts {
    /// Per-iteration metrics as CSV
    /// `iter,episodes,coverage,contrastive_loss,mean_r_intr,rep_variance,tau`.
    pub fn write_metrics_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "iter,episodes,coverage,contrastive_loss,mean_r_intr,rep_variance,tau")?;
        let per_iter = if self.iterations == 0 {
            0
        } else {
            self.episodes / self.iterations
        };
        for i in 0..self.iterations {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i,
                (i + 1) * per_iter,
                self.coverage[i],
                self.contrastive_loss[i],
                self.mean_intrinsic_reward[i],
                self.rep_variance[i],
                self.tau[i]
            )?;
        }
        Ok(())
    }
}

/// The reward-specific trainable state.
enum RewardEngine {
    CTeC {
        model: ContrastiveModel,
        opt: ContrastiveOptimizer,
    },
    CTeCMonolithic {
        critic: MonolithicCritic,
        opt: AdamState,
        tau_opt: AdamState,
    },
    Etd {
        model: ContrastiveModel,
        opt: ContrastiveOptimizer,
        memory: EpisodicMemory,
    },
    OracleKl {
        reverse: bool,
        /// Buffer-aligned anchor counts for the marginal.
        counts: SaCounter,
    },
    Count {
        table: CountTable,
    },
    Rnd {
        module: RndModule,
    },
    Icm {
        module: IcmModule,
    },
    None,
}

/// FIFO of per-episode `(state, action)` pairs mirroring the trajectory
/// buffer, with a running count table.
struct SaCounter {
    episodes: VecDeque<Vec<(usize, usize)>>,
    counts: Vec<Vec<f64>>,
    capacity: usize,
}

impl SaCounter {
    fn new(n_states: usize, n_actions: usize, capacity: usize) -> Self {
        Self {
            episodes: VecDeque::new(),
            counts: vec![vec![0.0; n_actions]; n_states],
            capacity,
        }
    }

    fn push(&mut self, pairs: Vec<(usize, usize)>) {
        for &(s, a) in &pairs {
            self.counts[s][a] += 1.0;
        }
        self.episodes.push_back(pairs);
        if self.episodes.len() > self.capacity {
            let old = self.episodes.pop_front().unwrap();
            for (s, a) in old {
                self.counts[s][a] -= 1.0;
            }
        }
    }
}

/// One collected episode with everything reward assignment needs.
struct EpisodeRecord {
    trajectory: Trajectory,
    /// State keys `s_0 .. s_H`.
    keys: Vec<StateKey>,
    /// Discrete action indices (empty for continuous policies).
    action_indices: Vec<usize>,
    old_log_probs: Vec<f64>,
    /// Rewards computed during the rollout (episodic-memory and count
    /// sources); `None` for sources relabeled at update time.
    online_rewards: Option<Vec<f64>>,
}

fn key_index(key: &StateKey) -> Option<usize> {
    match key {
        StateKey::Index(i) => Some(*i),
        StateKey::Position(_) => None,
    }
}

fn ctx(e: Error, iter: usize, step: &str) -> Error {
    let wrap = |m: String| format!("iteration {iter}, {step}: {m}");
    match e {
        Error::Config(m) => Error::Config(wrap(m)),
        Error::Contract(m) => Error::Contract(wrap(m)),
        Error::Numerical(m) => Error::Numerical(wrap(m)),
        Error::Unsupported(m) => Error::Unsupported(wrap(m)),
        Error::Io(m) => Error::Io(m),
    }
}

/// Blanks the action columns of a batch so it fits a state-only anchor
/// encoder.
fn strip_actions(mut batch: ContrastiveBatch) -> ContrastiveBatch {
    for a in &mut batch.anchor_actions {
        a.clear();
    }
    batch
}

/// Runs the full loop and returns the artifacts.
pub fn train(env: &mut dyn RolloutEnv, config: &TrainConfig) -> Result<TrainingArtifacts> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let obs_dim = env.obs_dim();
    let action_spec = env.action_spec();
    let action_dim = action_spec.encoded_dim();
    let horizon = env.horizon();
    let tabular_states = env.tabular().map(|m| m.n_states());
    let index_space = index_space(env);

    let mut policy = Policy::for_env(obs_dim, &action_spec, tabular_states, &config.policy_hidden, &mut rng)?;
    let mut policy_opt = PolicyOptimizer::new(&policy, config.policy_lr);
    let mut value = match tabular_states {
        Some(n) => ValueFn::table(n, config.value_lr),
        None => ValueFn::mlp(obs_dim, &config.policy_hidden, config.value_lr, &mut rng)?,
    };

    let mut engine = build_engine(env, config, obs_dim, action_dim, &mut rng)?;
    let mut buffer = TrajectoryBuffer::new(config.buffer_capacity);
    let mut coverage = CoverageTracker::new(match index_space {
        Some(_) => Discretization::Identity,
        None => Discretization::Grid {
            cell: config.coverage_cell,
        },
    });
    let probes = env.probe_observations(config.probe_states);

    let mut visitation = vec![0u64; index_space.unwrap_or(0)];
    let mut window: VecDeque<(Vec<usize>, usize)> = VecDeque::new();

    let iterations = config.total_episodes / config.episodes_per_iter;
    let mut artifacts = TrainingArtifacts {
        iterations,
        episodes: iterations * config.episodes_per_iter,
        coverage: Vec::with_capacity(iterations),
        contrastive_loss: Vec::with_capacity(iterations),
        mean_intrinsic_reward: Vec::with_capacity(iterations),
        rep_variance: Vec::with_capacity(iterations),
        tau: Vec::with_capacity(iterations),
        visitation: Vec::new(),
        window_visitation: Vec::new(),
        window_final_states: Vec::new(),
        policy: policy.clone(),
        value: value.clone(),
        contrastive: None,
        reward_trace: Vec::new(),
    };

    let mut global_step = 0u64;
    for iter in 0..iterations {
        let progress = if iterations > 1 {
            iter as f64 / (iterations - 1) as f64
        } else {
            0.0
        };

        // Rollouts.
        let mut episodes = Vec::with_capacity(config.episodes_per_iter);
        for _ in 0..config.episodes_per_iter {
            let record = rollout_episode(env, &policy, &mut engine, config, horizon, &action_spec, &mut rng)
                .map_err(|e| ctx(e, iter, "rollout"))?;
            coverage_update(&mut coverage, &record.keys);
            if let Some(n) = index_space {
                let idxs: Vec<usize> = record.keys.iter().filter_map(key_index).collect();
                for &s in &idxs {
                    debug_assert!(s < n);
                    visitation[s] += 1;
                }
                let final_state = idxs.last().copied().unwrap_or(0);
                window.push_back((idxs, final_state));
                if window.len() > config.window_episodes {
                    window.pop_front();
                }
            }
            buffer
                .append(record.trajectory.clone())
                .map_err(|e| ctx(e, iter, "buffer append"))?;
            if let RewardEngine::OracleKl { counts, .. } = &mut engine {
                let pairs: Vec<(usize, usize)> = record
                    .keys
                    .iter()
                    .take(record.trajectory.len())
                    .filter_map(key_index)
                    .zip(record.action_indices.iter().copied())
                    .collect();
                counts.push(pairs);
            }
            episodes.push(record);
        }

        // Intrinsic rewards from the pre-update snapshot.
        let rewards = assign_rewards(&engine, env, &policy, &episodes, config, progress, &mut rng)
            .map_err(|e| ctx(e, iter, "reward computation"))?;
        if config.record_reward_trace {
            for ep in &rewards {
                for &r in ep {
                    artifacts.reward_trace.push((global_step, config.reward.source, r));
                    global_step += 1;
                }
            }
        } else {
            global_step += rewards.iter().map(|e| e.len() as u64).sum::<u64>();
        }

        // Representation / baseline updates.
        let mean_loss = update_engine(&mut engine, &buffer, &episodes, config, progress, &mut rng)
            .map_err(|e| ctx(e, iter, "representation update"))?;

        // Policy and value updates on discounted intrinsic returns.
        let mut batch = PolicyBatch::default();
        let mut value_obs = Vec::new();
        let mut value_targets = Vec::new();
        for (ep, rs) in episodes.iter().zip(rewards.iter()) {
            let h = ep.trajectory.len();
            let mut returns = vec![0.0; h];
            let mut acc = 0.0;
            for t in (0..h).rev() {
                acc = rs[t] + config.gamma_rl * acc;
                returns[t] = acc;
            }
            for t in 0..h {
                let obs = ep.trajectory.state(t).to_vec();
                let baseline = value.value(&obs).map_err(|e| ctx(e, iter, "value baseline"))?;
                batch.observations.push(obs.clone());
                batch.actions.push(decode_action(&action_spec, ep.trajectory.action(t)));
                batch.advantages.push(returns[t] - baseline);
                batch.old_log_probs.push(ep.old_log_probs[t]);
                value_obs.push(obs);
                value_targets.push(returns[t]);
            }
        }
        let update_cfg = UpdateConfig {
            clip: config.ppo_clip,
            entropy_coef: config.entropy_coef,
        };
        if !batch.is_empty() && iter >= config.policy_warmup_iters {
            policy_update(&mut policy, &mut policy_opt, &batch, &update_cfg)
                .map_err(|e| ctx(e, iter, "policy update"))?;
            value
                .update(&value_obs, &value_targets)
                .map_err(|e| ctx(e, iter, "value update"))?;
        }

        // Metrics.
        coverage.mark();
        artifacts.coverage.push(coverage.count() as f64);
        artifacts.contrastive_loss.push(mean_loss);
        let steps: usize = rewards.iter().map(Vec::len).sum();
        let mean_r = if steps == 0 {
            0.0
        } else {
            rewards.iter().flatten().sum::<f64>() / steps as f64
        };
        artifacts.mean_intrinsic_reward.push(mean_r);
        let (rep_var, tau) = match &engine {
            RewardEngine::CTeC { model, .. } | RewardEngine::Etd { model, .. } => (
                representation_variance(model, &probes).map_err(|e| ctx(e, iter, "rep variance"))?,
                model.tau(),
            ),
            _ => (0.0, 1.0),
        };
        artifacts.rep_variance.push(rep_var);
        artifacts.tau.push(tau);
    }

    if let Some(n) = index_space {
        let mut window_visitation = vec![0u64; n];
        let mut window_final = vec![0u64; n];
        for (idxs, final_state) in &window {
            for &s in idxs {
                window_visitation[s] += 1;
            }
            window_final[*final_state] += 1;
        }
        artifacts.window_visitation = window_visitation;
        artifacts.window_final_states = window_final;
        artifacts.visitation = visitation;
    }
    artifacts.policy = policy;
    artifacts.value = value;
    artifacts.contrastive = match engine {
        RewardEngine::CTeC { model, .. } | RewardEngine::Etd { model, .. } => Some(model),
        _ => None,
    };
    Ok(artifacts)
}

fn index_space(env: &dyn RolloutEnv) -> Option<usize> {
    match env.state_key() {
        StateKey::Index(_) => Some(env.tabular().map(|m| m.n_states()).unwrap_or(env.obs_dim())),
        StateKey::Position(_) => None,
    }
}

fn coverage_update(coverage: &mut CoverageTracker, keys: &[StateKey]) {
    for key in keys {
        coverage.observe(key);
    }
}

fn decode_action(spec: &ActionSpec, encoded: &[f64]) -> Action {
    match spec {
        ActionSpec::Discrete(_) => {
            let mut best = 0;
            for (i, &v) in encoded.iter().enumerate() {
                if v > encoded[best] {
                    best = i;
                }
            }
            Action::Discrete(best)
        }
        ActionSpec::Continuous { .. } => Action::Continuous(encoded.to_vec()),
    }
}

fn build_engine(
    env: &dyn RolloutEnv,
    config: &TrainConfig,
    obs_dim: usize,
    action_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RewardEngine> {
    let activation = Activation::Relu;
    Ok(match config.reward.source {
        RewardSource::CTeC => {
            if config.monolithic_critic {
                let critic =
                    MonolithicCritic::new(obs_dim, action_dim, &config.encoder_hidden, activation, rng)?;
                let opt = AdamState::new(critic.net().param_count(), config.contrastive_lr);
                let tau_opt = AdamState::new(1, config.contrastive_lr);
                RewardEngine::CTeCMonolithic { critic, opt, tau_opt }
            } else {
                let model = ContrastiveModel::new(
                    obs_dim,
                    action_dim,
                    config.rep_dim,
                    &config.encoder_hidden,
                    activation,
                    config.critic_kind,
                    config.normalize_reps,
                    rng,
                )?;
                let opt = ContrastiveOptimizer::new(&model, config.contrastive_lr);
                RewardEngine::CTeC { model, opt }
            }
        }
        RewardSource::EtdLite => {
            let model = ContrastiveModel::new(
                obs_dim,
                0,
                config.rep_dim,
                &config.encoder_hidden,
                activation,
                config.critic_kind,
                config.normalize_reps,
                rng,
            )?;
            let opt = ContrastiveOptimizer::new(&model, config.contrastive_lr);
            RewardEngine::Etd {
                model,
                opt,
                memory: EpisodicMemory::new(),
            }
        }
        RewardSource::ReverseKl | RewardSource::ForwardKl => {
            let mdp = env.tabular().ok_or_else(|| {
                Error::unsupported("oracle KL rewards need a tabular environment")
            })?;
            RewardEngine::OracleKl {
                reverse: config.reward.source == RewardSource::ReverseKl,
                counts: SaCounter::new(mdp.n_states(), mdp.n_actions(), config.buffer_capacity),
            }
        }
        RewardSource::Count => RewardEngine::Count {
            table: CountTable::new(),
        },
        RewardSource::RndLite => RewardEngine::Rnd {
            module: RndModule::new(obs_dim, config.rep_dim, &config.encoder_hidden, config.contrastive_lr, rng)?,
        },
        RewardSource::IcmLite => {
            let n_actions = match env.action_spec() {
                ActionSpec::Discrete(n) => n,
                ActionSpec::Continuous { .. } => {
                    return Err(Error::unsupported("the curiosity baseline needs discrete actions"))
                }
            };
            RewardEngine::Icm {
                module: IcmModule::new(
                    obs_dim,
                    n_actions,
                    config.rep_dim,
                    &config.encoder_hidden,
                    config.contrastive_lr,
                    rng,
                )?,
            }
        }
        RewardSource::None => RewardEngine::None,
    })
}

fn rollout_episode(
    env: &mut dyn RolloutEnv,
    policy: &Policy,
    engine: &mut RewardEngine,
    config: &TrainConfig,
    horizon: usize,
    action_spec: &ActionSpec,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord> {
    let mut obs = env.reset(rng);
    let mut keys = vec![env.state_key()];
    let mut trajectory = Trajectory::start(obs.clone());
    let mut action_indices = Vec::new();
    let mut old_log_probs = Vec::new();

    // Episodic-memory and count bonuses accrue online during the rollout.
    let online = matches!(engine, RewardEngine::Etd { .. } | RewardEngine::Count { .. });
    let mut online_rewards = online.then(Vec::new);
    if let RewardEngine::Etd { model, memory, .. } = engine {
        memory.clear();
        etd_reward(memory, model, &obs)?;
    }

    for _ in 0..horizon {
        let action = policy.sample(&obs, rng)?;
        old_log_probs.push(policy.log_prob(&obs, &action)?);
        if let Action::Discrete(a) = &action {
            action_indices.push(*a);
        }
        let (next_obs, done) = env.step(&action, rng);
        keys.push(env.state_key());
        trajectory.push(action.encode(action_spec), next_obs.clone());
        match engine {
            RewardEngine::Etd { model, memory, .. } => {
                let r = config.reward.beta * etd_reward(memory, model, &next_obs)?;
                online_rewards.as_mut().unwrap().push(r);
            }
            RewardEngine::Count { table } => {
                let key = env.state_key();
                let r = config.reward.beta * table.count_bonus(&key, 1.0);
                online_rewards.as_mut().unwrap().push(r);
            }
            _ => {}
        }
        obs = next_obs;
        if done {
            trajectory.set_terminal(true);
            break;
        }
    }
    Ok(EpisodeRecord {
        trajectory,
        keys,
        action_indices,
        old_log_probs,
        online_rewards,
    })
}

fn assign_rewards(
    engine: &RewardEngine,
    env: &dyn RolloutEnv,
    policy: &Policy,
    episodes: &[EpisodeRecord],
    config: &TrainConfig,
    progress: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let beta = config.reward.beta;
    let mut out = Vec::with_capacity(episodes.len());
    match engine {
        RewardEngine::None => {
            for ep in episodes {
                out.push(vec![0.0; ep.trajectory.len()]);
            }
        }
        RewardEngine::Etd { .. } | RewardEngine::Count { .. } => {
            for ep in episodes {
                out.push(ep.online_rewards.clone().expect("online rewards recorded"));
            }
        }
        RewardEngine::CTeC { model, .. } => {
            for ep in episodes {
                let h = ep.trajectory.len();
                let rs = match config.reward.estimator {
                    Estimator::SuffixMc => {
                        let gamma = config.sampler.effective_gamma(progress);
                        ctec_reward_suffix(model, &ep.trajectory, gamma, config.reward.mc_normalize)?
                            .into_iter()
                            .map(|r| beta * r)
                            .collect()
                    }
                    Estimator::SingleSample => {
                        let mut rs = Vec::with_capacity(h);
                        for t in 0..h {
                            let delta = config.sampler.sample_offset(h - t + 1, progress, rng)?;
                            let r = ctec_reward_single(
                                model,
                                ep.trajectory.state(t),
                                ep.trajectory.action(t),
                                ep.trajectory.state(t + delta),
                            )?;
                            rs.push(beta * r);
                        }
                        rs
                    }
                };
                out.push(rs);
            }
        }
        RewardEngine::CTeCMonolithic { critic, .. } => {
            for ep in episodes {
                let h = ep.trajectory.len();
                let mut rs = Vec::with_capacity(h);
                for t in 0..h {
                    let delta = config.sampler.sample_offset(h - t + 1, progress, rng)?;
                    let score = critic.score(
                        ep.trajectory.state(t),
                        ep.trajectory.action(t),
                        ep.trajectory.state(t + delta),
                    )?;
                    rs.push(beta * -score);
                }
                out.push(rs);
            }
        }
        RewardEngine::OracleKl { reverse, counts } => {
            let mdp = env
                .tabular()
                .ok_or_else(|| Error::unsupported("oracle KL rewards need a tabular environment"))?;
            let table = policy.tabular_table(mdp.n_states())?;
            let gamma = config.sampler.effective_gamma(progress);
            let oracle = OccupancyOracle::new(mdp, &table, gamma)?;
            let marginal = oracle.anchor_weighted_marginal(&counts.counts)?;
            // Reward table over the visited pairs.
            let mut cache = vec![vec![f64::NAN; mdp.n_actions()]; mdp.n_states()];
            for ep in episodes {
                let h = ep.trajectory.len();
                let mut rs = Vec::with_capacity(h);
                for t in 0..h {
                    let s = key_index(&ep.keys[t])
                        .ok_or_else(|| Error::unsupported("oracle rewards need indexed states"))?;
                    let a = ep.action_indices[t];
                    if cache[s][a].is_nan() {
                        cache[s][a] = if *reverse {
                            exact_reverse_kl_reward(&oracle, &marginal, s, a)?.0
                        } else {
                            exact_forward_kl_reward(&oracle, &marginal, s, a)?
                        };
                    }
                    rs.push(beta * cache[s][a]);
                }
                out.push(rs);
            }
        }
        RewardEngine::Rnd { module } => {
            for ep in episodes {
                let h = ep.trajectory.len();
                let mut rs = Vec::with_capacity(h);
                for t in 0..h {
                    rs.push(beta * module.bonus(ep.trajectory.state(t + 1))?);
                }
                out.push(rs);
            }
        }
        RewardEngine::Icm { module } => {
            for ep in episodes {
                let h = ep.trajectory.len();
                let mut rs = Vec::with_capacity(h);
                for t in 0..h {
                    rs.push(
                        beta * module.bonus(
                            ep.trajectory.state(t),
                            ep.trajectory.action(t),
                            ep.trajectory.state(t + 1),
                        )?,
                    );
                }
                out.push(rs);
            }
        }
    }
    Ok(out)
}

fn update_engine(
    engine: &mut RewardEngine,
    buffer: &TrajectoryBuffer,
    episodes: &[EpisodeRecord],
    config: &TrainConfig,
    progress: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let updates = config.contrastive_updates_per_iter;
    match engine {
        RewardEngine::CTeC { model, opt } => {
            let mut total = 0.0;
            for _ in 0..updates {
                let batch = sample_batch(
                    buffer,
                    config.batch_size,
                    config.repetition_factor,
                    &config.sampler,
                    progress,
                    rng,
                )?;
                let (loss, grads) = loss_and_grads(model, &batch, &config.loss)?;
                opt.step(model, &grads)?;
                total += loss;
            }
            Ok(if updates > 0 { total / updates as f64 } else { 0.0 })
        }
        RewardEngine::CTeCMonolithic { critic, opt, tau_opt } => {
            let mut total = 0.0;
            for _ in 0..updates {
                let batch = sample_batch(
                    buffer,
                    config.batch_size,
                    config.repetition_factor,
                    &config.sampler,
                    progress,
                    rng,
                )?;
                let (loss, grads) = monolithic_loss_and_grads(critic, &batch, &config.loss)?;
                critic.net_mut().adam_step(opt, &grads.net)?;
                let mut lt = [critic.log_tau()];
                tau_opt.step(&mut lt, &[grads.log_tau])?;
                critic.set_log_tau(lt[0]);
                total += loss;
            }
            Ok(if updates > 0 { total / updates as f64 } else { 0.0 })
        }
        RewardEngine::Etd { model, opt, .. } => {
            let mut total = 0.0;
            for _ in 0..updates {
                let batch = strip_actions(sample_batch(
                    buffer,
                    config.batch_size,
                    config.repetition_factor,
                    &config.sampler,
                    progress,
                    rng,
                )?);
                let (loss, grads) = loss_and_grads(model, &batch, &config.loss)?;
                opt.step(model, &grads)?;
                total += loss;
            }
            Ok(if updates > 0 { total / updates as f64 } else { 0.0 })
        }
        RewardEngine::Rnd { module } => {
            let mut states = Vec::new();
            for ep in episodes {
                for t in 0..=ep.trajectory.len() {
                    states.push(ep.trajectory.state(t).to_vec());
                }
            }
            let mut total = 0.0;
            for _ in 0..updates.max(1) {
                total += module.train_step(&states)?;
            }
            Ok(total / updates.max(1) as f64)
        }
        RewardEngine::Icm { module } => {
            let mut batch = Vec::new();
            for ep in episodes {
                for t in 0..ep.trajectory.len() {
                    batch.push((
                        ep.trajectory.state(t).to_vec(),
                        ep.action_indices[t],
                        ep.trajectory.state(t + 1).to_vec(),
                    ));
                }
            }
            let mut total = 0.0;
            for _ in 0..updates.max(1) {
                let (inv, fwd) = module.train_step(&batch)?;
                total += inv + fwd;
            }
            Ok(total / updates.max(1) as f64)
        }
        RewardEngine::OracleKl { .. } | RewardEngine::Count { .. } | RewardEngine::None => Ok(0.0),
    }
}
