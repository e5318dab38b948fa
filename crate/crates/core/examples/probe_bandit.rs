use tec_core::agent::{train, TrainConfig};
use tec_core::contrastive::{CriticKind, LossConfig, LossKind};
use tec_core::env::{bandit, build_bandit_mdp, TabularEnv};
use tec_core::replay::SamplerConfig;
use tec_core::reward::{Estimator, RewardSource, RewardSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let source = match args.get(1).map(String::as_str) {
        Some("etd") => RewardSource::EtdLite,
        Some("rkl") => RewardSource::ReverseKl,
        _ => RewardSource::CTeC,
    };
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);

    for seed in 0..seeds {
        let t0 = std::time::Instant::now();
        let mut env = TabularEnv::new(build_bandit_mdp());
        let config = TrainConfig {
            total_episodes: episodes,
            episodes_per_iter: 20,
            gamma_rl: 0.99,
            policy_lr: 0.02,
            value_lr: 0.1,
            contrastive_lr: 3e-3,
            entropy_coef: 0.03,
            ppo_clip: Some(0.2),
            contrastive_updates_per_iter: 4,
            policy_warmup_iters: 50,
            batch_size: 64,
            reward: RewardSpec {
                source,
                estimator: Estimator::SingleSample,
                mc_normalize: false,
                beta: 1.0,
            },
            sampler: SamplerConfig::geometric(0.99),
            loss: LossConfig::new(LossKind::InfoNce, 0.0),
            critic_kind: CriticKind::L2,
            normalize_reps: true,
            rep_dim: 8,
            encoder_hidden: vec![32, 32],
            policy_hidden: vec![],
            buffer_capacity: 256,
            window_episodes: 1000,
            probe_states: 5,
            seed,
            ..TrainConfig::default()
        };
        let artifacts = train(&mut env, &config).unwrap();
        let root_obs = tec_core::env::one_hot(5, bandit::ROOT);
        let probs = artifacts.policy.action_probs(&root_obs).unwrap();
        let mode = if probs[bandit::ACTION_LEFT] > probs[bandit::ACTION_RIGHT] {
            "LEFT"
        } else {
            "RIGHT"
        };
        let visit = &artifacts.window_visitation;
        let argmax_state = (0..5).max_by_key(|&s| visit[s]).unwrap();
        println!(
            "seed {seed}: mode {mode} probs [{:.3}, {:.3}] window visits {:?} argmax {argmax_state} mean_r last {:.4} t={:.1}s",
            probs[0], probs[1], visit, artifacts.mean_intrinsic_reward.last().unwrap(), t0.elapsed().as_secs_f64()
        );
    }
}
