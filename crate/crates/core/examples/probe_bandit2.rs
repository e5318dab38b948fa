use tec_core::agent::{train, TrainConfig};
use tec_core::contrastive::{CriticKind, LossConfig, LossKind};
use tec_core::env::{build_bandit_mdp, one_hot, TabularEnv};
use tec_core::oracle::{critic_logratio_correlation, exact_reverse_kl_reward, OccupancyOracle};
use tec_core::replay::SamplerConfig;
use tec_core::reward::{Estimator, RewardSource, RewardSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let critic = match args.get(1).map(String::as_str) {
        Some("l1") => CriticKind::L1,
        Some("dot") => CriticKind::Dot,
        Some("l2ns") => CriticKind::L2NoSqrt,
        _ => CriticKind::L2,
    };
    let normalize = args.get(2).map(String::as_str) != Some("raw");
    let mdp = build_bandit_mdp();
    let mut env = TabularEnv::new(mdp.clone());
    let config = TrainConfig {
        total_episodes: 10_000,
        episodes_per_iter: 20,
        policy_warmup_iters: usize::MAX, // policy stays uniform
        gamma_rl: 0.99,
        contrastive_lr: 3e-3,
        contrastive_updates_per_iter: 4,
        batch_size: 64,
        reward: RewardSpec {
            source: RewardSource::CTeC,
            estimator: Estimator::SingleSample,
            mc_normalize: true,
            beta: 1.0,
        },
        sampler: SamplerConfig::geometric(0.99),
        loss: LossConfig::new(LossKind::InfoNce, 0.0),
        critic_kind: critic,
        normalize_reps: normalize,
        rep_dim: 8,
        encoder_hidden: vec![32, 32],
        policy_hidden: vec![],
        buffer_capacity: 256,
        probe_states: 5,
        seed: 0,
        ..TrainConfig::default()
    };
    let artifacts = train(&mut env, &config).unwrap();
    let model = artifacts.contrastive.unwrap();
    println!("tau = {:.4}", model.tau());

    // Exact occupancies under the uniform behavior policy.
    let oracle = OccupancyOracle::uniform_policy(&mdp, 0.99).unwrap();
    let weights = vec![vec![1.0; 2]; 5]; // uniform anchor weights
    let marginal = oracle.anchor_weighted_marginal(&weights).unwrap();

    let names = ["root", "L1", "L2", "R1", "R2"];
    let mut learned = vec![vec![0.0; 2]; 5];
    let mut exact = vec![vec![0.0; 2]; 5];
    for s in 0..5 {
        for a in 0..2 {
            let cond = oracle.exact_sa_occupancy(s, a).unwrap();
            let anchor = model.embed_anchor(&one_hot(5, s), &one_hot(2, a)).unwrap();
            let mut er = 0.0;
            for sf in 0..5 {
                let rep = model.embed_future(&one_hot(5, sf)).unwrap();
                er += cond[sf] * -model.critic_score(&anchor, &rep);
            }
            learned[s][a] = er;
            exact[s][a] = exact_reverse_kl_reward(&oracle, &marginal, s, a).unwrap().0;
        }
    }
    println!("state-action expected rewards (learned distance | oracle reverse-KL):");
    for s in 0..5 {
        println!(
            "  {:>4}: a0 {:.4} | {:.4}   a1 {:.4} | {:.4}",
            names[s], learned[s][0], exact[s][0], learned[s][1], exact[s][1]
        );
    }

    // Hypothetical branch returns: roll the state distribution forward 30
    // steps with uniform actions after the first.
    for (label, table) in [("learned", &learned), ("oracle", &exact)] {
        for (branch, a0) in [("left", 0usize), ("right", 1usize)] {
            let mut dist = vec![0.0; 5];
            dist[0] = 1.0;
            let mut ret = 0.0;
            let mut gamma_t = 1.0;
            for t in 0..30 {
                for s in 0..5 {
                    if dist[s] == 0.0 {
                        continue;
                    }
                    let r = if t == 0 { table[s][a0] } else { (table[s][0] + table[s][1]) / 2.0 };
                    ret += gamma_t * dist[s] * r;
                }
                let mut next = vec![0.0; 5];
                for s in 0..5 {
                    if dist[s] == 0.0 {
                        continue;
                    }
                    let row: Vec<f64> = if t == 0 {
                        mdp.row(s, a0).to_vec()
                    } else {
                        (0..5).map(|sf| (mdp.row(s, 0)[sf] + mdp.row(s, 1)[sf]) / 2.0).collect()
                    };
                    for sf in 0..5 {
                        next[sf] += dist[s] * row[sf];
                    }
                }
                dist = next;
                gamma_t *= 0.99;
            }
            println!("{label} return ({branch}) = {ret:.4}");
        }
    }

    let samples: Vec<(usize, usize)> = (0..5).flat_map(|s| (0..2).map(move |a| (s, a))).collect();
    let corr = critic_logratio_correlation(&model, &oracle, &marginal, &samples).unwrap();
    println!("critic-logratio correlation: {corr:.4}");
}
