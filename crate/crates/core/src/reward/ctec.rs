//! The temporal-contrastive exploration reward.

use crate::contrastive::{ContrastiveModel, CriticKind};
use crate::error::Result;
use crate::replay::Trajectory;

/// Single-sample reward `r = -C(phi(s, a), psi(s_f))`. Nonnegative for
/// distance critics.
pub fn ctec_reward_single(
    model: &ContrastiveModel,
    state: &[f64],
    action: &[f64],
    future_state: &[f64],
) -> Result<f64> {
    let anchor = model.embed_anchor(state, action)?;
    let future = model.embed_future(future_state)?;
    Ok(-model.critic_score(&anchor, &future))
}

/// Per-step rewards over a whole episode via the discounted-suffix
/// estimator: `r_t = sum_{t'=t}^{H} w_{t'-t} * (-C(phi_t, psi_{t'}))` with
/// weights `gamma^(t'-t)`, normalized to sum to one when `mc_normalize`.
///
/// Encoder evaluations are O(H). For the squared-l2 and dot critics the
/// scalar work is O(H) too, via suffix accumulators of `psi`; the l1/l2
/// critics need the per-anchor scalar suffix (O(H^2) scalar distances).
pub fn ctec_reward_suffix(
    model: &ContrastiveModel,
    trajectory: &Trajectory,
    gamma_cl: f64,
    mc_normalize: bool,
) -> Result<Vec<f64>> {
    match model.critic_kind() {
        CriticKind::L2NoSqrt | CriticKind::Dot => {
            suffix_fast(model, trajectory, gamma_cl, mc_normalize)
        }
        CriticKind::L1 | CriticKind::L2 => {
            ctec_reward_suffix_generic(model, trajectory, gamma_cl, mc_normalize)
        }
    }
}

/// The definitional form, valid for every critic: embeds once, then takes
/// the weighted suffix of per-pair scores. Kept public as the reference
/// path the fast path is checked against.
pub fn ctec_reward_suffix_generic(
    model: &ContrastiveModel,
    trajectory: &Trajectory,
    gamma_cl: f64,
    mc_normalize: bool,
) -> Result<Vec<f64>> {
    let h = trajectory.len();
    if h == 0 {
        return Ok(Vec::new());
    }
    let (anchors, futures) = embed_trajectory(model, trajectory)?;
    let mut rewards = Vec::with_capacity(h);
    for t in 0..h {
        // Backward accumulation of sum_{t'=t}^{H} gamma^(t'-t) d(t, t').
        let mut acc = 0.0;
        for tp in (t..=h).rev() {
            let d = -model.critic_score(&anchors[t], &futures[tp]);
            acc = d + gamma_cl * acc;
        }
        rewards.push(if mc_normalize {
            acc / geometric_partial_sum(gamma_cl, h - t + 1)
        } else {
            acc
        });
    }
    Ok(rewards)
}

/// `sum_{d=0}^{len-1} gamma^d`.
fn geometric_partial_sum(gamma: f64, len: usize) -> f64 {
    if gamma == 0.0 {
        1.0
    } else if (gamma - 1.0).abs() < 1e-15 {
        len as f64
    } else {
        (1.0 - gamma.powi(len as i32)) / (1.0 - gamma)
    }
}

/// Suffix accumulation of `psi` statistics: exact for critics whose score
/// is linear or quadratic in `psi` (squared-l2 and dot).
fn suffix_fast(
    model: &ContrastiveModel,
    trajectory: &Trajectory,
    gamma_cl: f64,
    mc_normalize: bool,
) -> Result<Vec<f64>> {
    let h = trajectory.len();
    if h == 0 {
        return Ok(Vec::new());
    }
    let (anchors, futures) = embed_trajectory(model, trajectory)?;
    let d = model.rep_dim();

    // Suffix accumulators seeded at t' = H, walked down to t' = 0:
    // weight mass, sum of psi, sum of |psi|^2.
    let mut w_sum = 0.0;
    let mut psi_sum = vec![0.0; d];
    let mut psi_sq_sum = 0.0;
    let mut rewards = vec![0.0; h];
    for t in (0..=h).rev() {
        w_sum = 1.0 + gamma_cl * w_sum;
        let psi_t = &futures[t];
        let sq: f64 = psi_t.iter().map(|v| v * v).sum();
        for k in 0..d {
            psi_sum[k] = psi_t[k] + gamma_cl * psi_sum[k];
        }
        psi_sq_sum = sq + gamma_cl * psi_sq_sum;
        if t < h {
            let phi_t = &anchors[t];
            let phi_sq: f64 = phi_t.iter().map(|v| v * v).sum();
            let phi_dot_psi: f64 = phi_t.iter().zip(psi_sum.iter()).map(|(a, b)| a * b).sum();
            let unnormalized = match model.critic_kind() {
                // r = |phi - psi|^2 summed with suffix weights.
                CriticKind::L2NoSqrt => phi_sq * w_sum + psi_sq_sum - 2.0 * phi_dot_psi,
                // r = -C = +phi.psi (printed sign) or -phi.psi.
                CriticKind::Dot => {
                    if model.negate_dot() {
                        phi_dot_psi
                    } else {
                        -phi_dot_psi
                    }
                }
                _ => unreachable!("fast path only covers squared-l2 and dot"),
            };
            rewards[t] = if mc_normalize {
                unnormalized / w_sum
            } else {
                unnormalized
            };
        }
    }
    Ok(rewards)
}

fn embed_trajectory(
    model: &ContrastiveModel,
    trajectory: &Trajectory,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let h = trajectory.len();
    let mut anchors = Vec::with_capacity(h);
    for t in 0..h {
        anchors.push(model.embed_anchor(trajectory.state(t), trajectory.action(t))?);
    }
    let mut futures = Vec::with_capacity(h + 1);
    for t in 0..=h {
        futures.push(model.embed_future(trajectory.state(t))?);
    }
    Ok((anchors, futures))
}
