//! Proximal Policy Optimization on the combined extrinsic + intrinsic
//! reward stream: rollout storage, GAE, and clipped-surrogate updates.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::neural::{log_softmax, AdamState, Mlp, NetError};

#[derive(Debug, Error, PartialEq)]
pub enum PpoError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("rollout buffer is empty")]
    EmptyBuffer,
    #[error("rollout buffer must be finalized before updating")]
    NotFinalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda_gae: f64,
    pub clip_epsilon: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub steps_per_rollout: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda_gae: 0.95,
            clip_epsilon: 0.2,
            epochs_per_update: 4,
            minibatch_size: 256,
            steps_per_rollout: 2048,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 3e-4,
        }
    }
}

/// One stored environment step. `obs` is the policy-ready input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub extrinsic: f64,
    pub intrinsic: f64,
    pub done: bool,
    /// True when `done` was a step-cap cut rather than a terminal event.
    /// GAE then bootstraps `next_value` instead of zero, so episode clocks
    /// invisible to the value net do not corrupt its targets.
    pub truncated: bool,
    /// V(s_{t+1}) for truncated steps; ignored otherwise.
    pub next_value: f64,
}

impl Transition {
    /// A transition for an ordinary (non-truncated) step.
    pub fn step(
        obs: Vec<f64>,
        action: usize,
        log_prob: f64,
        value: f64,
        extrinsic: f64,
        intrinsic: f64,
        done: bool,
    ) -> Transition {
        Transition {
            obs,
            action,
            log_prob,
            value,
            extrinsic,
            intrinsic,
            done,
            truncated: false,
            next_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    transitions: Vec<Transition>,
    advantages: Option<Vec<f64>>,
    returns: Option<Vec<f64>>,
}

impl RolloutBuffer {
    pub fn with_capacity(n: usize) -> Self {
        RolloutBuffer { transitions: Vec::with_capacity(n), advantages: None, returns: None }
    }

    pub fn push(&mut self, t: Transition) {
        debug_assert!(self.advantages.is_none(), "pushing into a finalized buffer");
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn advantages(&self) -> Option<&[f64]> {
        self.advantages.as_deref()
    }

    pub fn returns(&self) -> Option<&[f64]> {
        self.returns.as_deref()
    }

    /// Computes GAE advantages and returns over the combined reward
    /// e_t + i_t, then normalizes advantages to zero mean, unit variance.
    /// `bootstrap_value` is V(s_T) for a rollout cut mid-episode.
    pub fn finalize(&mut self, bootstrap_value: f64, gamma: f64, lambda: f64) -> Result<(), PpoError> {
        let n = self.transitions.len();
        if n == 0 {
            return Err(PpoError::EmptyBuffer);
        }
        let mut advantages = vec![0.0; n];
        let mut acc = 0.0;
        for t in (0..n).rev() {
            let tr = &self.transitions[t];
            let reward = tr.extrinsic + tr.intrinsic;
            // Terminal steps stop both bootstrap and accumulation; truncated
            // steps stop accumulation but keep the bootstrap.
            let next_value = if !tr.done {
                if t + 1 < n { self.transitions[t + 1].value } else { bootstrap_value }
            } else if tr.truncated {
                tr.next_value
            } else {
                0.0
            };
            let delta = reward + gamma * next_value - tr.value;
            if tr.done {
                acc = 0.0;
            }
            acc = delta + gamma * lambda * acc;
            advantages[t] = acc;
        }
        let returns = advantages
            .iter()
            .zip(&self.transitions)
            .map(|(a, t)| a + t.value)
            .collect();
        normalize_in_place(&mut advantages);
        self.advantages = Some(advantages);
        self.returns = Some(returns);
        Ok(())
    }
}

fn normalize_in_place(xs: &mut [f64]) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 0.0 {
        for x in xs.iter_mut() {
            *x = (*x - mean) / std;
        }
    } else {
        xs.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Per-episode discounted return G_t, resetting at done flags.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            acc = 0.0;
        }
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Raw generalized advantage estimation. Returns (advantages, returns)
/// where returns_t = A_t + V(s_t).
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        acc = delta + gamma * lambda * not_done * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// The clipped PPO objective for one sample:
/// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A).
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Samples an action from the policy's softmax and reports its
/// log-probability together with the value estimate.
pub fn act(
    policy: &mut Mlp,
    value_net: &mut Mlp,
    obs_input: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(usize, f64, f64), PpoError> {
    let logits = policy.forward_logits(obs_input)?;
    let log_probs = log_softmax(&logits);
    let u: f64 = rng.random_range(0.0..1.0);
    let mut cumulative = 0.0;
    let mut action = log_probs.len() - 1;
    for (i, lp) in log_probs.iter().enumerate() {
        cumulative += lp.exp();
        if u < cumulative {
            action = i;
            break;
        }
    }
    let value = value_net.forward(obs_input)?[0];
    Ok((action, log_probs[action], value))
}

/// Diagnostics from one PPO update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean negative clipped surrogate.
    pub policy_loss: f64,
    /// Mean squared value error (before the value_coef scale).
    pub value_loss: f64,
    /// Mean policy entropy.
    pub entropy: f64,
    /// Fraction of samples whose ratio left the clip interval.
    pub clip_fraction: f64,
    /// Mean old-minus-new log-probability.
    pub approx_kl: f64,
}

/// Per-sample policy loss and its gradient at the logits.
///
/// The loss is -(surrogate + entropy_coef * H). Working at the logits keeps
/// the softmax/log cancellation exact, so tiny probabilities cannot blow up
/// the chain rule.
fn policy_loss_grad(
    logits: &[f64],
    action: usize,
    old_log_prob: f64,
    advantage: f64,
    epsilon: f64,
    entropy_coef: f64,
) -> (f64, Vec<f64>, bool, f64) {
    let log_probs = log_softmax(logits);
    let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
    let ratio = (log_probs[action] - old_log_prob).exp();
    let surrogate = clipped_surrogate(ratio, advantage, epsilon);
    let entropy: f64 = -log_probs.iter().zip(&probs).map(|(lp, p)| p * lp).sum::<f64>();
    let loss = -(surrogate + entropy_coef * entropy);

    // d surrogate / d log_prob(action): the min follows the unclipped branch
    // when it is the smaller one (or the ratio is inside the interval, where
    // both branches coincide); a saturated clip contributes zero gradient.
    let clipped_out = ratio < 1.0 - epsilon || ratio > 1.0 + epsilon;
    let unclipped = ratio * advantage;
    let saturated = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    let surr_grad_lp = if !clipped_out || unclipped <= saturated { ratio * advantage } else { 0.0 };

    let mut grad = vec![0.0; logits.len()];
    for i in 0..logits.len() {
        let indicator = if i == action { 1.0 } else { 0.0 };
        let d_logp = indicator - probs[i];
        let d_entropy = -probs[i] * (log_probs[i] + entropy);
        grad[i] = -(surr_grad_lp * d_logp + entropy_coef * d_entropy);
    }
    let kl = old_log_prob - log_probs[action];
    (loss, grad, clipped_out, kl)
}

/// Runs `epochs_per_update` epochs of shuffled minibatch updates maximizing
/// the clipped surrogate plus entropy bonus minus the value penalty.
pub fn ppo_update(
    buffer: &RolloutBuffer,
    policy: &mut Mlp,
    value_net: &mut Mlp,
    policy_adam: &mut AdamState,
    value_adam: &mut AdamState,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, PpoError> {
    if buffer.is_empty() {
        return Err(PpoError::EmptyBuffer);
    }
    let advantages = buffer.advantages().ok_or(PpoError::NotFinalized)?;
    let returns = buffer.returns().ok_or(PpoError::NotFinalized)?;
    let transitions = buffer.transitions();
    let n = transitions.len();
    let mut indices: Vec<usize> = (0..n).collect();

    let mut sum_policy_loss = 0.0;
    let mut sum_value_loss = 0.0;
    let mut sum_entropy = 0.0;
    let mut sum_kl = 0.0;
    let mut clipped_count = 0usize;
    let mut samples = 0usize;

    for _ in 0..cfg.epochs_per_update {
        indices.shuffle(rng);
        for batch in indices.chunks(cfg.minibatch_size.max(1)) {
            policy.zero_grad();
            value_net.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let t = &transitions[i];
                let logits = policy.forward_logits(&t.obs)?;
                let (loss, mut grad, clipped, kl) = policy_loss_grad(
                    &logits,
                    t.action,
                    t.log_prob,
                    advantages[i],
                    cfg.clip_epsilon,
                    cfg.entropy_coef,
                );
                for g in grad.iter_mut() {
                    *g *= scale;
                }
                policy.backward_from_logits(&grad)?;

                let v = value_net.forward(&t.obs)?[0];
                let v_err = v - returns[i];
                value_net.backward(&[cfg.value_coef * 2.0 * v_err * scale])?;

                let log_probs = log_softmax(&logits);
                let entropy: f64 =
                    -log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>();
                sum_policy_loss += loss + cfg.entropy_coef * entropy; // -surrogate only
                sum_value_loss += v_err * v_err;
                sum_entropy += entropy;
                sum_kl += kl;
                clipped_count += usize::from(clipped);
                samples += 1;
            }
            policy_adam.step(policy);
            value_adam.step(value_net);
        }
    }

    let denom = samples.max(1) as f64;
    Ok(UpdateStats {
        policy_loss: sum_policy_loss / denom,
        value_loss: sum_value_loss / denom,
        entropy: sum_entropy / denom,
        clip_fraction: clipped_count as f64 / denom,
        approx_kl: sum_kl / denom,
    })
}
