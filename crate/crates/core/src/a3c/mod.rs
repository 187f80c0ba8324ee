//! Asynchronous advantage actor-critic with separate policy and value networks.
//!
//! Decision `t` is taken on observation `s_t` and produces state `t + 1`, so it
//! is credited with the future-max reward `r_{t+1}` (divided by `N^2`). The
//! advantage `r~_{t+1} - V(s_t)` is held constant when differentiating the
//! policy loss.

mod adam;
pub mod checkpoint;
mod mlp;
mod store;
mod trainer;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{normalized_rewards, ActionSource, EpisodeTrace, PhysicsConfig, PulseSequence, Scheme};
use crate::error::{Error, Result};
use crate::spin::ActionKind;

pub use adam::{clip_global_norm, AdamState};
pub use mlp::{param_count, softmax, ForwardCache, Head, Mlp};
pub use store::{params_checksum, ParameterStore, Snapshot};
pub use trainer::{train, EpisodeRecord, TrainLog, TrainOutcome};

/// Learner hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub grad_clip: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Episodes between refreshes of a worker's local parameter copy.
    pub sync_every: usize,
    /// Scale applied to the initial policy output layer.
    pub actor_output_scale: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            entropy_coef: 0.0003,
            grad_clip: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            sync_every: 1,
            actor_output_scale: 0.01,
        }
    }
}

impl TrainerConfig {
    pub fn actor_dims(&self, obs_dim: usize, scheme: Scheme) -> Vec<usize> {
        let mut d = vec![obs_dim];
        d.extend(&self.hidden);
        d.push(scheme.n_actions());
        d
    }

    pub fn critic_dims(&self, obs_dim: usize) -> Vec<usize> {
        let mut d = vec![obs_dim];
        d.extend(&self.hidden);
        d.push(1);
        d
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("grad_clip", self.grad_clip),
            ("adam_epsilon", self.adam_epsilon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive (got {v})")));
            }
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::InvalidConfig("entropy_coef must be non-negative".into()));
        }
        if self.sync_every == 0 {
            return Err(Error::InvalidConfig("sync_every must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Fresh optimizer state for `n` parameters.
    pub fn adam_state(&self, n: usize, lr: f64) -> AdamState {
        AdamState::new(n, lr)
            .with_betas(self.adam_beta1, self.adam_beta2)
            .with_epsilon(self.adam_epsilon)
    }
}

/// Policy and value networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    pub scheme: Scheme,
}

impl ActorCritic {
    pub fn random(physics: &PhysicsConfig, cfg: &TrainerConfig, rng: &mut impl Rng) -> Self {
        let obs = physics.obs_dim();
        Self {
            actor: Mlp::random(&cfg.actor_dims(obs, physics.scheme), Head::Softmax, cfg.actor_output_scale, rng),
            critic: Mlp::random(&cfg.critic_dims(obs), Head::Linear, 1.0, rng),
            scheme: physics.scheme,
        }
    }

    pub fn zeros(physics: &PhysicsConfig, cfg: &TrainerConfig) -> Self {
        let obs = physics.obs_dim();
        Self {
            actor: Mlp::zeros(&cfg.actor_dims(obs, physics.scheme), Head::Softmax),
            critic: Mlp::zeros(&cfg.critic_dims(obs), Head::Linear),
            scheme: physics.scheme,
        }
    }

    pub fn checksum(&self) -> u64 {
        params_checksum(&[self.actor.params(), self.critic.params()])
    }
}

/// Action probabilities from the policy network alone.
pub fn policy(actor: &Mlp, obs: &[f64]) -> Result<Vec<f64>> {
    let logits = actor.forward(obs);
    let probs = softmax(logits.output());
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(non_finite("policy", obs, logits.output(), 0));
    }
    Ok(probs)
}

/// `(pi(.|obs), V(obs))`.
pub fn policy_value(actor: &Mlp, critic: &Mlp, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let probs = policy(actor, obs)?;
    let value = critic.forward(obs).output()[0];
    if !value.is_finite() {
        return Err(non_finite("value", obs, &[value], 0));
    }
    Ok((probs, value))
}

fn non_finite(what: &str, obs: &[f64], out: &[f64], seed: u64) -> Error {
    Error::NonFinite { context: format!("{what} network: obs={obs:?} output={out:?}"), seed }
}

/// Samples actions from the policy.
pub struct SamplingPolicy<'a, R: Rng> {
    pub actor: &'a Mlp,
    pub scheme: Scheme,
    pub rng: R,
}

impl<R: Rng> ActionSource for SamplingPolicy<'_, R> {
    fn choose(&mut self, _step: usize, observation: &[f64]) -> Result<ActionKind> {
        let probs = policy(self.actor, observation)?;
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let actions = self.scheme.actions();
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(actions[i]);
            }
        }
        Ok(actions[probs.len() - 1])
    }
}

/// Most probable action; ties go to the lowest action code.
pub struct GreedyPolicy<'a> {
    pub actor: &'a Mlp,
    pub scheme: Scheme,
}

impl ActionSource for GreedyPolicy<'_> {
    fn choose(&mut self, _step: usize, observation: &[f64]) -> Result<ActionKind> {
        let probs = policy(self.actor, observation)?;
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        Ok(self.scheme.actions()[best])
    }
}

/// Deterministic argmax rollout of the policy.
pub fn greedy_rollout(actor: &Mlp, physics: &PhysicsConfig) -> Result<(PulseSequence, EpisodeTrace)> {
    let trace = crate::env::run_episode(physics, &mut GreedyPolicy { actor, scheme: physics.scheme })?;
    Ok((PulseSequence::new(physics, trace.actions.clone()), trace))
}

/// Unclipped loss gradients for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeGradients {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

impl EpisodeGradients {
    pub fn is_finite(&self) -> bool {
        self.actor_loss.is_finite()
            && self.critic_loss.is_finite()
            && self.actor.iter().chain(&self.critic).all(|g| g.is_finite())
    }

    pub fn clip(&mut self, max_norm: f64) {
        clip_global_norm(&mut self.actor, max_norm);
        clip_global_norm(&mut self.critic, max_norm);
    }
}

/// Gradients of
/// `sum_t [-log pi(a_t|s_t) A_t - beta H(pi(.|s_t))]` (policy) and
/// `sum_t (V(s_t) - r~_{t+1})^2` (value).
pub fn episode_gradients(
    nets: &ActorCritic,
    trace: &EpisodeTrace,
    n_atoms: usize,
    entropy_coef: f64,
) -> EpisodeGradients {
    let targets = normalized_rewards(&trace.rewards, n_atoms);
    let actions = nets.scheme.actions();
    let mut actor_grad = vec![0.0; nets.actor.params().len()];
    let mut critic_grad = vec![0.0; nets.critic.params().len()];
    let (mut actor_loss, mut critic_loss) = (0.0, 0.0);

    for (t, (obs, action)) in trace.observations.iter().zip(&trace.actions).enumerate() {
        let target = targets[t + 1];
        let vcache = nets.critic.forward(obs);
        let value = vcache.output()[0];
        let advantage = target - value;
        critic_loss += advantage * advantage;
        nets.critic.backward(&vcache, &[2.0 * (value - target)], &mut critic_grad);

        let pcache = nets.actor.forward(obs);
        let probs = softmax(pcache.output());
        let chosen = actions.iter().position(|a| a == action).expect("trace action is legal for its scheme");
        let entropy: f64 = -probs.iter().map(|p| p * p.ln()).sum::<f64>();
        actor_loss += -probs[chosen].ln() * advantage - entropy_coef * entropy;
        // d/dz_k: A (pi_k - [k = a]) + beta pi_k (ln pi_k + H)
        let d_logits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let onehot = if k == chosen { 1.0 } else { 0.0 };
                advantage * (p - onehot) + entropy_coef * p * (p.ln() + entropy)
            })
            .collect();
        nets.actor.backward(&pcache, &d_logits, &mut actor_grad);
    }
    EpisodeGradients { actor: actor_grad, critic: critic_grad, actor_loss, critic_loss }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{replay, run_episode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_physics(scheme: Scheme) -> PhysicsConfig {
        PhysicsConfig::new(10, 0.25, scheme).with_intervals(5)
    }

    fn small_cfg() -> TrainerConfig {
        TrainerConfig { hidden: vec![8, 8], actor_output_scale: 1.0, ..TrainerConfig::default() }
    }

    #[test]
    fn zero_nets_are_uniform() {
        for scheme in [Scheme::OnlyX, Scheme::BothXy] {
            let p = small_physics(scheme);
            let nets = ActorCritic::zeros(&p, &TrainerConfig::default());
            let (probs, v) = policy_value(&nets.actor, &nets.critic, &[0.3; 6]).unwrap();
            let k = scheme.n_actions() as f64;
            assert_eq!(probs.len(), scheme.n_actions());
            assert!(probs.iter().all(|&x| (x - 1.0 / k).abs() < 1e-15));
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn probabilities_normalized_for_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = small_physics(Scheme::BothXy);
        let cfg = TrainerConfig { actor_output_scale: 5.0, ..TrainerConfig::default() };
        for _ in 0..1000 {
            let nets = ActorCritic::random(&p, &cfg, &mut rng);
            let obs: Vec<f64> = (0..6).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
            let (probs, v) = policy_value(&nets.actor, &nets.critic, &obs).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|&x| x > 0.0));
            assert!(v.is_finite());
        }
    }

    #[test]
    fn uniform_greedy_rollout_is_all_free() {
        let p = PhysicsConfig::new(12, 0.2, Scheme::BothXy).with_intervals(7);
        let nets = ActorCritic::zeros(&p, &TrainerConfig::default());
        let (seq, trace) = greedy_rollout(&nets.actor, &p).unwrap();
        assert_eq!(seq.actions, vec![ActionKind::Free; 7]);
        assert_eq!(replay(&p, &seq.actions).unwrap().qfi_series, trace.qfi_series);
    }

    #[test]
    fn greedy_rollout_length_and_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = PhysicsConfig::new(20, 0.15, Scheme::BothXy).with_intervals(11);
        let cfg = TrainerConfig { actor_output_scale: 3.0, ..TrainerConfig::default() };
        for _ in 0..5 {
            let nets = ActorCritic::random(&p, &cfg, &mut rng);
            let (seq, trace) = greedy_rollout(&nets.actor, &p).unwrap();
            assert_eq!(seq.actions.len(), 11);
            assert_eq!(seq.replay().unwrap().qfi_series, trace.qfi_series);
        }
    }

    fn sampled_trace(nets: &ActorCritic, p: &PhysicsConfig, seed: u64) -> EpisodeTrace {
        let mut src = SamplingPolicy { actor: &nets.actor, scheme: p.scheme, rng: ChaCha8Rng::seed_from_u64(seed) };
        run_episode(p, &mut src).unwrap()
    }

    fn actor_loss(nets: &ActorCritic, trace: &EpisodeTrace, n: usize, beta: f64) -> f64 {
        episode_gradients(nets, trace, n, beta).actor_loss
    }

    /// Value-network loss evaluated from scratch, independent of the backward pass.
    fn critic_loss_direct(critic: &Mlp, trace: &EpisodeTrace, n: usize) -> f64 {
        let targets = normalized_rewards(&trace.rewards, n);
        trace
            .observations
            .iter()
            .enumerate()
            .map(|(t, o)| (critic.forward(o).output()[0] - targets[t + 1]).powi(2))
            .sum()
    }

    /// Policy loss evaluated from scratch, with the advantage frozen from `frozen`.
    fn actor_loss_direct(actor: &Mlp, frozen: &ActorCritic, trace: &EpisodeTrace, n: usize, beta: f64) -> f64 {
        let targets = normalized_rewards(&trace.rewards, n);
        let actions = frozen.scheme.actions();
        trace
            .observations
            .iter()
            .zip(&trace.actions)
            .enumerate()
            .map(|(t, (o, a))| {
                let adv = targets[t + 1] - frozen.critic.forward(o).output()[0];
                let probs = softmax(actor.forward(o).output());
                let k = actions.iter().position(|x| x == a).unwrap();
                let h: f64 = -probs.iter().map(|p| p * p.ln()).sum::<f64>();
                -probs[k].ln() * adv - beta * h
            })
            .sum()
    }

    fn assert_close(analytic: &[f64], fd: &[f64], what: &str) {
        let scale = fd.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(scale > 0.0, "{what}: vanishing gradient");
        for (i, (a, f)) in analytic.iter().zip(fd).enumerate() {
            let tol = 1e-4 * f.abs().max(1e-2 * scale);
            assert!((a - f).abs() <= tol, "{what}[{i}]: analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let n = 10;
        let beta = 0.05;
        for seed in 0..20u64 {
            let scheme = if seed % 2 == 0 { Scheme::OnlyX } else { Scheme::BothXy };
            let p = small_physics(scheme);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let nets = ActorCritic::random(&p, &small_cfg(), &mut rng);
            let trace = sampled_trace(&nets, &p, seed);
            let g = episode_gradients(&nets, &trace, n, beta);
            assert!((g.actor_loss - actor_loss_direct(&nets.actor, &nets, &trace, n, beta)).abs() < 1e-12);
            assert!((g.critic_loss - critic_loss_direct(&nets.critic, &trace, n)).abs() < 1e-12);

            let h = 1e-5;
            let fd_actor: Vec<f64> = (0..nets.actor.params().len())
                .map(|i| {
                    let mut a = nets.actor.clone();
                    a.params_mut()[i] += h;
                    let up = actor_loss_direct(&a, &nets, &trace, n, beta);
                    a.params_mut()[i] -= 2.0 * h;
                    let down = actor_loss_direct(&a, &nets, &trace, n, beta);
                    (up - down) / (2.0 * h)
                })
                .collect();
            let fd_critic: Vec<f64> = (0..nets.critic.params().len())
                .map(|i| {
                    let mut c = nets.critic.clone();
                    c.params_mut()[i] += h;
                    let up = critic_loss_direct(&c, &trace, n);
                    c.params_mut()[i] -= 2.0 * h;
                    let down = critic_loss_direct(&c, &trace, n);
                    (up - down) / (2.0 * h)
                })
                .collect();
            assert_close(&g.actor, &fd_actor, &format!("actor seed {seed}"));
            assert_close(&g.critic, &fd_critic, &format!("critic seed {seed}"));
        }
    }

    #[test]
    fn zero_advantage_and_entropy_give_zero_actor_gradient() {
        let p = small_physics(Scheme::OnlyX);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nets = ActorCritic::random(&p, &small_cfg(), &mut rng);
        // Constant rewards and a critic that outputs exactly that constant.
        let trace = replay(&p, &[ActionKind::Free; 5]).unwrap();
        let mut trace = trace;
        trace.rewards = vec![50.0; 6];
        let target = 50.0 / 100.0;
        nets.critic = Mlp::zeros(nets.critic.dims(), Head::Linear);
        let np = nets.critic.params().len();
        nets.critic.params_mut()[np - 1] = target;
        let g = episode_gradients(&nets, &trace, 10, 0.0);
        assert!(g.actor.iter().all(|&x| x == 0.0));
        assert!(g.critic.iter().all(|&x| x == 0.0));
        assert_eq!(g.critic_loss, 0.0);
    }

    #[test]
    fn actor_loss_helper_consistency() {
        let p = small_physics(Scheme::BothXy);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let nets = ActorCritic::random(&p, &small_cfg(), &mut rng);
        let trace = sampled_trace(&nets, &p, 1);
        let a = actor_loss(&nets, &trace, 10, 0.01);
        assert!(a.is_finite());
    }
}
