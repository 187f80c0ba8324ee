//! Shared parameters and optimizer state.

use std::sync::Mutex;

use super::{ActorCritic, AdamState, EpisodeGradients, TrainerConfig};

/// FNV-1a over the bit patterns of every parameter.
pub fn params_checksum(blocks: &[&[f64]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for block in blocks {
        for x in *block {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    h
}

/// A consistent copy of the global networks.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub nets: ActorCritic,
    pub version: u64,
    pub checksum: u64,
}

struct Inner {
    nets: ActorCritic,
    actor_adam: AdamState,
    critic_adam: AdamState,
    version: u64,
}

/// Global networks guarded by one lock, so every snapshot and every update
/// sees both networks and both optimizers at the same version.
pub struct ParameterStore {
    inner: Mutex<Inner>,
}

impl ParameterStore {
    pub fn new(nets: ActorCritic, cfg: &TrainerConfig) -> Self {
        let actor_adam = cfg.adam_state(nets.actor.params().len(), cfg.actor_lr);
        let critic_adam = cfg.adam_state(nets.critic.params().len(), cfg.critic_lr);
        Self::with_optimizers(nets, actor_adam, critic_adam)
    }

    pub fn with_optimizers(nets: ActorCritic, actor_adam: AdamState, critic_adam: AdamState) -> Self {
        Self { inner: Mutex::new(Inner { nets, actor_adam, critic_adam, version: 0 }) }
    }

    pub fn snapshot(&self) -> Snapshot {
        let g = self.inner.lock().expect("parameter store poisoned");
        Snapshot { checksum: g.nets.checksum(), nets: g.nets.clone(), version: g.version }
    }

    /// Applies one ADAM step per network and returns the new version.
    pub fn apply(&self, grads: &EpisodeGradients) -> u64 {
        let mut g = self.inner.lock().expect("parameter store poisoned");
        let Inner { nets, actor_adam, critic_adam, version } = &mut *g;
        actor_adam.step(nets.actor.params_mut(), &grads.actor);
        critic_adam.step(nets.critic.params_mut(), &grads.critic);
        *version += 1;
        *version
    }

    pub fn into_parts(self) -> (ActorCritic, AdamState, AdamState, u64) {
        let g = self.inner.into_inner().expect("parameter store poisoned");
        (g.nets, g.actor_adam, g.critic_adam, g.version)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{PhysicsConfig, Scheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store() -> (ParameterStore, usize, usize) {
        let p = PhysicsConfig::new(10, 0.2, Scheme::OnlyX);
        let cfg = TrainerConfig { hidden: vec![4], ..TrainerConfig::default() };
        let nets = ActorCritic::random(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let (na, nc) = (nets.actor.params().len(), nets.critic.params().len());
        (ParameterStore::new(nets, &cfg), na, nc)
    }

    #[test]
    fn checksum_sensitive_to_single_bit() {
        let a = [1.0f64, 2.0, 3.0];
        let mut b = a;
        b[1] = f64::from_bits(b[1].to_bits() ^ 1);
        assert_ne!(params_checksum(&[&a]), params_checksum(&[&b]));
        assert_eq!(params_checksum(&[&a]), params_checksum(&[&a[..1], &a[1..]]));
    }

    #[test]
    fn concurrent_updates_and_snapshots_stay_consistent() {
        let (store, na, nc) = store();
        let workers = 4;
        let per_worker = 50;
        std::thread::scope(|s| {
            for w in 0..workers {
                let store = &store;
                s.spawn(move || {
                    let sign = if w % 2 == 0 { 1.0 } else { -0.5 };
                    let grads = EpisodeGradients {
                        actor: vec![sign; na],
                        critic: vec![sign; nc],
                        actor_loss: 0.0,
                        critic_loss: 0.0,
                    };
                    for _ in 0..per_worker {
                        let snap = store.snapshot();
                        assert_eq!(snap.checksum, snap.nets.checksum());
                        store.apply(&grads);
                    }
                });
            }
        });
        let (nets, actor_adam, critic_adam, version) = store.into_parts();
        assert_eq!(version, (workers * per_worker) as u64);
        assert_eq!(actor_adam.step_count, version);
        assert_eq!(critic_adam.step_count, version);
        assert!(nets.actor.params().iter().all(|p| p.is_finite()));
    }
}
