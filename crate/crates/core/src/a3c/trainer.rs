//! Worker loop and run bookkeeping.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{episode_gradients, AdamState, greedy_rollout, ActorCritic, ParameterStore, SamplingPolicy};
use crate::config::RunConfig;
use crate::env::{run_episode, PulseSequence};
use crate::error::{Error, Result};

/// Per-episode learning-curve entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub worker: usize,
    pub episode_seed: u64,
    pub final_qfi: f64,
    /// Best final-step `F_Q` over episodes `0..=episode`.
    pub best_qfi: f64,
    pub total_reward: f64,
    pub pulses: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// Store version the episode's parameters were copied from.
    pub params_version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub workers: usize,
    pub records: Vec<EpisodeRecord>,
    pub wall_clock_secs: f64,
}

impl TrainLog {
    pub fn learning_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_qfi).collect()
    }

    /// Moving average of the sampled final `F_Q` over `window` episodes.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let xs: Vec<f64> = self.records.iter().map(|r| r.final_qfi).collect();
        let w = window.max(1);
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        for i in 0..xs.len() {
            acc += xs[i];
            if i >= w {
                acc -= xs[i - w];
            }
            out.push(acc / (i + 1).min(w) as f64);
        }
        out
    }
}

pub struct TrainOutcome {
    /// Global networks and optimizer state after the last update.
    pub final_nets: ActorCritic,
    pub final_adam: (AdamState, AdamState),
    /// Local parameters the best-scoring episode was sampled with.
    pub best_nets: ActorCritic,
    pub log: TrainLog,
    /// Highest-`F_Q` sequence among sampled episodes and the final greedy rollout.
    pub best: PulseSequence,
    pub best_qfi: f64,
    pub greedy: PulseSequence,
    pub greedy_qfi: f64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sampling seed of episode `index` in a run seeded with `seed`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    splitmix(seed ^ splitmix(index as u64))
}

struct Best {
    episode: usize,
    qfi: f64,
    actions: Vec<crate::spin::ActionKind>,
    nets: ActorCritic,
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let physics = &cfg.physics;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = ActorCritic::random(physics, &cfg.trainer, &mut init_rng);
    let store = ParameterStore::new(initial.clone(), &cfg.trainer);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let records = Mutex::new(Vec::with_capacity(cfg.episodes));
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let bests: Mutex<Vec<Best>> = Mutex::new(Vec::new());

    std::thread::scope(|s| {
        for worker in 0..cfg.workers {
            let (store, next, abort, records, failure, bests) = (&store, &next, &abort, &records, &failure, &bests);
            s.spawn(move || {
                let mut local = store.snapshot();
                let mut done = 0usize;
                let mut best: Option<Best> = None;
                let mut mine = Vec::new();
                while !abort.load(Ordering::Relaxed) {
                    let e = next.fetch_add(1, Ordering::Relaxed);
                    if e >= cfg.episodes {
                        break;
                    }
                    if done > 0 && done.is_multiple_of(cfg.trainer.sync_every) {
                        local = store.snapshot();
                    }
                    done += 1;
                    let eseed = episode_seed(cfg.seed, e);
                    let outcome = (|| {
                        let mut src = SamplingPolicy {
                            actor: &local.nets.actor,
                            scheme: physics.scheme,
                            rng: ChaCha8Rng::seed_from_u64(eseed),
                        };
                        let trace = run_episode(physics, &mut src).map_err(|e| match e {
                            Error::NonFinite { context, .. } => Error::NonFinite { context, seed: eseed },
                            other => other,
                        })?;
                        let mut g = episode_gradients(&local.nets, &trace, physics.n_atoms, cfg.trainer.entropy_coef);
                        if !g.is_finite() {
                            return Err(Error::NonFinite {
                                context: format!(
                                    "loss at episode {e} (actor {}, critic {})",
                                    g.actor_loss, g.critic_loss
                                ),
                                seed: eseed,
                            });
                        }
                        g.clip(cfg.trainer.grad_clip);
                        store.apply(&g);
                        Ok((trace, g))
                    })();
                    let (trace, g) = match outcome {
                        Ok(v) => v,
                        Err(err) => {
                            abort.store(true, Ordering::Relaxed);
                            failure.lock().unwrap().get_or_insert(err);
                            break;
                        }
                    };
                    let q = trace.final_qfi();
                    let better = match &best {
                        None => true,
                        Some(b) => q > b.qfi || (q == b.qfi && e < b.episode),
                    };
                    if better {
                        best = Some(Best { episode: e, qfi: q, actions: trace.actions.clone(), nets: local.nets.clone() });
                    }
                    mine.push(EpisodeRecord {
                        episode: e,
                        worker,
                        episode_seed: eseed,
                        final_qfi: q,
                        best_qfi: 0.0,
                        total_reward: trace.total_reward(),
                        pulses: trace.pulse_count(),
                        actor_loss: g.actor_loss,
                        critic_loss: g.critic_loss,
                        params_version: local.version,
                    });
                }
                records.lock().unwrap().extend(mine);
                if let Some(b) = best {
                    bests.lock().unwrap().push(b);
                }
            });
        }
    });

    if let Some(err) = failure.into_inner().unwrap() {
        return Err(err);
    }
    let mut records = records.into_inner().unwrap();
    records.sort_by_key(|r| r.episode);
    let mut running = f64::NEG_INFINITY;
    for r in &mut records {
        running = running.max(r.final_qfi);
        r.best_qfi = running;
    }

    let (final_nets, actor_adam, critic_adam, _) = store.into_parts();
    let (greedy, greedy_trace) = greedy_rollout(&final_nets.actor, physics)?;
    let greedy_qfi = greedy_trace.final_qfi();

    let mut bests = bests.into_inner().unwrap();
    bests.sort_by(|a, b| b.qfi.total_cmp(&a.qfi).then(a.episode.cmp(&b.episode)));
    let sampled = bests.into_iter().next().expect("at least one episode ran");
    let (best, best_qfi, best_nets) = if greedy_qfi > sampled.qfi {
        (greedy.clone(), greedy_qfi, final_nets.clone())
    } else {
        (PulseSequence::new(physics, sampled.actions), sampled.qfi, sampled.nets)
    };

    let log = TrainLog { seed: cfg.seed, workers: cfg.workers, records, wall_clock_secs: start.elapsed().as_secs_f64() };
    Ok(TrainOutcome { final_nets, final_adam: (actor_adam, critic_adam), best_nets, log, best, best_qfi, greedy, greedy_qfi })
}
