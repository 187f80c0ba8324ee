//! Saves a trained policy, reloads it and compares greedy rollouts.
//!
//! cargo run --release --example checkpoint_rollout

use qfi_pulse::a3c::checkpoint::Checkpoint;
use qfi_pulse::a3c::{greedy_rollout, train};
use qfi_pulse::config::RunConfig;
use qfi_pulse::env::{PhysicsConfig, Scheme};

fn main() -> qfi_pulse::Result<()> {
    let physics = PhysicsConfig::at_squeezing_time(30, 1.0, Scheme::BothXy)?.with_intervals(20);
    let cfg = RunConfig::new(physics.clone()).with_episodes(1500).with_workers(1);
    let out = train(&cfg)?;
    let (actor_adam, critic_adam) = out.final_adam;
    let ck = Checkpoint { nets: out.final_nets, actor_adam, critic_adam };
    let dir = std::env::temp_dir().join("qfi-pulse-example");
    let path = dir.join("policy.ckpt");
    ck.save(&path)?;
    let back = Checkpoint::load(&path)?;
    let (a, ta) = greedy_rollout(&ck.nets.actor, &physics)?;
    let (b, tb) = greedy_rollout(&back.nets.actor, &physics)?;
    assert_eq!(a.actions, b.actions);
    println!("checkpoint {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    println!("greedy F_Q before/after reload: {:.6} / {:.6}", ta.final_qfi(), tb.final_qfi());
    println!("best sampled F_Q during training: {:.6}", out.best_qfi);
    Ok(())
}
