//! Trains one configuration and reports F_Q and Ramsey precision.
//!
//! cargo run --release --example train_point -- <n_atoms> <only-x|both-xy> [episodes] [seed] [total_time]

use qfi_pulse::a3c::train;
use qfi_pulse::config::RunConfig;
use qfi_pulse::env::{PhysicsConfig, Scheme};
use qfi_pulse::interferometer::{evaluate_sequence, DEFAULT_PHI0};

fn main() -> qfi_pulse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(100);
    let scheme: Scheme = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(Scheme::OnlyX);
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8000);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut physics = PhysicsConfig::at_squeezing_time(n, 1.0, scheme)?;
    if let Some(t) = args.get(4).and_then(|s| s.parse().ok()) {
        physics.total_time = t;
    }
    let mut cfg = RunConfig::new(physics).with_seed(seed).with_episodes(episodes);
    let env = |k: &str| std::env::var(k).ok().and_then(|v| v.parse::<f64>().ok());
    if let Some(v) = env("ENT") { cfg.trainer.entropy_coef = v; }
    if let Some(v) = env("ALR") { cfg.trainer.actor_lr = v; }
    if let Some(v) = env("CLR") { cfg.trainer.critic_lr = v; }
    if let Some(v) = env("OSCALE") { cfg.trainer.actor_output_scale = v; }
    if let Some(v) = env("WORKERS") { cfg.workers = v as usize; }
    if let Some(v) = env("NT") { cfg.physics.n_intervals = v as usize; }
    if std::env::var("OBST").is_ok() { cfg.physics.observe_time = true; }
    let out = train(&cfg)?;
    let curve = out.log.learning_curve();
    let ma = out.log.moving_average(200);
    for e in (0..episodes).step_by((episodes / 10).max(1)) {
        println!("episode {e:5}: best {:.2}  avg200 {:.2}", curve[e], ma[e]);
    }
    let ev = evaluate_sequence(&out.best, n, DEFAULT_PHI0)?;
    let n2 = (n * n) as f64;
    println!(
        "N={n} {scheme} T={:.5}: F_Q/N^2 = {:.4}, greedy {:.4}, pulses {}, dphi*N = {:.3}, {:.1} s",
        cfg.physics.total_time,
        out.best_qfi / n2,
        out.greedy_qfi / n2,
        out.best.actions.iter().filter(|a| a.code() != 0).count(),
        ev.ramsey.delta_phi * n as f64,
        out.log.wall_clock_secs
    );
    Ok(())
}
