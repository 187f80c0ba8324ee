//! Trains on a small problem and compares with exhaustive search.
//!
//! cargo run --release --example oracle_match -- [episodes] [seed]

use qfi_pulse::a3c::train;
use qfi_pulse::config::RunConfig;
use qfi_pulse::env::{PhysicsConfig, Scheme};
use qfi_pulse::experiments::brute_force_oracle;

fn main() -> qfi_pulse::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let physics = PhysicsConfig::at_squeezing_time(20, 1.0, Scheme::OnlyX)?.with_intervals(8);
    let oracle = brute_force_oracle(&physics, 1 << 8)?;
    println!("T = {:.5}, oracle F_Q = {:.6} ({:?})", physics.total_time, oracle.best_qfi, oracle.best.actions);

    let cfg = RunConfig::new(physics).with_seed(seed).with_episodes(episodes);
    let out = train(&cfg)?;
    let curve = out.log.learning_curve();
    for e in (0..episodes).step_by((episodes / 10).max(1)) {
        println!("episode {e:5}: best so far {:.6}", curve[e]);
    }
    println!(
        "trained F_Q = {:.6} ({:.4} of oracle), greedy {:.6}, {:.1} s",
        out.best_qfi,
        out.best_qfi / oracle.best_qfi,
        out.greedy_qfi,
        out.log.wall_clock_secs
    );
    Ok(())
}
