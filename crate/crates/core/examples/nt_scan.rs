//! Sensitivity of the trained optimum to the number of intervals.
//!
//! cargo run --release --example nt_scan -- [n_atoms] [episodes]

use qfi_pulse::config::RunConfig;
use qfi_pulse::env::{PhysicsConfig, Scheme};
use qfi_pulse::experiments::nt_scan;

fn main() -> qfi_pulse::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let episodes: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let base = RunConfig::new(PhysicsConfig::at_squeezing_time(n, 1.0, Scheme::OnlyX)?).with_episodes(episodes);
    for r in nt_scan(&base, &[10, 25, 50, 100], &[0, 1])? {
        println!("n_t = {:>4}: F_Q/N^2 = {:.4}, pulses {}, seed {}", r.n_intervals, r.qfi_over_n2, r.pulses, r.seed);
    }
    Ok(())
}
