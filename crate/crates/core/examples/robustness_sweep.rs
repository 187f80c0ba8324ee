//! Trains one sequence per scheme and replays both on atom numbers within
//! +-20% of the training value.
//!
//! cargo run --release --example robustness_sweep -- [n_train] [episodes]

use qfi_pulse::a3c::train;
use qfi_pulse::config::RunConfig;
use qfi_pulse::env::{PhysicsConfig, Scheme};
use qfi_pulse::experiments::{default_deviation_grid, robustness_sweep};

fn main() -> qfi_pulse::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let episodes: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4000);
    for scheme in [Scheme::OnlyX, Scheme::BothXy] {
        let cfg = RunConfig::new(PhysicsConfig::at_squeezing_time(n, 1.0, scheme)?).with_episodes(episodes);
        let out = train(&cfg)?;
        let table = robustness_sweep(&out.best, &default_deviation_grid(), "example")?;
        println!("{scheme}: {:>6} {:>10} {:>12} {:>10}", "N", "F_Q/N^2", "N*delta_phi", "loss");
        for (r, d) in table.rows.iter().zip(table.relative_degradation()) {
            let nf = r.n_actual as f64;
            println!("{:>16} {:>10.4} {:>12.4} {:>10.4}", r.n_actual, r.qfi / (nf * nf), r.delta_phi * nf, d);
        }
    }
    Ok(())
}
