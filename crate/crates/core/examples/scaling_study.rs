//! Best-of-seeds training across atom numbers and power-law fits of
//! `delta_phi` and `1/F_Q`.
//!
//! cargo run --release --example scaling_study -- [only-x|both-xy] [episodes] [N,N,...]

use qfi_pulse::config::RunConfig;
use qfi_pulse::env::{PhysicsConfig, Scheme};
use qfi_pulse::experiments::scaling_study;

fn main() -> qfi_pulse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scheme: Scheme = args.first().map(|s| s.parse()).transpose()?.unwrap_or(Scheme::OnlyX);
    let episodes: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let ns: Vec<usize> = args
        .get(2)
        .map(|s| s.split(',').filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_else(|| vec![10, 20, 50, 100, 200]);
    let study = scaling_study(&ns, &[0, 1, 2], |n| {
        Ok(RunConfig::new(PhysicsConfig::at_squeezing_time(n, 1.0, scheme)?).with_episodes(episodes))
    })?;
    println!("{:>6} {:>5} {:>10} {:>12} {:>7}", "N", "seed", "F_Q/N^2", "N*delta_phi", "pulses");
    for r in &study.rows {
        let n = r.n_atoms as f64;
        println!("{:>6} {:>5} {:>10.4} {:>12.4} {:>7}", r.n_atoms, r.seed, r.qfi / (n * n), r.delta_phi * n, r.pulses);
    }
    let (d, q) = (study.delta_phi_fit, study.inverse_qfi_fit);
    println!("delta_phi ~ {:.3} N^-{:.3}", d.prefactor, d.exponent);
    println!("1/F_Q     ~ {:.3} N^-{:.3}", q.prefactor, q.exponent);
    Ok(())
}
