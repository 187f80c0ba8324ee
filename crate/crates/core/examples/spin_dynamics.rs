//! Free one-axis twisting from the coherent state: squeezing, QFI and the
//! optimal squeezing time, plus a Husimi snapshot.
//!
//! cargo run --release --example spin_dynamics -- [n_atoms]

use qfi_pulse::metrology::{husimi_grid, optimal_squeezing_time, qfi_generator_z, squeezing_parameter, ScanGrid};
use qfi_pulse::spin::SpinState;

fn main() -> qfi_pulse::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let t_os = optimal_squeezing_time(n, 1.0, &ScanGrid::default())?;
    println!("N = {n}, T_os = {t_os:.6}");
    println!("{:>10} {:>12} {:>12}", "t/T_os", "xi^2", "F_Q/N");
    for frac in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let mut s = SpinState::css(n)?;
        s.apply_oat(frac * t_os);
        let xi = squeezing_parameter(&s).map(|x| format!("{x:12.5}")).unwrap_or_else(|_| format!("{:>12}", "-"));
        println!("{frac:10.2} {xi} {:12.4}", qfi_generator_z(&s) / n as f64);
    }

    let mut s = SpinState::css(n)?;
    s.apply_oat(t_os);
    let q = husimi_grid(&s, 60, 120)?;
    let (i, j) = q.argmax();
    println!(
        "Husimi peak at theta = {:.3}, phi = {:.3}; integral {:.5}",
        q.thetas[i],
        q.phis[j],
        q.integrate()
    );
    Ok(())
}
