//! Time-reversal Ramsey readout: the coherent-state baseline and a short
//! twist-and-pulse protocol, compared with the Cramér–Rao bound.
//!
//! cargo run --release --example ramsey_readout -- [n_atoms]

use qfi_pulse::env::{PhysicsConfig, PulseSequence, Scheme};
use qfi_pulse::interferometer::{delta_phi, evaluate_sequence, jz_slope, jz_slope_fd, Protocol, DEFAULT_PHI0};
use qfi_pulse::spin::{ActionKind, SpinState};

fn main() -> qfi_pulse::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let css = SpinState::css(n)?;
    let sql = delta_phi(&css, Protocol::EMPTY, DEFAULT_PHI0)?;
    println!("coherent state: delta_phi = {:.6e}, 1/sqrt(N) = {:.6e}", sql.delta_phi, 1.0 / (n as f64).sqrt());

    // Twist for the whole budget, with an x-pulse at the very end.
    let physics = PhysicsConfig::at_squeezing_time(n, 1.0, Scheme::OnlyX)?;
    let mut actions = vec![ActionKind::Free; physics.n_intervals];
    *actions.last_mut().unwrap() = ActionKind::PulseX;
    let seq = PulseSequence::new(&physics, actions);
    let ev = evaluate_sequence(&seq, n, DEFAULT_PHI0)?;
    let psi = seq.prepare(n)?;
    println!(
        "twist + pulse:  delta_phi = {:.6e} (N*delta_phi = {:.3}), F_Q^-1/2 = {:.6e}",
        ev.ramsey.delta_phi,
        n as f64 * ev.ramsey.delta_phi,
        ev.qcrb()
    );
    println!(
        "slope analytic {:.8}, finite difference {:.8}",
        jz_slope(&psi, Protocol::of(&seq), DEFAULT_PHI0),
        jz_slope_fd(&psi, Protocol::of(&seq), DEFAULT_PHI0, 1e-5)
    );
    Ok(())
}
