//! Time-reversal Ramsey readout.
//!
//! The prepared state `|psi_T> = U |CSS>` picks up a phase `exp(-i phi J_z)`,
//! is disentangled by `U^dagger` (inverse intervals in reverse order) and
//! read out after a final `exp(-i pi/2 J_x)`. The phase uncertainty follows
//! from error propagation of `J_z`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::env::PulseSequence;
use crate::error::{Error, Result};
use crate::metrology::qfi_generator_z;
use crate::spin::{ActionKind, CollectiveAxis, SpinState};

/// Default working point, slightly off the fringe centre.
pub const DEFAULT_PHI0: f64 = 1e-6;

/// Slopes below this magnitude carry no phase information.
pub const MIN_SLOPE: f64 = 1e-12;

/// The unitary `U` as an action list with its twisting phase per interval.
#[derive(Debug, Clone, Copy)]
pub struct Protocol<'a> {
    pub actions: &'a [ActionKind],
    pub chi_dt: f64,
}

impl<'a> Protocol<'a> {
    /// No preparation at all: plain Ramsey on the coherent state.
    pub const EMPTY: Protocol<'static> = Protocol { actions: &[], chi_dt: 0.0 };

    pub fn of(seq: &'a PulseSequence) -> Self {
        Self { actions: &seq.actions, chi_dt: seq.chi_dt() }
    }

    /// `U |state>`.
    pub fn forward(&self, state: &mut SpinState) {
        for &a in self.actions {
            state.apply_action(a, self.chi_dt);
        }
    }

    /// `U^dagger |state>`.
    pub fn backward(&self, state: &mut SpinState) {
        for &a in self.actions.iter().rev() {
            state.apply_inverse_action(a, self.chi_dt);
        }
    }

    /// `W = exp(-i pi/2 J_x) U^dagger`.
    fn readout(&self, state: &mut SpinState) {
        self.backward(state);
        state.apply_rotation(CollectiveAxis::X, FRAC_PI_2);
    }

    /// `W^dagger`.
    fn readout_adjoint(&self, state: &mut SpinState) {
        state.apply_rotation(CollectiveAxis::X, -FRAC_PI_2);
        self.forward(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyResult {
    pub phi: f64,
    pub mean_jz: f64,
    pub var_jz: f64,
    /// `d<J_z>/d phi`.
    pub slope: f64,
    pub delta_phi: f64,
}

/// `exp(-i pi/2 J_x) U^dagger exp(-i phi J_z) |psi_t>`.
pub fn ramsey_state(psi_t: &SpinState, protocol: Protocol<'_>, phi: f64) -> SpinState {
    let mut s = psi_t.clone();
    s.apply_rotation(CollectiveAxis::Z, phi);
    protocol.readout(&mut s);
    s
}

/// `<J_z>` after the readout.
pub fn mean_jz(psi_t: &SpinState, protocol: Protocol<'_>, phi: f64) -> f64 {
    ramsey_state(psi_t, protocol, phi).moments().mean[2]
}

/// Analytic `d<J_z>/d phi = i <[J_z, B]>` with `B = W^dagger J_z W`, evaluated
/// on the phase-shifted state.
pub fn jz_slope(psi_t: &SpinState, protocol: Protocol<'_>, phi: f64) -> f64 {
    let mut shifted = psi_t.clone();
    shifted.apply_rotation(CollectiveAxis::Z, phi);
    let mut out = shifted.clone();
    protocol.readout(&mut out);
    let mut b_psi = SpinState::from_raw(out.jz_applied());
    protocol.readout_adjoint(&mut b_psi);
    let z_psi = shifted.jz_applied();
    let overlap: Complex64 = z_psi.iter().zip(b_psi.amplitudes()).map(|(a, b)| a.conj() * b).sum();
    -2.0 * overlap.im
}

/// Central finite difference of `<J_z>` with step `h`.
pub fn jz_slope_fd(psi_t: &SpinState, protocol: Protocol<'_>, phi: f64, h: f64) -> f64 {
    (mean_jz(psi_t, protocol, phi + h) - mean_jz(psi_t, protocol, phi - h)) / (2.0 * h)
}

/// Error-propagation phase uncertainty at `phi0`.
pub fn delta_phi(psi_t: &SpinState, protocol: Protocol<'_>, phi0: f64) -> Result<RamseyResult> {
    let out = ramsey_state(psi_t, protocol, phi0);
    let mo = out.moments();
    let mean = mo.mean[2];
    let var = (mo.square[2] - mean * mean).max(0.0);
    let slope = jz_slope(psi_t, protocol, phi0);
    if slope.abs() < MIN_SLOPE {
        return Err(Error::NonInformativeWorkingPoint(slope.abs()));
    }
    Ok(RamseyResult { phi: phi0, mean_jz: mean, var_jz: var, slope, delta_phi: var.sqrt() / slope.abs() })
}

/// Full readout summary of a stored sequence run on `n_atoms` atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceEvaluation {
    pub n_atoms: usize,
    pub qfi: f64,
    pub ramsey: RamseyResult,
}

impl SequenceEvaluation {
    /// `F_Q^{-1/2}`, the Cramér–Rao bound on `delta_phi`.
    pub fn qcrb(&self) -> f64 {
        self.qfi.sqrt().recip()
    }
}

pub fn evaluate_sequence(seq: &PulseSequence, n_atoms: usize, phi0: f64) -> Result<SequenceEvaluation> {
    let psi = seq.prepare(n_atoms)?;
    let ramsey = delta_phi(&psi, Protocol::of(seq), phi0)?;
    Ok(SequenceEvaluation { n_atoms, qfi: qfi_generator_z(&psi), ramsey })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{PhysicsConfig, Scheme};
    use crate::reference;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_actions(rng: &mut impl Rng, scheme: Scheme, n: usize) -> Vec<ActionKind> {
        let pool = scheme.actions();
        (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }

    fn random_sequence(seed: u64, n_atoms: usize, scheme: Scheme) -> PulseSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = PhysicsConfig::new(n_atoms, 0.3 * rng.random::<f64>() + 0.02, scheme).with_intervals(12);
        let actions = random_actions(&mut rng, scheme, 12);
        PulseSequence::new(&p, actions)
    }

    #[test]
    fn zero_phase_has_zero_mean() {
        for seed in 0..10 {
            let seq = random_sequence(seed, 30, if seed % 2 == 0 { Scheme::OnlyX } else { Scheme::BothXy });
            let psi = seq.prepare(30).unwrap();
            let out = ramsey_state(&psi, Protocol::of(&seq), 0.0);
            assert!(out.moments().mean[2].abs() < 1e-10);
            assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_n4_matches_dense_product() {
        let n = 4;
        let phi = 0.1;
        let psi = SpinState::css(n).unwrap();
        let ours = mean_jz(&psi, Protocol::EMPTY, phi);
        let w = reference::rotation(n, CollectiveAxis::X, FRAC_PI_2) * reference::rotation(n, CollectiveAxis::Z, phi);
        let amps = reference::apply(&w, &psi);
        let dense = reference::expectation(&reference::collective(n, CollectiveAxis::Z), &amps).re;
        assert!((ours.abs() - 2.0 * phi.sin()).abs() < 1e-12);
        assert!((ours - dense).abs() < 1e-12, "{ours} vs {dense}");
    }

    #[test]
    fn dense_oracle_full_protocol() {
        let n = 6;
        let seq = random_sequence(3, n, Scheme::BothXy);
        let psi = seq.prepare(n).unwrap();
        let phi = 0.23;
        let u = reference::sequence(n, &seq.actions, seq.chi_dt());
        let w = reference::rotation(n, CollectiveAxis::X, FRAC_PI_2)
            * u.adjoint()
            * reference::rotation(n, CollectiveAxis::Z, phi);
        let dense = reference::apply(&w, &psi);
        let ours = ramsey_state(&psi, Protocol::of(&seq), phi);
        for (a, b) in ours.amplitudes().iter().zip(&dense) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn empty_sequence_slope_is_half_n() {
        for n in [1, 4, 10, 101] {
            let psi = SpinState::css(n).unwrap();
            let s = jz_slope(&psi, Protocol::EMPTY, 0.0);
            assert!((s.abs() - n as f64 / 2.0).abs() < 1e-9 * n as f64, "N={n}: {s}");
        }
    }

    #[test]
    fn standard_quantum_limit() {
        for n in [10usize, 100, 1000] {
            let psi = SpinState::css(n).unwrap();
            let r = delta_phi(&psi, Protocol::EMPTY, DEFAULT_PHI0).unwrap();
            let sql = 1.0 / (n as f64).sqrt();
            assert!(((r.delta_phi - sql) / sql).abs() < 1e-6, "N={n}: {}", r.delta_phi);
        }
    }

    #[test]
    fn analytic_slope_matches_finite_difference() {
        for seed in 0..12 {
            let scheme = if seed % 2 == 0 { Scheme::OnlyX } else { Scheme::BothXy };
            let seq = random_sequence(100 + seed, 40, scheme);
            let psi = seq.prepare(40).unwrap();
            for phi in [0.0, DEFAULT_PHI0, 0.01] {
                let a = jz_slope(&psi, Protocol::of(&seq), phi);
                let f = jz_slope_fd(&psi, Protocol::of(&seq), phi, 1e-5);
                assert!((a - f).abs() <= 1e-6 * a.abs().max(1.0), "seed {seed} phi {phi}: {a} vs {f}");
            }
        }
    }

    #[test]
    fn double_reversal_gives_same_slope() {
        let seq = random_sequence(7, 25, Scheme::BothXy);
        let copy: Vec<ActionKind> = seq.actions.iter().rev().copied().collect::<Vec<_>>().into_iter().rev().collect();
        let psi = seq.prepare(25).unwrap();
        let a = jz_slope(&psi, Protocol::of(&seq), 0.0);
        let b = jz_slope(&psi, Protocol { actions: &copy, chi_dt: seq.chi_dt() }, 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn cramer_rao_bound_holds() {
        for seed in 0..30 {
            let scheme = if seed % 3 == 0 { Scheme::OnlyX } else { Scheme::BothXy };
            let n = 10 + 7 * seed as usize;
            let seq = random_sequence(seed, n, scheme);
            let Ok(ev) = evaluate_sequence(&seq, n, DEFAULT_PHI0) else { continue };
            assert!(ev.ramsey.delta_phi >= ev.qcrb() - 1e-9, "seed {seed}: {} < {}", ev.ramsey.delta_phi, ev.qcrb());
        }
    }

    #[test]
    fn empty_sequence_even_in_phi() {
        let psi = SpinState::css(50).unwrap();
        let a = delta_phi(&psi, Protocol::EMPTY, 1e-3).unwrap().delta_phi;
        let b = delta_phi(&psi, Protocol::EMPTY, -1e-3).unwrap().delta_phi;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn working_point_insensitivity() {
        let seq = random_sequence(21, 60, Scheme::OnlyX);
        let psi = seq.prepare(60).unwrap();
        let base = delta_phi(&psi, Protocol::of(&seq), DEFAULT_PHI0).unwrap().delta_phi;
        for phi0 in [1e-7, 1e-6, 1e-5, 1e-4] {
            let d = delta_phi(&psi, Protocol::of(&seq), phi0).unwrap().delta_phi;
            assert!(((d - base) / base).abs() < 1e-3, "phi0 {phi0}: {d} vs {base}");
        }
    }

    #[test]
    fn dicke_state_is_non_informative() {
        // |m = 0> is invariant under the phase, so nothing can be read out.
        let psi = SpinState::dicke(4, 2).unwrap();
        assert!(matches!(
            delta_phi(&psi, Protocol::EMPTY, 0.0),
            Err(Error::NonInformativeWorkingPoint(_))
        ));
    }
}
