//! Dense-matrix reference propagators for small systems.
//!
//! Everything here builds full `(N+1) x (N+1)` matrices and calls a generic
//! matrix exponential, so it is slow and only meant as an independent check
//! of the structured kernels in [`crate::spin`].

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::spin::{ActionKind, CollectiveAxis, SpinState};

pub type DenseMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `J_z`, `J_+` in the ascending-`m` Dicke basis.
fn jz_jp(n_atoms: usize) -> (DenseMatrix, DenseMatrix) {
    let d = n_atoms + 1;
    let j = n_atoms as f64 / 2.0;
    let mut jz = DenseMatrix::zeros(d, d);
    let mut jp = DenseMatrix::zeros(d, d);
    for k in 0..d {
        let m = k as f64 - j;
        jz[(k, k)] = c(m);
        if k + 1 < d {
            jp[(k + 1, k)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    (jz, jp)
}

pub fn collective(n_atoms: usize, axis: CollectiveAxis) -> DenseMatrix {
    let (jz, jp) = jz_jp(n_atoms);
    let jm = jp.adjoint();
    match axis {
        CollectiveAxis::Z => jz,
        CollectiveAxis::X => (&jp + &jm) * c(0.5),
        CollectiveAxis::Y => (&jp - &jm) * Complex64::new(0.0, -0.5),
    }
}

/// `exp(-i angle J_axis)`.
pub fn rotation(n_atoms: usize, axis: CollectiveAxis, angle: f64) -> DenseMatrix {
    (collective(n_atoms, axis) * Complex64::new(0.0, -angle)).exp()
}

/// `exp(-i chi_dt J_z^2)`.
pub fn twist(n_atoms: usize, chi_dt: f64) -> DenseMatrix {
    let jz = collective(n_atoms, CollectiveAxis::Z);
    (&jz * &jz * Complex64::new(0.0, -chi_dt)).exp()
}

/// Matrix of one interval: twisting, then the optional pi/2 pulse.
pub fn action(n_atoms: usize, action: ActionKind, chi_dt: f64) -> DenseMatrix {
    let u = twist(n_atoms, chi_dt);
    match action.pulse_axis() {
        Some(axis) => rotation(n_atoms, axis, std::f64::consts::FRAC_PI_2) * u,
        None => u,
    }
}

/// Product of the interval matrices for a whole sequence.
pub fn sequence(n_atoms: usize, actions: &[ActionKind], chi_dt: f64) -> DenseMatrix {
    let d = n_atoms + 1;
    actions.iter().fold(DenseMatrix::identity(d, d), |acc, &a| action(n_atoms, a, chi_dt) * acc)
}

pub fn apply(m: &DenseMatrix, state: &SpinState) -> Vec<Complex64> {
    let v = nalgebra::DVector::from_column_slice(state.amplitudes());
    (m * v).iter().copied().collect()
}

/// `<psi| op |psi>`.
pub fn expectation(op: &DenseMatrix, amps: &[Complex64]) -> Complex64 {
    let v = nalgebra::DVector::from_column_slice(amps);
    (v.adjoint() * op * &v)[(0, 0)]
}
