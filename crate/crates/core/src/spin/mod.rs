//! Pure-state simulation of `N` two-level atoms restricted to the symmetric
//! Dicke sector `j = N/2`.
//!
//! Amplitudes are stored in ascending order of the `J_z` eigenvalue,
//! `m = -N/2, -N/2 + 1, ..., N/2`, so index `k` corresponds to `m = k - N/2`.
//!
//! Conventions: all rotations are `exp(-i * angle * J_axis)` and the twisting
//! propagator is `exp(-i * chi_dt * J_z^2)`.

mod rotation;

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rotation::{rotation_kernel, RotationKernel};

/// Tolerance on `|sum |c_m|^2 - 1|` for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Collective spin axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectiveAxis {
    X,
    Y,
    Z,
}

/// One entry of the action pool: free twisting for one interval, optionally
/// followed by an instantaneous pi/2 pulse.
///
/// The integer codes are part of the sequence file format and never change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum ActionKind {
    Free = 0,
    PulseX = 1,
    PulseY = 2,
}

impl ActionKind {
    pub const ALL: [ActionKind; 3] = [ActionKind::Free, ActionKind::PulseX, ActionKind::PulseY];

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Axis of the pulse that follows the twisting, if any.
    pub fn pulse_axis(self) -> Option<CollectiveAxis> {
        match self {
            ActionKind::Free => None,
            ActionKind::PulseX => Some(CollectiveAxis::X),
            ActionKind::PulseY => Some(CollectiveAxis::Y),
        }
    }
}

impl TryFrom<u8> for ActionKind {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ActionKind::Free),
            1 => Ok(ActionKind::PulseX),
            2 => Ok(ActionKind::PulseY),
            other => Err(Error::UnknownActionCode(other)),
        }
    }
}

impl From<ActionKind> for u8 {
    fn from(a: ActionKind) -> u8 {
        a.code()
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActionKind::Free => "free",
            ActionKind::PulseX => "pulse-x",
            ActionKind::PulseY => "pulse-y",
        };
        f.write_str(s)
    }
}

/// First and second moments of the collective spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `(<J_x>, <J_y>, <J_z>)`
    pub mean: [f64; 3],
    /// `(<J_x^2>, <J_y^2>, <J_z^2>)`
    pub square: [f64; 3],
}

impl Moments {
    pub fn as_array(&self) -> [f64; 6] {
        let [x, y, z] = self.mean;
        let [x2, y2, z2] = self.square;
        [x, y, z, x2, y2, z2]
    }
}

/// Pure state of `N` atoms in the Dicke basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    amps: Vec<Complex64>,
}

impl SpinState {
    /// Coherent spin state along `+x`: `exp(-i pi/2 J_y)` applied to all-up.
    ///
    /// Amplitudes are `2^{-N/2} sqrt(C(N, k))`. The binomial weights are built
    /// by the ratio recurrence outward from the central index, so nothing
    /// overflows for large `N`.
    pub fn css(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidSystemSize(0));
        }
        let weights = binomial_weights(n_atoms);
        let amps = weights.into_iter().map(|w| Complex64::new(w.sqrt(), 0.0)).collect();
        Ok(Self { amps })
    }

    /// Dicke state `|m>` given by its index `k = m + N/2`.
    pub fn dicke(n_atoms: usize, k: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidSystemSize(0));
        }
        if k > n_atoms {
            return Err(Error::DimensionMismatch { expected: n_atoms + 1, got: k + 1 });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n_atoms + 1];
        amps[k] = Complex64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// GHZ state `(|N/2> + |-N/2>)/sqrt(2)`.
    pub fn ghz(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidSystemSize(0));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n_atoms + 1];
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[0] = a;
        amps[n_atoms] = a;
        Ok(Self { amps })
    }

    /// Wraps an amplitude vector, rejecting wrong lengths and unnormalized input.
    pub fn from_amplitudes(n_atoms: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidSystemSize(0));
        }
        if amps.len() != n_atoms + 1 {
            return Err(Error::DimensionMismatch { expected: n_atoms + 1, got: amps.len() });
        }
        let state = Self { amps };
        state.check_norm()?;
        Ok(state)
    }

    /// Wraps a vector of the right length without a norm check, for applying
    /// propagators to non-normalized vectors such as `J_z |psi>`.
    pub(crate) fn from_raw(amps: Vec<Complex64>) -> Self {
        debug_assert!(amps.len() >= 2);
        Self { amps }
    }

    pub fn n_atoms(&self) -> usize {
        self.amps.len() - 1
    }

    /// Spin length `j = N/2`.
    pub fn spin(&self) -> f64 {
        0.5 * self.n_atoms() as f64
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    /// `J_z` eigenvalue of basis index `k`.
    #[inline]
    pub fn m_value(&self, k: usize) -> f64 {
        k as f64 - self.spin()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn check_norm(&self) -> Result<()> {
        let dev = (self.norm_sqr() - 1.0).abs();
        if dev > NORM_TOLERANCE || !dev.is_finite() {
            return Err(Error::NormViolation(dev));
        }
        Ok(())
    }

    /// `<self|other>`
    pub fn inner(&self, other: &SpinState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Twisting propagator `exp(-i chi_dt J_z^2)`. A negative `chi_dt` runs the
    /// twisting backwards.
    pub fn apply_oat(&mut self, chi_dt: f64) {
        let j = self.spin();
        for (k, c) in self.amps.iter_mut().enumerate() {
            let m = k as f64 - j;
            *c *= Complex64::from_polar(1.0, -chi_dt * m * m);
        }
    }

    /// `exp(-i angle J_axis)`.
    pub fn apply_rotation(&mut self, axis: CollectiveAxis, angle: f64) {
        match axis {
            CollectiveAxis::Z => self.apply_z_phase(angle),
            CollectiveAxis::Y => rotation_kernel(self.n_atoms(), angle).apply_y(&mut self.amps),
            CollectiveAxis::X => rotation_kernel(self.n_atoms(), angle).apply_x(&mut self.amps),
        }
    }

    fn apply_z_phase(&mut self, angle: f64) {
        let j = self.spin();
        for (k, c) in self.amps.iter_mut().enumerate() {
            *c *= Complex64::from_polar(1.0, -angle * (k as f64 - j));
        }
    }

    /// One interval of the pulsed protocol: twisting first, then the pulse.
    pub fn apply_action(&mut self, action: ActionKind, chi_dt: f64) {
        self.apply_oat(chi_dt);
        if let Some(axis) = action.pulse_axis() {
            self.apply_rotation(axis, FRAC_PI_2);
        }
    }

    /// Exact inverse of [`apply_action`](Self::apply_action).
    pub fn apply_inverse_action(&mut self, action: ActionKind, chi_dt: f64) {
        if let Some(axis) = action.pulse_axis() {
            self.apply_rotation(axis, -FRAC_PI_2);
        }
        self.apply_oat(-chi_dt);
    }

    /// Applies `J_z` (not unitary; used for generator and observable algebra).
    pub fn jz_applied(&self) -> Vec<Complex64> {
        let j = self.spin();
        self.amps.iter().enumerate().map(|(k, c)| c * (k as f64 - j)).collect()
    }

    /// Collective-spin expectation values from the tridiagonal ladder action.
    pub fn moments(&self) -> Moments {
        let s = self.ladder_sums();
        let j = self.spin();
        let casimir = j * (j + 1.0);
        // J+J- + J-J+ = 2 (J^2 - J_z^2)
        let sym = 2.0 * (casimir - s.jz2);
        Moments {
            mean: [s.jp.re, s.jp.im, s.jz],
            square: [0.25 * (2.0 * s.jp2.re + sym), 0.25 * (-2.0 * s.jp2.re + sym), s.jz2],
        }
    }

    /// Symmetrized second-moment matrix `<{J_a, J_b}>/2` together with the mean.
    pub fn second_moment_matrix(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let s = self.ladder_sums();
        let mo = self.moments();
        let xy = 0.5 * s.jp2.im;
        let xz = 0.5 * s.jpz.re;
        let yz = 0.5 * s.jpz.im;
        let [x2, y2, z2] = mo.square;
        (mo.mean, [[x2, xy, xz], [xy, y2, yz], [xz, yz, z2]])
    }

    fn ladder_sums(&self) -> LadderSums {
        let j = self.spin();
        let n = self.amps.len();
        let mut jz = 0.0;
        let mut jz2 = 0.0;
        let mut jp = Complex64::new(0.0, 0.0);
        let mut jp2 = Complex64::new(0.0, 0.0);
        let mut jpz = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let m = k as f64 - j;
            let p = self.amps[k].norm_sqr();
            jz += p * m;
            jz2 += p * m * m;
            if k + 1 < n {
                let a = ladder(j, m);
                let t = self.amps[k + 1].conj() * self.amps[k] * a;
                jp += t;
                // <m+1| J+ J_z + J_z J+ |m> = a_m (2m + 1)
                jpz += t * (2.0 * m + 1.0);
                if k + 2 < n {
                    let a2 = a * ladder(j, m + 1.0);
                    jp2 += self.amps[k + 2].conj() * self.amps[k] * a2;
                }
            }
        }
        LadderSums { jz, jz2, jp, jp2, jpz }
    }

    /// Six-entry learner input: first moments scaled by `N/2`, second
    /// moments scaled by `(N/2)^2`.
    pub fn observation(&self) -> [f64; 6] {
        let j = self.spin();
        let mo = self.moments();
        let [x, y, z] = mo.mean;
        let [x2, y2, z2] = mo.square;
        let j2 = j * j;
        [x / j, y / j, z / j, x2 / j2, y2 / j2, z2 / j2]
    }

    /// Multiplies every amplitude by `exp(i phase)`.
    pub fn with_global_phase(mut self, phase: f64) -> Self {
        let f = Complex64::from_polar(1.0, phase);
        for c in &mut self.amps {
            *c *= f;
        }
        self
    }

    /// Largest per-amplitude distance to another state of equal dimension.
    pub fn max_abs_diff(&self, other: &SpinState) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

struct LadderSums {
    jz: f64,
    jz2: f64,
    /// `<J+>`
    jp: Complex64,
    /// `<J+^2>`
    jp2: Complex64,
    /// `<J+ J_z + J_z J+>`
    jpz: Complex64,
}

/// `<m+1| J+ |m>` for spin `j`.
#[inline]
pub(crate) fn ladder(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// `C(n, k) / 2^n` for `k = 0..=n`.
pub(crate) fn binomial_weights(n: usize) -> Vec<f64> {
    let mode = n / 2;
    let mut w = vec![0.0; n + 1];
    w[mode] = 1.0;
    for k in mode..n {
        w[k + 1] = w[k] * (n - k) as f64 / (k + 1) as f64;
    }
    for k in (1..=mode).rev() {
        w[k - 1] = w[k] * k as f64 / (n - k + 1) as f64;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}
