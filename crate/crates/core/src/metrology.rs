//! Metrological figures of merit for collective spin states.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::SpinState;

/// Summary of a prepared state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_atoms: usize,
    pub qfi: f64,
    /// `None` when the mean spin vanishes.
    pub squeezing_xi2: Option<f64>,
    pub dicke_probs: Vec<f64>,
}

impl MetricReport {
    pub fn from_state(state: &SpinState) -> Self {
        Self {
            n_atoms: state.n_atoms(),
            qfi: qfi_generator_z(state),
            squeezing_xi2: squeezing_parameter(state).ok(),
            dicke_probs: dicke_distribution(state),
        }
    }
}

/// Pure-state QFI for the generator `J_z`: `4 Var(J_z)`.
pub fn qfi_generator_z(state: &SpinState) -> f64 {
    let j = state.spin();
    let (mut mean, mut sq) = (0.0, 0.0);
    for (k, c) in state.amplitudes().iter().enumerate() {
        let p = c.norm_sqr();
        let m = k as f64 - j;
        mean += p * m;
        sq += p * m * m;
    }
    (4.0 * (sq - mean * mean)).max(0.0)
}

/// QFI evaluated literally from the encoded state `|psi(theta)> = exp(-i theta J_z)|psi>`
/// and its derivative `|psi'> = -i J_z |psi(theta)>`.
pub fn qfi_by_definition(state: &SpinState, theta: f64) -> f64 {
    let j = state.spin();
    let encoded: Vec<Complex64> = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, c)| c * Complex64::from_polar(1.0, -theta * (k as f64 - j)))
        .collect();
    let deriv: Vec<Complex64> = encoded
        .iter()
        .enumerate()
        .map(|(k, c)| c * Complex64::new(0.0, -(k as f64 - j)))
        .collect();
    let dd: f64 = deriv.iter().map(|c| c.norm_sqr()).sum();
    let dp: Complex64 = deriv.iter().zip(&encoded).map(|(a, b)| a.conj() * b).sum();
    (4.0 * (dd - dp.norm_sqr())).max(0.0)
}

/// Kitagawa-Ueda squeezing parameter `xi^2 = 4 min Var(J_perp) / N`, the
/// minimum taken over directions orthogonal to the mean spin.
pub fn squeezing_parameter(state: &SpinState) -> Result<f64> {
    let (mean, second) = state.second_moment_matrix();
    let len = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len <= 1e-9 {
        return Err(Error::UndefinedMeanSpin(len));
    }
    let n = [mean[0] / len, mean[1] / len, mean[2] / len];
    let mut cov = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            cov[a][b] = second[a][b] - mean[a] * mean[b];
        }
    }
    let (e1, e2) = orthonormal_complement(n);
    let quad = |u: [f64; 3], v: [f64; 3]| -> f64 {
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += u[a] * cov[a][b] * v[b];
            }
        }
        s
    };
    let (v11, v22, v12) = (quad(e1, e1), quad(e2, e2), quad(e1, e2));
    let half_sum = 0.5 * (v11 + v22);
    let half_diff = 0.5 * (v11 - v22);
    let min_var = half_sum - (half_diff * half_diff + v12 * v12).sqrt();
    Ok(4.0 * min_var / state.n_atoms() as f64)
}

fn orthonormal_complement(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    // Cross with whichever coordinate axis is least aligned with n.
    let helper = if n[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = normalize(cross(n, helper));
    let e2 = cross(n, e1);
    (e1, e2)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    [v[0] / l, v[1] / l, v[2] / l]
}

/// Time grid for the coarse squeezing scan (geometric spacing, in units of `1/chi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self { t_min: 1e-4, t_max: 1.0, points: 400 }
    }
}

impl ScanGrid {
    fn times(&self, chi: f64) -> Vec<f64> {
        let (lo, hi) = (self.t_min.ln(), self.t_max.ln());
        let steps = (self.points.max(2) - 1) as f64;
        (0..self.points.max(2)).map(|i| (lo + (hi - lo) * i as f64 / steps).exp() / chi).collect()
    }
}

/// Squeezing parameter after free twisting of the x-polarized CSS for time `t`.
pub fn squeezing_after_twist(n_atoms: usize, chi: f64, t: f64) -> Result<f64> {
    let mut s = SpinState::css(n_atoms)?;
    s.apply_oat(chi * t);
    squeezing_parameter(&s)
}

/// Twisting time that minimizes the squeezing parameter: coarse scan followed
/// by golden-section refinement inside the bracketing cell.
pub fn optimal_squeezing_time(n_atoms: usize, chi: f64, grid: &ScanGrid) -> Result<f64> {
    if !(chi > 0.0) {
        return Err(Error::InvalidConfig(format!("chi must be positive (got {chi})")));
    }
    let times = grid.times(chi);
    // Over-twisted states lose their mean spin; they never minimize xi^2.
    let f = |t: f64| match squeezing_after_twist(n_atoms, chi, t) {
        Err(Error::UndefinedMeanSpin(_)) => Ok(f64::INFINITY),
        other => other,
    };
    let values = times.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid has at least two points");
    if best == 0 || best == times.len() - 1 {
        return Err(Error::NotBracketed(times[best]));
    }
    let (mut a, mut b) = (times[best - 1], times[best + 1]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > 1e-12 * b {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// `|c_m|^2` in index order.
pub fn dicke_distribution(state: &SpinState) -> Vec<f64> {
    state.amplitudes().iter().map(|c| c.norm_sqr()).collect()
}

/// Husimi function sampled on an equal-angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    /// Polar angles `pi * i / (n_theta - 1)`, measured from `+z`.
    pub thetas: Vec<f64>,
    /// Azimuths `2 pi k / n_phi`, measured from `+x`.
    pub phis: Vec<f64>,
    /// Row-major `[theta][phi]`.
    pub values: Vec<f64>,
}

impl HusimiGrid {
    pub fn at(&self, i_theta: usize, i_phi: usize) -> f64 {
        self.values[i_theta * self.phis.len() + i_phi]
    }

    /// Grid indices of the global maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let i = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (i / self.phis.len(), i % self.phis.len())
    }

    /// Trapezoid rule in theta (with the `sin theta` measure), uniform in phi.
    pub fn integrate(&self) -> f64 {
        let nt = self.thetas.len();
        let dtheta = PI / (nt - 1) as f64;
        let dphi = 2.0 * PI / self.phis.len() as f64;
        let mut total = 0.0;
        for (i, th) in self.thetas.iter().enumerate() {
            let w = if i == 0 || i == nt - 1 { 0.5 } else { 1.0 };
            let row: f64 = (0..self.phis.len()).map(|k| self.at(i, k)).sum();
            total += w * th.sin() * row;
        }
        total * dtheta * dphi
    }
}

/// `Q(theta, phi) = (N+1)/(4 pi) |<theta, phi|psi>|^2` with the coherent state
/// `<m|theta, phi> = sqrt(C(N, j+m)) cos(theta/2)^{j+m} sin(theta/2)^{j-m} e^{-i m phi}`.
pub fn husimi_grid(state: &SpinState, n_theta: usize, n_phi: usize) -> Result<HusimiGrid> {
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::InvalidConfig(format!(
            "Husimi grid needs at least 2x2 points (got {n_theta}x{n_phi})"
        )));
    }
    let n = state.n_atoms();
    let j = state.spin();
    let ln_binom = ln_binomials(n);
    let thetas: Vec<f64> = (0..n_theta).map(|i| PI * i as f64 / (n_theta - 1) as f64).collect();
    let phis: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
    let norm = (n as f64 + 1.0) / (4.0 * PI);
    let amps = state.amplitudes();

    let mut values = Vec::with_capacity(n_theta * n_phi);
    let mut weighted = vec![Complex64::new(0.0, 0.0); n + 1];
    for &theta in &thetas {
        let (ln_c, ln_s) = ((0.5 * theta).cos().abs().ln(), (0.5 * theta).sin().abs().ln());
        for k in 0..=n {
            let w = (0.5 * ln_binom[k] + pow_ln(k, ln_c) + pow_ln(n - k, ln_s)).exp();
            weighted[k] = amps[k] * w;
        }
        for &phi in &phis {
            // <theta, phi|psi> = sum_k w_k e^{+i m phi} psi_k
            let step = Complex64::from_polar(1.0, phi);
            let mut rot = Complex64::from_polar(1.0, -j * phi);
            let mut acc = Complex64::new(0.0, 0.0);
            for wk in &weighted {
                acc += wk * rot;
                rot *= step;
            }
            values.push(norm * acc.norm_sqr());
        }
    }
    Ok(HusimiGrid { thetas, phis, values })
}

/// `exponent * ln_base`, with `0 * ln(0) = 0`.
fn pow_ln(exponent: usize, ln_base: f64) -> f64 {
    if exponent == 0 {
        0.0
    } else {
        exponent as f64 * ln_base
    }
}

fn ln_binomials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..n {
        acc += ((n - k) as f64 / (k + 1) as f64).ln();
        out.push(acc);
    }
    out
}
