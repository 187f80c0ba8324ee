//! Cached spin-`j` rotation matrices.
//!
//! `exp(-i theta J_y)` is real orthogonal. It is assembled from the
//! eigendecomposition `J_x = V diag(lambda) V^T` of the real tridiagonal `J_x`
//! together with `J_y = R_z(pi/2) J_x R_z(-pi/2)`, and the x-rotation is then
//! recovered by conjugating the y-rotation with z-rotations of `-/+ pi/2`.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::ladder;

/// `exp(-i angle J_y)` for one `(N, angle)` pair, row-major.
#[derive(Debug)]
pub struct RotationKernel {
    dim: usize,
    angle: f64,
    matrix: Vec<f64>,
    /// `exp(-i pi/2 m)`, i.e. the diagonal of `R_z(pi/2)`.
    quarter_phase: Vec<Complex64>,
}

type EigenCache = RwLock<HashMap<usize, Arc<JxEigen>>>;
type KernelCache = RwLock<HashMap<(usize, u64), Arc<RotationKernel>>>;

fn eigen_cache() -> &'static EigenCache {
    static CACHE: OnceLock<EigenCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn kernel_cache() -> &'static KernelCache {
    static CACHE: OnceLock<KernelCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Returns the shared rotation kernel for `n_atoms` and `angle`, building it on
/// first use.
pub fn rotation_kernel(n_atoms: usize, angle: f64) -> Arc<RotationKernel> {
    let key = (n_atoms, angle.to_bits());
    if let Some(k) = kernel_cache().read().unwrap().get(&key) {
        return Arc::clone(k);
    }
    let eig = jx_eigen(n_atoms);
    let kernel = Arc::new(RotationKernel::build(&eig, angle));
    let mut cache = kernel_cache().write().unwrap();
    Arc::clone(cache.entry(key).or_insert(kernel))
}

struct JxEigen {
    dim: usize,
    /// Column-major eigenvectors.
    vectors: DMatrix<f64>,
    values: Vec<f64>,
}

fn jx_eigen(n_atoms: usize) -> Arc<JxEigen> {
    if let Some(e) = eigen_cache().read().unwrap().get(&n_atoms) {
        return Arc::clone(e);
    }
    let eig = Arc::new(JxEigen::build(n_atoms));
    let mut cache = eigen_cache().write().unwrap();
    Arc::clone(cache.entry(n_atoms).or_insert(eig))
}

impl JxEigen {
    fn build(n_atoms: usize) -> Self {
        let dim = n_atoms + 1;
        let j = 0.5 * n_atoms as f64;
        let mut jx = DMatrix::<f64>::zeros(dim, dim);
        for k in 0..n_atoms {
            let a = 0.5 * ladder(j, k as f64 - j);
            jx[(k, k + 1)] = a;
            jx[(k + 1, k)] = a;
        }
        let eig = SymmetricEigen::new(jx);
        // The spectrum is exactly {-j, ..., j}; snap to it.
        let values = eig
            .eigenvalues
            .iter()
            .map(|&l| {
                let snapped = (l + j).round() - j;
                debug_assert!((l - snapped).abs() < 1e-6 * (1.0 + j), "eigenvalue {l} far from grid");
                snapped
            })
            .collect();
        Self { dim, vectors: eig.eigenvectors, values }
    }
}

impl RotationKernel {
    fn build(eig: &JxEigen, angle: f64) -> Self {
        let dim = eig.dim;
        let v = &eig.vectors;
        let mut vc = v.clone();
        let mut vs = v.clone();
        for (col, &l) in eig.values.iter().enumerate() {
            let (s, c) = (angle * l).sin_cos();
            vc.column_mut(col).scale_mut(c);
            vs.column_mut(col).scale_mut(s);
        }
        let vt = v.transpose();
        let cos_part = &vc * &vt;
        let sin_part = &vs * &vt;

        // Real part of exp(-i pi/2 (r - c)) (C - iS).
        let mut matrix = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                let d = (r as i64 - c as i64).rem_euclid(4);
                matrix[r * dim + c] = match d {
                    0 => cos_part[(r, c)],
                    1 => -sin_part[(r, c)],
                    2 => -cos_part[(r, c)],
                    _ => sin_part[(r, c)],
                };
            }
        }
        let j = 0.5 * (dim - 1) as f64;
        let quarter_phase = (0..dim)
            .map(|k| Complex64::from_polar(1.0, -FRAC_PI_2 * (k as f64 - j)))
            .collect();
        Self { dim, angle, matrix, quarter_phase }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Entry `<r| exp(-i angle J_y) |c>` in index order.
    pub fn y_entry(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.dim + c]
    }

    /// In place `amps <- exp(-i angle J_y) amps`.
    pub fn apply_y(&self, amps: &mut [Complex64]) {
        assert_eq!(amps.len(), self.dim, "state dimension does not match rotation kernel");
        let re: Vec<f64> = amps.iter().map(|c| c.re).collect();
        let im: Vec<f64> = amps.iter().map(|c| c.im).collect();
        for (row, out) in self.matrix.chunks_exact(self.dim).zip(amps.iter_mut()) {
            let (sr, si) = dot2(row, &re, &im);
            *out = Complex64::new(sr, si);
        }
    }

    /// In place `amps <- exp(-i angle J_x) amps = R_z(-pi/2) exp(-i angle J_y) R_z(pi/2) amps`.
    pub fn apply_x(&self, amps: &mut [Complex64]) {
        assert_eq!(amps.len(), self.dim, "state dimension does not match rotation kernel");
        for (c, p) in amps.iter_mut().zip(&self.quarter_phase) {
            *c *= p;
        }
        self.apply_y(amps);
        for (c, p) in amps.iter_mut().zip(&self.quarter_phase) {
            *c *= p.conj();
        }
    }
}

/// `(row . re, row . im)` with four independent accumulators.
#[inline]
fn dot2(row: &[f64], re: &[f64], im: &[f64]) -> (f64, f64) {
    let mut ar = [0.0f64; 4];
    let mut ai = [0.0f64; 4];
    let chunks = row.len() / 4 * 4;
    for ((w, r), i) in row[..chunks]
        .chunks_exact(4)
        .zip(re[..chunks].chunks_exact(4))
        .zip(im[..chunks].chunks_exact(4))
    {
        for l in 0..4 {
            ar[l] += w[l] * r[l];
            ai[l] += w[l] * i[l];
        }
    }
    let mut sr = (ar[0] + ar[1]) + (ar[2] + ar[3]);
    let mut si = (ai[0] + ai[1]) + (ai[2] + ai[3]);
    for k in chunks..row.len() {
        sr += row[k] * re[k];
        si += row[k] * im[k];
    }
    (sr, si)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_orthogonal() {
        for n in [1usize, 2, 7, 40] {
            let k = rotation_kernel(n, 0.9);
            let d = k.dim();
            for a in 0..d {
                for b in 0..d {
                    let dot: f64 = (0..d).map(|r| k.y_entry(r, a) * k.y_entry(r, b)).sum();
                    let e = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - e).abs() < 1e-12, "n={n} ({a},{b}) {dot}");
                }
            }
        }
    }

    #[test]
    fn kernel_is_cached() {
        let a = rotation_kernel(13, 0.25);
        let b = rotation_kernel(13, 0.25);
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn negative_angle_is_transpose() {
        let k = rotation_kernel(9, 1.3);
        let kinv = rotation_kernel(9, -1.3);
        for r in 0..10 {
            for c in 0..10 {
                assert!((k.y_entry(r, c) - kinv.y_entry(c, r)).abs() < 1e-13);
            }
        }
    }
}
