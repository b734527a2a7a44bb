//! Small dense complex linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const J: C64 = C64::new(0.0, 1.0);

/// `x^H y`.
#[inline]
pub fn inner(x: &CVec, y: &CVec) -> C64 {
    x.dotc(y)
}

/// `x^H A x`, not yet projected onto the reals.
#[inline]
pub fn quad(x: &CVec, a: &CMat) -> C64 {
    x.dotc(&(a * x))
}

/// Real part of a nominally real scalar.
///
/// Debug builds assert that the imaginary residual is below `1e-9` of the magnitude.
#[inline]
pub fn real_part(z: C64) -> f64 {
    debug_assert!(
        z.im.abs() <= 1e-9 * z.norm().max(1e-300) || z.norm() < 1e-280,
        "nominally real quantity has imaginary residual {z}"
    );
    z.re
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &CMat) -> DVector<f64> {
    let mut e = a.clone().symmetric_eigenvalues();
    e.as_mut_slice().sort_by(|x, y| x.total_cmp(y));
    e
}

/// Largest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
pub fn hermitian_dominant(a: &CMat) -> (f64, CVec) {
    let eig = a.clone().symmetric_eigen();
    let (k, lam) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty matrix");
    (lam, eig.eigenvectors.column(k).into_owned())
}

/// Power iteration for the dominant eigenpair of a Hermitian PSD matrix.
///
/// Stops once the Rayleigh quotient changes by less than `tol` (relative).
pub fn power_iteration(a: &CMat, tol: f64, max_iter: usize) -> (f64, CVec) {
    let n = a.nrows();
    let mut v = CVec::from_fn(n, |i, _| C64::new(1.0 + 0.01 * i as f64, 0.003 * i as f64));
    v /= C64::from(v.norm());
    let mut lam = real_part(quad(&v, a));
    for _ in 0..max_iter {
        let w = a * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return (0.0, v);
        }
        v = w / C64::from(nw);
        let next = real_part(quad(&v, a));
        let done = (next - lam).abs() <= tol * next.abs().max(1e-300);
        lam = next;
        if done {
            break;
        }
    }
    (lam, v)
}

/// Force exact Hermitian symmetry, `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::from(0.5)
}

/// Rotate `v` so that its largest-modulus entry is real and positive.
pub fn canonical_phase(v: &CVec) -> CVec {
    let pivot = v
        .iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap_or(C64::new(1.0, 0.0));
    if pivot.norm() == 0.0 {
        return v.clone();
    }
    v * (pivot.conj() / pivot.norm())
}
