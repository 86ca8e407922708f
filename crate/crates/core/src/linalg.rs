//! Complex linear-algebra aliases and the few helpers every module needs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance on the imaginary residue of a Hermitian form.
pub const HERMITIAN_RESIDUE_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// `vᴴ M v` for Hermitian `M`, returned as a real number.
///
/// Panics if the imaginary residue exceeds [`HERMITIAN_RESIDUE_TOL`] relative
/// to `‖v‖²·‖M‖_F`; a larger residue means `M` was not Hermitian and some
/// upstream computation is wrong.
pub fn hermitian_form(v: &CVector, m: &CMatrix) -> f64 {
    let value = v.dotc(&(m * v));
    let scale = v.norm_squared() * m.norm();
    assert!(
        value.im.abs() <= HERMITIAN_RESIDUE_TOL * scale.max(f64::MIN_POSITIVE),
        "Hermitian form has imaginary residue {:e} (scale {:e})",
        value.im,
        scale
    );
    value.re
}

/// Frobenius norm of `M - Mᴴ` relative to `‖M‖_F`.
pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let diff = m - m.adjoint();
    let scale = m.norm();
    if scale == 0.0 {
        0.0
    } else {
        diff.norm() / scale
    }
}

pub fn ensure_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Domain(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asymmetry = hermitian_asymmetry(m);
    if asymmetry > tol {
        return Err(Error::NotHermitian { asymmetry });
    }
    Ok(())
}

/// Row `k` of `h` as a column vector `h_kᴴ`.
pub fn row_adjoint(h: &CMatrix, k: usize) -> CVector {
    h.row(k).adjoint()
}

/// `h_k x` for the `k`-th row of `h`.
pub fn row_dot(h: &CMatrix, k: usize, x: &CVector) -> C64 {
    h.row(k).iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}
