//! Closed-form 2x2 complex matrix arithmetic.
//!
//! Every propagator, diagonaliser and remainder in the crate is a 2x2
//! complex matrix, so the handful of operations needed are written out
//! explicitly instead of going through a general linear algebra crate.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex;

use crate::scalar::Real;

/// Row-major 2x2 complex matrix `[[a11, a12], [a21, a22]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T> {
    pub a11: Complex<T>,
    pub a12: Complex<T>,
    pub a21: Complex<T>,
    pub a22: Complex<T>,
}

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// The imaginary unit.
#[inline]
pub(crate) fn imag_unit<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

impl<T: Real> Mat2<T> {
    pub fn new(a11: Complex<T>, a12: Complex<T>, a21: Complex<T>, a22: Complex<T>) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn from_real(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self::new(re(a11), re(a12), re(a21), re(a22))
    }

    pub fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(z, z, z, z)
    }

    pub fn identity() -> Self {
        Self::diag(re(T::one()), re(T::one()))
    }

    pub fn diag(d1: Complex<T>, d2: Complex<T>) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(d1, z, z, d2)
    }

    pub fn scalar(s: Complex<T>) -> Self {
        Self::diag(s, s)
    }

    /// `J = [[0, 1], [-1, 0]]`.
    pub fn symplectic() -> Self {
        Self::from_real(T::zero(), T::one(), -T::one(), T::zero())
    }

    /// The diagonaliser `M = 2^{-1/2} [[1, -1], [1, 1]]` of `[[0, 1], [1, 0]]`.
    pub fn diagonaliser() -> Self {
        let s = T::FRAC_1_SQRT_2();
        Self::from_real(s, -s, s, s)
    }

    /// `M^{-1} = 2^{-1/2} [[1, 1], [-1, 1]]`.
    pub fn diagonaliser_inv() -> Self {
        let s = T::FRAC_1_SQRT_2();
        Self::from_real(s, s, -s, s)
    }

    pub fn entries(&self) -> [Complex<T>; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn from_entries(e: [Complex<T>; 4]) -> Self {
        Self::new(e[0], e[1], e[2], e[3])
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn scale_re(&self, s: T) -> Self {
        Self::new(
            self.a11.scale(s),
            self.a12.scale(s),
            self.a21.scale(s),
            self.a22.scale(s),
        )
    }

    pub fn det(&self) -> Complex<T> {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> Complex<T> {
        self.a11 + self.a22
    }

    /// Exact inverse, or `None` when the determinant vanishes.
    pub fn inv(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == T::zero() || !(d.re.is_finite() && d.im.is_finite()) {
            return None;
        }
        let r = d.inv();
        Some(Self::new(self.a22 * r, -self.a12 * r, -self.a21 * r, self.a11 * r))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::new(self.a11.conj(), self.a21.conj(), self.a12.conj(), self.a22.conj())
    }

    pub fn frobenius_sq(&self) -> T {
        self.a11.norm_sqr() + self.a12.norm_sqr() + self.a21.norm_sqr() + self.a22.norm_sqr()
    }

    /// Spectral norm (largest singular value), in closed form.
    pub fn norm(&self) -> T {
        let f2 = self.frobenius_sq();
        let d = self.det().norm();
        let disc = (f2 * f2 - T::lit(4.0) * d * d).max(T::zero()).sqrt();
        ((f2 + disc) * T::half()).sqrt()
    }

    /// Smallest singular value.
    pub fn min_singular(&self) -> T {
        let smax = self.norm();
        if smax == T::zero() {
            T::zero()
        } else {
            self.det().norm() / smax
        }
    }

    /// Largest absolute entry; used for tolerance checks on individual entries.
    pub fn max_abs(&self) -> T {
        self.entries()
            .iter()
            .fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `M^{-1} X M` with the diagonaliser `M`.
    pub fn to_diagonal_frame(&self) -> Self {
        Self::diagonaliser_inv() * *self * Self::diagonaliser()
    }

    /// `M X M^{-1}`, the inverse of [`Mat2::to_diagonal_frame`].
    pub fn from_diagonal_frame(&self) -> Self {
        Self::diagonaliser() * *self * Self::diagonaliser_inv()
    }

    pub fn apply(&self, v: [Complex<T>; 2]) -> [Complex<T>; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// Lossy conversion to the `f64` instantiation, for reporting.
    pub fn to_f64(&self) -> Mat2<f64> {
        let cv = |z: Complex<T>| Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy());
        Mat2::new(cv(self.a11), cv(self.a12), cv(self.a21), cv(self.a22))
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;

    fn mul(self, b: Self) -> Self {
        Self::new(
            self.a11 * b.a11 + self.a12 * b.a21,
            self.a11 * b.a12 + self.a12 * b.a22,
            self.a21 * b.a11 + self.a22 * b.a21,
            self.a21 * b.a12 + self.a22 * b.a22,
        )
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;

    fn add(self, b: Self) -> Self {
        Self::new(self.a11 + b.a11, self.a12 + b.a12, self.a21 + b.a21, self.a22 + b.a22)
    }
}

impl<T: Real> AddAssign for Mat2<T> {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;

    fn sub(self, b: Self) -> Self {
        Self::new(self.a11 - b.a11, self.a12 - b.a12, self.a21 - b.a21, self.a22 - b.a22)
    }
}

impl<T: Real> Neg for Mat2<T> {
    type Output = Self;

    fn neg(self) -> Self {
        self.scale_re(-T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_mat() -> impl Strategy<Value = Mat2<f64>> {
        prop::array::uniform8(-3.0f64..3.0).prop_map(|v| {
            Mat2::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7]))
        })
    }

    #[test]
    fn diagonaliser_diagonalises_the_principal_part() {
        let xi = 3.5;
        let a = Mat2::from_real(0.0, xi, xi, 0.0);
        let d = a.to_diagonal_frame();
        assert!((d - Mat2::diag(re(xi), re(-xi))).max_abs() < 1e-14);
        let m = Mat2::<f64>::diagonaliser();
        assert!((m * Mat2::diagonaliser_inv() - Mat2::identity()).max_abs() < 1e-15);
    }

    #[test]
    fn norm_of_known_matrices() {
        assert!((Mat2::<f64>::identity().norm() - 1.0).abs() < 1e-15);
        let m = Mat2::from_real(0.0f64, 2.0, 0.0, 0.0);
        assert!((m.norm() - 2.0).abs() < 1e-15);
        assert!(m.min_singular().abs() < 1e-15);
        let r = Mat2::from_real(0.6f64, -0.8, 0.8, 0.6);
        assert!((r.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Mat2::from_real(1.0, 2.0, 2.0, 4.0);
        assert!(m.inv().is_none());
    }

    #[test]
    fn works_in_single_precision() {
        let m = Mat2::<f32>::from_real(2.0, 1.0, 1.0, 3.0);
        let p = m * m.inv().unwrap();
        assert!((p - Mat2::identity()).max_abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn inverse_and_determinant(m in arb_mat()) {
            prop_assume!(m.det().norm() > 1e-3);
            let p = m * m.inv().unwrap();
            prop_assert!((p - Mat2::identity()).max_abs() < 1e-9);
            let d = (m * m).det() - m.det() * m.det();
            prop_assert!(d.norm() < 1e-9);
        }

        #[test]
        fn spectral_norm_bounds(m in arb_mat()) {
            let n = m.norm();
            prop_assert!(n <= m.frobenius_sq().sqrt() + 1e-12);
            prop_assert!(n + 1e-12 >= m.max_abs());
            // ||A||^2 = ||A^H A||
            prop_assert!(((m.adjoint() * m).norm() - n * n).abs() < 1e-9 * (1.0 + n * n));
        }
    }
}
