use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::Mul;

use crate::error::{Error, Result};

/// A real 2x2 matrix acting on column vectors, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// Real matrix of the R-linear map `v -> a v + b conj(v)`.
    pub fn from_complex_pair(a: Complex64, b: Complex64) -> Self {
        Mat2::new(a.re + b.re, b.im - a.im, a.im + b.im, a.re - b.re)
    }

    /// Inverse of [`Mat2::from_complex_pair`]: returns `(a, b)` with `self = a id + b conj`.
    pub fn complex_pair(&self) -> (Complex64, Complex64) {
        let a = Complex64::new(0.5 * (self.a11 + self.a22), 0.5 * (self.a21 - self.a12));
        let b = Complex64::new(0.5 * (self.a11 - self.a22), 0.5 * (self.a21 + self.a12));
        (a, b)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn max_abs(&self) -> f64 {
        self.a11
            .abs()
            .max(self.a12.abs())
            .max(self.a21.abs())
            .max(self.a22.abs())
    }

    pub fn is_invertible(&self) -> bool {
        let m = self.max_abs();
        m > 0.0 && self.det().abs() > 1e-12 * m * m
    }

    pub fn inverse(&self) -> Option<Mat2> {
        if !self.is_invertible() {
            return None;
        }
        let d = self.det();
        Some(Mat2::new(
            self.a22 / d,
            -self.a12 / d,
            -self.a21 / d,
            self.a11 / d,
        ))
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    pub fn apply_c(&self, z: Complex64) -> Complex64 {
        let [x, y] = self.apply([z.re, z.im]);
        Complex64::new(x, y)
    }

    /// Complex dilatation `conj-linear part / linear part` of the map.
    ///
    /// Orientation-preserving maps have `|mu| < 1`; reflections give `|mu| > 1`.
    pub fn beltrami_coefficient(&self) -> Complex64 {
        let (a, b) = self.complex_pair();
        if a.norm() == 0.0 {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        b / a
    }

    /// Euclidean operator norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        let (a, b) = self.complex_pair();
        a.norm() + b.norm()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

/// An invertible linear map between two normed planes.
///
/// The norms themselves are supplied per call; the map only carries the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearMap2(Mat2);

impl LinearMap2 {
    pub fn new(m: Mat2) -> Result<Self> {
        if m.is_invertible() && m.max_abs().is_finite() {
            Ok(LinearMap2(m))
        } else {
            Err(Error::SingularMap { det: m.det() })
        }
    }

    pub fn identity() -> Self {
        LinearMap2(Mat2::IDENTITY)
    }

    pub fn from_entries(a11: f64, a12: f64, a21: f64, a22: f64) -> Result<Self> {
        LinearMap2::new(Mat2::new(a11, a12, a21, a22))
    }

    pub fn matrix(&self) -> Mat2 {
        self.0
    }

    pub fn inverse(&self) -> LinearMap2 {
        // invertibility is a construction invariant
        LinearMap2(self.0.inverse().expect("LinearMap2 is invertible"))
    }

    pub fn compose(&self, inner: &LinearMap2) -> Result<LinearMap2> {
        LinearMap2::new(self.0 * inner.0)
    }

    pub fn det(&self) -> f64 {
        self.0.det()
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        self.0.apply(v)
    }
}

impl<'de> Deserialize<'de> for LinearMap2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Mat2::deserialize(d)?;
        LinearMap2::new(m).map_err(serde::de::Error::custom)
    }
}
