//! 2×2 tensors and the handful of operations the kernels need.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A 2D point or vector.
pub type Point = [f64; 2];

/// Row-major 2×2 matrix, `self.0[i][j]` is the entry in row `i`, column `j`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Tensor2(pub [[f64; 2]; 2]);

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Tensor2 = Tensor2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Tensor2([[a11, a12], [a21, a22]])
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Tensor2([[a, 0.0], [0.0, b]])
    }

    /// Outer product `a ⊗ b`.
    pub fn outer(a: Point, b: Point) -> Self {
        Tensor2([[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]])
    }

    #[inline]
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Cofactor matrix, `det(F) F^{-T}` for invertible `F`. It is the derivative of `det`.
    #[inline]
    pub fn cof(&self) -> Self {
        let m = &self.0;
        Tensor2([[m[1][1], -m[1][0]], [-m[0][1], m[0][0]]])
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Tensor2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// Inverse, or `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(self.cof().transpose().scale(1.0 / d))
    }

    /// Frobenius inner product `A : B`.
    #[inline]
    pub fn ddot(&self, other: &Tensor2) -> f64 {
        let (a, b) = (&self.0, &other.0);
        a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    /// Frobenius norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        let m = &self.0;
        Tensor2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    pub fn matmul(&self, other: &Tensor2) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Tensor2(out)
    }

    pub fn apply(&self, x: Point) -> Point {
        let m = &self.0;
        [
            m[0][0] * x[0] + m[0][1] * x[1],
            m[1][0] * x[0] + m[1][1] * x[1],
        ]
    }

    /// Row-major flattening `(11, 12, 21, 22)`.
    #[inline]
    pub fn to_vec4(&self) -> [f64; 4] {
        let m = &self.0;
        [m[0][0], m[0][1], m[1][0], m[1][1]]
    }

    pub fn from_vec4(v: [f64; 4]) -> Self {
        Tensor2([[v[0], v[1]], [v[2], v[3]]])
    }

    /// Singular values `(σ_min, σ_max)`.
    pub fn singular_values(&self) -> (f64, f64) {
        let n2 = self.norm_sq();
        let d = self.det().abs();
        // σ1² + σ2² = |F|², σ1 σ2 = |det F|
        let disc = (n2 * n2 - 4.0 * d * d).max(0.0).sqrt();
        let smax = ((n2 + disc) * 0.5).sqrt();
        let smin = if smax > 0.0 { d / smax } else { 0.0 };
        (smin, smax)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec4().iter().all(|v| v.is_finite())
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, rhs: Tensor2) -> Tensor2 {
        let (a, b) = (self.0, rhs.0);
        Tensor2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, rhs: Tensor2) {
        *self = *self + rhs;
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, rhs: Tensor2) -> Tensor2 {
        self + (-rhs)
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, rhs: f64) -> Tensor2 {
        self.scale(rhs)
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}
