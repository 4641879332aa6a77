//! Quadrature on the reference square `[-1,1]²` and the unit triangle.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::mesh::ElementKind;
use crate::tensor::Point;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Tensor-product Gauss rule on `[-1,1]²` with `n` points per direction.
pub fn square_gauss(n: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    QuadratureRule { points, weights }
}

/// Collapsed (Duffy) Gauss rule on the unit triangle, exact for degree `2n − 2`.
pub fn triangle_collapsed(n: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let a = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let b = 0.5 * (x[j] + 1.0);
            points.push([a, b * (1.0 - a)]);
            weights.push(0.25 * w[i] * w[j] * (1.0 - a));
        }
    }
    QuadratureRule { points, weights }
}

/// Symmetric 12-point rule on the unit triangle, exact for degree 6.
pub fn triangle_degree6() -> QuadratureRule {
    const A: [(f64, f64, f64); 2] = [
        (
            0.249_286_745_170_910_4,
            0.501_426_509_658_179_2,
            0.116_786_275_726_379_4,
        ),
        (
            0.063_089_014_491_502_2,
            0.873_821_971_016_995_6,
            0.050_844_906_370_206_8,
        ),
    ];
    const C: (f64, f64, f64, f64) = (
        0.053_145_049_844_816_9,
        0.310_352_451_033_784_4,
        0.636_502_499_121_398_7,
        0.082_851_075_618_373_6,
    );
    let mut points = Vec::with_capacity(12);
    let mut weights = Vec::with_capacity(12);
    for &(a, b, w) in &A {
        for bary in [[b, a, a], [a, b, a], [a, a, b]] {
            points.push([bary[1], bary[2]]);
            weights.push(0.5 * w);
        }
    }
    let (a, b, c, w) = C;
    for bary in [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ] {
        points.push([bary[1], bary[2]]);
        weights.push(0.5 * w);
    }
    QuadratureRule { points, weights }
}

/// Default volume rule: 4×4 Gauss on quads, the 12-point degree-6 rule on triangles.
pub fn default_rule(kind: ElementKind) -> QuadratureRule {
    match kind {
        ElementKind::Quad9 => square_gauss(4),
        ElementKind::Tri6 => triangle_degree6(),
    }
}

/// A rule of at least the default accuracy; `order` adds points per direction.
pub fn rule_with_extra(kind: ElementKind, extra: usize) -> QuadratureRule {
    if extra == 0 {
        return default_rule(kind);
    }
    match kind {
        ElementKind::Quad9 => square_gauss(4 + extra),
        ElementKind::Tri6 => triangle_collapsed(4 + extra),
    }
}
