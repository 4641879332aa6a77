//! Stored-energy density `W(F) = μ|F|^s + d(det F)` and its derivatives.
//!
//! The volumetric part is `d(ξ) = κ(ξ − 1)² + d₁(ξ)`. The default barrier is
//! `d₁(ξ) = 1/ξ` with `κ = 1/2`; other barriers plug in through [`Volumetric::Custom`].
//!
//! All derivatives are analytic. Every function rejects `det F ≤ 0` with
//! [`CoreError::Domain`], which is how loss of orientation surfaces to callers.

use alloc::format;

use crate::error::{CoreError, CoreResult};
use crate::tensor::Tensor2;

/// Smallest admissible Frobenius norm; `|F|^{s-4}` is singular at the origin.
pub const MIN_GRADIENT_NORM: f64 = 1e-12;

/// Volumetric function `d(ξ) = κ(ξ−1)² + d₁(ξ)`.
#[derive(Clone, Copy, Debug)]
pub enum Volumetric {
    /// `d₁(ξ) = 1/ξ`.
    Reciprocal { kappa: f64 },
    /// User barrier returning `[d₁(ξ), d₁'(ξ), d₁''(ξ)]`.
    Custom {
        kappa: f64,
        barrier: fn(f64) -> [f64; 3],
    },
}

impl PartialEq for Volumetric {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Volumetric::Reciprocal { kappa: a }, Volumetric::Reciprocal { kappa: b }) => a == b,
            (
                Volumetric::Custom {
                    kappa: a,
                    barrier: f,
                },
                Volumetric::Custom {
                    kappa: b,
                    barrier: g,
                },
            ) => a == b && core::ptr::fn_addr_eq(*f, *g),
            _ => false,
        }
    }
}

impl Volumetric {
    pub fn kappa(&self) -> f64 {
        match *self {
            Volumetric::Reciprocal { kappa } | Volumetric::Custom { kappa, .. } => kappa,
        }
    }

    fn barrier(&self, xi: f64) -> [f64; 3] {
        match *self {
            Volumetric::Reciprocal { .. } => {
                let inv = 1.0 / xi;
                [inv, -inv * inv, 2.0 * inv * inv * inv]
            }
            Volumetric::Custom { barrier, .. } => barrier(xi),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub mu: f64,
    /// Sobolev exponent, `1 < s < 2`.
    pub s: f64,
    pub volumetric: Volumetric,
}

/// Everything the element kernels need at one quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct PointResponse {
    /// `W(F)`.
    pub energy: f64,
    pub det: f64,
    pub cof: Tensor2,
    /// `∂W/∂F`.
    pub piola: Tensor2,
    /// `d'(det F)`.
    pub d1: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::standard()
    }
}

impl MaterialParams {
    /// `μ = 2/3`, `s = 3/2`, `d(ξ) = (ξ−1)²/2 + 1/ξ`.
    pub fn standard() -> Self {
        MaterialParams {
            mu: 2.0 / 3.0,
            s: 1.5,
            volumetric: Volumetric::Reciprocal { kappa: 0.5 },
        }
    }

    pub fn new(mu: f64, s: f64, volumetric: Volumetric) -> CoreResult<Self> {
        let p = MaterialParams { mu, s, volumetric };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> CoreResult<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(CoreError::Config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.s > 1.0 && self.s < 2.0) {
            return Err(CoreError::Config(format!(
                "exponent s must lie in (1, 2), got {}",
                self.s
            )));
        }
        if !(self.volumetric.kappa() > 0.0) {
            return Err(CoreError::Config("kappa must be positive".into()));
        }
        Ok(())
    }

    /// `(d(ξ), d'(ξ), d''(ξ))`.
    pub fn d_derivatives(&self, xi: f64) -> CoreResult<(f64, f64, f64)> {
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(CoreError::Domain(format!(
                "volumetric argument {xi:e} is not positive"
            )));
        }
        let kappa = self.volumetric.kappa();
        let [b, b1, b2] = self.volumetric.barrier(xi);
        let t = xi - 1.0;
        Ok((kappa * t * t + b, 2.0 * kappa * t + b1, 2.0 * kappa + b2))
    }

    fn check(&self, f: &Tensor2) -> CoreResult<(f64, f64)> {
        let det = f.det();
        if !(det > 0.0) || !det.is_finite() {
            return Err(CoreError::Domain(format!(
                "det F = {det:e} is not positive"
            )));
        }
        let norm = f.norm();
        if norm < MIN_GRADIENT_NORM {
            return Err(CoreError::Domain(format!("|F| = {norm:e} below guard")));
        }
        Ok((det, norm))
    }

    /// `W(F) = μ|F|^s + d(det F)`.
    pub fn energy_density(&self, f: &Tensor2) -> CoreResult<f64> {
        let (det, norm) = self.check(f)?;
        let (d, _, _) = self.d_derivatives(det)?;
        Ok(self.mu * norm.powf(self.s) + d)
    }

    /// `∂W/∂F = μ s |F|^{s−2} F + d'(det F) cof F`.
    pub fn first_piola(&self, f: &Tensor2) -> CoreResult<Tensor2> {
        Ok(self.respond(f)?.piola)
    }

    pub fn respond(&self, f: &Tensor2) -> CoreResult<PointResponse> {
        let (det, norm) = self.check(f)?;
        let (d, d1, _) = self.d_derivatives(det)?;
        let ns = norm.powf(self.s);
        let cof = f.cof();
        let coef = self.mu * self.s * ns / (norm * norm);
        Ok(PointResponse {
            energy: self.mu * ns + d,
            det,
            cof,
            piola: *f * coef + cof * d1,
            d1,
        })
    }

    /// Pointwise integrand of the Newton bilinear form,
    ///
    /// `μs(s−2)|F|^{s−4}(F:G)(F:H) + μs|F|^{s−2}(G:H) + d''(cof F:G)(cof F:H) + (d' − p)(cof G : H)`.
    pub fn tangent_action(&self, f: &Tensor2, p: f64, g: &Tensor2, h: &Tensor2) -> CoreResult<f64> {
        let (det, norm) = self.check(f)?;
        let (_, d1, d2) = self.d_derivatives(det)?;
        let n2 = norm * norm;
        let base = self.mu * self.s * norm.powf(self.s - 2.0);
        let cof = f.cof();
        Ok(base * (self.s - 2.0) / n2 * f.ddot(g) * f.ddot(h)
            + base * g.ddot(h)
            + d2 * cof.ddot(g) * cof.ddot(h)
            + (d1 - p) * g.cof().ddot(h))
    }

    /// The tangent as a symmetric 4×4 matrix on row-major flattened gradients,
    /// so that `tangent_action(F, p, G, H) = vec(G)ᵀ C vec(H)`.
    pub fn tangent_matrix(&self, f: &Tensor2, p: f64) -> CoreResult<[[f64; 4]; 4]> {
        let (det, norm) = self.check(f)?;
        let (_, d1, d2) = self.d_derivatives(det)?;
        let n2 = norm * norm;
        let base = self.mu * self.s * norm.powf(self.s - 2.0);
        let rank1 = base * (self.s - 2.0) / n2;
        let fv = f.to_vec4();
        let cv = f.cof().to_vec4();
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                c[i][j] = rank1 * fv[i] * fv[j] + d2 * cv[i] * cv[j];
            }
            c[i][i] += base;
        }
        // cof G : H = G22 H11 - G21 H12 - G12 H21 + G11 H22
        let k = d1 - p;
        c[0][3] += k;
        c[3][0] += k;
        c[1][2] -= k;
        c[2][1] -= k;
        Ok(c)
    }
}
