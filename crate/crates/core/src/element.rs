//! Element kernels of the mixed formulation: Lagrangian, residual and tangent.
//!
//! Local displacement indices are `2a + i` (node `a`, component `i`).

use alloc::vec::Vec;

use crate::dof::{DofMap, State};
use crate::error::{CoreError, CoreResult};
use crate::geometry::iso_map;
use crate::material::MaterialParams;
use crate::mesh::{ElementKind, Mesh};
use crate::quadrature::QuadratureRule;
use crate::shape::{pressure_basis, quad_q2, tri_p2plus};
use crate::tensor::{Point, Tensor2};

pub const MAX_NODES: usize = 9;
pub const MAX_LOCAL: usize = 2 * MAX_NODES;

/// Geometry of one quadrature point, independent of the state.
#[derive(Clone, Copy, Debug)]
pub struct QpGeometry {
    pub x: Point,
    /// Quadrature weight times `det DF`.
    pub weight: f64,
    pub values: [f64; MAX_NODES],
    /// Physical gradients of the displacement basis.
    pub grads: [[f64; 2]; MAX_NODES],
    pub pbasis: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct ElementGeometry {
    /// Number of displacement nodes (7 or 9).
    pub n: usize,
    pub qps: Vec<QpGeometry>,
}

/// Displacement basis values and reference gradients, padded to 9 entries.
pub fn displacement_basis(
    kind: ElementKind,
    xhat: Point,
) -> (usize, [f64; MAX_NODES], [[f64; 2]; MAX_NODES]) {
    let mut v = [0.0; MAX_NODES];
    let mut g = [[0.0; 2]; MAX_NODES];
    match kind {
        ElementKind::Quad9 => {
            let (a, b) = quad_q2(xhat);
            v.copy_from_slice(&a);
            g.copy_from_slice(&b);
            (9, v, g)
        }
        ElementKind::Tri6 => {
            let (a, b) = tri_p2plus(xhat);
            v[..7].copy_from_slice(&a);
            g[..7].copy_from_slice(&b);
            (7, v, g)
        }
    }
}

/// Basis data at a single reference point of element `e`.
pub fn qp_geometry(mesh: &Mesh, e: usize, xhat: Point, w: f64) -> CoreResult<QpGeometry> {
    let el = &mesh.elements[e];
    let (x, df, det) = iso_map(el, mesh, xhat);
    let inv = match df.inverse() {
        Some(inv) if det > 0.0 => inv,
        _ => {
            return Err(CoreError::Geometry(alloc::format!(
                "element {e}: geometry Jacobian {det:e} at ({}, {})",
                xhat[0],
                xhat[1]
            )))
        }
    };
    let (n, values, rg) = displacement_basis(el.kind, xhat);
    let mut grads = [[0.0; 2]; MAX_NODES];
    let m = &inv.0;
    for a in 0..n {
        grads[a] = [
            rg[a][0] * m[0][0] + rg[a][1] * m[1][0],
            rg[a][0] * m[0][1] + rg[a][1] * m[1][1],
        ];
    }
    Ok(QpGeometry {
        x,
        weight: w * det,
        values,
        grads,
        pbasis: pressure_basis(xhat),
    })
}

pub fn element_geometry(
    mesh: &Mesh,
    e: usize,
    rule: &QuadratureRule,
) -> CoreResult<ElementGeometry> {
    let qps = rule
        .iter()
        .map(|(xh, w)| qp_geometry(mesh, e, xh, w))
        .collect::<CoreResult<Vec<_>>>()?;
    let n = match mesh.elements[e].kind {
        ElementKind::Quad9 => 9,
        ElementKind::Tri6 => 7,
    };
    Ok(ElementGeometry { n, qps })
}

/// Element-local coefficients gathered from a global state.
#[derive(Clone, Copy, Debug)]
pub struct LocalState {
    pub n: usize,
    pub u: [Point; MAX_NODES],
    pub p: [f64; 3],
}

impl LocalState {
    pub fn gather(dofs: &DofMap, mesh: &Mesh, e: usize, u: &[f64], p: &[f64]) -> Self {
        let (nodes, n) = dofs.element_nodes(mesh, e);
        let mut lu = [[0.0; 2]; MAX_NODES];
        for a in 0..n {
            lu[a] = [u[2 * nodes[a]], u[2 * nodes[a] + 1]];
        }
        LocalState {
            n,
            u: lu,
            p: [p[3 * e], p[3 * e + 1], p[3 * e + 2]],
        }
    }

    pub fn from_state(dofs: &DofMap, mesh: &Mesh, e: usize, s: &State) -> Self {
        Self::gather(dofs, mesh, e, &s.u, &s.p)
    }

    /// `∇u` at a quadrature point.
    #[inline]
    pub fn gradient(&self, q: &QpGeometry) -> Tensor2 {
        let mut f = [[0.0; 2]; 2];
        for a in 0..self.n {
            let (u, g) = (self.u[a], q.grads[a]);
            f[0][0] += u[0] * g[0];
            f[0][1] += u[0] * g[1];
            f[1][0] += u[1] * g[0];
            f[1][1] += u[1] * g[1];
        }
        Tensor2(f)
    }

    #[inline]
    pub fn pressure(&self, q: &QpGeometry) -> f64 {
        self.p[0] * q.pbasis[0] + self.p[1] * q.pbasis[1] + self.p[2] * q.pbasis[2]
    }

    /// `u` at a quadrature point.
    pub fn value(&self, q: &QpGeometry) -> Point {
        let mut v = [0.0; 2];
        for a in 0..self.n {
            v[0] += self.u[a][0] * q.values[a];
            v[1] += self.u[a][1] * q.values[a];
        }
        v
    }
}

fn orientation(element: usize, f: &Tensor2) -> CoreResult<f64> {
    let det = f.det();
    if det > 0.0 && det.is_finite() {
        Ok(det)
    } else {
        Err(CoreError::Orientation { element, det })
    }
}

fn material_at(
    mat: &MaterialParams,
    element: usize,
    f: &Tensor2,
) -> CoreResult<crate::material::PointResponse> {
    orientation(element, f)?;
    mat.respond(f).map_err(|_| CoreError::Orientation {
        element,
        det: f.det(),
    })
}

/// `∫_T W(∇u) − p (det ∇u − 1)`.
pub fn element_energy(
    mat: &MaterialParams,
    g: &ElementGeometry,
    s: &LocalState,
    element: usize,
) -> CoreResult<f64> {
    let mut e = 0.0;
    for q in &g.qps {
        let f = s.gradient(q);
        let r = material_at(mat, element, &f)?;
        e += q.weight * (r.energy - s.pressure(q) * (r.det - 1.0));
    }
    Ok(e)
}

/// Negative gradients of the element Lagrangian with respect to `u` (`rf`) and
/// the gradient with respect to `p` (`rg = −∫ q (det ∇u − 1)`).
pub fn element_residual(
    mat: &MaterialParams,
    g: &ElementGeometry,
    s: &LocalState,
    element: usize,
) -> CoreResult<([f64; MAX_LOCAL], [f64; 3])> {
    let mut rf = [0.0; MAX_LOCAL];
    let mut rg = [0.0; 3];
    for q in &g.qps {
        let f = s.gradient(q);
        let r = material_at(mat, element, &f)?;
        let p = s.pressure(q);
        let sig = (r.piola - r.cof * p).0;
        let w = q.weight;
        for a in 0..g.n {
            let ga = q.grads[a];
            rf[2 * a] -= w * (sig[0][0] * ga[0] + sig[0][1] * ga[1]);
            rf[2 * a + 1] -= w * (sig[1][0] * ga[0] + sig[1][1] * ga[1]);
        }
        for k in 0..3 {
            rg[k] -= w * q.pbasis[k] * (r.det - 1.0);
        }
    }
    Ok((rf, rg))
}

/// Sums of absolute values of the terms of `rf` and `rg`; the roundoff floor of
/// the residual is of order `ε` times these.
pub fn element_residual_scale(
    mat: &MaterialParams,
    g: &ElementGeometry,
    s: &LocalState,
    element: usize,
) -> CoreResult<([f64; MAX_LOCAL], [f64; 3])> {
    let mut rf = [0.0; MAX_LOCAL];
    let mut rg = [0.0; 3];
    for q in &g.qps {
        let f = s.gradient(q);
        let r = material_at(mat, element, &f)?;
        let p = s.pressure(q);
        let w = q.weight.abs();
        let (pi, ci) = (r.piola.0, (r.cof * p).0);
        for a in 0..g.n {
            let ga = q.grads[a];
            for i in 0..2 {
                rf[2 * a + i] += w
                    * ((pi[i][0] * ga[0]).abs()
                        + (pi[i][1] * ga[1]).abs()
                        + (ci[i][0] * ga[0]).abs()
                        + (ci[i][1] * ga[1]).abs());
            }
        }
        for k in 0..3 {
            rg[k] += w * (q.pbasis[k] * r.det).abs() + w * q.pbasis[k].abs();
        }
    }
    Ok((rf, rg))
}

/// Element blocks of the Newton system.
#[derive(Clone, Debug)]
pub struct ElementTangent {
    /// `a(φ_j, φ_i)`.
    pub a: [[f64; MAX_LOCAL]; MAX_LOCAL],
    /// `b(φ_j, ψ_k) = ∫ ψ_k cof ∇u : ∇φ_j`.
    pub b: [[f64; MAX_LOCAL]; 3],
    pub rf: [f64; MAX_LOCAL],
    pub rg: [f64; 3],
}

pub fn element_tangent(
    mat: &MaterialParams,
    g: &ElementGeometry,
    s: &LocalState,
    element: usize,
) -> CoreResult<ElementTangent> {
    let mut out = ElementTangent {
        a: [[0.0; MAX_LOCAL]; MAX_LOCAL],
        b: [[0.0; MAX_LOCAL]; 3],
        rf: [0.0; MAX_LOCAL],
        rg: [0.0; 3],
    };
    let nl = 2 * g.n;
    for q in &g.qps {
        let f = s.gradient(q);
        let r = material_at(mat, element, &f)?;
        let p = s.pressure(q);
        let c = mat
            .tangent_matrix(&f, p)
            .map_err(|_| CoreError::Orientation {
                element,
                det: r.det,
            })?;
        let w = q.weight;
        let sig = (r.piola - r.cof * p).0;
        let cof = r.cof.0;
        // t[(a,i)][kl] = w Σ_j C[2i+j][kl] ∂_j φ_a
        let mut t = [[0.0; 4]; MAX_LOCAL];
        for a in 0..g.n {
            let ga = q.grads[a];
            for i in 0..2 {
                let row = &mut t[2 * a + i];
                for kl in 0..4 {
                    row[kl] = w * (c[2 * i][kl] * ga[0] + c[2 * i + 1][kl] * ga[1]);
                }
            }
            let d0 = cof[0][0] * ga[0] + cof[0][1] * ga[1];
            let d1 = cof[1][0] * ga[0] + cof[1][1] * ga[1];
            for k in 0..3 {
                out.b[k][2 * a] += w * q.pbasis[k] * d0;
                out.b[k][2 * a + 1] += w * q.pbasis[k] * d1;
            }
            out.rf[2 * a] -= w * (sig[0][0] * ga[0] + sig[0][1] * ga[1]);
            out.rf[2 * a + 1] -= w * (sig[1][0] * ga[0] + sig[1][1] * ga[1]);
        }
        for k in 0..3 {
            out.rg[k] -= w * q.pbasis[k] * (r.det - 1.0);
        }
        for row in 0..nl {
            let tr = t[row];
            for bnode in 0..g.n {
                let gb = q.grads[bnode];
                out.a[row][2 * bnode] += tr[0] * gb[0] + tr[1] * gb[1];
                out.a[row][2 * bnode + 1] += tr[2] * gb[0] + tr[3] * gb[1];
            }
        }
    }
    Ok(out)
}

/// Extremes of `det ∇u` and of the singular values of `∇u` over the quadrature points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientBounds {
    pub min_det: f64,
    pub max_det: f64,
    pub min_sv: f64,
    pub max_sv: f64,
}

impl GradientBounds {
    pub const EMPTY: GradientBounds = GradientBounds {
        min_det: f64::INFINITY,
        max_det: f64::NEG_INFINITY,
        min_sv: f64::INFINITY,
        max_sv: 0.0,
    };

    pub fn merge(self, o: GradientBounds) -> GradientBounds {
        GradientBounds {
            min_det: self.min_det.min(o.min_det),
            max_det: self.max_det.max(o.max_det),
            min_sv: self.min_sv.min(o.min_sv),
            max_sv: self.max_sv.max(o.max_sv),
        }
    }
}

pub fn element_bounds(g: &ElementGeometry, s: &LocalState) -> GradientBounds {
    let mut b = GradientBounds::EMPTY;
    for q in &g.qps {
        let f = s.gradient(q);
        let det = f.det();
        let (s0, s1) = f.singular_values();
        b = b.merge(GradientBounds {
            min_det: det,
            max_det: det,
            min_sv: s0,
            max_sv: s1,
        });
    }
    // NaN determinants must never pass a positivity check
    if b.min_det.is_nan() {
        b.min_det = f64::NEG_INFINITY;
    }
    b
}

/// Area enclosed by the deformed cavity boundary of defect `k`,
/// `½∮ (u₁ du₂ − u₂ du₁)` over the quadratic boundary edges.
pub fn cavity_volume(mesh: &Mesh, u: &[f64], k: usize) -> f64 {
    const T: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut v = 0.0;
    for [a, m, b] in mesh.cavity_edges(k) {
        let pts = [
            [u[2 * a], u[2 * a + 1]],
            [u[2 * m], u[2 * m + 1]],
            [u[2 * b], u[2 * b + 1]],
        ];
        for (t, w) in T.iter().zip(W) {
            let l = [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)];
            let dl = [t - 0.5, -2.0 * t, t + 0.5];
            let (mut x, mut dx) = ([0.0; 2], [0.0; 2]);
            for i in 0..3 {
                for c in 0..2 {
                    x[c] += l[i] * pts[i][c];
                    dx[c] += dl[i] * pts[i][c];
                }
            }
            v += 0.5 * w * (x[0] * dx[1] - x[1] * dx[0]);
        }
    }
    v
}
