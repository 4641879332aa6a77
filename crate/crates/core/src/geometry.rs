//! Polar midpoint rule and iso-parametric element maps.

use core::f64::consts::PI;

use crate::error::{CoreError, CoreResult};
use crate::mesh::{Element, ElementKind, Mesh};
use crate::shape::{quad_q2, tri_p2};
use crate::tensor::{Point, Tensor2};

/// Midpoint of the arc-like edge `a_i a_j` in polar coordinates about `center`:
/// averaged radius and averaged angle, the angles taken within π of each other.
pub fn polar_midpoint(ai: Point, aj: Point, center: Point) -> CoreResult<Point> {
    if ai == aj {
        return Err(CoreError::Geometry(alloc::format!(
            "polar midpoint of coincident points ({}, {})",
            ai[0],
            ai[1]
        )));
    }
    let (xi, yi) = (ai[0] - center[0], ai[1] - center[1]);
    let (xj, yj) = (aj[0] - center[0], aj[1] - center[1]);
    let ri = xi.hypot(yi);
    let rj = xj.hypot(yj);
    if ri == 0.0 || rj == 0.0 {
        return Err(CoreError::Geometry(
            "polar midpoint endpoint at the center".into(),
        ));
    }
    let ti = yi.atan2(xi);
    let mut tj = yj.atan2(xj);
    if tj - ti > PI {
        tj -= 2.0 * PI;
    } else if ti - tj > PI {
        tj += 2.0 * PI;
    }
    let r = 0.5 * (ri + rj);
    let t = 0.5 * (ti + tj);
    Ok([center[0] + r * t.cos(), center[1] + r * t.sin()])
}

/// Straight-edge midpoint.
#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Evaluates the geometry map of `elem` at a reference point, with its Jacobian.
pub fn iso_map(elem: &Element, mesh: &Mesh, xhat: Point) -> (Point, Tensor2, f64) {
    match elem.kind {
        ElementKind::Tri6 => {
            let (v, g) = tri_p2(xhat);
            map_with(&elem.nodes[..6], mesh, &v, &g)
        }
        ElementKind::Quad9 => {
            let (v, g) = quad_q2(xhat);
            map_with(&elem.nodes[..9], mesh, &v, &g)
        }
    }
}

fn map_with(nodes: &[usize], mesh: &Mesh, v: &[f64], g: &[[f64; 2]]) -> (Point, Tensor2, f64) {
    let mut x = [0.0; 2];
    let mut df = [[0.0; 2]; 2];
    for (a, &n) in nodes.iter().enumerate() {
        let p = mesh.nodes[n];
        for i in 0..2 {
            x[i] += v[a] * p[i];
            for j in 0..2 {
                df[i][j] += p[i] * g[a][j];
            }
        }
    }
    let df = Tensor2(df);
    let det = df.det();
    (x, df, det)
}

/// Whether `xhat` lies in the reference element, with slack `tol`.
pub fn in_reference(kind: ElementKind, xhat: Point, tol: f64) -> bool {
    match kind {
        ElementKind::Tri6 => xhat[0] >= -tol && xhat[1] >= -tol && xhat[0] + xhat[1] <= 1.0 + tol,
        ElementKind::Quad9 => xhat[0].abs() <= 1.0 + tol && xhat[1].abs() <= 1.0 + tol,
    }
}

/// Reference coordinates of the physical point `x` in `elem`, by Newton's method
/// on the geometry map. `None` if the iteration fails or the point is outside.
pub fn inverse_map(elem: &Element, mesh: &Mesh, x: Point, tol: f64) -> Option<Point> {
    let mut xh = match elem.kind {
        ElementKind::Tri6 => [1.0 / 3.0, 1.0 / 3.0],
        ElementKind::Quad9 => [0.0, 0.0],
    };
    let scale = elem_diameter(elem, mesh).max(f64::MIN_POSITIVE);
    for _ in 0..50 {
        let (y, df, _) = iso_map(elem, mesh, xh);
        let r = [x[0] - y[0], x[1] - y[1]];
        let inv = df.inverse()?;
        let d = inv.apply(r);
        xh = [xh[0] + d[0], xh[1] + d[1]];
        if !(xh[0].is_finite() && xh[1].is_finite()) || xh[0].abs() > 4.0 || xh[1].abs() > 4.0 {
            return None;
        }
        if r[0].hypot(r[1]) <= 1e-14 * scale || d[0].hypot(d[1]) <= 1e-15 {
            break;
        }
    }
    let (y, _, _) = iso_map(elem, mesh, xh);
    if (x[0] - y[0]).hypot(x[1] - y[1]) > 1e-10 * scale {
        return None;
    }
    in_reference(elem.kind, xh, tol).then_some(xh)
}

/// Largest distance between two vertices.
pub fn elem_diameter(elem: &Element, mesh: &Mesh) -> f64 {
    let nv = elem.kind.vertex_count();
    let mut d: f64 = 0.0;
    for a in 0..nv {
        for b in a + 1..nv {
            d = d.max(crate::tensor::dist(
                mesh.nodes[elem.nodes[a]],
                mesh.nodes[elem.nodes[b]],
            ));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_midpoint_examples() {
        let m = polar_midpoint([1.0, 0.0], [0.0, 1.0], [0.0, 0.0]).unwrap();
        let s = 0.5f64.sqrt();
        assert!((m[0] - s).abs() < 1e-15 && (m[1] - s).abs() < 1e-15);
        let m = polar_midpoint([2.0, 0.0], [0.0, 1.0], [0.0, 0.0]).unwrap();
        assert!((m[0] - 1.5 * s).abs() < 1e-15 && (m[1] - 1.5 * s).abs() < 1e-15);
        assert!(polar_midpoint([1.0, 1.0], [1.0, 1.0], [0.0, 0.0]).is_err());
        assert!(polar_midpoint([0.0, 0.0], [1.0, 1.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn branch_cut_matches_rotated_computation() {
        let c = [0.3, -0.1];
        let t1 = PI - 0.1;
        let t2 = -PI + 0.2;
        let a = [c[0] + 0.5 * t1.cos(), c[1] + 0.5 * t1.sin()];
        let b = [c[0] + 0.7 * t2.cos(), c[1] + 0.7 * t2.sin()];
        let m = polar_midpoint(a, b, c).unwrap();
        // rotate by π so the cut is avoided, then rotate back
        let rot = |p: Point| [2.0 * c[0] - p[0], 2.0 * c[1] - p[1]];
        let mr = rot(polar_midpoint(rot(a), rot(b), c).unwrap());
        assert!((m[0] - mr[0]).abs() < 1e-14 && (m[1] - mr[1]).abs() < 1e-14);
        assert!(m[0] < c[0]);
    }
}
