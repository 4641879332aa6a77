use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{
    DefectSpec, Element, ElementKind, LayerInfo, LayerKind, LayerTag, Mesh, MeshBuilder,
    MeshParams, MidRule,
};
use crate::error::{CoreError, CoreResult};
use crate::geometry::polar_midpoint;
use crate::material::MaterialParams;

const MAX_LAYERS: usize = 10_000;

/// Layer schedule marching outward from `ρ` to `δ`.
///
/// At inner radius `ε` the thickness is the largest `τ` with `τ ≤ C1√ε`,
/// `τ ≤ Cτ ε^{(1−α)/4} h` and `(ε+τ)^{2−s} ≤ ε^{2−s} + C h`; a remainder smaller than
/// half of the next thickness is merged into the last layer. The first angular
/// count satisfies `N ≥ C2 ε^{−1/2}` and `N ≥ ε^{−(1−α)/4}/(C_N h)` (rounded up to
/// even); afterwards `N` halves through a conforming layer whenever the halved count
/// still meets every bound and the resulting cells are not longer than
/// `max_aspect` times their thickness.
pub fn ring_schedule(
    defect: &DefectSpec,
    params: &MeshParams,
    material: &MaterialParams,
) -> CoreResult<Vec<LayerInfo>> {
    params.validate(material)?;
    let e = 2.0 - material.s;
    let p = params;
    let tau_at = |eps: f64| -> f64 {
        let teq = (eps.powf(e) + p.c * p.h).powf(1.0 / e) - eps;
        teq.min(p.c1 * eps.sqrt())
            .min(p.c_tau * eps.powf((1.0 - p.alpha) / 4.0) * p.h)
    };
    let n_bound = |eps: f64| eps.powf(-(1.0 - p.alpha) / 4.0) / (p.c_n * p.h);

    let delta = defect.delta;
    let mut eps = defect.rho;
    let mut layers: Vec<LayerInfo> = Vec::new();
    while eps < delta * (1.0 - 1e-12) {
        if layers.len() >= MAX_LAYERS {
            return Err(CoreError::Strategy(alloc::format!(
                "more than {MAX_LAYERS} layers between rho = {} and delta = {delta}",
                defect.rho
            )));
        }
        let mut tau = tau_at(eps);
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CoreError::Strategy(alloc::format!(
                "empty feasible thickness at radius {eps}"
            )));
        }
        let next = eps + tau;
        if next >= delta || delta - next < 0.5 * tau_at(next) {
            tau = delta - eps;
        }
        let (n, kind) = match layers.last() {
            None => {
                let mut n = (p.c2 / eps.sqrt()).max(n_bound(eps)).ceil() as usize;
                n = n.max(4);
                n += n % 2;
                (n, LayerKind::Standard)
            }
            Some(prev) => {
                let half = prev.n / 2;
                let hf = half as f64;
                let aspect = 2.0 * PI * (eps + tau) / hf / tau;
                let need = (p.c2 * (eps * tau).powf(-0.25))
                    .max(p.c2 / eps.sqrt())
                    .max(n_bound(eps));
                if prev.n % 2 == 0 && half >= 3 && hf >= need && aspect <= p.max_aspect {
                    (half, LayerKind::Conforming)
                } else {
                    (prev.n, LayerKind::Standard)
                }
            }
        };
        layers.push(LayerInfo {
            inner_radius: eps,
            thickness: tau,
            n,
            kind,
        });
        eps += tau;
    }
    Ok(layers)
}

/// Loops of a generated ring region.
pub(crate) struct RingLoops {
    /// Cavity boundary `[v0, m0, v1, m1, ...]`.
    pub inner: Vec<usize>,
    /// Outer circle vertices, counter-clockwise.
    pub outer: Vec<usize>,
}

/// Adds the ring region of one defect to `b`.
pub(crate) fn build_ring(
    b: &mut MeshBuilder,
    index: usize,
    defect: &DefectSpec,
    layers: &[LayerInfo],
) -> CoreResult<RingLoops> {
    let c = defect.center;
    let polar = MidRule::Polar(c);
    let circle = |b: &mut MeshBuilder, r: f64, n: usize| -> Vec<usize> {
        (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                b.add_node([c[0] + r * t.cos(), c[1] + r * t.sin()])
            })
            .collect()
    };
    let first = layers
        .first()
        .ok_or_else(|| CoreError::Strategy("empty layer schedule".into()))?;
    let mut inner = circle(b, defect.rho, first.n);
    let cavity_vertices = inner.clone();
    for (m, layer) in layers.iter().enumerate() {
        let r_out = if m + 1 == layers.len() {
            defect.delta
        } else {
            layer.inner_radius + layer.thickness
        };
        let outer = circle(b, r_out, layer.n);
        let tag = Some(LayerTag {
            defect: index,
            layer: m,
            kind: layer.kind,
        });
        let n = layer.n;
        match layer.kind {
            LayerKind::Standard => {
                if inner.len() != n {
                    return Err(CoreError::Strategy(
                        "standard layer with mismatched angular counts".into(),
                    ));
                }
                for j in 0..n {
                    let jn = (j + 1) % n;
                    let v = [inner[j], outer[j], outer[jn], inner[jn]];
                    let mids = [
                        b.edge_node(v[0], v[1], polar)?,
                        b.edge_node(v[1], v[2], polar)?,
                        b.edge_node(v[2], v[3], polar)?,
                        b.edge_node(v[3], v[0], polar)?,
                    ];
                    let center = b.add_node(polar_midpoint(b.nodes[v[0]], b.nodes[v[2]], c)?);
                    b.elements.push(Element {
                        kind: ElementKind::Quad9,
                        nodes: [
                            v[0], v[1], v[2], v[3], mids[0], mids[1], mids[2], mids[3], center,
                        ],
                        layer: tag,
                        curved: true,
                    });
                }
            }
            LayerKind::Conforming => {
                if inner.len() != 2 * n {
                    return Err(CoreError::Strategy(
                        "conforming layer must halve the angular count".into(),
                    ));
                }
                for j in 0..n {
                    let (a0, a1, a2) =
                        (inner[2 * j], inner[2 * j + 1], inner[(2 * j + 2) % (2 * n)]);
                    let (o0, o1) = (outer[j], outer[(j + 1) % n]);
                    for t in [[a0, a1, o0], [a1, o1, o0], [a1, a2, o1]] {
                        b.add_triangle(t, [polar; 3], tag)?;
                    }
                }
            }
        }
        inner = outer;
    }
    let mut cavity = Vec::with_capacity(2 * cavity_vertices.len());
    let nv = cavity_vertices.len();
    for j in 0..nv {
        let (a, bb) = (cavity_vertices[j], cavity_vertices[(j + 1) % nv]);
        cavity.push(a);
        cavity.push(b.edge_node(a, bb, polar)?);
    }
    Ok(RingLoops {
        inner: cavity,
        outer: inner,
    })
}

/// The ring-region mesh of a single defect. The outer circle counts as Dirichlet
/// boundary only when the region fills the disk.
pub fn make_ring_mesh(
    defect: &DefectSpec,
    params: &MeshParams,
    material: &MaterialParams,
) -> CoreResult<Mesh> {
    let layers = ring_schedule(defect, params, material)?;
    let mut b = MeshBuilder::default();
    let loops = build_ring(&mut b, 0, defect, &layers)?;
    let mut dirichlet = Vec::new();
    if defect.fills_domain() {
        let no = loops.outer.len();
        for j in 0..no {
            let (a, c) = (loops.outer[j], loops.outer[(j + 1) % no]);
            dirichlet.push(a);
            dirichlet.push(b.edge_node(a, c, MidRule::Polar(defect.center))?);
        }
        dirichlet.sort_unstable();
    }
    Ok(Mesh {
        nodes: b.nodes,
        elements: b.elements,
        dirichlet,
        cavities: alloc::vec![loops.inner],
        layers: alloc::vec![layers],
        defects: alloc::vec![*defect],
    })
}
