use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::{ElementKind, LayerKind, Mesh, MeshParams};
use crate::geometry::{elem_diameter, iso_map};
use crate::material::MaterialParams;
use crate::quadrature::default_rule;
use crate::shape::{QUAD_NODES, TRI_NODES};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementCheck {
    /// Smallest `det DF` over quadrature points and element nodes.
    pub min_det: f64,
    /// Vertex diameter over the target size `h`.
    pub h_ratio: f64,
}

/// Per-layer status of the meshing conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerCheck {
    pub count_ok: bool,
    pub tau_sqrt_ok: bool,
    pub tau_h_ok: bool,
    pub n_lower_ok: bool,
    pub n_h_ok: bool,
    pub equidistribution_ok: bool,
    /// The outermost layer, clipped to end at `δ`; its thickness bounds are advisory.
    pub last: bool,
}

impl LayerCheck {
    pub fn ok(&self) -> bool {
        let counts = self.count_ok && self.n_lower_ok && self.n_h_ok;
        counts && (self.last || (self.tau_sqrt_ok && self.tau_h_ok && self.equidistribution_ok))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshReport {
    pub elements: Vec<ElementCheck>,
    /// Elements with a non-positive Jacobian somewhere.
    pub inverted: Vec<usize>,
    /// Element edges used once that lie on neither the outer circle nor a cavity.
    pub open_edges: Vec<(usize, usize)>,
    /// Edges whose midpoint differs between the two adjacent elements.
    pub mismatched_edges: Vec<(usize, usize)>,
    pub layers: Vec<Vec<LayerCheck>>,
    pub min_det: f64,
    pub h_ratio_min: f64,
    pub h_ratio_max: f64,
}

impl MeshReport {
    pub fn valid(&self) -> bool {
        self.inverted.is_empty()
            && self.open_edges.is_empty()
            && self.mismatched_edges.is_empty()
            && self.layers.iter().flatten().all(LayerCheck::ok)
    }

    /// Layers whose advisory bounds are exceeded (only ever the clipped last layer).
    pub fn flagged_layers(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, ls) in self.layers.iter().enumerate() {
            for (m, l) in ls.iter().enumerate() {
                if !(l.tau_sqrt_ok && l.tau_h_ok && l.equidistribution_ok) {
                    out.push((k, m));
                }
            }
        }
        out
    }
}

/// Checks orientation, conformity and the ring-layer conditions.
pub fn validate_mesh(mesh: &Mesh, params: &MeshParams, material: &MaterialParams) -> MeshReport {
    let mut elements = Vec::with_capacity(mesh.elements.len());
    let mut inverted = Vec::new();
    let rules = [
        default_rule(ElementKind::Quad9),
        default_rule(ElementKind::Tri6),
    ];
    for (e, el) in mesh.elements.iter().enumerate() {
        let (rule, refs): (_, &[_]) = match el.kind {
            ElementKind::Quad9 => (&rules[0], &QUAD_NODES[..]),
            ElementKind::Tri6 => (&rules[1], &TRI_NODES[..]),
        };
        let mut min_det = f64::INFINITY;
        for x in rule.points.iter().chain(refs) {
            min_det = min_det.min(iso_map(el, mesh, *x).2);
        }
        if !(min_det > 0.0) {
            inverted.push(e);
        }
        elements.push(ElementCheck {
            min_det,
            h_ratio: elem_diameter(el, mesh) / params.h,
        });
    }

    let mut edge_use: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut mismatched = Vec::new();
    for el in &mesh.elements {
        for ed in el.kind.edges() {
            let (a, b, m) = (el.nodes[ed[0]], el.nodes[ed[1]], el.nodes[ed[2]]);
            let key = (a.min(b), a.max(b));
            let entry = edge_use.entry(key).or_insert((0, m));
            entry.0 += 1;
            if entry.1 != m {
                mismatched.push(key);
            }
        }
    }
    let dir: BTreeSet<usize> = mesh.dirichlet.iter().copied().collect();
    let mut cavity_edges = BTreeSet::new();
    for k in 0..mesh.cavities.len() {
        for [a, _, b] in mesh.cavity_edges(k) {
            cavity_edges.insert((a.min(b), a.max(b)));
        }
    }
    let open_edges = edge_use
        .iter()
        .filter(|(key, (n, m))| {
            *n == 1
                && !cavity_edges.contains(key)
                && !(dir.contains(&key.0) && dir.contains(&key.1) && dir.contains(m))
        })
        .map(|(k, _)| *k)
        .collect();
    let mut over: Vec<(usize, usize)> = edge_use
        .iter()
        .filter(|(_, (n, _))| *n > 2)
        .map(|(k, _)| *k)
        .collect();
    mismatched.append(&mut over);

    let e = 2.0 - material.s;
    let p = params;
    let slack = 1.0 + 1e-9;
    let layers = mesh
        .layers
        .iter()
        .map(|ls| {
            ls.iter()
                .enumerate()
                .map(|(m, l)| {
                    let (eps, tau, n) = (l.inner_radius, l.thickness, l.n as f64);
                    let count_ok = match (m, l.kind) {
                        (0, LayerKind::Standard) => true,
                        (0, LayerKind::Conforming) => false,
                        (_, LayerKind::Standard) => l.n == ls[m - 1].n,
                        (_, LayerKind::Conforming) => 2 * l.n == ls[m - 1].n,
                    };
                    let n_lower = match l.kind {
                        LayerKind::Standard => p.c2 / eps.sqrt(),
                        LayerKind::Conforming => p.c2 * (eps * tau).powf(-0.25),
                    };
                    LayerCheck {
                        count_ok,
                        tau_sqrt_ok: tau <= slack * p.c1 * eps.sqrt(),
                        tau_h_ok: tau <= slack * p.c_tau * eps.powf((1.0 - p.alpha) / 4.0) * p.h,
                        n_lower_ok: n * slack >= n_lower,
                        n_h_ok: n * slack >= eps.powf(-(1.0 - p.alpha) / 4.0) / (p.c_n * p.h),
                        equidistribution_ok: (eps + tau).powf(e)
                            <= slack * (eps.powf(e) + p.c * p.h),
                        last: m + 1 == ls.len(),
                    }
                })
                .collect()
        })
        .collect();

    let min_det = elements
        .iter()
        .map(|c| c.min_det)
        .fold(f64::INFINITY, f64::min);
    let h_ratio_min = elements
        .iter()
        .map(|c| c.h_ratio)
        .fold(f64::INFINITY, f64::min);
    let h_ratio_max = elements.iter().map(|c| c.h_ratio).fold(0.0, f64::max);
    MeshReport {
        elements,
        inverted,
        open_edges,
        mismatched_edges: mismatched,
        layers,
        min_det,
        h_ratio_min,
        h_ratio_max,
    }
}
