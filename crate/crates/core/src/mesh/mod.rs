//! Defect-adapted meshes of the perforated unit disk.
//!
//! Around each defect a structured ring region of curved quadrilaterals (and
//! three-triangle conforming layers where the angular count halves); the rest of
//! the disk is an unstructured constrained Delaunay triangulation.

mod outer;
mod ring;
mod validate;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};
use crate::geometry::{midpoint, polar_midpoint};
use crate::material::MaterialParams;
use crate::tensor::{dist, Point};

pub use outer::{generate_mesh, make_outer_mesh};
pub use ring::{make_ring_mesh, ring_schedule};
pub use validate::{validate_mesh, ElementCheck, LayerCheck, MeshReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    /// Biquadratic 9-node quadrilateral.
    Quad9,
    /// 6-node quadratic triangle; the displacement space adds an element-local bubble.
    Tri6,
}

impl ElementKind {
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Quad9 => 9,
            ElementKind::Tri6 => 6,
        }
    }

    pub fn vertex_count(self) -> usize {
        match self {
            ElementKind::Quad9 => 4,
            ElementKind::Tri6 => 3,
        }
    }

    /// Local (vertex, vertex, midpoint) triples of the element edges.
    pub fn edges(self) -> &'static [[usize; 3]] {
        match self {
            ElementKind::Quad9 => &[[0, 1, 4], [1, 2, 5], [2, 3, 6], [3, 0, 7]],
            ElementKind::Tri6 => &[[0, 1, 3], [1, 2, 4], [2, 0, 5]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Quad9 => "quad9",
            ElementKind::Tri6 => "tri6",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Standard,
    /// Angular count halves across the layer; each cell is split into three triangles.
    Conforming,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerTag {
    pub defect: usize,
    pub layer: usize,
    pub kind: LayerKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Element {
    pub kind: ElementKind,
    /// Geometric nodes; only the first `kind.node_count()` entries are meaningful.
    pub nodes: [usize; 9],
    pub layer: Option<LayerTag>,
    pub curved: bool,
}

impl Element {
    pub fn geometric_nodes(&self) -> &[usize] {
        &self.nodes[..self.kind.node_count()]
    }
}

/// One ring layer `[ε, ε + τ]` with `n` angular cells at its outer radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerInfo {
    pub inner_radius: f64,
    pub thickness: f64,
    pub n: usize,
    pub kind: LayerKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefectSpec {
    pub center: Point,
    pub rho: f64,
    pub delta: f64,
}

impl DefectSpec {
    /// Whether the ring region is the whole disk (a single centred defect with δ = 1).
    pub fn fills_domain(&self) -> bool {
        self.center == [0.0, 0.0] && (self.delta - 1.0).abs() < 1e-12
    }
}

/// Meshing strategy constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshParams {
    pub h: f64,
    /// Energy equi-distribution constant in `(ε+τ)^{2−s} ≤ ε^{2−s} + C h`.
    pub c: f64,
    /// `τ ≤ C1 √ε`.
    pub c1: f64,
    /// `N ≥ C2 ε^{−1/2}` (standard) or `N ≥ C2 (ετ)^{−1/4}` (conforming).
    pub c2: f64,
    pub alpha: f64,
    /// `τ ≤ Cτ ε^{(1−α)/4} h`.
    pub c_tau: f64,
    /// `N ≥ ε^{−(1−α)/4} / (C_N h)`.
    pub c_n: f64,
    /// Largest arc-to-thickness ratio allowed for a conforming layer cell.
    pub max_aspect: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            h: 0.04,
            c: 2.0,
            c1: 2.0,
            c2: 1.4,
            alpha: 0.2,
            c_tau: 10.0,
            c_n: 2.7,
            max_aspect: 1.5,
        }
    }
}

impl MeshParams {
    pub fn with_h(h: f64) -> Self {
        MeshParams {
            h,
            ..Default::default()
        }
    }

    pub fn validate(&self, material: &MaterialParams) -> CoreResult<()> {
        let s = material.s;
        let pos = [
            ("h", self.h),
            ("C", self.c),
            ("C1", self.c1),
            ("C2", self.c2),
            ("C_tau", self.c_tau),
            ("C_N", self.c_n),
            ("max_aspect", self.max_aspect),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::Config(alloc::format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CoreError::Config(alloc::format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        let cmin = (2.0 - s) * 2f64.powf(s - 1.0);
        if self.c < cmin {
            return Err(CoreError::Config(alloc::format!(
                "C = {} below (2-s)2^(s-1) = {cmin}",
                self.c
            )));
        }
        let hmax = ((2.0 - s) / (2f64.powf(2.0 - s) * self.c))
            .min((2.0 - s) / (2f64.powf(s - 1.0) * self.c));
        if self.h > hmax {
            return Err(CoreError::Config(alloc::format!(
                "h = {} exceeds {hmax}",
                self.h
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub elements: Vec<Element>,
    /// Sorted ids of the nodes on the outer circle.
    pub dirichlet: Vec<usize>,
    /// Per defect, the cavity boundary as `[v0, m0, v1, m1, ...]`, counter-clockwise
    /// about the center; edge `k` is `(v_k, m_k, v_{k+1})`.
    pub cavities: Vec<Vec<usize>>,
    pub layers: Vec<Vec<LayerInfo>>,
    pub defects: Vec<DefectSpec>,
}

impl Mesh {
    pub fn triangle_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| e.kind == ElementKind::Tri6)
            .count()
    }

    /// Cavity boundary edges of defect `k` as node triples.
    pub fn cavity_edges(&self, k: usize) -> impl Iterator<Item = [usize; 3]> + '_ {
        let lp = &self.cavities[k];
        let n = lp.len() / 2;
        (0..n).map(move |i| [lp[2 * i], lp[2 * i + 1], lp[(2 * i + 2) % lp.len()]])
    }
}

/// How a new edge midpoint is placed.
#[derive(Clone, Copy, Debug)]
pub(crate) enum MidRule {
    Straight,
    Polar(Point),
}

/// Incremental mesh construction with shared edge midpoints.
#[derive(Default)]
pub(crate) struct MeshBuilder {
    pub nodes: Vec<Point>,
    pub elements: Vec<Element>,
    pub edges: BTreeMap<(usize, usize), usize>,
}

impl MeshBuilder {
    pub fn add_node(&mut self, p: Point) -> usize {
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    /// The midpoint node of edge `ab`, created with `rule` if it does not exist yet.
    pub fn edge_node(&mut self, a: usize, b: usize, rule: MidRule) -> CoreResult<usize> {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = self.edges.get(&key) {
            return Ok(m);
        }
        let (pa, pb) = (self.nodes[a], self.nodes[b]);
        let p = match rule {
            MidRule::Straight => midpoint(pa, pb),
            MidRule::Polar(c) => polar_midpoint(pa, pb, c)?,
        };
        let m = self.add_node(p);
        self.edges.insert(key, m);
        Ok(m)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&(a.min(b), a.max(b)))
    }

    /// Adds a triangle with vertices `v`, reordered counter-clockwise.
    pub fn add_triangle(
        &mut self,
        mut v: [usize; 3],
        rules: [MidRule; 3],
        layer: Option<LayerTag>,
    ) -> CoreResult<()> {
        let mut rules = rules;
        if signed_area(self.nodes[v[0]], self.nodes[v[1]], self.nodes[v[2]]) < 0.0 {
            v.swap(1, 2);
            // edges were (01, 12, 20); now (02, 21, 10)
            rules = [rules[2], rules[1], rules[0]];
        }
        let m01 = self.edge_node(v[0], v[1], rules[0])?;
        let m12 = self.edge_node(v[1], v[2], rules[1])?;
        let m20 = self.edge_node(v[2], v[0], rules[2])?;
        let curved = rules.iter().any(|r| matches!(r, MidRule::Polar(_)));
        self.elements.push(Element {
            kind: ElementKind::Tri6,
            nodes: [v[0], v[1], v[2], m01, m12, m20, 0, 0, 0],
            layer,
            curved,
        });
        Ok(())
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Checks that the ring disks are inside the unit disk and pairwise disjoint.
pub fn check_defects(defects: &[DefectSpec]) -> CoreResult<()> {
    for (k, d) in defects.iter().enumerate() {
        if !(d.rho > 0.0 && d.delta > d.rho) {
            return Err(CoreError::Config(alloc::format!(
                "defect {k}: need 0 < rho < delta"
            )));
        }
        let r = d.center[0].hypot(d.center[1]);
        if !d.fills_domain() && r + d.delta >= 1.0 {
            return Err(CoreError::Geometry(alloc::format!(
                "defect {k}: ring region leaves the unit disk"
            )));
        }
        if d.fills_domain() && defects.len() > 1 {
            return Err(CoreError::Geometry(
                "a ring region filling the disk excludes other defects".into(),
            ));
        }
        for (l, e) in defects.iter().enumerate().skip(k + 1) {
            if dist(d.center, e.center) <= d.delta + e.delta {
                return Err(CoreError::Geometry(alloc::format!(
                    "defects {k} and {l}: ring regions overlap"
                )));
            }
        }
    }
    Ok(())
}
