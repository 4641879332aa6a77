//! Degree-of-freedom numbering and boundary data.
//!
//! Displacement nodes are the mesh nodes followed by one barycentric bubble node
//! per triangle; node `a` owns the indices `2a` and `2a + 1`. Pressure is
//! discontinuous: element `e` owns `3e..3e + 3`, the coefficients of `{1, x̂₁, x̂₂}`.

use alloc::vec::Vec;

use crate::error::{CoreError, CoreResult};
use crate::geometry::iso_map;
use crate::mesh::{ElementKind, Mesh};
use crate::tensor::{Point, Tensor2};

/// Dirichlet data on the outer circle: `u(x) = M x + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    Affine { m: Tensor2, b: Point },
}

impl BoundaryCondition {
    pub fn identity() -> Self {
        Self::affine(Tensor2::IDENTITY)
    }

    /// `u(x) = λ x`.
    pub fn stretch(lambda: f64) -> Self {
        Self::affine(Tensor2::diag(lambda, lambda))
    }

    pub fn affine(m: Tensor2) -> Self {
        BoundaryCondition::Affine { m, b: [0.0, 0.0] }
    }

    pub fn value(&self, x: Point) -> Point {
        match self {
            BoundaryCondition::Affine { m, b } => {
                let y = m.apply(x);
                [y[0] + b[0], y[1] + b[1]]
            }
        }
    }

    pub fn matrix(&self) -> Tensor2 {
        match self {
            BoundaryCondition::Affine { m, .. } => *m,
        }
    }

    /// Convex combination `(1 − t) self + t other`.
    pub fn lerp(&self, other: &BoundaryCondition, t: f64) -> BoundaryCondition {
        let (
            BoundaryCondition::Affine { m: m0, b: b0 },
            BoundaryCondition::Affine { m: m1, b: b1 },
        ) = (self, other);
        BoundaryCondition::Affine {
            m: *m0 * (1.0 - t) + *m1 * t,
            b: [b0[0] * (1.0 - t) + b1[0] * t, b0[1] * (1.0 - t) + b1[1] * t],
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            BoundaryCondition::Affine { m, b } => {
                m.is_finite() && b[0].is_finite() && b[1].is_finite()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub n_mesh_nodes: usize,
    /// Bubble node of each element (triangles only).
    pub bubble: Vec<Option<usize>>,
    /// Number of displacement nodes (mesh nodes + bubbles).
    pub n_nodes: usize,
    pub n_u: usize,
    pub n_p: usize,
    /// Sorted constrained displacement indices.
    pub dirichlet: Vec<usize>,
    pub is_dirichlet: Vec<bool>,
}

impl DofMap {
    /// Displacement nodes of element `e`: 9 for quads, 6 + bubble for triangles.
    pub fn element_nodes(&self, mesh: &Mesh, e: usize) -> ([usize; 9], usize) {
        let el = &mesh.elements[e];
        match el.kind {
            ElementKind::Quad9 => (el.nodes, 9),
            ElementKind::Tri6 => {
                let mut n = el.nodes;
                n[6] = self.bubble[e].expect("triangle without bubble node");
                (n, 7)
            }
        }
    }

    #[inline]
    pub fn pressure_dofs(&self, e: usize) -> [usize; 3] {
        [3 * e, 3 * e + 1, 3 * e + 2]
    }

    pub fn n_total(&self) -> usize {
        self.n_u + self.n_p
    }

    /// Reference positions of all displacement nodes.
    pub fn node_positions(&self, mesh: &Mesh) -> Vec<Point> {
        let mut pos = mesh.nodes.clone();
        pos.resize(self.n_nodes, [0.0, 0.0]);
        for (e, b) in self.bubble.iter().enumerate() {
            if let Some(b) = *b {
                pos[b] = iso_map(&mesh.elements[e], mesh, [1.0 / 3.0, 1.0 / 3.0]).0;
            }
        }
        pos
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, mesh: &Mesh, f: impl Fn(Point) -> Point) -> Vec<f64> {
        let mut u = alloc::vec![0.0; self.n_u];
        for (a, x) in self.node_positions(mesh).into_iter().enumerate() {
            let v = f(x);
            u[2 * a] = v[0];
            u[2 * a + 1] = v[1];
        }
        u
    }

    /// Prescribed values at the constrained indices, parallel to `dirichlet`.
    pub fn dirichlet_values(&self, mesh: &Mesh, bc: &BoundaryCondition) -> Vec<f64> {
        self.dirichlet
            .iter()
            .map(|&i| bc.value(mesh.nodes[i / 2])[i % 2])
            .collect()
    }

    /// Overwrites the constrained entries of `u` with the boundary data.
    pub fn apply_bc(&self, mesh: &Mesh, bc: &BoundaryCondition, u: &mut [f64]) {
        for (&i, v) in self.dirichlet.iter().zip(self.dirichlet_values(mesh, bc)) {
            u[i] = v;
        }
    }
}

/// Deterministic numbering for `mesh` with Dirichlet data `bc` on the outer circle.
pub fn build_dof_map(mesh: &Mesh, bc: &BoundaryCondition) -> CoreResult<DofMap> {
    if !bc.is_finite() {
        return Err(CoreError::Config("boundary data must be finite".into()));
    }
    let n_mesh_nodes = mesh.nodes.len();
    let mut bubble = Vec::with_capacity(mesh.elements.len());
    let mut next = n_mesh_nodes;
    for el in &mesh.elements {
        if el.kind == ElementKind::Tri6 {
            bubble.push(Some(next));
            next += 1;
        } else {
            bubble.push(None);
        }
    }
    let n_u = 2 * next;
    let mut dirichlet = Vec::with_capacity(2 * mesh.dirichlet.len());
    let mut is_dirichlet = alloc::vec![false; n_u];
    for &n in &mesh.dirichlet {
        if n >= n_mesh_nodes {
            return Err(CoreError::Config(alloc::format!(
                "boundary node {n} does not exist"
            )));
        }
        for c in 0..2 {
            dirichlet.push(2 * n + c);
            is_dirichlet[2 * n + c] = true;
        }
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();
    Ok(DofMap {
        n_mesh_nodes,
        bubble,
        n_nodes: next,
        n_u,
        n_p: 3 * mesh.elements.len(),
        dirichlet,
        is_dirichlet,
    })
}

/// Displacement and pressure coefficients of one iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl State {
    /// `u = x` and constant pressure `p0`, with boundary values from `bc`.
    pub fn from_map(
        mesh: &Mesh,
        dofs: &DofMap,
        bc: BoundaryCondition,
        f: impl Fn(Point) -> Point,
        p0: f64,
    ) -> Self {
        let mut u = dofs.interpolate(mesh, f);
        dofs.apply_bc(mesh, &bc, &mut u);
        let mut p = alloc::vec![0.0; dofs.n_p];
        for e in 0..mesh.elements.len() {
            p[3 * e] = p0;
        }
        State { u, p, bc }
    }

    pub fn identity(mesh: &Mesh, dofs: &DofMap, p0: f64) -> Self {
        Self::from_map(mesh, dofs, BoundaryCondition::identity(), |x| x, p0)
    }
}
