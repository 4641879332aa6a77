//! Global assembly of the Lagrangian, its gradient and the saddle-point tangent.
//!
//! Element kernels run in parallel over fixed chunks and are scattered in
//! element order, so results are bitwise reproducible for any thread count.

use std::sync::Arc;

use cavmix_core::dof::{build_dof_map, BoundaryCondition, DofMap, State};
use cavmix_core::element::{
    element_bounds, element_energy, element_geometry, element_residual, element_residual_scale,
    element_tangent, ElementGeometry, ElementTangent, GradientBounds, LocalState, MAX_LOCAL,
};
use cavmix_core::quadrature::default_rule;
use cavmix_core::{ElementKind, MaterialParams, Mesh};
use rayon::prelude::*;

use crate::error::Result;
use crate::sparse::{CsrMatrix, CsrPattern};

const CHUNK: usize = 256;
/// Accumulation allowance of the residual roundoff floor.
const FLOOR_FACTOR: f64 = 100.0;
const PERTURB_FACTOR: f64 = 10.0;

/// Deterministic pseudo-random sign per index.
fn ulp_sign(i: usize) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    if (z ^ (z >> 31)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Mesh, numbering and cached quadrature data of one discrete problem.
#[derive(Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub material: MaterialParams,
    pub geometry: Vec<ElementGeometry>,
    pub pattern: Arc<CsrPattern>,
    /// Bias pressures acting inside each cavity, adding `−Σ P_k V_k(u)` to the energy.
    pub cavity_pressure: Vec<f64>,
}

/// Residual with constrained entries zeroed.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl Residual {
    pub fn norm(&self) -> f64 {
        self.f
            .iter()
            .chain(&self.g)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|∫ ψ (det ∇u − 1)|` over the pressure basis.
    pub fn max_constraint(&self) -> f64 {
        self.g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `[[A, Bᵀ], [B, 0]] [w; π] = [f; g]`, displacement unknowns first.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub n_u: usize,
    pub n_p: usize,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub residual: Residual,
}

impl Problem {
    pub fn new(mesh: Mesh, material: MaterialParams) -> Result<Self> {
        material.validate()?;
        let dofs = build_dof_map(&mesh, &BoundaryCondition::identity())?;
        let geometry = (0..mesh.elements.len())
            .into_par_iter()
            .map(|e| element_geometry(&mesh, e, &default_rule(mesh.elements[e].kind)))
            .collect::<cavmix_core::CoreResult<Vec<_>>>()?;
        let groups: Vec<Vec<usize>> = (0..mesh.elements.len())
            .map(|e| local_indices(&dofs, &mesh, e))
            .collect();
        let pattern = Arc::new(CsrPattern::from_groups(
            dofs.n_total(),
            groups.iter().map(|g| g.as_slice()),
        ));
        let cavity_pressure = vec![0.0; mesh.defects.len()];
        Ok(Problem {
            mesh,
            dofs,
            material,
            geometry,
            pattern,
            cavity_pressure,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.elements.len()
    }

    pub fn n_active_dofs(&self) -> usize {
        self.dofs.n_total() - self.dofs.dirichlet.len()
    }

    pub fn local(&self, e: usize, s: &State) -> LocalState {
        LocalState::from_state(&self.dofs, &self.mesh, e, s)
    }

    /// Discrete Lagrangian including cavity bias work.
    pub fn energy(&self, s: &State) -> Result<f64> {
        let parts = (0..self.n_elements())
            .into_par_iter()
            .map(|e| element_energy(&self.material, &self.geometry[e], &self.local(e, s), e))
            .collect::<cavmix_core::CoreResult<Vec<f64>>>()?;
        let mut total: f64 = parts.iter().sum();
        for (k, &pk) in self.cavity_pressure.iter().enumerate() {
            if pk != 0.0 {
                total -= pk * cavmix_core::element::cavity_volume(&self.mesh, &s.u, k);
            }
        }
        Ok(total)
    }

    pub fn residual(&self, s: &State) -> Result<Residual> {
        let mut f = vec![0.0; self.dofs.n_u];
        let mut g = vec![0.0; self.dofs.n_p];
        for start in (0..self.n_elements()).step_by(CHUNK) {
            let end = (start + CHUNK).min(self.n_elements());
            let parts = (start..end)
                .into_par_iter()
                .map(|e| element_residual(&self.material, &self.geometry[e], &self.local(e, s), e))
                .collect::<cavmix_core::CoreResult<Vec<_>>>()?;
            for (e, (rf, rg)) in (start..end).zip(parts) {
                let (nodes, n) = self.dofs.element_nodes(&self.mesh, e);
                for a in 0..n {
                    f[2 * nodes[a]] += rf[2 * a];
                    f[2 * nodes[a] + 1] += rf[2 * a + 1];
                }
                for (k, pk) in self.dofs.pressure_dofs(e).into_iter().enumerate() {
                    g[pk] += rg[k];
                }
            }
        }
        self.add_bias_gradient(&s.u, &mut f);
        for &i in &self.dofs.dirichlet {
            f[i] = 0.0;
        }
        Ok(Residual { f, g })
    }

    /// Estimated roundoff floor of `residual(s).norm()`: `ε` times the norm of
    /// the summed absolute contributions, inflated for accumulation.
    pub fn residual_floor(&self, s: &State) -> Result<f64> {
        let parts = (0..self.n_elements())
            .into_par_iter()
            .map(|e| {
                element_residual_scale(&self.material, &self.geometry[e], &self.local(e, s), e)
            })
            .collect::<cavmix_core::CoreResult<Vec<_>>>()?;
        let mut f = vec![0.0; self.dofs.n_u];
        let mut g = vec![0.0; self.dofs.n_p];
        for (e, (rf, rg)) in parts.into_iter().enumerate() {
            let (nodes, n) = self.dofs.element_nodes(&self.mesh, e);
            for a in 0..n {
                f[2 * nodes[a]] += rf[2 * a];
                f[2 * nodes[a] + 1] += rf[2 * a + 1];
            }
            for (k, pk) in self.dofs.pressure_dofs(e).into_iter().enumerate() {
                g[pk] += rg[k];
            }
        }
        for &i in &self.dofs.dirichlet {
            f[i] = 0.0;
        }
        let norm = f.iter().chain(&g).map(|v| v * v).sum::<f64>().sqrt();
        // sensitivity to rounding the unknowns themselves
        let r0 = self.residual(s)?;
        let mut t = s.clone();
        for (i, v) in t.u.iter_mut().chain(t.p.iter_mut()).enumerate() {
            *v += ulp_sign(i) * f64::EPSILON * v.abs();
        }
        let r1 = self.residual(&t)?;
        let dr =
            r0.f.iter()
                .zip(&r1.f)
                .chain(r0.g.iter().zip(&r1.g))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        Ok(FLOOR_FACTOR * f64::EPSILON * norm + PERTURB_FACTOR * dr)
    }

    /// Newton system at `s`; constrained increments are prescribed by `lift`
    /// (zero when `None`) through symmetric elimination.
    pub fn tangent(&self, s: &State, lift: Option<&[f64]>) -> Result<SaddleSystem> {
        let n_u = self.dofs.n_u;
        let mut k = CsrMatrix::zeros(Arc::clone(&self.pattern));
        let mut rhs = vec![0.0; self.dofs.n_total()];
        for start in (0..self.n_elements()).step_by(CHUNK) {
            let end = (start + CHUNK).min(self.n_elements());
            let parts = (start..end)
                .into_par_iter()
                .map(|e| element_tangent(&self.material, &self.geometry[e], &self.local(e, s), e))
                .collect::<cavmix_core::CoreResult<Vec<ElementTangent>>>()?;
            for (e, t) in (start..end).zip(parts) {
                self.scatter(e, &t, &mut k, &mut rhs);
            }
        }
        self.add_bias_tangent(&s.u, &mut k, &mut rhs);
        for &i in &self.dofs.dirichlet {
            rhs[i] = 0.0;
        }
        let residual = Residual {
            f: rhs[..n_u].to_vec(),
            g: rhs[n_u..].to_vec(),
        };
        for (idx, &i) in self.dofs.dirichlet.iter().enumerate() {
            let g = lift.map_or(0.0, |l| l[idx]);
            k.eliminate(i, g, &mut rhs);
        }
        Ok(SaddleSystem {
            n_u,
            n_p: self.dofs.n_p,
            matrix: k,
            rhs,
            residual,
        })
    }

    fn scatter(&self, e: usize, t: &ElementTangent, k: &mut CsrMatrix, rhs: &mut [f64]) {
        let n_u = self.dofs.n_u;
        let (nodes, n) = self.dofs.element_nodes(&self.mesh, e);
        let mut gi = [0usize; MAX_LOCAL];
        for a in 0..n {
            gi[2 * a] = 2 * nodes[a];
            gi[2 * a + 1] = 2 * nodes[a] + 1;
        }
        let nl = 2 * n;
        for r in 0..nl {
            rhs[gi[r]] += t.rf[r];
            for c in 0..nl {
                k.add(gi[r], gi[c], t.a[r][c]);
            }
        }
        for (kk, pk) in self.dofs.pressure_dofs(e).into_iter().enumerate() {
            let row = n_u + pk;
            rhs[row] += t.rg[kk];
            for c in 0..nl {
                let v = t.b[kk][c];
                k.add(row, gi[c], v);
                k.add(gi[c], row, v);
            }
        }
    }

    fn add_bias_gradient(&self, u: &[f64], f: &mut [f64]) {
        for (kc, &pk) in self.cavity_pressure.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            for (nodes, dv, _) in self.cavity_edge_derivatives(u, kc) {
                for a in 0..3 {
                    f[2 * nodes[a]] += pk * dv[a][0];
                    f[2 * nodes[a] + 1] += pk * dv[a][1];
                }
            }
        }
    }

    fn add_bias_tangent(&self, u: &[f64], k: &mut CsrMatrix, rhs: &mut [f64]) {
        for (kc, &pk) in self.cavity_pressure.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            for (nodes, dv, h) in self.cavity_edge_derivatives(u, kc) {
                for a in 0..3 {
                    rhs[2 * nodes[a]] += pk * dv[a][0];
                    rhs[2 * nodes[a] + 1] += pk * dv[a][1];
                    for b in 0..3 {
                        k.add(2 * nodes[a], 2 * nodes[b] + 1, -pk * h[a][b]);
                        k.add(2 * nodes[b] + 1, 2 * nodes[a], -pk * h[a][b]);
                    }
                }
            }
        }
    }

    /// Per cavity edge: nodes, `∂V/∂u_a`, and `∂²V/∂u_{a,1}∂u_{b,2}` (the only
    /// nonzero block up to symmetry).
    #[allow(clippy::type_complexity)]
    fn cavity_edge_derivatives(
        &self,
        u: &[f64],
        k: usize,
    ) -> Vec<([usize; 3], [[f64; 2]; 3], [[f64; 3]; 3])> {
        const T: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        self.mesh
            .cavity_edges(k)
            .map(|nodes| {
                let mut dv = [[0.0; 2]; 3];
                let mut h = [[0.0; 3]; 3];
                for (t, w) in T.iter().zip(W) {
                    let l = [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)];
                    let dl = [t - 0.5, -2.0 * t, t + 0.5];
                    let (mut x, mut dx) = ([0.0; 2], [0.0; 2]);
                    for i in 0..3 {
                        for c in 0..2 {
                            x[c] += l[i] * u[2 * nodes[i] + c];
                            dx[c] += dl[i] * u[2 * nodes[i] + c];
                        }
                    }
                    for a in 0..3 {
                        dv[a][0] += 0.5 * w * (l[a] * dx[1] - x[1] * dl[a]);
                        dv[a][1] += 0.5 * w * (x[0] * dl[a] - l[a] * dx[0]);
                        for b in 0..3 {
                            h[a][b] += 0.5 * w * (l[a] * dl[b] - l[b] * dl[a]);
                        }
                    }
                }
                (nodes, dv, h)
            })
            .collect()
    }

    /// Gradient extremes over all quadrature points.
    pub fn bounds(&self, s: &State) -> GradientBounds {
        (0..self.n_elements())
            .into_par_iter()
            .map(|e| element_bounds(&self.geometry[e], &self.local(e, s)))
            .reduce(|| GradientBounds::EMPTY, GradientBounds::merge)
    }

    /// Number of elements of each kind.
    pub fn element_counts(&self) -> (usize, usize) {
        let q = self
            .mesh
            .elements
            .iter()
            .filter(|e| e.kind == ElementKind::Quad9)
            .count();
        (q, self.n_elements() - q)
    }
}

/// Global indices touched by element `e`: displacements then pressures (offset by `n_u`).
pub fn local_indices(dofs: &DofMap, mesh: &Mesh, e: usize) -> Vec<usize> {
    let (nodes, n) = dofs.element_nodes(mesh, e);
    let mut v: Vec<usize> = nodes[..n]
        .iter()
        .flat_map(|&a| [2 * a, 2 * a + 1])
        .collect();
    v.extend(dofs.pressure_dofs(e).iter().map(|&k| dofs.n_u + k));
    v
}
