#![allow(dead_code)]

use std::sync::Arc;

use cavmix::analysis::InfSupSystem;
use cavmix::sparse::{CsrMatrix, CsrPattern};
use cavmix::{Problem, Result};
use cavmix_core::dof::State;
use cavmix_core::mesh::Element;
use cavmix_core::quadrature::square_gauss;
use cavmix_core::shape::quad_q1;
use cavmix_core::{DefectSpec, ElementKind, MaterialParams, Mesh};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// One Q2 quad and one curved P2+ triangle sharing an edge; the patch boundary
/// doubles as a cavity loop so the bias terms are exercised too.
pub fn two_element_mesh() -> Mesh {
    let nodes = vec![
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [0.5, 0.0],
        [1.0, 0.5],
        [0.5, 1.0],
        [0.0, 0.5],
        [0.5, 0.5],
        [1.8, 0.4],
        [1.4, 0.2],
        [1.45, 0.72],
    ];
    let elements = vec![
        Element {
            kind: ElementKind::Quad9,
            nodes: [0, 1, 2, 3, 4, 5, 6, 7, 8],
            layer: None,
            curved: false,
        },
        Element {
            kind: ElementKind::Tri6,
            nodes: [1, 9, 2, 10, 11, 5, 0, 0, 0],
            layer: None,
            curved: true,
        },
    ];
    Mesh {
        nodes,
        elements,
        dirichlet: vec![],
        cavities: vec![vec![0, 4, 1, 10, 9, 11, 2, 6, 3, 7]],
        layers: vec![vec![]],
        defects: vec![DefectSpec {
            center: [0.5, 0.5],
            rho: 0.1,
            delta: 0.2,
        }],
    }
}

pub fn two_element_problem() -> Result<Problem> {
    Problem::new(two_element_mesh(), MaterialParams::standard())
}

/// `u = x + amp·noise`, pressure uniform in `[−1, 1]`.
pub fn random_state(problem: &Problem, seed: u64, amp: f64) -> State {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut s = State::identity(&problem.mesh, &problem.dofs, 0.0);
    for v in s.u.iter_mut() {
        *v += amp * rng.random_range(-1.0..1.0);
    }
    for v in s.p.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    s
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Central-difference gradient of the Lagrangian: `(∂E/∂u, ∂E/∂p)`.
pub fn fd_gradient(problem: &Problem, s: &State, h: f64) -> (Vec<f64>, Vec<f64>) {
    let e = |st: &State| problem.energy(st).unwrap();
    let mut gu = vec![0.0; s.u.len()];
    for i in 0..s.u.len() {
        let (mut a, mut b) = (s.clone(), s.clone());
        a.u[i] += h;
        b.u[i] -= h;
        gu[i] = (e(&a) - e(&b)) / (2.0 * h);
    }
    let mut gp = vec![0.0; s.p.len()];
    for k in 0..s.p.len() {
        let (mut a, mut b) = (s.clone(), s.clone());
        a.p[k] += h;
        b.p[k] -= h;
        gp[k] = (e(&a) - e(&b)) / (2.0 * h);
    }
    (gu, gp)
}

/// Dense central-difference Jacobian of `(rf, rg)` with respect to `(u, p)`.
pub fn fd_jacobian(problem: &Problem, s: &State, h: f64) -> Vec<Vec<f64>> {
    let n_u = s.u.len();
    let n = n_u + s.p.len();
    let r = |st: &State| {
        let r = problem.residual(st).unwrap();
        let mut v = r.f;
        v.extend(r.g);
        v
    };
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let (mut a, mut b) = (s.clone(), s.clone());
        if j < n_u {
            a.u[j] += h;
            b.u[j] -= h;
        } else {
            a.p[j - n_u] += h;
            b.p[j - n_u] -= h;
        }
        let (ra, rb) = (r(&a), r(&b));
        cols.push(
            ra.iter()
                .zip(&rb)
                .map(|(x, y)| (x - y) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    // transpose to row-major
    (0..n)
        .map(|i| (0..n).map(|j| cols[j][i]).collect())
        .collect()
}

/// Test-only Q1–P0 pair on `n × n` squares (clamped on three sides): the
/// classic unstable element whose inf-sup constant decays like `h`.
pub fn q1p0_system(n: usize) -> InfSupSystem {
    let k = n + 1;
    let h = 1.0 / n as f64;
    let n_u = 2 * k * k;
    let n_p = n * n;
    let fixed: Vec<bool> = (0..k * k)
        .map(|v| v % k == 0 || v % k == n || v / k == 0)
        .collect();
    let mut rows = vec![Vec::new(); n_u + n_p];
    let cell_nodes = |ci: usize, cj: usize| {
        [
            cj * k + ci,
            cj * k + ci + 1,
            (cj + 1) * k + ci + 1,
            (cj + 1) * k + ci,
        ]
    };
    for cj in 0..n {
        for ci in 0..n {
            let nd = cell_nodes(ci, cj);
            let mut dofs: Vec<usize> = nd.iter().flat_map(|&v| [2 * v, 2 * v + 1]).collect();
            dofs.push(n_u + cj * n + ci);
            for &r in &dofs {
                rows[r].extend(dofs.iter().copied());
            }
        }
    }
    let pattern = Arc::new(CsrPattern::from_rows(rows));
    let mut m = CsrMatrix::zeros(pattern);
    let rule = square_gauss(3);
    for cj in 0..n {
        for ci in 0..n {
            let nd = cell_nodes(ci, cj);
            let pk = n_u + cj * n + ci;
            for (xh, w) in rule.iter() {
                let (v, g) = quad_q1(xh);
                // affine square cell: dx = h/2 dx̂
                let jw = w * h * h / 4.0;
                let gr: Vec<[f64; 2]> =
                    g.iter().map(|d| [2.0 * d[0] / h, 2.0 * d[1] / h]).collect();
                for a in 0..4 {
                    for b in 0..4 {
                        let x = jw * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1] + v[a] * v[b]);
                        for c in 0..2 {
                            m.add(2 * nd[a] + c, 2 * nd[b] + c, x);
                        }
                    }
                    for c in 0..2 {
                        m.add(pk, 2 * nd[a] + c, jw * gr[a][c]);
                        m.add(2 * nd[a] + c, pk, jw * gr[a][c]);
                    }
                }
            }
        }
    }
    let mut rhs = vec![0.0; n_u + n_p];
    for v in 0..k * k {
        if fixed[v] {
            m.eliminate(2 * v, 0.0, &mut rhs);
            m.eliminate(2 * v + 1, 0.0, &mut rhs);
        }
    }
    let mut mass = CsrMatrix::zeros(Arc::new(CsrPattern::from_rows(
        (0..n_p).map(|i| vec![i]).collect(),
    )));
    for i in 0..n_p {
        mass.add(i, i, h * h);
    }
    InfSupSystem {
        n_u,
        matrix: m,
        mass,
    }
}
