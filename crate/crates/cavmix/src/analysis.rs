//! Post-processing: constraint error norms, cross-mesh differences, cavity
//! volumes, discrete inf-sup constants, rate fits and bifurcation diagnostics.

use std::fmt::Write as _;

use cavmix_core::dof::State;
use cavmix_core::element::{cavity_volume, qp_geometry, LocalState};
use cavmix_core::geometry::{inverse_map, iso_map};
use cavmix_core::{ElementKind, Mesh, Point};
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::assembly::Problem;
use crate::continuation::Branch;
use crate::error::{Error, Result};
use crate::linear::LinearSolver;
use crate::sparse::CsrMatrix;

/// `(‖det ∇u − 1‖_{L¹}, ‖det ∇u − 1‖_{L²})`.
pub fn det_error_norms(problem: &Problem, s: &State) -> (f64, f64) {
    let parts: Vec<(f64, f64)> = (0..problem.n_elements())
        .into_par_iter()
        .map(|e| {
            let ls = problem.local(e, s);
            problem.geometry[e]
                .qps
                .iter()
                .fold((0.0, 0.0), |(a, b), q| {
                    let d = ls.gradient(q).det() - 1.0;
                    (a + q.weight * d.abs(), b + q.weight * d * d)
                })
        })
        .collect();
    let (l1, l2) = parts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    (l1, l2.sqrt())
}

/// Deformed cavity areas, one per defect.
pub fn cavity_volumes(problem: &Problem, s: &State) -> Vec<f64> {
    (0..problem.mesh.cavities.len())
        .map(|k| cavity_volume(&problem.mesh, &s.u, k))
        .collect()
}

/// Point location on a fixed mesh through a uniform grid of element bounding boxes.
pub struct ElementLocator<'a> {
    mesh: &'a Mesh,
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    bins: Vec<Vec<usize>>,
}

/// Reference-coordinate slack tried in order; the last admits slight extrapolation
/// across curved boundaries that the two meshes discretize differently.
const LOCATE_TOLS: [f64; 3] = [1e-10, 1e-6, 0.1];

impl<'a> ElementLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let boxes: Vec<[Point; 2]> = (0..mesh.elements.len())
            .map(|e| element_box(mesh, e))
            .collect();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        let mut size = 0.0;
        for b in &boxes {
            for c in 0..2 {
                lo[c] = lo[c].min(b[0][c]);
                hi[c] = hi[c].max(b[1][c]);
            }
            size += (b[1][0] - b[0][0]).max(b[1][1] - b[0][1]);
        }
        let cell = (size / boxes.len().max(1) as f64).max(1e-12);
        let dims = [
            (((hi[0] - lo[0]) / cell).ceil() as usize).max(1),
            (((hi[1] - lo[1]) / cell).ceil() as usize).max(1),
        ];
        let mut bins = vec![Vec::new(); dims[0] * dims[1]];
        let mut loc = ElementLocator {
            mesh,
            origin: lo,
            cell,
            dims,
            bins: Vec::new(),
        };
        for (e, b) in boxes.iter().enumerate() {
            let (i0, j0) = loc.bin(b[0]);
            let (i1, j1) = loc.bin(b[1]);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    bins[j * dims[0] + i].push(e);
                }
            }
        }
        loc.bins = bins;
        loc
    }

    fn bin(&self, x: Point) -> (usize, usize) {
        let f = |c: usize| {
            let v = ((x[c] - self.origin[c]) / self.cell).floor();
            (v.max(0.0) as usize).min(self.dims[c] - 1)
        };
        (f(0), f(1))
    }

    /// Element and reference coordinates containing `x`.
    pub fn locate(&self, x: Point) -> Option<(usize, Point)> {
        let (i, j) = self.bin(x);
        for tol in LOCATE_TOLS {
            // neighbouring bins cover points just outside every bounding box
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= self.dims[0] as i64 || jj >= self.dims[1] as i64 {
                        continue;
                    }
                    if tol < LOCATE_TOLS[2] && (di != 0 || dj != 0) {
                        continue;
                    }
                    for &e in &self.bins[jj as usize * self.dims[0] + ii as usize] {
                        if let Some(xh) = inverse_map(&self.mesh.elements[e], self.mesh, x, tol) {
                            return Some((e, xh));
                        }
                    }
                }
            }
        }
        None
    }
}

fn element_box(mesh: &Mesh, e: usize) -> [Point; 2] {
    let el = &mesh.elements[e];
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    let mut grow = |p: Point| {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    };
    for &n in el.geometric_nodes() {
        grow(mesh.nodes[n]);
    }
    // curved edges may bulge past their nodes
    const K: usize = 6;
    for i in 0..=K {
        for j in 0..=K {
            let (a, b) = (i as f64 / K as f64, j as f64 / K as f64);
            let xh = match el.kind {
                ElementKind::Tri6 if i + j > K => continue,
                ElementKind::Tri6 => [a, b],
                ElementKind::Quad9 => [2.0 * a - 1.0, 2.0 * b - 1.0],
            };
            grow(iso_map(el, mesh, xh).0);
        }
    }
    let pad = 1e-3 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    [[lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad]]
}

/// `(|u_a − u_b|_{W^{1,s}}, ‖p_a − p_b‖_{L²})` over the quadrature points of
/// problem `a`, evaluating `b` by inverse iso-parametric lookup.
pub fn field_diff_norms(a: &Problem, sa: &State, b: &Problem, sb: &State) -> Result<(f64, f64)> {
    let exp = a.material.s;
    let locator = ElementLocator::new(&b.mesh);
    let parts = (0..a.n_elements())
        .into_par_iter()
        .map(|e| {
            let la = a.local(e, sa);
            let mut acc = (0.0, 0.0);
            for q in &a.geometry[e].qps {
                let (eb, xh) = locator.locate(q.x).ok_or_else(|| {
                    Error::Analysis(format!(
                        "point ({:e}, {:e}) outside the target mesh",
                        q.x[0], q.x[1]
                    ))
                })?;
                let qb = qp_geometry(&b.mesh, eb, xh, 0.0)?;
                let lb = LocalState::from_state(&b.dofs, &b.mesh, eb, sb);
                let gu = la.gradient(q) - lb.gradient(&qb);
                let dp = la.pressure(q) - lb.pressure(&qb);
                acc.0 += q.weight * gu.norm().powf(exp);
                acc.1 += q.weight * dp * dp;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let (w, p) = parts
        .iter()
        .fold((0.0, 0.0), |(x, y), (u, v)| (x + u, y + v));
    Ok((w.powf(1.0 / exp), p.sqrt()))
}

/// Saddle matrix `[[X, Bᵀ], [B, 0]]` (constrained rows eliminated) and the
/// pressure mass matrix of a discrete inf-sup problem.
#[derive(Clone, Debug)]
pub struct InfSupSystem {
    pub n_u: usize,
    pub matrix: CsrMatrix,
    pub mass: CsrMatrix,
}

/// Builds the inf-sup problem at `s`: `X` is the `H¹` Gram matrix of the
/// constrained displacement space and `B` the linearized constraint
/// `∫ ψ cof ∇u : ∇v`.
pub fn infsup_system(problem: &Problem, s: &State) -> Result<InfSupSystem> {
    let n_u = problem.dofs.n_u;
    let mut k = CsrMatrix::zeros(problem.pattern.clone());
    let mut mass_rows = vec![Vec::new(); problem.dofs.n_p];
    let mut mass_vals = Vec::with_capacity(problem.n_elements());
    for e in 0..problem.n_elements() {
        let g = &problem.geometry[e];
        let ls = problem.local(e, s);
        let (nodes, n) = problem.dofs.element_nodes(&problem.mesh, e);
        let pd = problem.dofs.pressure_dofs(e);
        let mut m = [[0.0; 3]; 3];
        for q in &g.qps {
            let cof = ls.gradient(q).cof().0;
            for a in 0..n {
                for b in 0..n {
                    let v = q.weight
                        * (q.grads[a][0] * q.grads[b][0]
                            + q.grads[a][1] * q.grads[b][1]
                            + q.values[a] * q.values[b]);
                    for c in 0..2 {
                        k.add(2 * nodes[a] + c, 2 * nodes[b] + c, v);
                    }
                }
                for (kk, &pk) in pd.iter().enumerate() {
                    for i in 0..2 {
                        let v = q.weight
                            * q.pbasis[kk]
                            * (cof[i][0] * q.grads[a][0] + cof[i][1] * q.grads[a][1]);
                        k.add(n_u + pk, 2 * nodes[a] + i, v);
                        k.add(2 * nodes[a] + i, n_u + pk, v);
                    }
                }
            }
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += q.weight * q.pbasis[r] * q.pbasis[c];
                }
            }
        }
        for r in 0..3 {
            mass_rows[pd[r]] = pd.to_vec();
        }
        mass_vals.push((pd, m));
    }
    let mut rhs = vec![0.0; k.n()];
    for &i in &problem.dofs.dirichlet {
        k.eliminate(i, 0.0, &mut rhs);
    }
    let mut mass = CsrMatrix::zeros(std::sync::Arc::new(crate::sparse::CsrPattern::from_rows(
        mass_rows,
    )));
    for (pd, m) in mass_vals {
        for r in 0..3 {
            for c in 0..3 {
                mass.add(pd[r], pd[c], m[r][c]);
            }
        }
    }
    Ok(InfSupSystem {
        n_u,
        matrix: k,
        mass,
    })
}

/// Constrained displacement indices are recognised by identity rows.
fn constrained(sys: &InfSupSystem) -> Vec<bool> {
    let p = &sys.matrix.pattern;
    (0..sys.n_u)
        .map(|i| {
            p.row(i)
                .iter()
                .all(|&j| j == i || sys.matrix.get(i, j) == 0.0)
                && sys.matrix.get(i, i) == 1.0
        })
        .collect()
}

const LANCZOS_MAX: usize = 300;
const LANCZOS_TOL: f64 = 1e-10;

/// `β_h = min √λ` of `B X⁻¹ Bᵀ q = λ M q`, by Lanczos on `(B X⁻¹ Bᵀ)⁻¹ M` with
/// full reorthogonalization; every application is one saddle solve with a
/// single factorization.
pub fn infsup_constant(sys: &InfSupSystem, solver: &mut LinearSolver) -> Result<f64> {
    let n_u = sys.n_u;
    let n_p = sys.mass.n();
    let fact = solver.factor_ldlt(&sys.matrix, n_u)?;
    let m_dot = |x: &[f64], y: &[f64]| -> f64 {
        sys.mass.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    };
    let apply = |q: &[f64]| -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; n_u + n_p];
        rhs[n_u..].copy_from_slice(&sys.mass.matvec(q));
        let x = fact.solve(&rhs)?;
        Ok(x[n_u..].iter().map(|v| -v).collect())
    };
    let mut q: Vec<f64> = (0..n_p).map(|i| 1.0 + 0.5 * hash_unit(i)).collect();
    let nq = m_dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut theta = 0.0;
    for j in 0..LANCZOS_MAX.min(n_p) {
        let mut w = apply(&basis[j])?;
        let a = m_dot(&w, &basis[j]);
        alpha.push(a);
        // two passes of Gram–Schmidt against all previous vectors
        for _ in 0..2 {
            for v in &basis {
                let c = m_dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let b = m_dot(&w, &w).sqrt();
        let (t, last) = largest_ritz(&alpha, &beta)?;
        theta = t;
        if b * last.abs() <= LANCZOS_TOL * t || b <= 1e-14 * t {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|v| *v /= b);
        basis.push(w);
    }
    if !(theta > 0.0) {
        return Err(Error::Analysis(
            "inf-sup eigensolve produced no positive Ritz value".into(),
        ));
    }
    Ok(1.0 / theta.sqrt())
}

fn hash_unit(i: usize) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

/// Largest eigenvalue of the symmetric tridiagonal `(α, β)` and the last
/// component of its eigenvector.
fn largest_ritz(alpha: &[f64], beta: &[f64]) -> Result<(f64, f64)> {
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Analysis(format!("tridiagonal eigensolve: {e:?}")))?;
    let s = eig.S().column_vector();
    Ok((s[k - 1], eig.U()[(k - 1, k - 1)]))
}

/// Dense oracle for [`infsup_constant`]: forms `S = B X⁻¹ Bᵀ` and solves the
/// generalized symmetric eigenproblem with `M` through its Cholesky factor.
pub fn infsup_constant_dense(sys: &InfSupSystem) -> Result<f64> {
    let n_u = sys.n_u;
    let n_p = sys.mass.n();
    let fixed = constrained(sys);
    let free: Vec<usize> = (0..n_u).filter(|&i| !fixed[i]).collect();
    let nf = free.len();
    let x = Mat::<f64>::from_fn(nf, nf, |i, j| sys.matrix.get(free[i], free[j]));
    let bt = Mat::<f64>::from_fn(nf, n_p, |i, j| sys.matrix.get(free[i], n_u + j));
    let m = Mat::<f64>::from_fn(n_p, n_p, |i, j| sys.mass.get(i, j));
    let llt = x
        .llt(Side::Lower)
        .map_err(|e| Error::Analysis(format!("H1 Gram matrix not positive definite: {e:?}")))?;
    let xb = faer::linalg::solvers::Solve::solve(&llt, &bt);
    let s = bt.transpose() * &xb;
    let lm = m
        .llt(Side::Lower)
        .map_err(|e| Error::Analysis(format!("pressure mass matrix: {e:?}")))?;
    let l = lm.L();
    // C = L⁻¹ S L⁻ᵀ
    let mut c = s.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), faer::Par::Seq);
    let mut ct = c.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, ct.as_mut(), faer::Par::Seq);
    let ev = ct
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Analysis(format!("dense eigensolve: {e:?}")))?;
    let lmin = ev[0];
    if !(lmin > 0.0) {
        return Ok(0.0);
    }
    Ok(lmin.sqrt())
}

/// One row of a mesh-refinement study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub energy: f64,
    pub det_err_l2: f64,
    pub det_err_l1: f64,
    /// `|u_h − u_ref|_{W^{1,s}}`; NaN on the reference row.
    pub w1s_diff_to_finest: f64,
    /// `‖p_h − p_ref‖_{L²}`; NaN on the reference row.
    pub p_diff_to_finest: f64,
    pub infsup_beta: f64,
}

pub const CONVERGENCE_HEADER: &str =
    "h,energy,det_err_L2,det_err_L1,w1s_diff_to_finest,p_L2_diff_to_finest,infsup_beta";

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{CONVERGENCE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(r.h),
            num(r.energy),
            num(r.det_err_l2),
            num(r.det_err_l1),
            num(r.w1s_diff_to_finest),
            num(r.p_diff_to_finest),
            num(r.infsup_beta)
        );
    }
    s
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Least-squares slope of `log e` against `log h`, with excluded entries noted.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub column: String,
    pub order: Option<f64>,
    pub used: usize,
    pub notes: Vec<String>,
}

pub fn fit_order(column: &str, h: &[f64], e: &[f64]) -> RateFit {
    let mut notes = Vec::new();
    let mut pts = Vec::new();
    for (&hi, &ei) in h.iter().zip(e) {
        if ei > 0.0 && ei.is_finite() && hi > 0.0 {
            pts.push((hi.ln(), ei.ln()));
        } else {
            notes.push(format!("h = {hi}: error {ei} excluded"));
        }
    }
    let order = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let (mx, my) = pts
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
            (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
        });
        sxy / sxx
    });
    if order.is_none() {
        notes.push("fewer than two usable rows".into());
    }
    RateFit {
        column: column.into(),
        order,
        used: pts.len(),
        notes,
    }
}

/// Fitted orders of every error column; energy errors are taken against the
/// finest row, which is excluded from the difference-based fits.
pub fn rate_table(rows: &[ConvergenceRow]) -> Result<Vec<RateFit>> {
    if rows.len() < 2 {
        return Err(Error::Analysis("rate table needs at least two rows".into()));
    }
    let finest = rows
        .iter()
        .min_by(|a, b| a.h.total_cmp(&b.h))
        .expect("non-empty");
    let coarse: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.h != finest.h).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let hc: Vec<f64> = coarse.iter().map(|r| r.h).collect();
    let col = |f: &dyn Fn(&ConvergenceRow) -> f64, all: bool| -> Vec<f64> {
        if all {
            rows.iter().map(f).collect()
        } else {
            coarse.iter().map(|r| f(r)).collect()
        }
    };
    Ok(vec![
        fit_order("det_err_L2", &hs, &col(&|r| r.det_err_l2, true)),
        fit_order("det_err_L1", &hs, &col(&|r| r.det_err_l1, true)),
        fit_order(
            "energy_diff_to_finest",
            &hc,
            &col(&|r| (r.energy - finest.energy).abs(), false),
        ),
        fit_order(
            "w1s_diff_to_finest",
            &hc,
            &col(&|r| r.w1s_diff_to_finest, false),
        ),
        fit_order(
            "p_L2_diff_to_finest",
            &hc,
            &col(&|r| r.p_diff_to_finest, false),
        ),
    ])
}

pub fn rates_csv(fits: &[RateFit]) -> String {
    let mut s = String::from("column,order,rows_used,notes\n");
    for f in fits {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            f.column,
            f.order.map_or("NaN".into(), num),
            f.used,
            f.notes.join("; ")
        );
    }
    s
}

/// One converged point of a branch sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BifurcationRow {
    pub lambda: f64,
    pub branch: Branch,
    pub energy: f64,
    pub v1: f64,
    pub v2: f64,
}

impl BifurcationRow {
    pub fn ratio(&self) -> f64 {
        self.v2 / self.v1
    }
}

pub const BIFURCATION_HEADER: &str = "lambda,branch,energy,v1,v2,ratio";

pub fn bifurcation_csv(rows: &[BifurcationRow]) -> String {
    let mut s = format!("{BIFURCATION_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(r.lambda),
            r.branch.name(),
            num(r.energy),
            num(r.v1),
            num(r.v2),
            num(r.ratio())
        );
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BifurcationCriteria {
    /// `|E_s − E_r|` must exceed this.
    pub energy_floor: f64,
    /// `v2/v1` must exceed `1 + ratio_threshold`.
    pub ratio_threshold: f64,
}

impl Default for BifurcationCriteria {
    fn default() -> Self {
        BifurcationCriteria {
            energy_floor: 1e-4,
            ratio_threshold: 0.02,
        }
    }
}

/// Symmetric and dominant branch data at one `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchComparison {
    pub lambda: f64,
    pub e_sym: Option<f64>,
    pub e_dom: Option<f64>,
    pub ratio_sym: Option<f64>,
    /// Larger-over-smaller volume ratio on the dominant branch.
    pub ratio_dom: Option<f64>,
}

impl BranchComparison {
    /// `E_s − E_r`.
    pub fn energy_gap(&self) -> Option<f64> {
        Some(self.e_sym? - self.e_dom?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BifurcationReport {
    pub lambda_c: Option<f64>,
    pub curve: Vec<BranchComparison>,
    pub notes: Vec<String>,
}

/// Pairs the symmetric branch with the dominant one (right, else left) on the
/// common `λ` grid and locates the first `λ` where the branches separate.
pub fn bifurcation_report(
    rows: &[BifurcationRow],
    crit: &BifurcationCriteria,
) -> BifurcationReport {
    let mut notes = Vec::new();
    let has = |b: Branch| rows.iter().any(|r| r.branch == b);
    let dominant = if has(Branch::Right) {
        Some(Branch::Right)
    } else if has(Branch::Left) {
        Some(Branch::Left)
    } else {
        notes.push("no dominant branch; energy gap undefined".into());
        None
    };
    if !has(Branch::Symmetric) {
        notes.push("no symmetric branch; energy gap undefined".into());
    }
    let mut lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let find = |b: Branch, l: f64| rows.iter().find(|r| r.branch == b && r.lambda == l);
    let curve: Vec<BranchComparison> = lambdas
        .iter()
        .map(|&l| {
            let s = find(Branch::Symmetric, l);
            let d = dominant.and_then(|b| find(b, l));
            BranchComparison {
                lambda: l,
                e_sym: s.map(|r| r.energy),
                e_dom: d.map(|r| r.energy),
                ratio_sym: s.map(BifurcationRow::ratio),
                ratio_dom: d.map(|r| {
                    if r.branch == Branch::Left {
                        r.v1 / r.v2
                    } else {
                        r.ratio()
                    }
                }),
            }
        })
        .collect();
    let lambda_c = curve
        .iter()
        .find(|c| {
            c.energy_gap().is_some_and(|g| g.abs() > crit.energy_floor)
                && c.ratio_dom.is_some_and(|q| q > 1.0 + crit.ratio_threshold)
        })
        .map(|c| c.lambda);
    if lambda_c.is_none() {
        notes.push("branches never separate on this grid".into());
    }
    BifurcationReport {
        lambda_c,
        curve,
        notes,
    }
}

pub fn report_csv(report: &BifurcationReport) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    let mut s = String::from("lambda,E_sym,E_dom,E_sym_minus_E_dom,ratio_sym,ratio_dom\n");
    for c in &report.curve {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(c.lambda),
            opt(c.e_sym),
            opt(c.e_dom),
            opt(c.energy_gap()),
            opt(c.ratio_sym),
            opt(c.ratio_dom)
        );
    }
    s
}
