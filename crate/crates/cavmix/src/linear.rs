//! Direct solvers for the saddle-point systems.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par, Side};

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, CsrPattern};

/// Relative residual above which a factorization is declared singular.
const SINGULAR_TOL: f64 = 1e-6;
/// Target relative residual of the refined `LDLᵀ` solve.
const REFINE_TOL: f64 = 1e-13;
const REFINE_STEPS: usize = 8;
/// Pivot regularization relative to the largest matrix entry.
const REG_DELTA: f64 = 1e-10;

/// Sparse symmetric-indefinite `LDLᵀ` (pivoting within supernodes), verified
/// by its residual and backed by a pivoted sparse LU. Symbolic analyses are
/// reused while the pattern is unchanged.
#[derive(Default)]
pub struct LinearSolver {
    lu: Option<(Arc<CsrPattern>, SymbolicLu<usize>)>,
    chol: Option<(Arc<CsrPattern>, Arc<SymbolicCholesky<usize>>)>,
    /// Skip the `LDLᵀ` attempt.
    pub lu_only: bool,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("lu_cached", &self.lu.is_some())
            .field("ldlt_cached", &self.chol.is_some())
            .field("lu_only", &self.lu_only)
            .finish()
    }
}

fn same(cached: &Arc<CsrPattern>, p: &Arc<CsrPattern>) -> bool {
    Arc::ptr_eq(cached, p) || **cached == **p
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lu() -> Self {
        LinearSolver {
            lu_only: true,
            ..Self::default()
        }
    }

    /// Solves `K x = b` by pivoted sparse LU.
    pub fn solve_matrix(&mut self, k: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_lu(k, b)
    }

    /// Solves the saddle system `K x = b` whose first `n_u` unknowns are displacements.
    pub fn solve_saddle(&mut self, k: &CsrMatrix, b: &[f64], n_u: usize) -> Result<Vec<f64>> {
        if !self.lu_only {
            if let Ok(x) = self.solve_ldlt(k, b, n_u) {
                if check_solution(k, &x, b).is_ok() {
                    return Ok(x);
                }
            }
        }
        self.solve_lu(k, b)
    }

    /// Regularized `LDLᵀ` solve of the saddle matrix with iterative refinement.
    pub fn solve_ldlt(&mut self, k: &CsrMatrix, b: &[f64], n_u: usize) -> Result<Vec<f64>> {
        self.factor_ldlt(k, n_u)?.solve(b)
    }

    /// Regularized `LDLᵀ` factorization (expected pivot signs `+` for the first
    /// `n_u` unknowns, `−` after), reusable for many right-hand sides.
    pub fn factor_ldlt(&mut self, k: &CsrMatrix, n_u: usize) -> Result<Factorization> {
        let p = &k.pattern;
        let n = p.n;
        let signs: Vec<i8> = (0..n).map(|i| if i < n_u { 1 } else { -1 }).collect();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &p.row_ptr, None, &p.col_idx);
        if !matches!(&self.chol, Some((cp, _)) if same(cp, p)) {
            let s = factorize_symbolic_cholesky(
                sym,
                Side::Lower,
                SymmetricOrdering::Amd,
                Default::default(),
            )
            .map_err(|e| Error::Linear(format!("{e:?}")))?;
            self.chol = Some((Arc::clone(p), Arc::new(s)));
        }
        let symbolic = Arc::clone(&self.chol.as_ref().expect("cached").1);
        let mat = SparseColMatRef::new(sym, &k.values);
        let mut l_values = vec![0.0; symbolic.len_val()];
        let mut mem = MemBuffer::try_new(
            symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
        )
        .map_err(|_| Error::Linear("out of memory".into()))?;
        let scale = k.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let reg = LdltRegularization {
            dynamic_regularization_signs: Some(&signs),
            dynamic_regularization_delta: REG_DELTA * scale,
            dynamic_regularization_epsilon: REG_DELTA * scale,
        };
        symbolic
            .factorize_numeric_ldlt(
                &mut l_values,
                mat,
                Side::Lower,
                reg,
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::Linear(format!("{e:?}")))?;
        Ok(Factorization {
            symbolic,
            l_values,
            matrix: k.clone(),
        })
    }

    fn solve_lu(&mut self, k: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let p = &k.pattern;
        // CSR arrays read as CSC describe Kᵀ, hence the transposed solve below.
        let sym = SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.row_ptr, None, &p.col_idx);
        if !matches!(&self.lu, Some((cp, _)) if same(cp, p)) {
            let s = SymbolicLu::try_new(sym).map_err(|e| Error::Linear(format!("{e:?}")))?;
            self.lu = Some((Arc::clone(p), s));
        }
        let symbolic = self.lu.as_ref().expect("cached").1.clone();
        let mat = SparseColMatRef::new(sym, &k.values);
        let lu = Lu::try_new_with_symbolic(symbolic, mat)
            .map_err(|e| Error::Linear(format!("factorization failed: {e:?}")))?;
        let mut x = Mat::<f64>::from_fn(p.n, 1, |i, _| b[i]);
        lu.solve_transpose_in_place(x.as_mut());
        let x: Vec<f64> = (0..p.n).map(|i| x[(i, 0)]).collect();
        check_solution(k, &x, b)?;
        Ok(x)
    }

    /// Returns `(w, π)`.
    pub fn solve(&mut self, sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut x = self.solve_saddle(&sys.matrix, &sys.rhs, sys.n_u)?;
        let pi = x.split_off(sys.n_u);
        Ok((x, pi))
    }
}

/// Numeric `LDLᵀ` factors together with the factored matrix.
pub struct Factorization {
    symbolic: Arc<SymbolicCholesky<usize>>,
    l_values: Vec<f64>,
    matrix: CsrMatrix,
}

impl Factorization {
    /// Solves `K x = b`, refining until the relative residual reaches `REFINE_TOL`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.n();
        let ldlt = LdltRef::new(&self.symbolic, &self.l_values);
        let mut mem = MemBuffer::try_new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq))
            .map_err(|_| Error::Linear("out of memory".into()))?;
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        // pivoting is only local, so growth is possible
        for _ in 0..REFINE_STEPS {
            let mut d = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            ldlt.solve_in_place_with_conj(Conj::No, d.as_mut(), Par::Seq, MemStack::new(&mut mem));
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += d[(i, 0)];
            }
            let kx = self.matrix.matvec(&x);
            r = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
            if relative_residual(&self.matrix, &x, &r, b) <= REFINE_TOL {
                return Ok(x);
            }
        }
        Err(Error::Linear("LDLT refinement did not converge".into()))
    }
}

fn relative_residual(k: &CsrMatrix, x: &[f64], r: &[f64], b: &[f64]) -> f64 {
    let num = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = den.max(k.frobenius() * x.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale > 0.0 {
        num / scale
    } else {
        0.0
    }
}

fn check_solution(k: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Linear(
            "singular matrix (non-finite solution)".into(),
        ));
    }
    let kx = k.matvec(x);
    let r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
    let rel = relative_residual(k, x, &r, b);
    if !(rel <= SINGULAR_TOL) {
        return Err(Error::Linear(format!(
            "singular matrix (relative residual {rel:.3e})"
        )));
    }
    Ok(())
}

/// Dense LU with partial pivoting, used as an oracle on small systems.
pub fn solve_dense(k: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = k.n();
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for idx in k.pattern.row_ptr[i]..k.pattern.row_ptr[i + 1] {
            a[(i, k.pattern.col_idx[idx])] = k.values[idx];
        }
    }
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    check_solution(k, &x, b)?;
    Ok(x)
}
