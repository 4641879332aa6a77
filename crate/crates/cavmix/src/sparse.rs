//! Compressed-row matrices with a fixed, precomputed pattern.

use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    /// Sorted column indices per row.
    pub col_idx: Vec<usize>,
}

impl CsrPattern {
    /// Pattern holding every pair within each index group.
    pub fn from_groups<'a>(n: usize, groups: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for g in groups {
            for &i in g {
                rows[i].extend_from_slice(g);
            }
        }
        Self::from_rows(rows)
    }

    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        CsrPattern {
            n,
            row_ptr,
            col_idx,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].binary_search(&j).ok().map(|k| a + k)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).iter().all(|&j| self.find(j, i).is_some()))
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub pattern: Arc<CsrPattern>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    /// Adds `v` at `(i, j)`; the entry must be in the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        (0..p.n)
            .map(|i| {
                let (a, b) = (p.row_ptr[i], p.row_ptr[i + 1]);
                (a..b).map(|k| self.values[k] * x[p.col_idx[k]]).sum()
            })
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖K − Kᵀ‖_F` over the stored entries.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let mut s = 0.0;
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                let d = self.values[k] - self.get(j, i);
                s += d * d;
            }
        }
        s.sqrt()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                row[self.pattern.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    /// Symmetric elimination of index `i` with prescribed value `g`: the value is
    /// lifted into `rhs`, then row and column `i` become the identity.
    pub fn eliminate(&mut self, i: usize, g: f64, rhs: &mut [f64]) {
        let p = Arc::clone(&self.pattern);
        for k in p.row_ptr[i]..p.row_ptr[i + 1] {
            let j = p.col_idx[k];
            if j == i {
                continue;
            }
            if let Some(kt) = p.find(j, i) {
                rhs[j] -= self.values[kt] * g;
                self.values[kt] = 0.0;
            }
            self.values[k] = 0.0;
        }
        let d = p
            .find(i, i)
            .expect("constrained index without diagonal entry");
        self.values[d] = 1.0;
        rhs[i] = g;
    }
}
