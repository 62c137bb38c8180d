//! Sparse matrices in CSR form plus a direct-solver wrapper.
//!
//! Assembly accumulates (row, col, value) triplets in deterministic cell
//! order; `Csr::from_triplets` merges duplicates. Factorizations are sparse
//! LU with partial pivoting (via `faer`, built without threading so repeated
//! runs are bit-identical); `solve` applies one step of iterative refinement,
//! which pushes the residual of the linear constraint rows down to rounding
//! level.

use faer::linalg::solvers::SpSolver;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::SparseColMat;
use faer::Col;

use crate::error::Error;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds a CSR matrix from triplets, summing duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut rows = Vec::with_capacity(t.len());
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            debug_assert!(r < nrows && c < ncols);
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// y = A^T x
    pub fn tr_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * x[r];
            }
        }
        y
    }

    /// x^T A y
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// Extracts the submatrix with the given row/col index maps
    /// (`map[old] = Some(new)` keeps the entry).
    pub fn restrict(&self, row_map: &[Option<usize>], col_map: &[Option<usize>], nrows: usize, ncols: usize) -> Csr {
        let mut t = Vec::new();
        for r in 0..self.nrows {
            let Some(nr) = row_map[r] else { continue };
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if let Some(nc) = col_map[self.col_idx[k]] {
                    t.push((nr, nc, self.values[k]));
                }
            }
        }
        Csr::from_triplets(nrows, ncols, t)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// Largest relative asymmetry |a_ij - a_ji| / max|a|; zero for symmetric.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut worst = 0.0f64;
        for (r, c, v) in self.triplets() {
            let vt = self.get(c, r);
            worst = worst.max((v - vt).abs() / scale);
        }
        worst
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.values[k];
            }
        }
        0.0
    }

    /// Writes the matrix as `row col value` triplets with a one-line header.
    pub fn write_triplets(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "MATRIX v1 rows={} cols={} nnz={}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {}", r, c, crate::fmt_f64(v))?;
        }
        Ok(())
    }
}

/// Sparse LU factorization of a square matrix, with the matrix retained for
/// iterative refinement.
pub struct Factorization {
    n: usize,
    lu: Lu<usize, f64>,
    sym: Symbolic,
    mat: SparseColMat<usize, f64>,
}

/// Reusable symbolic analysis for a fixed sparsity pattern.
#[derive(Clone)]
pub struct Symbolic(SymbolicLu<usize>);

pub fn factorize(n: usize, triplets: &[(usize, usize, f64)], symbolic: Option<&Symbolic>) -> Result<Factorization, Error> {
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
        .map_err(|e| Error::Linear(format!("matrix creation failed: {e:?}")))?;
    let sym = match symbolic {
        Some(s) => s.clone(),
        None => Symbolic(
            SymbolicLu::try_new(mat.symbolic()).map_err(|e| Error::Linear(format!("symbolic analysis failed: {e:?}")))?,
        ),
    };
    let lu = Lu::try_new_with_symbolic(sym.0.clone(), mat.as_ref())
        .map_err(|e| Error::Linear(format!("numeric factorization failed: {e:?}")))?;
    Ok(Factorization { n, lu, sym, mat })
}

impl Factorization {
    pub fn symbolic(&self) -> Symbolic {
        self.sym.clone()
    }

    /// Solves A x = b with one step of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let mut x = self.lu.solve(&rhs);
        // refinement: r = b - A x, x += A^{-1} r
        let mut r = rhs.clone();
        sparse_matvec_sub(&self.mat, x.as_slice(), r.as_slice_mut());
        let dx = self.lu.solve(&r);
        for i in 0..self.n {
            x[i] += dx[i];
        }
        x.as_slice().to_vec()
    }
}

/// r -= A x for a faer column-major sparse matrix.
pub(crate) fn sparse_matvec_sub(mat: &SparseColMat<usize, f64>, x: &[f64], r: &mut [f64]) {
    for c in 0..mat.ncols() {
        let xc = x[c];
        if xc == 0.0 {
            continue;
        }
        for (i, &v) in mat.row_indices_of_col(c).zip(mat.values_of_col(c)) {
            r[i] -= v * xc;
        }
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csr_merges_duplicates_and_multiplies() {
        let a = Csr::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 2, 4.0), (0, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        let y = a.mul(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![1.0, 12.0]);
        let z = a.tr_mul(&[1.0, 1.0]);
        assert_eq!(z, vec![3.0, -1.0, 4.0]);
    }

    #[test]
    fn lu_solves_small_indefinite_system() {
        // saddle-point-like 3x3
        let t = vec![(0, 0, 4.0), (0, 2, 1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 0, 1.0), (2, 1, -1.0)];
        let f = factorize(3, &t, None).unwrap();
        let x = f.solve(&[1.0, 0.0, 2.0]);
        // check residual
        let a = Csr::from_triplets(3, 3, t);
        let r = a.mul(&x);
        assert_relative_eq!(r[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(r[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn symbolic_reuse_matches_fresh_factorization() {
        let t1 = vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)];
        let f1 = factorize(2, &t1, None).unwrap();
        let sym = f1.symbolic();
        let t2 = vec![(0, 0, 5.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)];
        let f2 = factorize(2, &t2, Some(&sym)).unwrap();
        let x = f2.solve(&[6.0, 2.0]);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
    }
}
