//! Minimal sparse symmetric machinery for the global solve: CSR storage
//! assembled element-by-element (duplicate entries allowed and summed by
//! the matrix-vector product), Jacobi-preconditioned conjugate gradients,
//! and a dense Cholesky path for desk-scale systems.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("solve failed: achieved relative residual {residual:.3e} after {iterations} iterations")]
    SolveFailure { residual: f64, iterations: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Square CSR matrix. Duplicate column entries within a row are permitted
/// and treated additively, which lets assembly skip a merge pass.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    rowptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from per-element dense blocks scattered to global indices.
    /// `blocks` yields `(global_dofs, local_matrix)` pairs; the layout is
    /// deterministic in iteration order.
    pub fn from_element_blocks<'a>(
        n: usize,
        blocks: impl Iterator<Item = (&'a [usize], &'a DMatrix<f64>)> + Clone,
    ) -> Self {
        let mut counts = vec![0usize; n + 1];
        for (dofs, _) in blocks.clone() {
            for &g in dofs {
                counts[g + 1] += dofs.len();
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let rowptr = counts;
        let nnz = rowptr[n];
        let mut cols = vec![0u32; nnz];
        let mut vals = vec![0.0f64; nnz];
        let mut next = rowptr.clone();
        for (dofs, local) in blocks {
            for (i, &gi) in dofs.iter().enumerate() {
                let start = next[gi];
                for (j, &gj) in dofs.iter().enumerate() {
                    cols[start + j] = gj as u32;
                    vals[start + j] = local[(i, j)];
                }
                next[gi] += dofs.len();
            }
        }
        Self {
            n,
            rowptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (lo, hi) = (self.rowptr[r], self.rowptr[r + 1]);
        let mut acc = 0.0;
        for k in lo..hi {
            acc += self.vals[k] * x[self.cols[k] as usize];
        }
        acc
    }

    pub fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let xs = x.as_slice();
        y.as_mut_slice()
            .par_iter_mut()
            .enumerate()
            .for_each(|(r, yr)| *yr = self.row_dot(r, xs));
    }

    /// Matrix-vector product restricted to `active` rows and columns
    /// (inactive entries of x are treated as zero, inactive rows output 0).
    pub fn matvec_masked(&self, x: &DVector<f64>, active: &[bool], y: &mut DVector<f64>) {
        let xs = x.as_slice();
        y.as_mut_slice()
            .par_iter_mut()
            .enumerate()
            .for_each(|(r, yr)| {
                if !active[r] {
                    *yr = 0.0;
                    return;
                }
                let (lo, hi) = (self.rowptr[r], self.rowptr[r + 1]);
                let mut acc = 0.0;
                for k in lo..hi {
                    let c = self.cols[k] as usize;
                    if active[c] {
                        acc += self.vals[k] * xs[c];
                    }
                }
                *yr = acc;
            });
    }

    /// Accumulated diagonal (duplicates summed).
    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for r in 0..self.n {
            for k in self.rowptr[r]..self.rowptr[r + 1] {
                if self.cols[k] as usize == r {
                    d[r] += self.vals[k];
                }
            }
        }
        d
    }

    /// Dense copy of the submatrix on `index` (duplicates summed).
    pub fn dense_submatrix(&self, index: &[usize]) -> DMatrix<f64> {
        let pos: std::collections::HashMap<usize, usize> =
            index.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut a = DMatrix::zeros(index.len(), index.len());
        for (i, &g) in index.iter().enumerate() {
            for k in self.rowptr[g]..self.rowptr[g + 1] {
                if let Some(&j) = pos.get(&(self.cols[k] as usize)) {
                    a[(i, j)] += self.vals[k];
                }
            }
        }
        a
    }

    /// Maximum relative asymmetry max |A - A^T| / max |A| (dense check,
    /// intended for desk-scale instances).
    pub fn max_asymmetry(&self) -> f64 {
        let all: Vec<usize> = (0..self.n).collect();
        let a = self.dense_submatrix(&all);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
                scale = scale.max(a[(i, j)].abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on the `active` subspace.
/// Returns the solution, the achieved relative residual and the iteration
/// count.
pub fn cg_jacobi(
    a: &CsrMatrix,
    b: &DVector<f64>,
    active: &[bool],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64, usize), LinalgError> {
    let n = a.n();
    let diag = a.diagonal();
    let inv_diag: DVector<f64> = DVector::from_fn(n, |i, _| {
        if active[i] && diag[i].abs() > 0.0 {
            1.0 / diag[i]
        } else {
            0.0
        }
    });
    let mask = |v: &mut DVector<f64>| {
        for i in 0..n {
            if !active[i] {
                v[i] = 0.0;
            }
        }
    };

    let mut rhs = b.clone();
    mask(&mut rhs);
    let b_norm = rhs.norm();
    if b_norm == 0.0 {
        return Ok((DVector::zeros(n), 0.0, 0));
    }

    let mut x = DVector::zeros(n);
    let mut r = rhs.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    let mut res = 1.0;
    for it in 0..max_iter {
        a.matvec_masked(&p, active, &mut ap);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        res = r.norm() / b_norm;
        if res <= rel_tol {
            return Ok((x, res, it + 1));
        }
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * beta;
    }
    Err(LinalgError::SolveFailure {
        residual: res,
        iterations: max_iter,
    })
}

/// Dense Cholesky solve of the active block.
pub fn dense_solve(
    a: &CsrMatrix,
    b: &DVector<f64>,
    active: &[bool],
) -> Result<DVector<f64>, LinalgError> {
    let index: Vec<usize> = (0..a.n()).filter(|&i| active[i]).collect();
    let sub = a.dense_submatrix(&index);
    let rhs = DVector::from_iterator(index.len(), index.iter().map(|&g| b[g]));
    let chol = sub.cholesky().ok_or(LinalgError::NotPositiveDefinite)?;
    let y = chol.solve(&rhs);
    let mut x = DVector::zeros(a.n());
    for (i, &g) in index.iter().enumerate() {
        x[g] = y[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let local = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let dofs: Vec<Vec<usize>> = (0..n - 1).map(|i| vec![i, i + 1]).collect();
        let locals = vec![local; n - 1];
        CsrMatrix::from_element_blocks(n, dofs.iter().map(|d| d.as_slice()).zip(locals.iter()))
    }

    #[test]
    fn one_by_one_system() {
        let local = DMatrix::from_row_slice(1, 1, &[2.0]);
        let dofs = [0usize];
        let a = CsrMatrix::from_element_blocks(1, std::iter::once((&dofs[..], &local)));
        let b = DVector::from_vec(vec![4.0]);
        let (x, _, _) = cg_jacobi(&a, &b, &[true], 1e-14, 10).unwrap();
        assert_relative_eq!(x[0], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn cg_matches_dense_on_masked_laplacian() {
        let n = 40;
        let a = laplacian_1d(n);
        let mut active = vec![true; n];
        active[0] = false;
        active[n - 1] = false;
        let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
        let (x_cg, res, _) = cg_jacobi(&a, &b, &active, 1e-13, 10_000).unwrap();
        let x_dense = dense_solve(&a, &b, &active).unwrap();
        assert!(res <= 1e-13);
        assert_relative_eq!((&x_cg - &x_dense).norm(), 0.0, epsilon = 1e-9 * x_dense.norm());
    }

    #[test]
    fn duplicates_are_additive() {
        let local = DMatrix::from_row_slice(1, 1, &[1.5]);
        let dofs = [0usize];
        let a = CsrMatrix::from_element_blocks(
            1,
            vec![(&dofs[..], &local), (&dofs[..], &local)].into_iter(),
        );
        assert_relative_eq!(a.diagonal()[0], 3.0);
        assert_eq!(a.nnz(), 2);
        assert_relative_eq!(a.dense_submatrix(&[0])[(0, 0)], 3.0);
    }

    #[test]
    fn symmetric_assembly_has_no_asymmetry() {
        let a = laplacian_1d(12);
        assert!(a.max_asymmetry() < 1e-15);
    }
}
