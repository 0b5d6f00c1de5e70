//! Sparse symmetric assembly and the SPD solve used by the Newton iterations.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::{Error, Result};

/// Symmetric matrix stored as unsorted triplets (both triangles). Duplicates are summed.
#[derive(Debug, Clone)]
pub struct SparseSym {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.dim && col < self.dim);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Scatter a dense `N x N` block whose rows/columns map to the given scalar DOFs.
    /// DOFs mapped to `None` are dropped.
    pub fn add_block<const N: usize>(&mut self, dofs: &[Option<usize>; N], block: &SMatrix<f64, N, N>) {
        for (i, di) in dofs.iter().enumerate() {
            let Some(r) = *di else { continue };
            for (j, dj) in dofs.iter().enumerate() {
                let Some(c) = *dj else { continue };
                self.push(r, c, block[(i, j)]);
            }
        }
    }

    pub fn add_diagonal(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.dim);
        for (i, v) in values.iter().enumerate() {
            self.push(i, i, *v);
        }
    }

    pub fn extend_scaled(&mut self, other: &SparseSym, scale: f64) {
        assert_eq!(self.dim, other.dim);
        self.entries.extend(other.entries.iter().map(|&(r, c, v)| (r, c, v * scale)));
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] += v;
            }
        }
        d
    }
}

/// Clamp the eigenvalues of a symmetric matrix to be non-negative.
pub fn project_psd<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N>
where
    nalgebra::Const<N>:
        nalgebra::DimMin<nalgebra::Const<N>, Output = nalgebra::Const<N>> + nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator:
        nalgebra::allocator::Allocator<<nalgebra::Const<N> as nalgebra::DimSub<nalgebra::U1>>::Output>,
{
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return sym;
    }
    let clamped: SVector<f64, N> = eig.eigenvalues.map(|l| l.max(0.0));
    eig.eigenvectors * SMatrix::<f64, N, N>::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

/// Reverse Cuthill-McKee ordering of the sparsity graph. Returns `perm` with
/// `perm[new] = old`.
fn rcm_ordering(dim: usize, entries: &[(usize, usize, f64)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for &(r, c, _) in entries {
        if r != c {
            adj[r].push(c);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let mut visited = vec![false; dim];
    let mut order = Vec::with_capacity(dim);
    let mut by_degree: Vec<usize> = (0..dim).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (adj[u].len(), u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Solve `A x = b` for symmetric positive definite `A` with a sparse Cholesky
/// factorization. If the factorization fails, a diagonal shift proportional to
/// the mean diagonal is added (twice, growing) before giving up.
pub fn solve_spd(a: &SparseSym, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim;
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let perm = rcm_ordering(n, &a.entries);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let diag = a.diagonal();
    let mean_diag = diag.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let shifts = [0.0, 1e-8 * mean_diag, 1e-4 * mean_diag];

    for shift in shifts {
        let mut coo = CooMatrix::new(n, n);
        for &(r, c, v) in &a.entries {
            coo.push(inv[r], inv[c], v);
        }
        for i in 0..n {
            // keep the diagonal structurally present
            coo.push(i, i, shift);
        }
        let csc = CscMatrix::from(&coo);
        let Ok(chol) = CscCholesky::factor(&csc) else {
            continue;
        };
        let rhs = DMatrix::from_iterator(n, 1, perm.iter().map(|&old| b[old]));
        let y = chol.solve(&rhs);
        if y.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            x[old] = y[(new, 0)];
        }
        return Ok(x);
    }
    Err(Error::LinearSolveFailed)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest eigenvalue of a dense symmetric matrix (test and diagnostics helper).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn solves_small_spd_system() {
        let mut a = SparseSym::new(3);
        let m = Matrix3::new(4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0);
        a.add_block(&[Some(0), Some(1), Some(2)], &m);
        let x = solve_spd(&a, &[1.0, 2.0, 3.0]).unwrap();
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn dropped_dofs_are_not_assembled() {
        let mut a = SparseSym::new(2);
        let m = Matrix3::from_element(1.0);
        a.add_block(&[Some(0), None, Some(1)], &m);
        assert_eq!(a.to_dense(), DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn psd_projection_clamps_negative_eigenvalues() {
        let m = nalgebra::Matrix2::new(1.0, 2.0, 2.0, 1.0); // eigenvalues 3, -1
        let p = project_psd(&m);
        let eig = p.symmetric_eigen();
        assert!(eig.eigenvalues.min() > -1e-12);
        assert!((eig.eigenvalues.max() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let mut a = SparseSym::new(2);
        a.push(0, 0, 1.0);
        a.push(1, 1, -1.0);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0]), Err(Error::LinearSolveFailed)));
    }
}
