//! Dense tensors over a single index range and the few matrix routines the
//! engine needs (Cholesky inverse, spectral bounds).

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;

/// Condition number above which results carry a conditioning warning.
pub const CONDITION_WARN: f64 = 1e8;

/// Row-major dense tensor with every slot ranging over `0..dim`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor {
    dim: usize,
    rank: usize,
    data: Vec<Real>,
}

impl Tensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Tensor {
            dim,
            rank,
            data: vec![Real::ZERO; dim.pow(rank as u32)],
        }
    }

    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> Real) -> Self {
        let mut t = Tensor::zeros(dim, rank);
        for (pos, idx) in multi_indices(dim, rank).enumerate() {
            t.data[pos] = f(&idx);
        }
        t
    }

    pub fn from_vec(dim: usize, rank: usize, data: Vec<Real>) -> Self {
        assert_eq!(data.len(), dim.pow(rank as u32), "tensor data length");
        Tensor { dim, rank, data }
    }

    pub fn vector(v: &[Real]) -> Self {
        Tensor::from_vec(v.len(), 1, v.to_vec())
    }

    pub fn identity(dim: usize) -> Self {
        Tensor::from_fn(dim, 2, |i| if i[0] == i[1] { Real::ONE } else { Real::ZERO })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> Real {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Real) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs().to_f64()).fold(0.0, f64::max)
    }

    /// Largest absolute entry over indices accepted by `keep`.
    pub fn max_abs_where(&self, mut keep: impl FnMut(&[usize]) -> bool) -> f64 {
        multi_indices(self.dim, self.rank)
            .filter(|i| keep(i))
            .map(|i| self.get(&i).abs().to_f64())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "tensor shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs().to_f64())
            .fold(0.0, f64::max)
    }

    /// max |a-b| / max(1, max|b|): relative to the reference scale, absolute near zero.
    pub fn scaled_diff(&self, reference: &Tensor) -> f64 {
        self.max_abs_diff(reference) / reference.max_abs().max(1.0)
    }

    pub fn map(&self, f: impl Fn(Real) -> Real) -> Tensor {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Tensor, f: impl Fn(Real, Real) -> Real) -> Tensor {
        assert_eq!(self.data.len(), other.data.len(), "tensor shapes differ");
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64()).collect()
    }

    /// Contracts the last slot with `v`.
    pub fn contract_last(&self, v: &[Real]) -> Tensor {
        assert!(self.rank >= 1 && v.len() == self.dim);
        let out_rank = self.rank - 1;
        let mut out = Tensor::zeros(self.dim, out_rank);
        for (pos, chunk) in self.data.chunks(self.dim).enumerate() {
            out.data[pos] = chunk.iter().zip(v).map(|(a, b)| *a * *b).sum();
        }
        out
    }

    pub fn symmetrize_matrix(&self) -> Tensor {
        assert_eq!(self.rank, 2);
        Tensor::from_fn(self.dim, 2, |i| (self[[i[0], i[1]]] + self[[i[1], i[0]]]) * 0.5)
    }

    pub fn matvec(&self, v: &[Real]) -> Vec<Real> {
        assert_eq!(self.rank, 2);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[[i, j]] * v[j]).sum())
            .collect()
    }

    pub fn quad_form(&self, u: &[Real], v: &[Real]) -> Real {
        let mv = self.matvec(v);
        u.iter().zip(&mv).map(|(a, b)| *a * *b).sum()
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert!(self.rank == 2 && other.rank == 2 && self.dim == other.dim);
        let n = self.dim;
        Tensor::from_fn(n, 2, |i| (0..n).map(|k| self[[i[0], k]] * other[[k, i[1]]]).sum())
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank, 2);
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[[i, j]].to_f64())
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let m = self.symmetrize_matrix().to_dmatrix();
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn rank_numeric(&self, tol: f64) -> usize {
        let m = self.to_dmatrix();
        m.svd(false, false)
            .singular_values
            .iter()
            .filter(|s| **s > tol)
            .count()
    }
}

impl<const R: usize> Index<[usize; R]> for Tensor {
    type Output = Real;
    fn index(&self, idx: [usize; R]) -> &Real {
        &self.data[self.offset(&idx)]
    }
}

impl<const R: usize> IndexMut<[usize; R]> for Tensor {
    fn index_mut(&mut self, idx: [usize; R]) -> &mut Real {
        let o = self.offset(&idx);
        &mut self.data[o]
    }
}

/// All multi-indices of `rank` slots over `0..dim`, row-major order.
pub fn multi_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = dim.pow(rank as u32);
    (0..total).map(move |mut pos| {
        let mut idx = vec![0; rank];
        for slot in (0..rank).rev() {
            idx[slot] = pos % dim;
            pos /= dim;
        }
        idx
    })
}

/// Inverse of a symmetric positive-definite matrix together with its
/// spectral condition number.
#[derive(Clone, Debug)]
pub struct SpdInverse {
    pub inverse: Tensor,
    pub condition: f64,
}

/// Cholesky-based inverse. Fails with [`Error::Degenerate`] carrying the
/// smallest eigenvalue when the matrix is not positive definite.
pub fn spd_inverse(m: &Tensor) -> Result<SpdInverse> {
    assert_eq!(m.rank(), 2);
    let n = m.dim();
    let a = m.symmetrize_matrix();
    let mut l = Tensor::zeros(n, 2);
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d.to_f64() > 0.0) || !d.is_finite() {
            let min_eigenvalue = a.symmetric_eigenvalues().first().copied().unwrap_or(f64::NAN);
            return Err(Error::Degenerate { min_eigenvalue });
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    // Invert L, then A^-1 = L^-T L^-1.
    let mut linv = Tensor::zeros(n, 2);
    for i in 0..n {
        linv[[i, i]] = l[[i, i]].recip();
        for j in 0..i {
            let mut s = Real::ZERO;
            for k in j..i {
                s -= l[[i, k]] * linv[[k, j]];
            }
            linv[[i, j]] = s / l[[i, i]];
        }
    }
    let inverse = Tensor::from_fn(n, 2, |ij| {
        let (i, j) = (ij[0], ij[1]);
        (i.max(j)..n).map(|k| linv[[k, i]] * linv[[k, j]]).sum()
    });
    let ev = a.symmetric_eigenvalues();
    let condition = ev.last().copied().unwrap_or(1.0) / ev.first().copied().unwrap_or(1.0);
    Ok(SpdInverse { inverse, condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::reals;

    #[test]
    fn multi_index_order_is_row_major() {
        let all: Vec<_> = multi_indices(2, 2).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let t = Tensor::from_fn(3, 3, |i| Real::new((i[0] * 9 + i[1] * 3 + i[2]) as f64));
        assert_eq!(t[[2, 1, 0]].to_f64(), 21.0);
    }

    #[test]
    fn spd_inverse_recovers_identity() {
        let m = Tensor::from_vec(3, 2, reals(&[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]));
        let inv = spd_inverse(&m).unwrap();
        let prod = m.matmul(&inv.inverse);
        assert!(prod.max_abs_diff(&Tensor::identity(3)) < 1e-28);
        assert!(inv.condition > 1.0 && inv.condition < 10.0);
    }

    #[test]
    fn indefinite_matrix_reports_min_eigenvalue() {
        let m = Tensor::from_vec(2, 2, reals(&[1.0, 0.0, 0.0, -2.0]));
        match spd_inverse(&m) {
            Err(Error::Degenerate { min_eigenvalue }) => assert!((min_eigenvalue + 2.0).abs() < 1e-12),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn contraction_and_quadratic_form() {
        let m = Tensor::from_vec(2, 2, reals(&[2.0, 1.0, 1.0, 3.0]));
        let v = reals(&[1.0, 2.0]);
        assert_eq!(m.contract_last(&v).to_f64(), vec![4.0, 7.0]);
        assert_eq!(m.quad_form(&v, &v).to_f64(), 18.0);
    }
}
