//! Small dense complex matrices: permanents (Ryser with Gray-code updates),
//! determinants, and the unitarity check used by the Haar sampler.

use alloc::vec::Vec;

use num_complex::Complex;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Largest matrix order accepted by [`permanent`]; Ryser costs `2^n * n`.
pub const MAX_PERMANENT_DIM: usize = 14;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix {
            dim,
            data: alloc::vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds from row-major data; the length must be a perfect square of
    /// the dimension.
    pub fn from_rows(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidArgument("matrix data must be dim * dim entries"));
        }
        Ok(CMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// Square submatrix on the given row and column indices (with
    /// repetition allowed, as needed for occupation lists).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<CMatrix> {
        if rows.len() != cols.len() {
            return Err(Error::InvalidArgument("submatrix must be square"));
        }
        if rows.iter().chain(cols).any(|&i| i >= self.dim) {
            return Err(Error::InvalidArgument("submatrix index out of range"));
        }
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for &r in rows {
            for &c in cols {
                data.push(self[(r, c)]);
            }
        }
        Ok(CMatrix { dim: n, data })
    }

    /// Entrywise `|u|^2` as a real-valued complex matrix (the no-interference
    /// transition matrix of distinguishable particles).
    pub fn abs2(&self) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect(),
        }
    }

    /// Max-norm of `U^dagger U - I`; zero for exactly unitary matrices.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                if i == j {
                    acc -= C64::new(1.0, 0.0);
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (row, col): (usize, usize)) -> &C64 {
        &self.data[row * self.dim + col]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (row, col): (usize, usize)) -> &mut C64 {
        &mut self.data[row * self.dim + col]
    }
}

/// Matrix permanent by Ryser's inclusion-exclusion formula with Gray-code
/// subset updates, `O(2^n n)`. Guarded at `n <= 14`.
pub fn permanent(a: &CMatrix) -> Result<C64> {
    let n = a.dim();
    if n > MAX_PERMANENT_DIM {
        return Err(Error::SizeGuard {
            what: "permanent dimension",
            limit: MAX_PERMANENT_DIM as u64,
            got: n as u64,
        });
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut row_sums = alloc::vec![C64::new(0.0, 0.0); n];
    let mut total = C64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1 << n) {
        let next = k ^ (k >> 1);
        let toggled = (gray ^ next).trailing_zeros() as usize;
        if next & (gray ^ next) != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += a[(i, toggled)];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= a[(i, toggled)];
            }
        }
        gray = next;
        let mut prod = C64::new(1.0, 0.0);
        for s in &row_sums {
            prod *= *s;
        }
        if next.count_ones() % 2 == 0 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 0 {
        total = -total;
    }
    Ok(total)
}

/// Determinant by LU decomposition with partial pivoting.
pub fn determinant(a: &CMatrix) -> C64 {
    let n = a.dim();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut m = a.data.to_vec();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let mut pivot = col;
        let mut best = m[col * n + col].norm_sqr();
        for row in col + 1..n {
            let mag = m[row * n + col].norm_sqr();
            if mag > best {
                best = mag;
                pivot = row;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            det = -det;
        }
        let diag = m[col * n + col];
        det *= diag;
        for row in col + 1..n {
            let factor = m[row * n + col] / diag;
            for j in col..n {
                let sub = factor * m[col * n + j];
                m[row * n + j] -= sub;
            }
        }
    }
    det
}
