//! Block-tridiagonal solve for the slab Jacobian (cells couple only to their neighbors).

use nalgebra::{DMatrix, DVector};

/// `diag[i]` is block `(i, i)`, `lower[i]` block `(i, i-1)`, `upper[i]` block `(i, i+1)`.
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub diag: Vec<DMatrix<f64>>,
    pub lower: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    pub fn zeros(blocks: usize, size: usize) -> Self {
        BlockTridiagonal {
            diag: vec![DMatrix::zeros(size, size); blocks],
            lower: vec![DMatrix::zeros(size, size); blocks],
            upper: vec![DMatrix::zeros(size, size); blocks],
        }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    /// Adds `m` to block `(row, col)`; `col` must be `row` or a neighbor.
    pub fn add(&mut self, row: usize, col: usize, m: &DMatrix<f64>) {
        if col == row {
            self.diag[row] += m;
        } else if col + 1 == row {
            self.lower[row] += m;
        } else if col == row + 1 {
            self.upper[row] += m;
        } else {
            panic!("block ({row}, {col}) is outside the tridiagonal band");
        }
    }

    /// Dense product, for tests.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.blocks();
        let s = self.diag[0].nrows();
        let mut y = vec![0.0; n * s];
        for i in 0..n {
            let mut acc = &self.diag[i] * DVector::from_column_slice(&x[i * s..(i + 1) * s]);
            if i > 0 {
                acc += &self.lower[i] * DVector::from_column_slice(&x[(i - 1) * s..i * s]);
            }
            if i + 1 < n {
                acc += &self.upper[i] * DVector::from_column_slice(&x[(i + 1) * s..(i + 2) * s]);
            }
            y[i * s..(i + 1) * s].copy_from_slice(acc.as_slice());
        }
        y
    }

    /// Solves `A x = rhs` by block Gaussian elimination. On a singular pivot block
    /// returns its index.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, usize> {
        let n = self.blocks();
        let s = self.diag[0].nrows();
        let mut g_mats: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut g_vecs: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut pivot = self.diag[i].clone();
            let mut y = DVector::from_column_slice(&rhs[i * s..(i + 1) * s]);
            if i > 0 {
                pivot -= &self.lower[i] * &g_mats[i - 1];
                y -= &self.lower[i] * &g_vecs[i - 1];
            }
            let lu = pivot.lu();
            let gv = lu.solve(&y).ok_or(i)?;
            if gv.iter().any(|v| !v.is_finite()) {
                return Err(i);
            }
            let gm = if i + 1 < n {
                lu.solve(&self.upper[i]).ok_or(i)?
            } else {
                DMatrix::zeros(s, s)
            };
            g_mats.push(gm);
            g_vecs.push(gv);
        }
        let mut x = vec![0.0; n * s];
        let mut next: Option<DVector<f64>> = None;
        for i in (0..n).rev() {
            let xi = match &next {
                Some(xn) => &g_vecs[i] - &g_mats[i] * xn,
                None => g_vecs[i].clone(),
            };
            x[i * s..(i + 1) * s].copy_from_slice(xi.as_slice());
            next = Some(xi);
        }
        Ok(x)
    }
}
