//! LU factorization with partial pivoting.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Mat<T>,
    piv: Vec<usize>,
    swaps: usize,
    singular: bool,
    norm_1: T,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Mat<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::shape(format!(
                "LU of non-square {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = false;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| {
                    lu[(i, k)]
                        .abs()
                        .partial_cmp(&lu[(j, k)].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(k);
            if p != k {
                for c in 0..n {
                    let t = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = t;
                }
                piv.swap(k, p);
                swaps += 1;
            }
            let d = lu[(k, k)];
            if d.is_zero() {
                singular = true;
                continue;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f.is_zero() {
                    continue;
                }
                for c in k + 1..n {
                    let v = lu[(k, c)];
                    lu[(i, c)] -= f * v;
                }
            }
        }
        Ok(Self {
            lu,
            piv,
            swaps,
            singular,
            norm_1: a.norm_1(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> T {
        let d = (0..self.dim()).fold(T::one(), |acc, i| acc * self.lu[(i, i)]);
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }

    pub fn solve_vec(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::shape(format!(
                "solve with {n}x{n} system and right side of length {}",
                b.len()
            )));
        }
        if self.singular {
            return Err(Error::Singular("zero pivot in LU factorization".into()));
        }
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: T = (0..i).map(|k| self.lu[(i, k)] * x[k]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: T = (i + 1..n).map(|k| self.lu[(i, k)] * x[k]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn solve_mat(&self, b: &Mat<T>) -> Result<Mat<T>> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::shape(format!(
                "solve with {n}x{n} system and {}x{} right side",
                b.rows(),
                b.cols()
            )));
        }
        let bt = b.transpose();
        let mut out = Mat::zeros(b.cols(), n);
        for c in 0..b.cols() {
            let x = self.solve_vec(bt.row(c))?;
            out.row_mut(c).copy_from_slice(&x);
        }
        Ok(out.transpose())
    }

    pub fn inverse(&self) -> Result<Mat<T>> {
        self.solve_mat(&Mat::identity(self.dim()))
    }

    /// `‖A‖₁·‖A⁻¹‖₁`; infinite when a pivot vanished.
    pub fn cond_1(&self) -> T {
        if self.dim() == 0 {
            return T::one();
        }
        match self.inverse() {
            Ok(inv) if inv.is_finite() => self.norm_1 * inv.norm_1(),
            _ => T::infinity(),
        }
    }
}

pub fn det<T: Scalar>(a: &Mat<T>) -> Result<T> {
    Ok(Lu::new(a)?.det())
}

pub fn solve<T: Scalar>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>> {
    Lu::new(a)?.solve_vec(b)
}

/// Product of row 2-norms: an upper bound on `|det(a)|`.
pub fn hadamard_bound<T: Scalar>(a: &Mat<T>) -> T {
    (0..a.rows()).fold(T::one(), |acc, i| {
        acc * a.row(i).iter().map(|&v| v * v).sum::<T>().sqrt()
    })
}
