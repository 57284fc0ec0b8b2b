//! Small dense square matrices over `f64` or exact rationals.

use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

/// Scalars the matrix helpers work over.
pub trait Scalar: Clone + Num + Signed + PartialOrd + std::fmt::Debug {
    fn to_f64_lossy(&self) -> f64;
}

impl Scalar for f64 {
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    size: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let size = rows.len();
        assert!(rows.iter().all(|r| r.len() == size), "matrix must be square");
        Self {
            size,
            data: rows.iter().flat_map(|r| r.iter().cloned()).collect(),
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![T::zero(); size * size];
        for i in 0..size {
            data[i * size + i] = T::one();
        }
        Self { size, data }
    }

    /// Matrix whose every row equals `row`.
    pub fn repeated_row(row: &[T]) -> Self {
        let size = row.len();
        Self {
            size,
            data: (0..size).flat_map(|_| row.iter().cloned()).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.size;
        assert_eq!(n, other.size);
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &other.data[k * n + j];
                    if !b.is_zero() {
                        data[i * n + j] = data[i * n + j].clone() + a.clone() * b.clone();
                    }
                }
            }
        }
        Self { size: n, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.size, other.size);
        Self {
            size: self.size,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    /// `self^exp` by repeated squaring.
    pub fn pow(&self, mut exp: u64) -> Self {
        let mut result = Self::identity(self.size);
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                result = result.mul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[T]) -> Vec<T> {
        let n = self.size;
        (0..n)
            .map(|j| {
                (0..n).fold(T::zero(), |acc, i| {
                    acc + v[i].clone() * self.data[i * n + j].clone()
                })
            })
            .collect()
    }

    pub fn map_f64(&self) -> Matrix<f64> {
        Matrix {
            size: self.size,
            data: self.data.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }

    /// Solves `v (self - I) = 0`, `sum v = 1` by Gaussian elimination with
    /// the last balance equation replaced by the normalization row.
    /// Returns `None` when the system is singular.
    pub fn stationary_vector(&self) -> Option<Vec<T>> {
        let n = self.size;
        // Unknowns v_0..v_{n-1}; equation j: sum_i v_i (P_ij - delta_ij) = 0.
        let mut a: Vec<Vec<T>> = (0..n)
            .map(|j| {
                let mut row: Vec<T> = (0..n)
                    .map(|i| {
                        let mut x = self.get(i, j).clone();
                        if i == j {
                            x = x - T::one();
                        }
                        x
                    })
                    .collect();
                row.push(T::zero());
                row
            })
            .collect();
        a[n - 1] = vec![T::one(); n + 1];
        solve_augmented(a)
    }
}

/// Gauss-Jordan elimination with partial pivoting on an `n x (n+1)` system.
fn solve_augmented<T: Scalar>(mut a: Vec<Vec<T>>) -> Option<Vec<T>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&x, &y| {
                a[x][col]
                    .abs()
                    .partial_cmp(&a[y][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for k in col..=n {
            a[col][k] = a[col][k].clone() / p.clone();
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..=n {
                    let delta = f.clone() * a[col][k].clone();
                    a[r][k] = a[r][k].clone() - delta;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n].clone()).collect())
}

/// True when some power of the zero pattern of `m` is strictly positive.
/// Checks powers up to the Wielandt bound `(s-1)^2 + 1`.
pub fn is_primitive<T: Scalar>(m: &Matrix<T>) -> bool {
    let s = m.size();
    if s == 0 {
        return false;
    }
    let pattern: Vec<Vec<bool>> = (0..s)
        .map(|i| (0..s).map(|j| m.get(i, j) > &T::zero()).collect())
        .collect();
    let mut power = pattern.clone();
    let bound = (s - 1) * (s - 1) + 1;
    for _ in 0..bound {
        if power.iter().all(|r| r.iter().all(|&x| x)) {
            return true;
        }
        power = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| (0..s).any(|k| power[i][k] && pattern[k][j]))
                    .collect()
            })
            .collect();
    }
    power.iter().all(|r| r.iter().all(|&x| x))
}
