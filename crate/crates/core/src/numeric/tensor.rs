use std::fmt;

use super::Scalar;
use crate::{Error, Result};

/// Dense row-major 2-D array.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor<{}>({}x{})", std::any::type_name::<T>(), self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "Tensor::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Tensor { rows, cols, data }.checked("Tensor::new")
    }

    /// Builds from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape {
                    op: "Tensor::from_rows",
                    left: (rows.len(), cols),
                    right: (1, r.len()),
                });
            }
            data.extend(r.iter().map(|&v| T::of(v)));
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the raw storage. Callers are responsible for keeping
    /// entries finite; [`Tensor::ensure_finite`] re-validates.
    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    fn checked(self, op: &'static str) -> Result<Self> {
        self.ensure_finite(op)?;
        Ok(self)
    }

    fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// `self · b`.
    pub fn matmul(&self, b: &Self) -> Result<Self> {
        if self.cols != b.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: b.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, b.cols);
        gemm(false, self, false, b, &mut out);
        out.checked("matmul")
    }

    /// `selfᵀ · b`.
    pub fn matmul_tn(&self, b: &Self) -> Result<Self> {
        if self.rows != b.rows {
            return Err(Error::Shape {
                op: "matmul_tn",
                left: self.shape(),
                right: b.shape(),
            });
        }
        let mut out = Self::zeros(self.cols, b.cols);
        gemm(true, self, false, b, &mut out);
        out.checked("matmul_tn")
    }

    /// `self · bᵀ`.
    pub fn matmul_nt(&self, b: &Self) -> Result<Self> {
        if self.cols != b.cols {
            return Err(Error::Shape {
                op: "matmul_nt",
                left: self.shape(),
                right: b.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, b.rows);
        gemm(false, self, true, b, &mut out);
        out.checked("matmul_nt")
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.same_shape(other, op)?;
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
        .checked(op)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        self.map(|v| v * s).checked("scale")
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self.ensure_finite("add_assign")
    }

    /// Adds a `1 × cols` row to every row.
    pub fn add_row(&self, row: &Self) -> Result<Self> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(Error::Shape {
                op: "add_row",
                left: self.shape(),
                right: row.shape(),
            });
        }
        let mut out = self.clone();
        for r in out.data.chunks_exact_mut(self.cols.max(1)) {
            for (a, &b) in r.iter_mut().zip(&row.data) {
                *a += b;
            }
        }
        out.checked("add_row")
    }

    /// Column sums as a `1 × cols` tensor.
    pub fn sum_rows(&self) -> Self {
        let mut out = Self::zeros(1, self.cols);
        for r in self.data.chunks_exact(self.cols.max(1)) {
            for (a, &b) in out.data.iter_mut().zip(r) {
                *a += b;
            }
        }
        out
    }

    pub fn sum(&self) -> T {
        pairwise_sum(&self.data)
    }

    pub fn sq_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn gather_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::of(v.as_f64())).collect(),
        }
    }

    /// Mean over columns of the per-column standard deviation across rows.
    pub fn mean_column_std(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let n = self.rows as f64;
        let mut total = 0.0;
        for j in 0..self.cols {
            let mean = (0..self.rows).map(|i| self.get(i, j).as_f64()).sum::<f64>() / n;
            let var = (0..self.rows)
                .map(|i| (self.get(i, j).as_f64() - mean).powi(2))
                .sum::<f64>()
                / n;
            total += var.sqrt();
        }
        total / self.cols as f64
    }

    /// Row-wise argmax.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let r = self.row(i);
                let mut best = 0;
                for (j, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Pairwise summation, fixed order.
fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    if xs.len() <= 32 {
        return xs.iter().copied().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `out = op(a) · op(b)`; shapes already validated by the caller.
fn gemm<T: Scalar>(ta: bool, a: &Tensor<T>, tb: bool, b: &Tensor<T>, out: &mut Tensor<T>) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let n = if tb { b.rows } else { b.cols };
    debug_assert_eq!(out.shape(), (m, n));
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.data.iter_mut().for_each(|v| *v = T::zero());
        return;
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: a is (rows×cols) contiguous and the strides above address exactly
    // op(a) as m×k; likewise for b (k×n) and out (m×n, checked above).
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            T::zero(),
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple_loop(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        Tensor::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    #[test]
    fn matmul_identity_cases() {
        let a = Tensor::<f64>::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(a.matmul(&Tensor::identity(2)).unwrap(), a);
        let b = Tensor::<f64>::from_rows(&[[5.0], [7.0]]).unwrap();
        assert_eq!(Tensor::<f64>::identity(2).matmul(&b).unwrap(), b);
    }

    #[test]
    fn matmul_matches_hand_and_triple_loop() {
        let a = Tensor::<f64>::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Tensor::<f64>::from_rows(&[[1.0], [1.0]]).unwrap();
        let expected = Tensor::<f64>::from_rows(&[[3.0], [7.0]]).unwrap();
        assert_eq!(triple_loop(&a, &b), expected);
        assert_eq!(a.matmul(&b).unwrap(), expected);
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a = Tensor::<f64>::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.5 - 2.0);
        let b = Tensor::<f64>::from_fn(5, 4, |i, j| ((i + 2 * j) % 7) as f64 - 3.0);
        let c = Tensor::<f64>::from_fn(4, 3, |i, j| (i as f64) - (j as f64) * 1.5);
        assert_eq!(a.matmul_tn(&b).unwrap(), triple_loop(&a.transpose(), &b));
        assert_eq!(a.matmul_nt(&c).unwrap(), triple_loop(&a, &c.transpose()));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Tensor::<f64>::zeros(2, 3);
        let err = a.matmul(&Tensor::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(Tensor::<f64>::new(1, 2, vec![1.0, f64::NAN]).is_err());
        let big = Tensor::<f32>::filled(1, 1, f32::MAX);
        assert!(matches!(big.scale(10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(Tensor::<f64>::from_rows(&rows).is_err());
    }
}
