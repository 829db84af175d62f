//! Dense row-major 2-D arrays of `f64`.
//!
//! Everything on the tape is a matrix; a batch of `n` vectors of width `d`
//! is an `n x d` tensor and a scalar is `1 x 1`.

use crate::error::AdError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AdError> {
        if data.len() != rows * cols {
            return Err(AdError::Shape(format!(
                "{} values do not fill a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// `n x 1` column from a slice.
    pub fn column(values: &[f64]) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    /// `1 x n` row from a slice.
    pub fn row(values: &[f64]) -> Self {
        Tensor {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Value of a `1 x 1` tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.shape(), (1, 1), "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(
            self.shape(),
            other.shape(),
            "elementwise op on mismatched shapes"
        );
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
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a / b)
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&self, scale: f64, shift: f64) -> Tensor {
        self.map(|v| scale * v + shift)
    }

    /// `op(a) * op(b)` where `op` optionally transposes.
    pub fn matmul(&self, other: &Tensor, trans_a: bool, trans_b: bool) -> Tensor {
        let (m, k) = if trans_a {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        };
        let (k2, n) = if trans_b {
            (other.cols, other.rows)
        } else {
            (other.rows, other.cols)
        };
        assert_eq!(k, k2, "matmul inner dimensions differ");
        if m == 0 || n == 0 || k == 0 {
            return Tensor::zeros(m, n);
        }
        let (rsa, csa) = if trans_a {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        };
        let (rsb, csb) = if trans_b {
            (1, other.cols as isize)
        } else {
            (other.cols as isize, 1)
        };
        // dgemm with beta = 0 never reads C, so the output buffer is left
        // uninitialized; zero-filling it was a tenth of a training epoch.
        let mut data: Vec<f64> = Vec::with_capacity(m * n);
        // SAFETY: strides and extents describe exactly the owned buffers
        // above, and dgemm writes all m * n entries of `data` before
        // `set_len` exposes them.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                rsa,
                csa,
                other.data.as_ptr(),
                rsb,
                csb,
                0.0,
                data.as_mut_ptr(),
                n as isize,
                1,
            );
            data.set_len(m * n);
        }
        Tensor { rows: m, cols: n, data }
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Adds a `1 x cols` row to every row.
    pub fn add_row(&self, row: &Tensor) -> Tensor {
        assert_eq!(row.shape(), (1, self.cols), "bias row has the wrong width");
        let mut out = self.clone();
        for chunk in out.data.chunks_exact_mut(self.cols.max(1)) {
            for (v, b) in chunk.iter_mut().zip(&row.data) {
                *v += b;
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Column sums as a `1 x cols` row.
    pub fn sum_rows(&self) -> Tensor {
        let mut out = Tensor::zeros(1, self.cols);
        for chunk in self.data.chunks_exact(self.cols.max(1)) {
            for (acc, v) in out.data.iter_mut().zip(chunk) {
                *acc += v;
            }
        }
        out
    }

    /// Row sums as a `rows x 1` column.
    pub fn sum_cols(&self) -> Tensor {
        let data = if self.cols == 0 {
            vec![0.0; self.rows]
        } else {
            self.data.chunks_exact(self.cols).map(|c| c.iter().sum()).collect()
        };
        Tensor {
            rows: self.rows,
            cols: 1,
            data,
        }
    }

    /// Repeats a `1 x cols` row `rows` times.
    pub fn broadcast_rows(&self, rows: usize) -> Tensor {
        assert_eq!(self.rows, 1, "broadcast_rows expects a single row");
        let mut data = Vec::with_capacity(rows * self.cols);
        for _ in 0..rows {
            data.extend_from_slice(&self.data);
        }
        Tensor {
            rows,
            cols: self.cols,
            data,
        }
    }

    /// Repeats a `rows x 1` column `cols` times.
    pub fn broadcast_cols(&self, cols: usize) -> Tensor {
        assert_eq!(self.cols, 1, "broadcast_cols expects a single column");
        let mut data = Vec::with_capacity(self.rows * cols);
        for &v in &self.data {
            data.extend(std::iter::repeat_n(v, cols));
        }
        Tensor {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn concat_cols(parts: &[&Tensor]) -> Tensor {
        let rows = parts.first().map_or(0, |p| p.rows);
        assert!(
            parts.iter().all(|p| p.rows == rows),
            "concat_cols on tensors with different row counts"
        );
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(&p.data[r * p.cols..(r + 1) * p.cols]);
            }
        }
        Tensor { rows, cols, data }
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Tensor {
        assert!(start + len <= self.cols, "column slice out of range");
        let mut data = Vec::with_capacity(self.rows * len);
        for r in 0..self.rows {
            let base = r * self.cols + start;
            data.extend_from_slice(&self.data[base..base + len]);
        }
        Tensor {
            rows: self.rows,
            cols: len,
            data,
        }
    }

    /// Places this tensor's columns at `start` inside a zero tensor of width `total`.
    pub fn pad_cols(&self, start: usize, total: usize) -> Tensor {
        assert!(start + self.cols <= total, "column pad out of range");
        let mut out = Tensor::zeros(self.rows, total);
        for r in 0..self.rows {
            let dst = r * total + start;
            out.data[dst..dst + self.cols]
                .copy_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        out
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Taylor coefficients of `tanh` for `x^1, x^3, ..., x^23`. On `|x| < 0.25`
/// each term is about 40 times smaller than the previous, so the truncation
/// error stays below 1e-17 relative.
const TANH_SERIES: [f64; 12] = [
    1.0,
    -1.0 / 3.0,
    2.0 / 15.0,
    -17.0 / 315.0,
    62.0 / 2835.0,
    -1382.0 / 155925.0,
    21844.0 / 6081075.0,
    -929569.0 / 638512875.0,
    6404582.0 / 10854718875.0,
    -443861162.0 / 1856156927625.0,
    18888466084.0 / 194896477400625.0,
    -113927491862.0 / 2900518163668125.0,
];

/// `tanh` through a single `exp`, about twice as fast as the libm routine
/// and within a few ulp of it. Small arguments, where `1 - 2/(e+1)` would
/// cancel, use the odd Taylor series instead.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.25 {
        let x2 = x * x;
        let poly = TANH_SERIES.iter().rev().fold(0.0, |acc, &c| acc * x2 + c);
        return x * poly;
    }
    (1.0 - 2.0 / ((2.0 * a).exp() + 1.0)).copysign(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_transpose_flags_agree_with_explicit_transpose() {
        let a = t(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = t(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let ab = a.matmul(&b, false, false);
        assert_eq!(ab, t(2, 2, &[58.0, 64.0, 139.0, 154.0]));
        assert_eq!(a.transpose().matmul(&b, true, false), ab);
        assert_eq!(a.matmul(&b.transpose(), false, true), ab);
        assert_eq!(a.transpose().matmul(&b.transpose(), true, true), ab);
    }

    #[test]
    fn reductions_and_broadcasts() {
        let a = t(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.sum_rows(), t(1, 3, &[5.0, 7.0, 9.0]));
        assert_eq!(a.sum_cols(), t(2, 1, &[6.0, 15.0]));
        assert_eq!(t(1, 2, &[1.0, 2.0]).broadcast_rows(2), t(2, 2, &[1.0, 2.0, 1.0, 2.0]));
        assert_eq!(t(2, 1, &[1.0, 2.0]).broadcast_cols(2), t(2, 2, &[1.0, 1.0, 2.0, 2.0]));
        assert_eq!(a.add_row(&t(1, 3, &[1.0, 1.0, 1.0])).sum(), 27.0);
    }

    #[test]
    fn slicing_round_trips_through_concat_and_pad() {
        let a = t(2, 1, &[1.0, 2.0]);
        let b = t(2, 2, &[3.0, 4.0, 5.0, 6.0]);
        let c = Tensor::concat_cols(&[&a, &b]);
        assert_eq!(c, t(2, 3, &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]));
        assert_eq!(c.slice_cols(1, 2), b);
        assert_eq!(a.pad_cols(1, 3), t(2, 3, &[0.0, 1.0, 0.0, 0.0, 2.0, 0.0]));
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Tensor::from_vec(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn tanh_tracks_libm() {
        for i in -4000..=4000 {
            let x = i as f64 * 0.005;
            let (fast, slow) = (tanh(x), x.tanh());
            assert!((fast - slow).abs() <= 2e-15 * slow.abs(), "{x}");
        }
        for i in -25_000..=25_000 {
            let x = i as f64 * 1e-5 + 1e-7;
            let (fast, slow) = (tanh(x), x.tanh());
            assert!((fast - slow).abs() <= 4e-16 * slow.abs(), "{x}");
        }
        assert_eq!(tanh(1e-300), 1e-300);
        assert_eq!(tanh(800.0), 1.0);
        assert_eq!(tanh(-800.0), -1.0);
        assert_eq!(tanh(0.0), 0.0);
    }
}
