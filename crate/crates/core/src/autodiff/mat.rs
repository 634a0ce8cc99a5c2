use std::fmt;

use rand::Rng;

use super::TensorError;

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::Shape {
                op: "from_vec",
                detail: format!("{} values for a {rows}x{cols} matrix", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; intended for
    /// literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Glorot-style uniform initialization in `±sqrt(6 / (rows + cols))`.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single entry of a 1x1 matrix.
    pub fn item(&self) -> Option<f64> {
        (self.rows == 1 && self.cols == 1).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, other: &Mat, alpha: f64) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copies the selected rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(idx.len(), self.cols);
        for (i, &r) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn hcat(&self, other: &Mat) -> Result<Mat, TensorError> {
        if self.rows != other.rows {
            return Err(TensorError::Shape {
                op: "concat_cols",
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Mat {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn vcat(&self, other: &Mat) -> Result<Mat, TensorError> {
        if self.cols != other.cols {
            return Err(TensorError::Shape {
                op: "concat_rows",
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Mat {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat, TensorError> {
        if self.cols != other.rows {
            return Err(TensorError::Shape {
                op: "matmul",
                detail: format!("{:?} x {:?}", self.shape(), other.shape()),
            });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        gemm(self, false, other, false, &mut out, 0.0);
        Ok(out)
    }
}

/// `out = op(a) * op(b) + beta * out`, where `op` optionally transposes.
/// Shapes are the caller's responsibility.
pub(crate) fn gemm(a: &Mat, trans_a: bool, b: &Mat, trans_b: bool, out: &mut Mat, beta: f64) {
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let n = if trans_b { b.rows } else { b.cols };
    debug_assert_eq!(out.shape(), (m, n));
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.data.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if trans_a {
        (1, a.cols as isize)
    } else {
        (a.cols as isize, 1)
    };
    let (rsb, csb) = if trans_b {
        (1, b.cols as isize)
    } else {
        (b.cols as isize, 1)
    };
    // SAFETY: strides and extents describe the owned buffers of `a`, `b` and
    // `out`, whose shapes were checked against (m, k, n) above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(r)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Mat, b: &Mat) -> Mat {
        let mut out = Mat::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn gemm_matches_naive_in_all_transpose_modes() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = Mat::glorot(5, 7, &mut rng);
        let b = Mat::glorot(7, 4, &mut rng);
        let expect = naive(&a, &b);

        let got = a.matmul(&b).unwrap();
        let at = a.transpose();
        let bt = b.transpose();
        let mut got_tt = Mat::zeros(5, 4);
        gemm(&at, true, &bt, true, &mut got_tt, 0.0);
        let mut got_tn = Mat::zeros(5, 4);
        gemm(&at, true, &b, false, &mut got_tn, 0.0);
        for m in [&got, &got_tt, &got_tn] {
            for (x, y) in m.as_slice().iter().zip(expect.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_rejects_mismatched_inner_dimension() {
        let err = Mat::zeros(2, 3).matmul(&Mat::zeros(2, 3)).unwrap_err();
        assert!(err.to_string().contains("matmul"));
    }

    #[test]
    fn concat_shapes() {
        let a = Mat::from_rows(&[&[1.0], &[2.0]]);
        let b = Mat::from_rows(&[&[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(a.hcat(&b).unwrap().row(1), &[2.0, 5.0, 6.0]);
        assert!(a.vcat(&b).is_err());
    }
}
