use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense row-major f64 matrix. The only tensor type the training stack needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from row-major data, validating the shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::domain(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("matrix contains non-finite values"));
        }
        Ok(Matrix { rows, cols, data })
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

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// 1x1 matrix holding one value. No finiteness check: op outputs may be
    /// transiently non-finite and the training loop diagnoses that itself.
    pub(crate) fn scalar_matrix(v: f64) -> Matrix {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// scalar value of a 1x1 matrix
    pub fn scalar(&self) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (1, 1));
        self.data[0]
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

fn check_mul(a_cols: usize, b_rows: usize, what: &str) -> Result<()> {
    if a_cols != b_rows {
        return Err(Error::domain(format!(
            "{what}: inner dimensions {a_cols} and {b_rows} do not match"
        )));
    }
    Ok(())
}

// Row-parallel above this many output cells. Each output cell is still a
// sequential dot product, so results are identical at any thread count.
const PAR_CELLS: usize = 16 * 1024;

fn fill_rows<F: Fn(usize, &mut [f64]) + Sync>(rows: usize, cols: usize, f: F) -> Matrix {
    let mut out = Matrix::zeros(rows, cols);
    if rows * cols >= PAR_CELLS {
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(r, chunk)| f(r, chunk));
    } else {
        for (r, chunk) in out.data.chunks_mut(cols).enumerate() {
            f(r, chunk);
        }
    }
    out
}

/// C = A * B
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_mul(a.cols, b.rows, "matmul")?;
    let (n, k, m) = (a.rows, a.cols, b.cols);
    Ok(fill_rows(n, m, |r, row_out| {
        let a_row = &a.data[r * k..(r + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data[p * m..(p + 1) * m];
            for (c, &bv) in b_row.iter().enumerate() {
                row_out[c] += av * bv;
            }
        }
    }))
}

/// C = A * B^T
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_mul(a.cols, b.cols, "matmul_nt")?;
    let (n, k, m) = (a.rows, a.cols, b.rows);
    Ok(fill_rows(n, m, |r, row_out| {
        let a_row = &a.data[r * k..(r + 1) * k];
        for (c, out) in row_out.iter_mut().enumerate() {
            let b_row = &b.data[c * k..(c + 1) * k];
            *out = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    }))
}

/// C = A^T * B
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_mul(a.rows, b.rows, "matmul_tn")?;
    let (n, k, m) = (a.cols, a.rows, b.cols);
    Ok(fill_rows(n, m, |r, row_out| {
        for p in 0..k {
            let av = a.data[p * n + r];
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data[p * m..(p + 1) * m];
            for (c, &bv) in b_row.iter().enumerate() {
                row_out[c] += av * bv;
            }
        }
    }))
}

/// Elementwise max(x, slope*x).
pub fn leaky_relu(x: &Matrix, slope: f64) -> Matrix {
    let mut out = x.clone();
    for v in out.data.iter_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    out
}

/// Max-subtracted row softmax; every row sums to 1.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows {
        let row = &mut out.data[r * out.cols..(r + 1) * out.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Cosine similarity of the flattened entries of two same-shape matrices.
pub fn cosine_flat(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::domain(format!(
            "cosine_flat: shape {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let dot: f64 = a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum();
    let na = a.frobenius_norm();
    let nb = b.frobenius_norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("cosine_flat: zero-norm operand"));
    }
    Ok(dot / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut rng = crate::numerics::seeded_rng(1);
        let x = random_matrix(4, 3, &mut rng);
        let i = Matrix::identity(4);
        assert_eq!(matmul(&i, &x).unwrap(), x);
    }

    #[test]
    fn matmul_hand_example() {
        // [1 2 3; 4 5 6] * [7 8; 9 10; 11 12] = [58 64; 139 154]
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let mut rng = crate::numerics::seeded_rng(2);
        let a = random_matrix(5, 4, &mut rng);
        let b = random_matrix(6, 4, &mut rng);
        let direct = matmul(&a, &b.transpose()).unwrap();
        let nt = matmul_nt(&a, &b).unwrap();
        assert_eq!(direct, nt);

        let c = random_matrix(4, 5, &mut rng);
        let d = random_matrix(4, 6, &mut rng);
        assert_eq!(matmul(&c.transpose(), &d).unwrap(), matmul_tn(&c, &d).unwrap());
    }

    #[test]
    fn matmul_associative() {
        let mut rng = crate::numerics::seeded_rng(3);
        for _ in 0..10 {
            let a = random_matrix(4, 5, &mut rng);
            let b = random_matrix(5, 3, &mut rng);
            let c = random_matrix(3, 6, &mut rng);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                assert_relative_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn leaky_relu_values() {
        let x = Matrix::from_vec(1, 3, vec![2.0, -1.0, 0.5]).unwrap();
        let y = leaky_relu(&x, 0.01);
        assert_eq!(y.data(), &[2.0, -0.01, 0.5]);
        // all-positive input unchanged
        let p = Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(leaky_relu(&p, 0.01), p);
    }

    #[test]
    fn softmax_rows_closed_forms() {
        let uniform = Matrix::from_vec(1, 4, vec![0.7; 4]).unwrap();
        let y = softmax_rows(&uniform);
        for v in y.data() {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-12);
        }
        let x = Matrix::from_vec(1, 2, vec![0.0, 2f64.ln()]).unwrap();
        let y = softmax_rows(&x);
        assert_relative_eq!(y.get(0, 0), 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(y.get(0, 1), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_flat_extremes() {
        let mut rng = crate::numerics::seeded_rng(4);
        let x = random_matrix(3, 3, &mut rng);
        assert_relative_eq!(cosine_flat(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(cosine_flat(&x, &x.scale(-1.0)).unwrap(), -1.0, epsilon = 1e-12);
        let zero = Matrix::zeros(3, 3);
        assert!(cosine_flat(&x, &zero).is_err());
    }
}
