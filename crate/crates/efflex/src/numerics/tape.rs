//! Reverse-mode gradients over a recorded forward tape.
//!
//! Each operation stores its inputs by index and enough context to run its
//! backward rule; `backward` walks the tape in reverse and accumulates
//! gradients into every node. Inputs always precede their consumers, so a
//! single reverse sweep suffices.

use crate::error::{Error, Result};
use crate::numerics::matrix::{
    cosine_flat, leaky_relu, matmul, matmul_nt, matmul_tn, softmax_rows, Matrix,
};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    /// C = A * B^T
    MatMulNT { a: Var, b: Var },
    AddBiasRow { x: Var, bias: Var },
    LeakyRelu { x: Var, slope: f64 },
    SoftmaxRows { x: Var },
    /// y = sum_m w[m] * mats[m]; the matrices are constants.
    WeightedSum { weights: Var, mats: Vec<Matrix> },
    /// Min-max over masked entries into [0,1]; entries outside the mask stay 0.
    MinMaxNorm {
        x: Var,
        mask: Vec<bool>,
        denom: f64,
        argmin: usize,
        argmax: usize,
        degenerate: bool,
    },
    /// y_ij = (x_ij + I_ij) / (1 + row_sum_i(x))
    SelfLoopRowNorm { x: Var },
    /// Scalar cosine similarity between a constant and x, flattened.
    CosineSim { target: Matrix, x: Var },
    /// Scalar mean absolute difference against a constant.
    L1 { target: Matrix, x: Var },
    /// Scalar mean squared difference against a constant.
    Mse { target: Matrix, x: Var },
    /// Elementwise mul*x + add; only the slope matters for the backward rule.
    Affine { x: Var, mul: f64 },
    /// Scalar sum of c ⊙ x for a constant c.
    DotConst { c: Matrix, x: Var },
}

struct Node {
    value: Matrix,
    grad: Matrix,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.nodes.push(Node { value, grad, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].grad
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.scalar()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul { a, b }))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul_nt(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMulNT { a, b }))
    }

    pub fn add_bias_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xm, bm) = (self.value(x), self.value(bias));
        if bm.rows() != 1 || bm.cols() != xm.cols() {
            return Err(Error::domain(format!(
                "add_bias_row: bias {:?} does not broadcast over {:?}",
                bm.shape(),
                xm.shape()
            )));
        }
        let mut value = xm.clone();
        for r in 0..value.rows() {
            for c in 0..value.cols() {
                let v = value.get(r, c) + bm.get(0, c);
                value.set(r, c, v);
            }
        }
        Ok(self.push(value, Op::AddBiasRow { x, bias }))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let value = leaky_relu(self.value(x), slope);
        self.push(value, Op::LeakyRelu { x, slope })
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = softmax_rows(self.value(x));
        self.push(value, Op::SoftmaxRows { x })
    }

    /// Convex-style combination of constant matrices with learnable weights
    /// (a 1 x m row vector).
    pub fn weighted_sum(&mut self, weights: Var, mats: Vec<Matrix>) -> Result<Var> {
        let w = self.value(weights);
        if w.rows() != 1 || w.cols() != mats.len() {
            return Err(Error::domain(format!(
                "weighted_sum: weights {:?} vs {} matrices",
                w.shape(),
                mats.len()
            )));
        }
        if mats.is_empty() {
            return Err(Error::domain("weighted_sum: no matrices"));
        }
        let shape = mats[0].shape();
        if mats.iter().any(|m| m.shape() != shape) {
            return Err(Error::domain("weighted_sum: matrices differ in shape"));
        }
        let mut value = Matrix::zeros(shape.0, shape.1);
        for (m, mat) in mats.iter().enumerate() {
            let wm = w.get(0, m);
            for (out, v) in value.data_mut().iter_mut().zip(mat.data()) {
                *out += wm * v;
            }
        }
        Ok(self.push(value, Op::WeightedSum { weights, mats }))
    }

    /// Min-max normalization over the masked entries; unmasked entries are
    /// forced to 0. A constant masked range maps every masked entry to 1.
    pub fn minmax_norm(&mut self, x: Var, mask: Vec<bool>) -> Result<Var> {
        let xm = self.value(x);
        if mask.len() != xm.data().len() {
            return Err(Error::domain("minmax_norm: mask length mismatch"));
        }
        let mut argmin = usize::MAX;
        let mut argmax = usize::MAX;
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for (idx, (&m, &v)) in mask.iter().zip(xm.data()).enumerate() {
            if !m {
                continue;
            }
            if v < mn {
                mn = v;
                argmin = idx;
            }
            if v > mx {
                mx = v;
                argmax = idx;
            }
        }
        if argmin == usize::MAX {
            return Err(Error::domain("minmax_norm: empty mask"));
        }
        let denom = mx - mn;
        let degenerate = denom <= 0.0;
        let mut value = Matrix::zeros(xm.rows(), xm.cols());
        for (idx, &m) in mask.iter().enumerate() {
            if m {
                value.data_mut()[idx] = if degenerate {
                    1.0
                } else {
                    (xm.data()[idx] - mn) / denom
                };
            }
        }
        Ok(self.push(
            value,
            Op::MinMaxNorm {
                x,
                mask,
                denom,
                argmin,
                argmax,
                degenerate,
            },
        ))
    }

    pub fn self_loop_row_norm(&mut self, x: Var) -> Result<Var> {
        let xm = self.value(x);
        if xm.rows() != xm.cols() {
            return Err(Error::domain("self_loop_row_norm: matrix must be square"));
        }
        let n = xm.rows();
        let mut value = Matrix::zeros(n, n);
        for i in 0..n {
            let r = 1.0 + xm.row(i).iter().sum::<f64>();
            for j in 0..n {
                let v = (xm.get(i, j) + if i == j { 1.0 } else { 0.0 }) / r;
                value.set(i, j, v);
            }
        }
        Ok(self.push(value, Op::SelfLoopRowNorm { x }))
    }

    pub fn cosine_sim(&mut self, target: Matrix, x: Var) -> Result<Var> {
        let c = cosine_flat(&target, self.value(x))?;
        let value = Matrix::scalar_matrix(c);
        Ok(self.push(value, Op::CosineSim { target, x }))
    }

    pub fn l1_against(&mut self, target: Matrix, x: Var) -> Result<Var> {
        let xm = self.value(x);
        if target.shape() != xm.shape() {
            return Err(Error::domain("l1_against: shape mismatch"));
        }
        let count = target.data().len() as f64;
        let l = target
            .data()
            .iter()
            .zip(xm.data())
            .map(|(t, v)| (t - v).abs())
            .sum::<f64>()
            / count;
        let value = Matrix::scalar_matrix(l);
        Ok(self.push(value, Op::L1 { target, x }))
    }

    pub fn mse_against(&mut self, target: Matrix, x: Var) -> Result<Var> {
        let xm = self.value(x);
        if target.shape() != xm.shape() {
            return Err(Error::domain("mse_against: shape mismatch"));
        }
        let count = target.data().len() as f64;
        let l = target
            .data()
            .iter()
            .zip(xm.data())
            .map(|(t, v)| (t - v) * (t - v))
            .sum::<f64>()
            / count;
        let value = Matrix::scalar_matrix(l);
        Ok(self.push(value, Op::Mse { target, x }))
    }

    pub fn affine(&mut self, x: Var, mul: f64, add: f64) -> Var {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v = mul * *v + add;
        }
        self.push(value, Op::Affine { x, mul })
    }

    pub fn dot_const(&mut self, c: Matrix, x: Var) -> Result<Var> {
        let xm = self.value(x);
        if c.shape() != xm.shape() {
            return Err(Error::domain("dot_const: shape mismatch"));
        }
        let d: f64 = c.data().iter().zip(xm.data()).map(|(a, b)| a * b).sum();
        let value = Matrix::scalar_matrix(d);
        Ok(self.push(value, Op::DotConst { c, x }))
    }

    /// Seeds the (1x1) output with gradient 1 and sweeps the tape in reverse.
    pub fn backward(&mut self, out: Var) -> Result<()> {
        if self.nodes[out.0].value.shape() != (1, 1) {
            return Err(Error::domain("backward: output must be a scalar"));
        }
        for node in self.nodes.iter_mut() {
            node.grad = Matrix::zeros(node.value.rows(), node.value.cols());
        }
        self.nodes[out.0].grad.set(0, 0, 1.0);

        for idx in (0..self.nodes.len()).rev() {
            let (before, rest) = self.nodes.split_at_mut(idx);
            let node = &rest[0];
            let dy = &node.grad;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    let da = matmul_nt(dy, &before[b.0].value)?;
                    let db = matmul_tn(&before[a.0].value, dy)?;
                    before[a.0].grad.add_assign(&da);
                    before[b.0].grad.add_assign(&db);
                }
                Op::MatMulNT { a, b } => {
                    let da = matmul(dy, &before[b.0].value)?;
                    let db = matmul_tn(dy, &before[a.0].value)?;
                    before[a.0].grad.add_assign(&da);
                    before[b.0].grad.add_assign(&db);
                }
                Op::AddBiasRow { x, bias } => {
                    before[x.0].grad.add_assign(dy);
                    let bg = &mut before[bias.0].grad;
                    for r in 0..dy.rows() {
                        for c in 0..dy.cols() {
                            let v = bg.get(0, c) + dy.get(r, c);
                            bg.set(0, c, v);
                        }
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = &before[x.0].value;
                    let mut dx = dy.clone();
                    for (g, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        if *v <= 0.0 {
                            *g *= slope;
                        }
                    }
                    before[x.0].grad.add_assign(&dx);
                }
                Op::SoftmaxRows { x } => {
                    let y = &node.value;
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = (0..y.cols()).map(|c| dy.get(r, c) * y.get(r, c)).sum();
                        for c in 0..y.cols() {
                            dx.set(r, c, y.get(r, c) * (dy.get(r, c) - dot));
                        }
                    }
                    before[x.0].grad.add_assign(&dx);
                }
                Op::WeightedSum { weights, mats } => {
                    let wg = &mut before[weights.0].grad;
                    for (m, mat) in mats.iter().enumerate() {
                        let d: f64 = dy.data().iter().zip(mat.data()).map(|(g, v)| g * v).sum();
                        let v = wg.get(0, m) + d;
                        wg.set(0, m, v);
                    }
                }
                Op::MinMaxNorm {
                    x,
                    mask,
                    denom,
                    argmin,
                    argmax,
                    degenerate,
                } => {
                    if *degenerate {
                        continue;
                    }
                    let xv = &before[x.0].value;
                    let mn = xv.data()[*argmin];
                    let mx = xv.data()[*argmax];
                    let d2 = denom * denom;
                    let mut dmn = 0.0;
                    let mut dmx = 0.0;
                    let dx = before[x.0].grad.data_mut();
                    for (idx2, &m) in mask.iter().enumerate() {
                        if !m {
                            continue;
                        }
                        let g = dy.data()[idx2];
                        let v = xv.data()[idx2];
                        dx[idx2] += g / denom;
                        dmn += g * (v - mx) / d2;
                        dmx += g * (mn - v) / d2;
                    }
                    dx[*argmin] += dmn;
                    dx[*argmax] += dmx;
                }
                Op::SelfLoopRowNorm { x } => {
                    let xv = &before[x.0].value;
                    let y = &node.value;
                    let n = y.rows();
                    let mut dx = Matrix::zeros(n, n);
                    for i in 0..n {
                        let r = 1.0 + xv.row(i).iter().sum::<f64>();
                        let dot: f64 = (0..n).map(|j| dy.get(i, j) * y.get(i, j)).sum();
                        for k in 0..n {
                            dx.set(i, k, dy.get(i, k) / r - dot / r);
                        }
                    }
                    before[x.0].grad.add_assign(&dx);
                }
                Op::CosineSim { target, x } => {
                    let dout = dy.scalar();
                    let xv = &before[x.0].value;
                    let c = node.value.scalar();
                    let nx = xv.frobenius_norm();
                    let nt = target.frobenius_norm();
                    let dx = before[x.0].grad.data_mut();
                    for (i, g) in dx.iter_mut().enumerate() {
                        let t = target.data()[i];
                        let v = xv.data()[i];
                        *g += dout * (t / (nt * nx) - c * v / (nx * nx));
                    }
                }
                Op::L1 { target, x } => {
                    let dout = dy.scalar();
                    let count = target.data().len() as f64;
                    let xv = &before[x.0].value;
                    let dx = before[x.0].grad.data_mut();
                    for (i, g) in dx.iter_mut().enumerate() {
                        let diff = xv.data()[i] - target.data()[i];
                        let sign = if diff > 0.0 {
                            1.0
                        } else if diff < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        *g += dout * sign / count;
                    }
                }
                Op::Mse { target, x } => {
                    let dout = dy.scalar();
                    let count = target.data().len() as f64;
                    let xv = &before[x.0].value;
                    let dx = before[x.0].grad.data_mut();
                    for (i, g) in dx.iter_mut().enumerate() {
                        *g += dout * 2.0 * (xv.data()[i] - target.data()[i]) / count;
                    }
                }
                Op::Affine { x, mul } => {
                    let dx = dy.scale(*mul);
                    before[x.0].grad.add_assign(&dx);
                }
                Op::DotConst { c, x } => {
                    let dout = dy.scalar();
                    let dx = before[x.0].grad.data_mut();
                    for (i, g) in dx.iter_mut().enumerate() {
                        *g += dout * c.data()[i];
                    }
                }
            }
        }
        Ok(())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    /// Central finite differences of a scalar function at x.
    fn fd_grad(f: &mut dyn FnMut(&Matrix) -> f64, x: &Matrix, h: f64) -> Matrix {
        let mut g = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.data().len() {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            g.data_mut()[i] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        g
    }

    fn assert_grad_close(analytic: &Matrix, numeric: &Matrix, rel_tol: f64) {
        assert_eq!(analytic.shape(), numeric.shape());
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            let scale = a.abs().max(n.abs());
            if scale < 1e-7 {
                assert!((a - n).abs() < 1e-7, "grad {a} vs fd {n}");
            } else {
                assert!(
                    (a - n).abs() / scale < rel_tol,
                    "grad {a} vs fd {n} (rel {})",
                    (a - n).abs() / scale
                );
            }
        }
    }

    #[test]
    fn matmul_grad_matches_row_sums_and_fd() {
        let mut rng = seeded_rng(10);
        let a = random_matrix(3, 4, &mut rng);
        let b = random_matrix(4, 2, &mut rng);

        // d sum(A*B) / dA_ik = sum_j B_kj
        let mut tape = Tape::new();
        let va = tape.leaf(a.clone());
        let vb = tape.leaf(b.clone());
        let prod = tape.matmul(va, vb).unwrap();
        let ones = Matrix::from_vec(3, 2, vec![1.0; 6]).unwrap();
        let out = tape.dot_const(ones, prod).unwrap();
        tape.backward(out).unwrap();

        for i in 0..3 {
            for k in 0..4 {
                let row_sum: f64 = (0..2).map(|j| b.get(k, j)).sum();
                assert!((tape.grad(va).get(i, k) - row_sum).abs() < 1e-12);
            }
        }

        let fd = fd_grad(
            &mut |am: &Matrix| {
                let p = matmul(am, &b).unwrap();
                p.data().iter().sum()
            },
            &a,
            1e-5,
        );
        assert_grad_close(tape.grad(va), &fd, 1e-4);
    }

    #[test]
    fn leaky_relu_grad_fd() {
        let mut rng = seeded_rng(11);
        let x = random_matrix(4, 4, &mut rng);
        let probe = random_matrix(4, 4, &mut rng);

        let mut tape = Tape::new();
        let vx = tape.leaf(x.clone());
        let y = tape.leaky_relu(vx, 0.01);
        let out = tape.dot_const(probe.clone(), y).unwrap();
        tape.backward(out).unwrap();

        let fd = fd_grad(
            &mut |xm: &Matrix| {
                let y = crate::numerics::matrix::leaky_relu(xm, 0.01);
                y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            },
            &x,
            1e-6,
        );
        assert_grad_close(tape.grad(vx), &fd, 1e-4);
    }

    #[test]
    fn softmax_rows_grad_fd() {
        let mut rng = seeded_rng(12);
        let x = random_matrix(3, 5, &mut rng);
        let probe = random_matrix(3, 5, &mut rng);

        let mut tape = Tape::new();
        let vx = tape.leaf(x.clone());
        let y = tape.softmax_rows(vx);
        let out = tape.dot_const(probe.clone(), y).unwrap();
        tape.backward(out).unwrap();

        let fd = fd_grad(
            &mut |xm: &Matrix| {
                let y = softmax_rows(xm);
                y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            },
            &x,
            1e-5,
        );
        assert_grad_close(tape.grad(vx), &fd, 1e-4);
    }

    #[test]
    fn cosine_grad_fd() {
        let mut rng = seeded_rng(13);
        let target = random_matrix(4, 4, &mut rng);
        let x = random_matrix(4, 4, &mut rng);

        let mut tape = Tape::new();
        let vx = tape.leaf(x.clone());
        let out = tape.cosine_sim(target.clone(), vx).unwrap();
        tape.backward(out).unwrap();

        let fd = fd_grad(
            &mut |xm: &Matrix| cosine_flat(&target, xm).unwrap(),
            &x,
            1e-5,
        );
        assert_grad_close(tape.grad(vx), &fd, 1e-5);
    }

    #[test]
    fn loss_grads_fd() {
        let mut rng = seeded_rng(14);
        let target = random_matrix(3, 3, &mut rng);
        let x = random_matrix(3, 3, &mut rng);

        for kind in 0..2 {
            let mut tape = Tape::new();
            let vx = tape.leaf(x.clone());
            let out = match kind {
                0 => tape.l1_against(target.clone(), vx).unwrap(),
                _ => tape.mse_against(target.clone(), vx).unwrap(),
            };
            tape.backward(out).unwrap();
            let fd = fd_grad(
                &mut |xm: &Matrix| {
                    let count = target.data().len() as f64;
                    target
                        .data()
                        .iter()
                        .zip(xm.data())
                        .map(|(t, v)| match kind {
                            0 => (t - v).abs(),
                            _ => (t - v) * (t - v),
                        })
                        .sum::<f64>()
                        / count
                },
                &x,
                1e-6,
            );
            assert_grad_close(tape.grad(vx), &fd, 1e-4);
        }
    }

    #[test]
    fn minmax_and_row_norm_grads_fd() {
        let mut rng = seeded_rng(15);
        let mut x = random_matrix(4, 4, &mut rng);
        // keep masked entries positive so min/max stay distinct under FD wiggles
        for v in x.data_mut() {
            *v = v.abs() + 0.1;
        }
        let mask: Vec<bool> = (0..16).map(|i| i % 3 != 0).collect();
        let probe = random_matrix(4, 4, &mut rng);

        let mut tape = Tape::new();
        let vx = tape.leaf(x.clone());
        let normed = tape.minmax_norm(vx, mask.clone()).unwrap();
        let features = tape.self_loop_row_norm(normed).unwrap();
        let out = tape.dot_const(probe.clone(), features).unwrap();
        tape.backward(out).unwrap();

        let fd = fd_grad(
            &mut |xm: &Matrix| {
                let mut t = Tape::new();
                let v = t.leaf(xm.clone());
                let nm = t.minmax_norm(v, mask.clone()).unwrap();
                let f = t.self_loop_row_norm(nm).unwrap();
                let o = t.dot_const(probe.clone(), f).unwrap();
                t.scalar(o)
            },
            &x,
            1e-6,
        );
        assert_grad_close(tape.grad(vx), &fd, 1e-4);
    }

    #[test]
    fn weighted_sum_grad_fd() {
        let mut rng = seeded_rng(16);
        let mats: Vec<Matrix> = (0..3).map(|_| random_matrix(4, 4, &mut rng)).collect();
        let w = random_matrix(1, 3, &mut rng);
        let probe = random_matrix(4, 4, &mut rng);

        let mut tape = Tape::new();
        let vw = tape.leaf(w.clone());
        let s = tape.weighted_sum(vw, mats.clone()).unwrap();
        let out = tape.dot_const(probe.clone(), s).unwrap();
        tape.backward(out).unwrap();

        let fd = fd_grad(
            &mut |wm: &Matrix| {
                let mut acc = Matrix::zeros(4, 4);
                for (m, mat) in mats.iter().enumerate() {
                    for (a, v) in acc.data_mut().iter_mut().zip(mat.data()) {
                        *a += wm.get(0, m) * v;
                    }
                }
                acc.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            },
            &w,
            1e-6,
        );
        assert_grad_close(tape.grad(vw), &fd, 1e-4);
    }

    #[test]
    fn composition_three_ops_deep_fd() {
        let mut rng = seeded_rng(17);
        let a = random_matrix(3, 4, &mut rng);
        let b = random_matrix(4, 3, &mut rng);
        let bias = random_matrix(1, 3, &mut rng);
        let target = random_matrix(3, 3, &mut rng);

        let run = |am: &Matrix, bm: &Matrix, biasm: &Matrix| -> (f64, Matrix, Matrix, Matrix) {
            let mut tape = Tape::new();
            let va = tape.leaf(am.clone());
            let vb = tape.leaf(bm.clone());
            let vbias = tape.leaf(biasm.clone());
            let p = tape.matmul(va, vb).unwrap();
            let pb = tape.add_bias_row(p, vbias).unwrap();
            let act = tape.leaky_relu(pb, 0.01);
            let out = tape.cosine_sim(target.clone(), act).unwrap();
            tape.backward(out).unwrap();
            (
                tape.scalar(out),
                tape.grad(va).clone(),
                tape.grad(vb).clone(),
                tape.grad(vbias).clone(),
            )
        };

        let (_, ga, gb, gbias) = run(&a, &b, &bias);
        let fd_a = fd_grad(&mut |am: &Matrix| run(am, &b, &bias).0, &a, 1e-5);
        let fd_b = fd_grad(&mut |bm: &Matrix| run(&a, bm, &bias).0, &b, 1e-5);
        let fd_bias = fd_grad(&mut |bm: &Matrix| run(&a, &b, bm).0, &bias, 1e-5);
        assert_grad_close(&ga, &fd_a, 1e-4);
        assert_grad_close(&gb, &fd_b, 1e-4);
        assert_grad_close(&gbias, &fd_bias, 1e-4);
    }
}
