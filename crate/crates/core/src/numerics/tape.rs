//! Reverse-mode automatic differentiation over rank-2 `f64` tensors.
//!
//! A [`Tape`] records every primitive in execution order. `backward` walks the
//! record once, in reverse, and accumulates gradients into every node that
//! (transitively) depends on a `requires_grad` leaf.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    MulScalarVar(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Relu(Var),
    Softplus(Var),
    Recip(Var),
    Abs(Var),
    RowSoftmax(Var),
    LogSoftmax(Var),
    LayerNorm(Var, Vec<f64>),
    RowNormalize(Var, Vec<f64>),
    BlockNormalize(Var, usize, Vec<f64>),
    RowNorm(Var),
    MeanRows(Var),
    Sum(Var),
    Mean(Var),
    Gather(Var, Vec<usize>),
    BlockAngle(Var, Var),
    GramDeviation(Var),
    Film(Var, Var, Var),
    Project(Var, [f64; 4], Vec<bool>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed primitives.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

fn ensure_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue(op))
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `c[m,n] += a[m,k] * b[k,n]`
fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aip * bv;
            }
        }
    }
}

/// `c[m,n] += a[m,k] * b[n,k]^T`
fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (x, y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            c[i * n + j] += acc;
        }
    }
}

/// `c[k,n] += a[m,k]^T * b[m,n]`
fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aip * bv;
            }
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Below this magnitude of the third coordinate a direction has no finite projection.
pub const PROJECTION_MIN_DEPTH: f64 = 1e-6;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass with respect to `v`, if any flowed.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    fn push(
        &mut self,
        op_name: &'static str,
        value: Tensor,
        op: Op,
        requires_grad: bool,
    ) -> Result<Var> {
        ensure_finite(op_name, value.data())?;
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn dims(&self, v: Var) -> Result<(usize, usize)> {
        self.nodes[v.0].value.dims()
    }

    /// Records an input tensor.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        value.dims()?;
        self.push("leaf", value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a)?;
        let (k2, n) = self.dims(b)?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{m},{k}] x [{k2},{n}]")));
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let rg = self.rg(&[a, b]);
        self.push("matmul", Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg)
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a)?;
        let (n, k2) = self.dims(b)?;
        if k != k2 {
            return Err(Error::shape(
                "matmul_nt",
                format!("[{m},{k}] x [{n},{k2}]^T"),
            ));
        }
        let mut out = vec![0.0; m * n];
        gemm_nt(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let rg = self.rg(&[a, b]);
        self.push(
            "matmul_nt",
            Tensor::matrix(m, n, out)?,
            Op::MatMulNt(a, b),
            rg,
        )
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let da = self.dims(a)?;
        let db = self.dims(b)?;
        if da != db {
            return Err(Error::shape(op, format!("{da:?} vs {db:?}")));
        }
        Ok(da)
    }

    fn zip_with(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        let (m, n) = self.same_shape(op_name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let rg = self.rg(&[a, b]);
        self.push(op_name, Tensor::matrix(m, n, data)?, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    fn row_broadcast(
        &mut self,
        op_name: &'static str,
        a: Var,
        row: Var,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let (r, n2) = self.dims(row)?;
        if r != 1 || n != n2 {
            return Err(Error::shape(
                op_name,
                format!("[{m},{n}] with row [{r},{n2}]"),
            ));
        }
        let rv = self.value(row).data();
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|chunk| chunk.iter().zip(rv).map(|(&x, &y)| f(x, y)))
            .collect();
        let rg = self.rg(&[a, row]);
        self.push(op_name, Tensor::matrix(m, n, data)?, op, rg)
    }

    /// Adds a `[1, n]` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast("add_row", a, row, Op::AddRow(a, row), |x, y| x + y)
    }

    /// Multiplies every row of `a` elementwise by a `[1, n]` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast("mul_row", a, row, Op::MulRow(a, row), |x, y| x * y)
    }

    /// Multiplies `a` by a `[1, 1]` variable.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let sv = self.value(s).item()?;
        let data = self.value(a).data().iter().map(|x| x * sv).collect();
        let rg = self.rg(&[a, s]);
        self.push(
            "mul_scalar",
            Tensor::matrix(m, n, data)?,
            Op::MulScalarVar(a, s),
            rg,
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let data = self.value(a).data().iter().map(|x| x * c).collect();
        let rg = self.rg(&[a]);
        self.push("scale", Tensor::matrix(m, n, data)?, Op::Scale(a, c), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let src = self.value(a).data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        let rg = self.rg(&[a]);
        self.push(
            "transpose",
            Tensor::matrix(n, m, data)?,
            Op::Transpose(a),
            rg,
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat_cols", "no inputs"));
        };
        let m = self.dims(first)?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims(p)?;
            if r != m {
                return Err(Error::shape(
                    "concat_cols",
                    format!("row counts {m} vs {r}"),
                ));
            }
            widths.push(c);
        }
        let n: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        self.push(
            "concat_cols",
            Tensor::matrix(m, n, data)?,
            Op::ConcatCols(parts.to_vec()),
            rg,
        )
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        if start >= end || end > n {
            return Err(Error::shape(
                "slice_cols",
                format!("{start}..{end} of {n} columns"),
            ));
        }
        let w = end - start;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(m * w);
        for i in 0..m {
            data.extend_from_slice(&src[i * n + start..i * n + end]);
        }
        let rg = self.rg(&[a]);
        self.push(
            "slice_cols",
            Tensor::matrix(m, w, data)?,
            Op::SliceCols(a, start),
            rg,
        )
    }

    fn map(
        &mut self,
        op_name: &'static str,
        a: Var,
        op: Op,
        f: impl Fn(f64) -> f64,
    ) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        let rg = self.rg(&[a]);
        self.push(op_name, Tensor::matrix(m, n, data)?, op, rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.map("relu", a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.map("softplus", a, Op::Softplus(a), softplus)
    }

    pub fn recip(&mut self, a: Var) -> Result<Var> {
        self.map("recip", a, Op::Recip(a), |x| 1.0 / x)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.map("abs", a, Op::Abs(a), f64::abs)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n) {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        let rg = self.rg(&[a]);
        self.push(
            "row_softmax",
            Tensor::matrix(m, n, data)?,
            Op::RowSoftmax(a),
            rg,
        )
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n) {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        let rg = self.rg(&[a]);
        self.push(
            "log_softmax",
            Tensor::matrix(m, n, data)?,
            Op::LogSoftmax(a),
            rg,
        )
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)`, without affine terms.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "layer_norm eps must be > 0, got {eps}"
            )));
        }
        let (m, n) = self.dims(a)?;
        let mut data = self.value(a).data().to_vec();
        let mut inv_std = Vec::with_capacity(m);
        for row in data.chunks_mut(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let rg = self.rg(&[a]);
        self.push(
            "layer_norm",
            Tensor::matrix(m, n, data)?,
            Op::LayerNorm(a, inv_std),
            rg,
        )
    }

    /// Scales each row to unit L2 norm; zero rows stay zero.
    pub fn row_normalize(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let mut data = self.value(a).data().to_vec();
        let mut norms = Vec::with_capacity(m);
        for row in data.chunks_mut(n) {
            let nrm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for v in row.iter_mut() {
                    *v /= nrm;
                }
            }
            norms.push(nrm);
        }
        let rg = self.rg(&[a]);
        self.push(
            "row_normalize",
            Tensor::matrix(m, n, data)?,
            Op::RowNormalize(a, norms),
            rg,
        )
    }

    /// Cosine similarity between every pair of rows.
    pub fn cosine_similarity_matrix(&mut self, a: Var) -> Result<Var> {
        let unit = self.row_normalize(a)?;
        self.matmul_nt(unit, unit)
    }

    /// Normalizes consecutive `block`-wide column groups of every row to unit
    /// length, then flips each so its largest-magnitude entry is positive.
    pub fn block_normalize(&mut self, a: Var, block: usize) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        if block == 0 || n % block != 0 {
            return Err(Error::shape(
                "block_normalize",
                format!("{n} columns in blocks of {block}"),
            ));
        }
        let mut data = self.value(a).data().to_vec();
        // signed inverse norm per block: sign / ||x||, zero for a zero block
        let mut factors = Vec::with_capacity(m * n / block);
        for chunk in data.chunks_mut(block) {
            let nrm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut imax = 0;
            for i in 1..block {
                if chunk[i].abs() > chunk[imax].abs() {
                    imax = i;
                }
            }
            let sign = if chunk[imax] < 0.0 { -1.0 } else { 1.0 };
            let f = if nrm > 0.0 { sign / nrm } else { 0.0 };
            for v in chunk.iter_mut() {
                *v *= f;
            }
            factors.push(f);
        }
        let rg = self.rg(&[a]);
        self.push(
            "block_normalize",
            Tensor::matrix(m, n, data)?,
            Op::BlockNormalize(a, block, factors),
            rg,
        )
    }

    /// L2 norm of every row, as an `[m, 1]` column.
    pub fn row_norm(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let rg = self.rg(&[a]);
        self.push("row_norm", Tensor::matrix(m, 1, data)?, Op::RowNorm(a), rg)
    }

    /// Column means, as a `[1, n]` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        let mut data = vec![0.0; n];
        for row in self.value(a).data().chunks(n) {
            add_into(&mut data, row);
        }
        for v in &mut data {
            *v /= m as f64;
        }
        let rg = self.rg(&[a]);
        self.push(
            "mean_rows",
            Tensor::matrix(1, n, data)?,
            Op::MeanRows(a),
            rg,
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.dims(a)?;
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push("sum", Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.dims(a)?;
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.len().max(1) as f64;
        let rg = self.rg(&[a]);
        self.push("mean", Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Picks flat (row-major) elements of `a` into an `[len, 1]` column.
    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let src = self.value(a).data();
        if let Some(&bad) = indices.iter().find(|&&i| i >= src.len()) {
            return Err(Error::shape(
                "gather",
                format!("index {bad} out of {}", src.len()),
            ));
        }
        if indices.is_empty() {
            return Err(Error::shape("gather", "empty index list"));
        }
        let data = indices.iter().map(|&i| src[i]).collect();
        let rg = self.rg(&[a]);
        self.push(
            "gather",
            Tensor::matrix(indices.len(), 1, data)?,
            Op::Gather(a, indices.to_vec()),
            rg,
        )
    }

    /// Angle between matching 3-vectors of `a` and `b` (both `[m, 3k]`), giving `[m, k]`.
    /// Pairs involving a zero vector have angle 0.
    pub fn block_angle(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.same_shape("block_angle", a, b)?;
        if n % 3 != 0 {
            return Err(Error::shape(
                "block_angle",
                format!("{n} columns not a multiple of 3"),
            ));
        }
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let data = av
            .chunks(3)
            .zip(bv.chunks(3))
            .map(|(x, y)| {
                let c = dot3(x, y);
                let w = cross3(x, y);
                let s = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
                if s == 0.0 && c == 0.0 {
                    0.0
                } else {
                    s.atan2(c)
                }
            })
            .collect();
        let rg = self.rg(&[a, b]);
        self.push(
            "block_angle",
            Tensor::matrix(m, n / 3, data)?,
            Op::BlockAngle(a, b),
            rg,
        )
    }

    /// For each row holding three 3-vectors `u_0..u_2` (as columns of `U`),
    /// the Frobenius norm `||U^T U - I||`, giving `[m, 1]`.
    pub fn gram_deviation(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        if n != 9 {
            return Err(Error::shape(
                "gram_deviation",
                format!("expected 9 columns, got {n}"),
            ));
        }
        let data = self
            .value(a)
            .data()
            .chunks(9)
            .map(|row| {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let g = dot3(&row[3 * i..3 * i + 3], &row[3 * j..3 * j + 3]);
                        let e = g - if i == j { 1.0 } else { 0.0 };
                        s += e * e;
                    }
                }
                s.sqrt()
            })
            .collect();
        let rg = self.rg(&[a]);
        self.push(
            "gram_deviation",
            Tensor::matrix(m, 1, data)?,
            Op::GramDeviation(a),
            rg,
        )
    }

    /// Feature-wise affine modulation `x * (1 + gamma) + beta`.
    pub fn film(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (m, n) = self.same_shape("film", x, gamma)?;
        self.same_shape("film", x, beta)?;
        let xv = self.value(x).data();
        let gv = self.value(gamma).data();
        let bv = self.value(beta).data();
        let data = (0..m * n).map(|i| xv[i] * (1.0 + gv[i]) + bv[i]).collect();
        let rg = self.rg(&[x, gamma, beta]);
        self.push(
            "film",
            Tensor::matrix(m, n, data)?,
            Op::Film(x, gamma, beta),
            rg,
        )
    }

    /// Pinhole projection of 3-vector blocks: `[m, 3k] -> [m, 2k]` pixels under
    /// `(fx, fy, cx, cy)`. Directions with `|z| < PROJECTION_MIN_DEPTH` map to
    /// `(0, 0)` and pass no gradient; [`Tape::projectable`] reports them.
    pub fn project(&mut self, a: Var, intrinsics: [f64; 4]) -> Result<Var> {
        let (m, n) = self.dims(a)?;
        if n % 3 != 0 {
            return Err(Error::shape(
                "project",
                format!("{n} columns not a multiple of 3"),
            ));
        }
        let [fx, fy, cx, cy] = intrinsics;
        let mut data = Vec::with_capacity(m * n / 3 * 2);
        let mut valid = Vec::with_capacity(m * n / 3);
        for u in self.value(a).data().chunks(3) {
            if u[2].abs() < PROJECTION_MIN_DEPTH {
                data.extend_from_slice(&[0.0, 0.0]);
                valid.push(false);
            } else {
                data.push(fx * u[0] / u[2] + cx);
                data.push(fy * u[1] / u[2] + cy);
                valid.push(true);
            }
        }
        let rg = self.rg(&[a]);
        self.push(
            "project",
            Tensor::matrix(m, n / 3 * 2, data)?,
            Op::Project(a, intrinsics, valid),
            rg,
        )
    }

    /// Per-block validity mask of a node created by [`Tape::project`].
    pub fn projectable(&self, v: Var) -> Option<&[bool]> {
        match &self.nodes[v.0].op {
            Op::Project(_, _, valid) => Some(valid),
            _ => None,
        }
    }

    /// Reverse pass from a scalar `loss`. Gradients are then available via [`Tape::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(Error::StaleTape);
        }
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(Error::NotScalar(shape));
        }
        self.consumed = true;
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g)?;
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, contribution: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(existing) => add_into(existing, &contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&mut self, idx: usize, g: &[f64]) -> Result<()> {
        let out = &self.nodes[idx].value;
        let (m, n) = out.dims()?;
        let mut pending: Vec<(Var, Vec<f64>)> = Vec::new();
        match &self.nodes[idx].op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (_, k) = self.dims(a)?;
                if self.wants(a) {
                    let mut da = vec![0.0; m * k];
                    gemm_nt(g, self.value(b).data(), &mut da, m, n, k);
                    pending.push((a, da));
                }
                if self.wants(b) {
                    let mut db = vec![0.0; k * n];
                    gemm_tn(self.value(a).data(), g, &mut db, m, k, n);
                    pending.push((b, db));
                }
            }
            &Op::MatMulNt(a, b) => {
                let (_, k) = self.dims(a)?;
                if self.wants(a) {
                    let mut da = vec![0.0; m * k];
                    gemm_nn(g, self.value(b).data(), &mut da, m, n, k);
                    pending.push((a, da));
                }
                if self.wants(b) {
                    let mut db = vec![0.0; n * k];
                    gemm_tn(g, self.value(a).data(), &mut db, m, n, k);
                    pending.push((b, db));
                }
            }
            &Op::Add(a, b) => {
                pending.push((a, g.to_vec()));
                pending.push((b, g.to_vec()));
            }
            &Op::Sub(a, b) => {
                pending.push((a, g.to_vec()));
                pending.push((b, g.iter().map(|v| -v).collect()));
            }
            &Op::Mul(a, b) => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                if self.wants(a) {
                    pending.push((a, g.iter().zip(bv).map(|(x, y)| x * y).collect()));
                }
                if self.wants(b) {
                    pending.push((b, g.iter().zip(av).map(|(x, y)| x * y).collect()));
                }
            }
            &Op::AddRow(a, row) => {
                pending.push((a, g.to_vec()));
                if self.wants(row) {
                    let mut dr = vec![0.0; n];
                    for chunk in g.chunks(n) {
                        add_into(&mut dr, chunk);
                    }
                    pending.push((row, dr));
                }
            }
            &Op::MulRow(a, row) => {
                let av = self.value(a).data();
                let rv = self.value(row).data();
                if self.wants(a) {
                    let da = g
                        .chunks(n)
                        .flat_map(|chunk| chunk.iter().zip(rv).map(|(x, y)| x * y))
                        .collect();
                    pending.push((a, da));
                }
                if self.wants(row) {
                    let mut dr = vec![0.0; n];
                    for (gc, ac) in g.chunks(n).zip(av.chunks(n)) {
                        for j in 0..n {
                            dr[j] += gc[j] * ac[j];
                        }
                    }
                    pending.push((row, dr));
                }
            }
            &Op::MulScalarVar(a, s) => {
                let sv = self.value(s).data()[0];
                if self.wants(a) {
                    pending.push((a, g.iter().map(|v| v * sv).collect()));
                }
                if self.wants(s) {
                    let ds = g.iter().zip(self.value(a).data()).map(|(x, y)| x * y).sum();
                    pending.push((s, vec![ds]));
                }
            }
            &Op::Scale(a, c) => pending.push((a, g.iter().map(|v| v * c).collect())),
            &Op::Transpose(a) => {
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        da[j * m + i] = g[i * n + j];
                    }
                }
                pending.push((a, da));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.dims(p)?.1;
                    if self.wants(p) {
                        let mut dp = Vec::with_capacity(m * w);
                        for i in 0..m {
                            dp.extend_from_slice(&g[i * n + offset..i * n + offset + w]);
                        }
                        pending.push((p, dp));
                    }
                    offset += w;
                }
            }
            &Op::SliceCols(a, start) => {
                let (_, full) = self.dims(a)?;
                let mut da = vec![0.0; m * full];
                for i in 0..m {
                    da[i * full + start..i * full + start + n]
                        .copy_from_slice(&g[i * n..(i + 1) * n]);
                }
                pending.push((a, da));
            }
            &Op::Relu(a) => {
                let av = self.value(a).data();
                pending.push((
                    a,
                    g.iter()
                        .zip(av)
                        .map(|(d, &x)| if x > 0.0 { *d } else { 0.0 })
                        .collect(),
                ));
            }
            &Op::Softplus(a) => {
                let av = self.value(a).data();
                pending.push((a, g.iter().zip(av).map(|(d, &x)| d * sigmoid(x)).collect()));
            }
            &Op::Recip(a) => {
                let av = self.value(a).data();
                pending.push((a, g.iter().zip(av).map(|(d, &x)| -d / (x * x)).collect()));
            }
            &Op::Abs(a) => {
                let av = self.value(a).data();
                pending.push((a, g.iter().zip(av).map(|(d, &x)| d * sign(x)).collect()));
            }
            &Op::RowSoftmax(a) => {
                let y = out.data();
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    let (yr, gr) = (&y[i * n..(i + 1) * n], &g[i * n..(i + 1) * n]);
                    let s: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        da[i * n + j] = yr[j] * (gr[j] - s);
                    }
                }
                pending.push((a, da));
            }
            &Op::LogSoftmax(a) => {
                let y = out.data();
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    let gr = &g[i * n..(i + 1) * n];
                    let s: f64 = gr.iter().sum();
                    for j in 0..n {
                        da[i * n + j] = gr[j] - y[i * n + j].exp() * s;
                    }
                }
                pending.push((a, da));
            }
            Op::LayerNorm(a, inv_std) => {
                let y = out.data();
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    let (yr, gr) = (&y[i * n..(i + 1) * n], &g[i * n..(i + 1) * n]);
                    let mg = gr.iter().sum::<f64>() / n as f64;
                    let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    for j in 0..n {
                        da[i * n + j] = inv_std[i] * (gr[j] - mg - yr[j] * mgy);
                    }
                }
                pending.push((*a, da));
            }
            Op::RowNormalize(a, norms) => {
                let y = out.data();
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    if norms[i] == 0.0 {
                        continue;
                    }
                    let (yr, gr) = (&y[i * n..(i + 1) * n], &g[i * n..(i + 1) * n]);
                    let d: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        da[i * n + j] = (gr[j] - yr[j] * d) / norms[i];
                    }
                }
                pending.push((*a, da));
            }
            Op::BlockNormalize(a, block, factors) => {
                let y = out.data();
                let mut da = vec![0.0; m * n];
                for (bi, &f) in factors.iter().enumerate() {
                    if f == 0.0 {
                        continue;
                    }
                    let r = bi * block..(bi + 1) * block;
                    let (yr, gr) = (&y[r.clone()], &g[r.clone()]);
                    let d: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    // f = sign / ||x||, and y = f * x
                    for (j, k) in r.enumerate() {
                        da[k] = f * (gr[j] - yr[j] * d);
                    }
                }
                pending.push((*a, da));
            }
            &Op::RowNorm(a) => {
                let av = self.value(a).data();
                let (_, w) = self.dims(a)?;
                let y = out.data();
                let mut da = vec![0.0; m * w];
                for i in 0..m {
                    if y[i] == 0.0 {
                        continue;
                    }
                    for j in 0..w {
                        da[i * w + j] = g[i] * av[i * w + j] / y[i];
                    }
                }
                pending.push((a, da));
            }
            &Op::MeanRows(a) => {
                let (rows, _) = self.dims(a)?;
                let scale = 1.0 / rows as f64;
                let da = (0..rows)
                    .flat_map(|_| g.iter().map(|v| v * scale))
                    .collect();
                pending.push((a, da));
            }
            &Op::Sum(a) => {
                let len = self.value(a).len();
                pending.push((a, vec![g[0]; len]));
            }
            &Op::Mean(a) => {
                let len = self.value(a).len();
                pending.push((a, vec![g[0] / len as f64; len]));
            }
            Op::Gather(a, indices) => {
                let mut da = vec![0.0; self.value(*a).len()];
                for (k, &i) in indices.iter().enumerate() {
                    da[i] += g[k];
                }
                pending.push((*a, da));
            }
            &Op::BlockAngle(a, b) => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                let mut da = vec![0.0; av.len()];
                let mut db = vec![0.0; bv.len()];
                for (blk, &gk) in g.iter().enumerate() {
                    let r = 3 * blk..3 * blk + 3;
                    let (x, y) = (&av[r.clone()], &bv[r.clone()]);
                    let c = dot3(x, y);
                    let w = cross3(x, y);
                    let s = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
                    let denom = s * s + c * c;
                    if denom == 0.0 {
                        continue;
                    }
                    // d atan2(s, c) = (c ds - s dc) / (s^2 + c^2)
                    let (ds_dx, ds_dy) = if s > 0.0 {
                        let wh = [w[0] / s, w[1] / s, w[2] / s];
                        (cross3(y, &wh), cross3(&wh, x))
                    } else {
                        ([0.0; 3], [0.0; 3])
                    };
                    for j in 0..3 {
                        da[r.start + j] = gk * (c * ds_dx[j] - s * y[j]) / denom;
                        db[r.start + j] = gk * (c * ds_dy[j] - s * x[j]) / denom;
                    }
                }
                pending.push((a, da));
                pending.push((b, db));
            }
            &Op::GramDeviation(a) => {
                let av = self.value(a).data();
                let y = out.data();
                let mut da = vec![0.0; av.len()];
                for i in 0..m {
                    if y[i] == 0.0 {
                        continue;
                    }
                    let row = &av[9 * i..9 * i + 9];
                    for k in 0..3 {
                        for j in 0..3 {
                            let e = dot3(&row[3 * k..3 * k + 3], &row[3 * j..3 * j + 3])
                                - if k == j { 1.0 } else { 0.0 };
                            let coef = 2.0 * g[i] * e / y[i];
                            for c in 0..3 {
                                da[9 * i + 3 * k + c] += coef * row[3 * j + c];
                            }
                        }
                    }
                }
                pending.push((a, da));
            }
            &Op::Film(x, gamma, beta) => {
                let xv = self.value(x).data();
                let gv = self.value(gamma).data();
                if self.wants(x) {
                    pending.push((x, g.iter().zip(gv).map(|(d, gm)| d * (1.0 + gm)).collect()));
                }
                if self.wants(gamma) {
                    pending.push((gamma, g.iter().zip(xv).map(|(d, xx)| d * xx).collect()));
                }
                pending.push((beta, g.to_vec()));
            }
            Op::Project(a, k, valid) => {
                let [fx, fy, _, _] = *k;
                let av = self.value(*a).data();
                let mut da = vec![0.0; av.len()];
                for (blk, &ok) in valid.iter().enumerate() {
                    if !ok {
                        continue;
                    }
                    let u = &av[3 * blk..3 * blk + 3];
                    let (gx, gy) = (g[2 * blk], g[2 * blk + 1]);
                    let iz = 1.0 / u[2];
                    da[3 * blk] = gx * fx * iz;
                    da[3 * blk + 1] = gy * fy * iz;
                    da[3 * blk + 2] = -(gx * fx * u[0] + gy * fy * u[1]) * iz * iz;
                }
                pending.push((*a, da));
            }
        }
        for (v, d) in pending {
            self.accumulate(v, d);
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
