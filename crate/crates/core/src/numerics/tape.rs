//! Reverse-mode differentiation over matrix-valued primitives.
//!
//! A [`Tape`] records every primitive applied during a forward pass as a node
//! holding its output value and the indices of its operands. [`Tape::backward`]
//! then walks the nodes in reverse, accumulating adjoints. The primitive set is
//! closed: every operation the models need is a variant of [`Op`], each with a
//! hand-written adjoint, and composite layers are built from these only.
//!
//! Nodes that depend on no parameter (inputs, masks, constants) are flagged
//! and skipped during the backward sweep.

use super::{sigmoid, Matrix, ParamSet};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `(n, m) + (n, 1)` broadcast along columns.
    AddCol(usize, usize),
    /// `(n, m) ⊙ (1, m)` broadcast along rows.
    MulRow(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Square(usize),
    Clamp(usize, f64, f64),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceCols(usize, usize),
    Reshape(usize),
    Lift(usize, usize),
    Contract(usize, usize),
    Select(usize, usize, usize),
    Sum(usize),
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Single-threaded recording of one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

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

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: usize) -> bool {
        self.nodes[v].needs_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Leaves for every entry of `params`, in the set's order.
    pub fn bind<'p>(&mut self, params: &'p ParamSet) -> Bound<'p> {
        let vars = params.iter().map(|(_, m)| self.param(m.clone())).collect();
        Bound { params, vars }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(value, Op::MatMul(a.0, b.0), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(value, Op::Add(a.0, b.0), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(value, Op::Sub(a.0, b.0), ng))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(value, Op::Mul(a.0, b.0), ng))
    }

    /// Adds the column vector `col` to every column of `a`.
    pub fn add_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (am, cm) = (self.value(a), self.value(col));
        if cm.cols() != 1 || cm.rows() != am.rows() {
            return Err(Error::shape("add_col", am.shape(), cm.shape()));
        }
        let mut value = am.clone();
        let n = value.cols();
        for (r, row) in value.data_mut().chunks_mut(n).enumerate() {
            let b = cm.data()[r];
            row.iter_mut().for_each(|v| *v += b);
        }
        let ng = self.ng(a.0) || self.ng(col.0);
        Ok(self.push(value, Op::AddCol(a.0, col.0), ng))
    }

    /// Scales column `j` of `a` by `row[j]`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (am, rm) = (self.value(a), self.value(row));
        if rm.rows() != 1 || rm.cols() != am.cols() {
            return Err(Error::shape("mul_row", am.shape(), rm.shape()));
        }
        let mut value = am.clone();
        let n = value.cols();
        for chunk in value.data_mut().chunks_mut(n) {
            chunk.iter_mut().zip(rm.data()).for_each(|(v, s)| *v *= s);
        }
        let ng = self.ng(a.0) || self.ng(row.0);
        Ok(self.push(value, Op::MulRow(a.0, row.0), ng))
    }

    /// `W x + b` with `b` broadcast over the columns of `x`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let wx = self.matmul(w, x)?;
        self.add_col(wx, b)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let ng = self.ng(a.0);
        self.push(value, Op::Scale(a.0, s), ng)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|v| v + s);
        let ng = self.ng(a.0);
        self.push(value, Op::AddScalar(a.0), ng)
    }

    /// `s - a`
    pub fn rsub_scalar(&mut self, s: f64, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, s)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).map(f);
        let ng = self.ng(a.0);
        self.push(value, op, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a.0))
    }

    /// Natural log; the caller keeps the argument positive.
    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Ln(a.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |v| v * v, Op::Square(a.0))
    }

    /// Clamp to `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |v| v.clamp(lo, hi), Op::Clamp(a.0, lo, hi))
    }

    /// Vertical concatenation.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.shape(*parts.first().ok_or_else(|| Error::domain("concat_rows of nothing"))?).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            if m.cols() != cols {
                return Err(Error::shape("concat_rows", (rows, cols), m.shape()));
            }
            rows += m.rows();
            data.extend_from_slice(m.data());
        }
        let ng = parts.iter().any(|p| self.ng(p.0));
        let value = Matrix::new(rows, cols, data)?;
        Ok(self.push(value, Op::ConcatRows(parts.iter().map(|p| p.0).collect()), ng))
    }

    /// Horizontal concatenation.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(*parts.first().ok_or_else(|| Error::domain("concat_cols of nothing"))?).0;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::shape("concat_cols", (rows, cols), s));
            }
            cols += s.1;
        }
        let mut value = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let m = &self.nodes[p.0].value;
            for r in 0..rows {
                let src = &m.data()[r * m.cols()..(r + 1) * m.cols()];
                value.data_mut()[r * cols + offset..r * cols + offset + m.cols()].copy_from_slice(src);
            }
            offset += m.cols();
        }
        let ng = parts.iter().any(|p| self.ng(p.0));
        Ok(self.push(value, Op::ConcatCols(parts.iter().map(|p| p.0).collect()), ng))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let m = self.value(a);
        if start >= end || end > m.cols() {
            return Err(Error::shape("slice_cols", m.shape(), (start, end)));
        }
        let w = end - start;
        let value = Matrix::from_fn(m.rows(), w, |r, c| m.get(r, start + c));
        let ng = self.ng(a.0);
        Ok(self.push(value, Op::SliceCols(a.0, start), ng))
    }

    /// Row-major reinterpretation with a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let m = self.value(a);
        if rows * cols != m.len() {
            return Err(Error::shape("reshape", m.shape(), (rows, cols)));
        }
        let value = Matrix::new(rows, cols, m.data().to_vec())?;
        let ng = self.ng(a.0);
        Ok(self.push(value, Op::Reshape(a.0), ng))
    }

    /// Outer-product lift of a batch of column vectors.
    ///
    /// `c` is `(h, B)` and `w` is `(1, m)`; the result is `(h*m, B)` with
    /// entry `[k*m + j, b] = c[k, b] * w[j]`. Column `b` is the row-major
    /// flattening of the `(h, m)` matrix `c[:, b] · w`.
    pub fn lift(&mut self, c: Var, w: Var) -> Result<Var> {
        let (cm, wm) = (self.value(c), self.value(w));
        if wm.rows() != 1 {
            return Err(Error::shape("lift", cm.shape(), wm.shape()));
        }
        let (h, bsz, m) = (cm.rows(), cm.cols(), wm.cols());
        let mut value = Matrix::zeros(h * m, bsz);
        for k in 0..h {
            let c_row = &cm.data()[k * bsz..(k + 1) * bsz];
            for j in 0..m {
                let wj = wm.data()[j];
                let out = &mut value.data_mut()[(k * m + j) * bsz..(k * m + j + 1) * bsz];
                out.iter_mut().zip(c_row).for_each(|(o, &cv)| *o = cv * wj);
            }
        }
        let ng = self.ng(c.0) || self.ng(w.0);
        Ok(self.push(value, Op::Lift(c.0, w.0), ng))
    }

    /// Inverse-direction projection of [`Tape::lift`]'s layout.
    ///
    /// `x` is `(h*m, B)`, `v` is `(m, 1)`; the result is `(h, B)` with
    /// `[k, b] = Σ_j x[k*m + j, b] * v[j]`, i.e. the `(h, m)` matrix of
    /// column `b` times `v`.
    pub fn contract(&mut self, x: Var, v: Var) -> Result<Var> {
        let (xm, vm) = (self.value(x), self.value(v));
        let m = vm.rows();
        if vm.cols() != 1 || xm.rows() % m != 0 {
            return Err(Error::shape("contract", xm.shape(), vm.shape()));
        }
        let (h, bsz) = (xm.rows() / m, xm.cols());
        let mut value = Matrix::zeros(h, bsz);
        for k in 0..h {
            for j in 0..m {
                let vj = vm.data()[j];
                let src = &xm.data()[(k * m + j) * bsz..(k * m + j + 1) * bsz];
                let out = &mut value.data_mut()[k * bsz..(k + 1) * bsz];
                out.iter_mut().zip(src).for_each(|(o, &s)| *o += s * vj);
            }
        }
        let ng = self.ng(x.0) || self.ng(v.0);
        Ok(self.push(value, Op::Contract(x.0, v.0), ng))
    }

    /// Column-wise choice: column `j` comes from `a` where `mask[0, j] != 0`
    /// and from `b` otherwise. Values are copied, never blended.
    pub fn select(&mut self, mask: Var, a: Var, b: Var) -> Result<Var> {
        let (mm, am, bm) = (self.value(mask), self.value(a), self.value(b));
        if am.shape() != bm.shape() {
            return Err(Error::shape("select", am.shape(), bm.shape()));
        }
        if mm.rows() != 1 || mm.cols() != am.cols() {
            return Err(Error::shape("select", mm.shape(), am.shape()));
        }
        let mut value = bm.clone();
        let n = value.cols();
        for (r, row) in value.data_mut().chunks_mut(n).enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if mm.data()[j] != 0.0 {
                    *v = am.data()[r * n + j];
                }
            }
        }
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(value, Op::Select(mask.0, a.0, b.0), ng))
    }

    /// Sum of all entries as a `(1, 1)` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let ng = self.ng(a.0);
        self.push(value, Op::Sum(a.0), ng)
    }

    /// Adjoints of `out` (which must be `(1, 1)`) with respect to every node.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        if self.shape(out) != (1, 1) {
            return Err(Error::shape("backward", self.shape(out), (1, 1)));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=out.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        let val = |i: usize| &self.nodes[i].value;
        let mut acc = |i: usize, contrib: Matrix| {
            if !self.nodes[i].needs_grad {
                return;
            }
            match &mut grads[i] {
                Some(existing) => existing
                    .data_mut()
                    .iter_mut()
                    .zip(contrib.data())
                    .for_each(|(e, c)| *e += c),
                slot @ None => *slot = Some(contrib),
            }
        };
        let wants = |i: usize| self.nodes[i].needs_grad;

        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    acc(a, matmul_nt(g, val(b)));
                }
                if wants(b) {
                    acc(b, matmul_tn(val(a), g));
                }
            }
            Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(a, g.clone());
                acc(b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    acc(a, g.hadamard(val(b)).expect("shape fixed at record time"));
                }
                if wants(b) {
                    acc(b, g.hadamard(val(a)).expect("shape fixed at record time"));
                }
            }
            Op::AddCol(a, c) => {
                acc(a, g.clone());
                if wants(c) {
                    let n = g.cols();
                    let sums: Vec<f64> = g.data().chunks(n).map(|r| r.iter().sum()).collect();
                    acc(c, Matrix::column(&sums));
                }
            }
            Op::MulRow(a, r) => {
                let (am, rm) = (val(a), val(r));
                let n = g.cols();
                if wants(a) {
                    let mut ga = g.clone();
                    for chunk in ga.data_mut().chunks_mut(n) {
                        chunk.iter_mut().zip(rm.data()).for_each(|(v, s)| *v *= s);
                    }
                    acc(a, ga);
                }
                if wants(r) {
                    let mut gr = vec![0.0; n];
                    for (gc, ac) in g.data().chunks(n).zip(am.data().chunks(n)) {
                        for j in 0..n {
                            gr[j] += gc[j] * ac[j];
                        }
                    }
                    acc(r, Matrix::row(&gr));
                }
            }
            Op::Scale(a, s) => acc(a, g.scale(s)),
            Op::AddScalar(a) => acc(a, g.clone()),
            Op::Sigmoid(a) => acc(a, zip(g, y, |gv, yv| gv * yv * (1.0 - yv))),
            Op::Tanh(a) => acc(a, zip(g, y, |gv, yv| gv * (1.0 - yv * yv))),
            Op::Exp(a) => acc(a, zip(g, y, |gv, yv| gv * yv)),
            Op::Ln(a) => acc(a, zip(g, val(a), |gv, xv| gv / xv)),
            Op::Square(a) => acc(a, zip(g, val(a), |gv, xv| 2.0 * gv * xv)),
            Op::Clamp(a, lo, hi) => acc(
                a,
                zip(g, val(a), |gv, xv| if xv >= lo && xv <= hi { gv } else { 0.0 }),
            ),
            Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = val(p).len();
                    if wants(p) {
                        let (r, c) = val(p).shape();
                        acc(p, Matrix::new(r, c, g.data()[offset..offset + len].to_vec()).expect("shape"));
                    }
                    offset += len;
                }
            }
            Op::ConcatCols(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = val(p).shape();
                    if wants(p) {
                        acc(p, Matrix::from_fn(r, c, |i, j| g.get(i, offset + j)));
                    }
                    offset += c;
                }
            }
            Op::SliceCols(a, start) => {
                let (r, c) = val(a).shape();
                let w = g.cols();
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    ga.data_mut()[i * c + start..i * c + start + w].copy_from_slice(&g.data()[i * w..(i + 1) * w]);
                }
                acc(a, ga);
            }
            Op::Reshape(a) => {
                let (r, c) = val(a).shape();
                acc(a, Matrix::new(r, c, g.data().to_vec()).expect("shape"));
            }
            Op::Lift(c, w) => {
                let (cm, wm) = (val(c), val(w));
                let (h, bsz, m) = (cm.rows(), cm.cols(), wm.cols());
                if wants(c) {
                    let mut gc = Matrix::zeros(h, bsz);
                    for k in 0..h {
                        for j in 0..m {
                            let wj = wm.data()[j];
                            let src = &g.data()[(k * m + j) * bsz..(k * m + j + 1) * bsz];
                            let out = &mut gc.data_mut()[k * bsz..(k + 1) * bsz];
                            out.iter_mut().zip(src).for_each(|(o, &s)| *o += s * wj);
                        }
                    }
                    acc(c, gc);
                }
                if wants(w) {
                    let mut gw = vec![0.0; m];
                    for k in 0..h {
                        let c_row = &cm.data()[k * bsz..(k + 1) * bsz];
                        for (j, gwj) in gw.iter_mut().enumerate() {
                            let src = &g.data()[(k * m + j) * bsz..(k * m + j + 1) * bsz];
                            *gwj += src.iter().zip(c_row).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    acc(w, Matrix::row(&gw));
                }
            }
            Op::Contract(x, v) => {
                let (xm, vm) = (val(x), val(v));
                let m = vm.rows();
                let (h, bsz) = (xm.rows() / m, xm.cols());
                if wants(x) {
                    let mut gx = Matrix::zeros(h * m, bsz);
                    for k in 0..h {
                        let g_row = &g.data()[k * bsz..(k + 1) * bsz];
                        for j in 0..m {
                            let vj = vm.data()[j];
                            let out = &mut gx.data_mut()[(k * m + j) * bsz..(k * m + j + 1) * bsz];
                            out.iter_mut().zip(g_row).for_each(|(o, &gv)| *o = gv * vj);
                        }
                    }
                    acc(x, gx);
                }
                if wants(v) {
                    let mut gv = vec![0.0; m];
                    for k in 0..h {
                        let g_row = &g.data()[k * bsz..(k + 1) * bsz];
                        for (j, gvj) in gv.iter_mut().enumerate() {
                            let src = &xm.data()[(k * m + j) * bsz..(k * m + j + 1) * bsz];
                            *gvj += src.iter().zip(g_row).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    acc(v, Matrix::column(&gv));
                }
            }
            Op::Select(mask, a, b) => {
                let mm = val(mask);
                let n = g.cols();
                let pick = |take_a: bool| {
                    let mut out = g.clone();
                    for row in out.data_mut().chunks_mut(n) {
                        for (j, v) in row.iter_mut().enumerate() {
                            if (mm.data()[j] != 0.0) != take_a {
                                *v = 0.0;
                            }
                        }
                    }
                    out
                };
                if wants(a) {
                    acc(a, pick(true));
                }
                if wants(b) {
                    acc(b, pick(false));
                }
            }
            Op::Sum(a) => {
                let (r, c) = val(a).shape();
                acc(a, Matrix::filled(r, c, g.item()));
            }
        }
    }
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    a.zip_with(b, "adjoint", f).expect("shape fixed at record time")
}

/// `g · bᵀ`
fn matmul_nt(g: &Matrix, b: &Matrix) -> Matrix {
    let (n, m, k) = (g.rows(), b.rows(), g.cols());
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let g_row = &g.data()[i * k..(i + 1) * k];
        for j in 0..m {
            let b_row = &b.data()[j * k..(j + 1) * k];
            let s: f64 = g_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            out.set(i, j, s);
        }
    }
    out
}

/// `aᵀ · g`
fn matmul_tn(a: &Matrix, g: &Matrix) -> Matrix {
    let (p, n, m) = (a.rows(), a.cols(), g.cols());
    let mut out = Matrix::zeros(n, m);
    for r in 0..p {
        let g_row = &g.data()[r * m..(r + 1) * m];
        for i in 0..n {
            let av = a.data()[r * n + i];
            if av == 0.0 {
                continue;
            }
            let o = &mut out.data_mut()[i * m..(i + 1) * m];
            o.iter_mut().zip(g_row).for_each(|(x, &gv)| *x += av * gv);
        }
    }
    out
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

/// A [`ParamSet`] bound to leaves of a tape.
pub struct Bound<'p> {
    params: &'p ParamSet,
    vars: Vec<Var>,
}

impl Bound<'_> {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.params
            .position(name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))
    }

    /// Collect adjoints back into a set laid out like the bound parameters.
    /// Parameters that did not influence the output get zeros.
    pub fn collect(&self, grads: &Gradients) -> ParamSet {
        let mut out = ParamSet::new();
        for ((name, m), &v) in self.params.iter().zip(&self.vars) {
            let g = grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()));
            out.insert(name, g).expect("names unique by construction");
        }
        out
    }
}
