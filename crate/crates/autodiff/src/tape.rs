//! Expression tape over vectors.

use thiserror::Error;

use crate::params::{Gradients, ParamId, ParamStore};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdError {
    #[error("{op}: shape {left:?} does not fit {right:?}")]
    ShapeMismatch { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("pop from an empty stack")]
    EmptyStack,
    #[error("{op}: index {index} out of range for length {len}")]
    OutOfRange { op: &'static str, index: usize, len: usize },
}

/// Handle to a value on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Lookup(ParamId, usize),
    MatVec(ParamId, Var),
    Affine(ParamId, ParamId, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sum(Vec<Var>),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Dot(Var, Var),
    Softmax(Var),
    WeightedSum(Var, Vec<Var>),
    SumElems(Var),
    /// Negative log of the masked softmax at `target`.
    MaskedNll { x: Var, mask: Vec<bool>, target: usize },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matvec(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Log-softmax restricted to `mask`; masked entries get `-inf`.
pub fn masked_log_softmax(x: &[f64], mask: &[bool]) -> Vec<f64> {
    let m = x.iter().zip(mask).filter(|(_, &k)| k).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
    let z = m + x.iter().zip(mask).filter(|(_, &k)| k).map(|(v, _)| (v - m).exp()).sum::<f64>().ln();
    x.iter().zip(mask).map(|(v, &k)| if k { v - z } else { f64::NEG_INFINITY }).collect()
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape { store, nodes: Vec::new() }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn dim(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    fn same(&self, op: &'static str, a: Var, b: Var) -> Result<(), AdError> {
        if self.dim(a) == self.dim(b) {
            Ok(())
        } else {
            Err(AdError::ShapeMismatch { op, left: vec![self.dim(a)], right: vec![self.dim(b)] })
        }
    }

    /// A constant vector; gradients flow to it but nowhere else.
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    /// A whole parameter as a vector.
    pub fn param(&mut self, p: ParamId) -> Var {
        let value = self.store.get(p).values.clone();
        self.push(value, Op::Param(p))
    }

    /// Row `row` of a matrix parameter.
    pub fn lookup(&mut self, p: ParamId, row: usize) -> Result<Var, AdError> {
        let t = self.store.get(p);
        if row >= t.rows() {
            return Err(AdError::OutOfRange { op: "lookup", index: row, len: t.rows() });
        }
        let value = t.row(row).to_vec();
        Ok(self.push(value, Op::Lookup(p, row)))
    }

    fn check_matrix(&self, op: &'static str, w: ParamId, x: Var) -> Result<(usize, usize), AdError> {
        let t = self.store.get(w);
        if t.shape.len() != 2 || t.cols() != self.dim(x) {
            return Err(AdError::ShapeMismatch { op, left: t.shape.clone(), right: vec![self.dim(x)] });
        }
        Ok((t.rows(), t.cols()))
    }

    /// `W x` for a matrix parameter `W`.
    pub fn matvec(&mut self, w: ParamId, x: Var) -> Result<Var, AdError> {
        let (rows, cols) = self.check_matrix("matvec", w, x)?;
        let mut out = vec![0.0; rows];
        matvec(&self.store.get(w).values, cols, self.value(x), &mut out);
        Ok(self.push(out, Op::MatVec(w, x)))
    }

    /// `W x + b` for parameters `W` and `b`.
    pub fn affine(&mut self, w: ParamId, b: ParamId, x: Var) -> Result<Var, AdError> {
        let (rows, cols) = self.check_matrix("affine", w, x)?;
        let bias = self.store.get(b);
        if bias.values.len() != rows {
            return Err(AdError::ShapeMismatch { op: "affine", left: vec![rows], right: bias.shape.clone() });
        }
        let mut out = bias.values.clone();
        matvec(&self.store.get(w).values, cols, self.value(x), &mut out);
        Ok(self.push(out, Op::Affine(w, b, x)))
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, node: Op) -> Result<Var, AdError> {
        self.same(op, a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(value, node))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise sum of several vectors of one width.
    pub fn sum(&mut self, xs: &[Var]) -> Result<Var, AdError> {
        let first = *xs.first().ok_or(AdError::ShapeMismatch { op: "sum", left: vec![], right: vec![] })?;
        let mut value = self.value(first).to_vec();
        for &x in &xs[1..] {
            self.same("sum", first, x)?;
            value.iter_mut().zip(self.value(x)).for_each(|(a, b)| *a += b);
        }
        Ok(self.push(value, Op::Sum(xs.to_vec())))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let value = self.value(x).iter().map(|v| v * k).collect();
        self.push(value, Op::Scale(x, k))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        self.push(value, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| v.max(0.0)).collect();
        self.push(value, Op::Relu(x))
    }

    pub fn concat(&mut self, xs: &[Var]) -> Var {
        let value = xs.iter().flat_map(|&x| self.value(x).iter().copied()).collect();
        self.push(value, Op::Concat(xs.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, AdError> {
        if start + len > self.dim(x) {
            return Err(AdError::OutOfRange { op: "slice", index: start + len, len: self.dim(x) });
        }
        let value = self.value(x)[start..start + len].to_vec();
        Ok(self.push(value, Op::Slice(x, start)))
    }

    /// Inner product as a length-1 vector.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.same("dot", a, b)?;
        let v = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![v], Op::Dot(a, b)))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let mask = vec![true; self.dim(x)];
        let value = masked_log_softmax(self.value(x), &mask).into_iter().map(f64::exp).collect();
        self.push(value, Op::Softmax(x))
    }

    /// `sum_i w[i] * xs[i]`.
    pub fn weighted_sum(&mut self, w: Var, xs: &[Var]) -> Result<Var, AdError> {
        if self.dim(w) != xs.len() || xs.is_empty() {
            return Err(AdError::ShapeMismatch { op: "weighted_sum", left: vec![self.dim(w)], right: vec![xs.len()] });
        }
        let mut value = vec![0.0; self.dim(xs[0])];
        for (i, &x) in xs.iter().enumerate() {
            self.same("weighted_sum", xs[0], x)?;
            let k = self.value(w)[i];
            value.iter_mut().zip(self.value(x)).for_each(|(a, b)| *a += k * b);
        }
        Ok(self.push(value, Op::WeightedSum(w, xs.to_vec())))
    }

    /// Sum of the elements as a length-1 vector.
    pub fn sum_elems(&mut self, x: Var) -> Var {
        let v = self.value(x).iter().sum();
        self.push(vec![v], Op::SumElems(x))
    }

    /// `-log softmax(x)[target]` with the softmax taken over `mask` only.
    pub fn masked_nll(&mut self, x: Var, mask: &[bool], target: usize) -> Result<Var, AdError> {
        if mask.len() != self.dim(x) {
            return Err(AdError::ShapeMismatch { op: "masked_nll", left: vec![self.dim(x)], right: vec![mask.len()] });
        }
        if target >= mask.len() || !mask[target] {
            return Err(AdError::OutOfRange { op: "masked_nll", index: target, len: mask.len() });
        }
        let lp = masked_log_softmax(self.value(x), mask);
        Ok(self.push(vec![-lp[target]], Op::MaskedNll { x, mask: mask.to_vec(), target }))
    }

    /// Back-propagates from the scalar `loss`, adding parameter gradients
    /// into `grads`. Returns the adjoint of every node, indexed by `Var`.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Vec<Vec<f64>> {
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        adj[loss.0] = vec![1.0; self.dim(loss)];
        fn acc(adj: &mut [Vec<f64>], v: Var, len: usize) -> &mut [f64] {
            let slot = &mut adj[v.0];
            if slot.is_empty() {
                *slot = vec![0.0; len];
            }
            slot
        }
        for i in (0..=loss.0).rev() {
            if adj[i].is_empty() {
                continue;
            }
            let dy = std::mem::take(&mut adj[i]);
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    grads.slot(*p, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                }
                Op::Lookup(p, row) => {
                    let t = self.store.get(*p);
                    let c = t.cols();
                    let g = grads.slot(*p, t.values.len());
                    g[row * c..(row + 1) * c].iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                }
                Op::MatVec(w, x) | Op::Affine(w, _, x) => {
                    let t = self.store.get(*w);
                    let cols = t.cols();
                    let xv = &self.nodes[x.0].value;
                    {
                        let g = grads.slot(*w, t.values.len());
                        for (grow, d) in g.chunks_exact_mut(cols).zip(&dy) {
                            if *d != 0.0 {
                                grow.iter_mut().zip(xv).for_each(|(g, xi)| *g += d * xi);
                            }
                        }
                    }
                    if let Op::Affine(_, b, _) = &node.op {
                        grads.slot(*b, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                    }
                    let dx = acc(&mut adj, *x, cols);
                    for (row, d) in t.values.chunks_exact(cols).zip(&dy) {
                        if *d != 0.0 {
                            dx.iter_mut().zip(row).for_each(|(g, w)| *g += d * w);
                        }
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                    acc(&mut adj, *b, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                    acc(&mut adj, *b, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g -= d);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let da: Vec<f64> = dy.iter().zip(bv).map(|(d, b)| d * b).collect();
                    let db: Vec<f64> = dy.iter().zip(av).map(|(d, a)| d * a).collect();
                    acc(&mut adj, *a, dy.len()).iter_mut().zip(&da).for_each(|(g, d)| *g += d);
                    acc(&mut adj, *b, dy.len()).iter_mut().zip(&db).for_each(|(g, d)| *g += d);
                }
                Op::Sum(xs) => {
                    for x in xs {
                        acc(&mut adj, *x, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                    }
                }
                Op::Scale(x, k) => {
                    acc(&mut adj, *x, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += k * d);
                }
                Op::Tanh(x) => {
                    let dx = acc(&mut adj, *x, dy.len());
                    for ((g, d), yi) in dx.iter_mut().zip(&dy).zip(y) {
                        *g += d * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(x) => {
                    let dx = acc(&mut adj, *x, dy.len());
                    for ((g, d), yi) in dx.iter_mut().zip(&dy).zip(y) {
                        *g += d * yi * (1.0 - yi);
                    }
                }
                Op::Relu(x) => {
                    let dx = acc(&mut adj, *x, dy.len());
                    for ((g, d), yi) in dx.iter_mut().zip(&dy).zip(y) {
                        if *yi > 0.0 {
                            *g += d;
                        }
                    }
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for x in xs {
                        let n = self.dim(*x);
                        acc(&mut adj, *x, n).iter_mut().zip(&dy[off..off + n]).for_each(|(g, d)| *g += d);
                        off += n;
                    }
                }
                Op::Slice(x, start) => {
                    let n = self.dim(*x);
                    acc(&mut adj, *x, n)[*start..*start + dy.len()].iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.nodes[a.0].value.clone(), self.nodes[b.0].value.clone());
                    let d = dy[0];
                    acc(&mut adj, *a, av.len()).iter_mut().zip(&bv).for_each(|(g, v)| *g += d * v);
                    acc(&mut adj, *b, bv.len()).iter_mut().zip(&av).for_each(|(g, v)| *g += d * v);
                }
                Op::Softmax(x) => {
                    let s: f64 = dy.iter().zip(y).map(|(d, p)| d * p).sum();
                    let dx = acc(&mut adj, *x, dy.len());
                    for ((g, d), p) in dx.iter_mut().zip(&dy).zip(y) {
                        *g += p * (d - s);
                    }
                }
                Op::WeightedSum(w, xs) => {
                    let wv = self.nodes[w.0].value.clone();
                    let dw: Vec<f64> = xs
                        .iter()
                        .map(|x| self.nodes[x.0].value.iter().zip(&dy).map(|(a, b)| a * b).sum())
                        .collect();
                    acc(&mut adj, *w, wv.len()).iter_mut().zip(&dw).for_each(|(g, d)| *g += d);
                    for (x, k) in xs.iter().zip(&wv) {
                        acc(&mut adj, *x, dy.len()).iter_mut().zip(&dy).for_each(|(g, d)| *g += k * d);
                    }
                }
                Op::SumElems(x) => {
                    let n = self.dim(*x);
                    acc(&mut adj, *x, n).iter_mut().for_each(|g| *g += dy[0]);
                }
                Op::MaskedNll { x, mask, target } => {
                    let lp = masked_log_softmax(&self.nodes[x.0].value, mask);
                    let d = dy[0];
                    let dx = acc(&mut adj, *x, mask.len());
                    for (k, g) in dx.iter_mut().enumerate() {
                        if mask[k] {
                            *g += d * (lp[k].exp() - if k == *target { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
            adj[i] = dy;
        }
        adj
    }
}
