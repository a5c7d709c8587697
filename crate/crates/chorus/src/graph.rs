//! Eager reverse-mode automatic differentiation over `f64` matrices.
//!
//! Every forward pass builds a fresh [`Graph`] (a tape of [`Op`] nodes whose
//! values are computed at creation time). [`Graph::backward`] walks the tape in
//! reverse and accumulates parameter gradients into a [`GradStore`] aligned
//! with a [`ParamStore`]. Values are column-major conventions throughout:
//! activations are `(n, 1)` column vectors, token sequences become `(n, L)`
//! matrices with one column per position.
//!
//! Parameters live outside the tape in a [`ParamStore`] (one named `Array2`
//! per tensor) and enter a graph as shared leaves, so repeated per-instance
//! graphs never copy weight matrices. Gradients for leaf parameters are
//! written straight into the `GradStore`, which lets a training step sum
//! per-instance contributions without intermediate allocations.

use ndarray::Array2;
use std::collections::HashMap;
use std::sync::Arc;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Handle to a tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl From<ParamId> for usize {
    fn from(id: ParamId) -> usize {
        id.0
    }
}

/// Named collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    by_name: HashMap<String, ParamId>,
}

#[derive(Debug, Clone)]
struct ParamEntry {
    name: String,
    value: Arc<Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor under a unique name. Panics on duplicate names;
    /// parameter naming is a construction-time invariant.
    pub fn register(&mut self, name: &str, value: Array2<f64>) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value: Arc::new(value),
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.entries[id.0].value
    }

    pub fn shared(&self, id: ParamId) -> Arc<Array2<f64>> {
        Arc::clone(&self.entries[id.0].value)
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        Arc::make_mut(&mut self.entries[id.0].value)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Flattens all tensors into one vector, in registration order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_scalars());
        for e in &self.entries {
            out.extend(e.value.iter().copied());
        }
        out
    }

    /// Writes a flat vector (as produced by [`flatten`](Self::flatten)) back
    /// into the tensors. Panics on length mismatch.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for e in &mut self.entries {
            let v = Arc::make_mut(&mut e.value);
            for x in v.iter_mut() {
                *x = flat[off];
                off += 1;
            }
        }
        assert_eq!(off, flat.len(), "flat parameter vector length mismatch");
    }
}

/// Per-parameter gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct GradStore {
    grads: Vec<Array2<f64>>,
}

impl GradStore {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store
                .entries
                .iter()
                .map(|e| Array2::zeros(e.value.dim()))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.grads[id.0]
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.grads {
            g.mapv_inplace(|x| x * k);
        }
    }

    /// Clamps every gradient entry to `[-bound, bound]` elementwise.
    pub fn clamp(&mut self, bound: f64) {
        for g in &mut self.grads {
            g.mapv_inplace(|x| x.clamp(-bound, bound));
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.grads {
            out.extend(g.iter().copied());
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }
}

#[derive(Debug, Clone)]
enum Value {
    Owned(Array2<f64>),
    Shared(Arc<Array2<f64>>),
}

impl Value {
    fn view(&self) -> &Array2<f64> {
        match self {
            Value::Owned(a) => a,
            Value::Shared(a) => a,
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    /// Constant or parameter leaf.
    Leaf { param: Option<ParamId> },
    /// Column selection: `out[:, j] = src[:, cols[j]]`.
    Gather { src: Var, cols: Vec<usize> },
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    /// Adds a `(m, 1)` column to every column of a `(m, n)` matrix.
    AddCol { a: Var, col: Var },
    Scale { a: Var, k: f64 },
    AddScalar { a: Var },
    Tanh { a: Var },
    Sigmoid { a: Var },
    Exp { a: Var },
    Ln { a: Var },
    Clamp { a: Var, lo: f64, hi: f64 },
    ConcatRows { parts: Vec<Var> },
    ConcatCols { parts: Vec<Var> },
    SliceRows { a: Var, start: usize, len: usize },
    Transpose { a: Var },
    Sum { a: Var },
    /// Elementwise division by a `(1, 1)` scalar node.
    DivScalar { a: Var, s: Var },
    /// Log-softmax over all entries of the array.
    LogSoftmax { a: Var },
    /// Extracts one entry as a `(1, 1)` scalar.
    Pick { a: Var, row: usize, col: usize },
}

struct Node {
    value: Value,
    op: Op,
}

/// An eagerly evaluated computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        self.nodes[v.0].value.view()
    }

    /// Value of a `(1, 1)` node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let a = self.value(v);
        debug_assert_eq!(a.len(), 1, "scalar_value on non-scalar node");
        a[(0, 0)]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    /// Constant leaf sharing an existing allocation (no copy).
    pub fn shared_constant(&mut self, value: Arc<Array2<f64>>) -> Var {
        self.nodes.push(Node {
            value: Value::Shared(value),
            op: Op::Leaf { param: None },
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant column vector from a slice.
    pub fn col(&mut self, values: &[f64]) -> Var {
        let a = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        self.constant(a)
    }

    /// Constant `(1, 1)` scalar.
    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), x))
    }

    /// Parameter leaf; shares the store's allocation.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Value::Shared(store.shared(id)),
            op: Op::Leaf { param: Some(id) },
        });
        Var(self.nodes.len() - 1)
    }

    /// Zero column vector of the given length.
    pub fn zeros(&mut self, rows: usize) -> Var {
        self.constant(Array2::zeros((rows, 1)))
    }

    pub fn gather(&mut self, src: Var, cols: &[usize]) -> Var {
        let s = self.value(src);
        let mut out = Array2::zeros((s.nrows(), cols.len()));
        for (j, &c) in cols.iter().enumerate() {
            out.column_mut(j).assign(&s.column(c));
        }
        self.push(
            out,
            Op::Gather {
                src,
                cols: cols.to_vec(),
            },
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul { a, b })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul { a, b })
    }

    pub fn add_col(&mut self, a: Var, col: Var) -> Var {
        let c = self.value(col);
        debug_assert_eq!(c.ncols(), 1);
        let v = self.value(a) + &c.column(0).insert_axis(ndarray::Axis(1));
        self.push(v, Op::AddCol { a, col })
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale { a, k })
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(v, Op::AddScalar { a })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh { a })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid { a })
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp { a })
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::ln);
        self.push(v, Op::Ln { a })
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp { a, lo, hi })
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        debug_assert!(!parts.is_empty());
        let ncols = self.value(parts[0]).ncols();
        let total: usize = parts.iter().map(|&p| self.value(p).nrows()).sum();
        let mut out = Array2::zeros((total, ncols));
        let mut r = 0;
        for &p in parts {
            let v = self.value(p);
            out.slice_mut(ndarray::s![r..r + v.nrows(), ..]).assign(v);
            r += v.nrows();
        }
        self.push(
            out,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        debug_assert!(!parts.is_empty());
        let nrows = self.value(parts[0]).nrows();
        let total: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut out = Array2::zeros((nrows, total));
        let mut c = 0;
        for &p in parts {
            let v = self.value(p);
            out.slice_mut(ndarray::s![.., c..c + v.ncols()]).assign(v);
            c += v.ncols();
        }
        self.push(
            out,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        )
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(ndarray::s![start..start + len, ..]).to_owned();
        self.push(v, Op::SliceRows { a, start, len })
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose { a })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum { a })
    }

    /// Mean of all entries.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    pub fn div_scalar(&mut self, a: Var, s: Var) -> Var {
        let sv = self.scalar_value(s);
        let v = self.value(a) / sv;
        self.push(v, Op::DivScalar { a, s })
    }

    /// Numerically stable log-softmax over every entry of the array.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + x.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        let v = x.mapv(|t| t - lse);
        self.push(v, Op::LogSoftmax { a })
    }

    pub fn pick(&mut self, a: Var, row: usize, col: usize) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a)[(row, col)]);
        self.push(v, Op::Pick { a, row, col })
    }

    /// Softmax over all entries (via log-softmax).
    pub fn softmax(&mut self, a: Var) -> Var {
        let l = self.log_softmax(a);
        self.exp(l)
    }

    /// Affine map `w·x + b`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Var {
        let wx = self.matmul(w, x);
        self.add(wx, b)
    }

    /// Dot product of two column vectors, as a `(1, 1)` node.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.sum(p)
    }

    /// Reverse pass from a scalar `loss` node. `seed` is the incoming
    /// gradient (use `1.0`, or `1/batch` to accumulate a batch mean), and
    /// parameter gradients are added into `grads`.
    pub fn backward(&mut self, loss: Var, seed: f64, grads: &mut GradStore) {
        debug_assert_eq!(self.value(loss).len(), 1, "backward from non-scalar");
        let n = self.nodes.len();
        let mut local: Vec<Option<Array2<f64>>> = (0..n).map(|_| None).collect();
        local[loss.0] = Some(Array2::from_elem((1, 1), seed));

        for i in (0..n).rev() {
            let Some(grad) = local[i].take() else { continue };
            // Fold leaf gradients straight into the store.
            if let Op::Leaf { param: Some(pid) } = self.nodes[i].op {
                *grads.get_mut(pid) += &grad;
                continue;
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf { .. } => {}
                Op::Gather { src, cols } => {
                    if let Op::Leaf { param: Some(pid) } = self.nodes[src.0].op {
                        let g = grads.get_mut(pid);
                        for (j, &c) in cols.iter().enumerate() {
                            let mut col = g.column_mut(c);
                            col += &grad.column(j);
                        }
                    } else {
                        let buf = self.ensure(&mut local, src);
                        for (j, &c) in cols.iter().enumerate() {
                            let mut col = buf.column_mut(c);
                            col += &grad.column(j);
                        }
                    }
                }
                Op::MatMul { a, b } => {
                    let (av, bv) = (self.value(a).clone(), self.value(b).clone());
                    self.accum(&mut local, grads, a, grad.dot(&bv.t()));
                    self.accum(&mut local, grads, b, av.t().dot(&grad));
                }
                Op::Add { a, b } => {
                    self.accum(&mut local, grads, a, grad.clone());
                    self.accum(&mut local, grads, b, grad);
                }
                Op::Sub { a, b } => {
                    self.accum(&mut local, grads, a, grad.clone());
                    self.accum(&mut local, grads, b, -grad);
                }
                Op::Mul { a, b } => {
                    let ga = &grad * self.value(b);
                    let gb = &grad * self.value(a);
                    self.accum(&mut local, grads, a, ga);
                    self.accum(&mut local, grads, b, gb);
                }
                Op::AddCol { a, col } => {
                    let gcol = grad
                        .sum_axis(ndarray::Axis(1))
                        .insert_axis(ndarray::Axis(1));
                    self.accum(&mut local, grads, a, grad);
                    self.accum(&mut local, grads, col, gcol);
                }
                Op::Scale { a, k } => self.accum(&mut local, grads, a, grad * k),
                Op::AddScalar { a } => self.accum(&mut local, grads, a, grad),
                Op::Tanh { a } => {
                    let y = self.value(Var(i));
                    let g = &grad * &y.mapv(|t| 1.0 - t * t);
                    self.accum(&mut local, grads, a, g);
                }
                Op::Sigmoid { a } => {
                    let y = self.value(Var(i));
                    let g = &grad * &y.mapv(|t| t * (1.0 - t));
                    self.accum(&mut local, grads, a, g);
                }
                Op::Exp { a } => {
                    let y = self.value(Var(i));
                    self.accum(&mut local, grads, a, &grad * y);
                }
                Op::Ln { a } => {
                    let x = self.value(a);
                    self.accum(&mut local, grads, a, &grad / x);
                }
                Op::Clamp { a, lo, hi } => {
                    let x = self.value(a);
                    let g = ndarray::Zip::from(&grad)
                        .and(x)
                        .map_collect(|&g, &x| if x > lo && x < hi { g } else { 0.0 });
                    self.accum(&mut local, grads, a, g);
                }
                Op::ConcatRows { parts } => {
                    let mut r = 0;
                    for p in parts {
                        let rows = self.value(p).nrows();
                        let g = grad.slice(ndarray::s![r..r + rows, ..]).to_owned();
                        self.accum(&mut local, grads, p, g);
                        r += rows;
                    }
                }
                Op::ConcatCols { parts } => {
                    let mut c = 0;
                    for p in parts {
                        let cols = self.value(p).ncols();
                        let g = grad.slice(ndarray::s![.., c..c + cols]).to_owned();
                        self.accum(&mut local, grads, p, g);
                        c += cols;
                    }
                }
                Op::SliceRows { a, start, len } => {
                    let buf = self.ensure(&mut local, a);
                    let mut s = buf.slice_mut(ndarray::s![start..start + len, ..]);
                    s += &grad;
                }
                Op::Transpose { a } => {
                    self.accum(&mut local, grads, a, grad.t().to_owned());
                }
                Op::Sum { a } => {
                    let g = Array2::from_elem(self.value(a).dim(), grad[(0, 0)]);
                    self.accum(&mut local, grads, a, g);
                }
                Op::DivScalar { a, s } => {
                    let sv = self.scalar_value(s);
                    let av = self.value(a);
                    let gs = -(&grad * av).sum() / (sv * sv);
                    self.accum(&mut local, grads, a, &grad / sv);
                    self.accum(&mut local, grads, s, Array2::from_elem((1, 1), gs));
                }
                Op::LogSoftmax { a } => {
                    let y = self.value(Var(i));
                    let gsum = grad.sum();
                    let g = &grad - &(y.mapv(f64::exp) * gsum);
                    self.accum(&mut local, grads, a, g);
                }
                Op::Pick { a, row, col } => {
                    let buf = self.ensure(&mut local, a);
                    buf[(row, col)] += grad[(0, 0)];
                }
            }
        }
    }

    /// Adds `g` to the gradient of `target`; leaf parameters go straight to
    /// the store, everything else into the transient per-node buffer.
    fn accum(
        &self,
        local: &mut [Option<Array2<f64>>],
        grads: &mut GradStore,
        target: Var,
        g: Array2<f64>,
    ) {
        if let Op::Leaf { param: Some(pid) } = self.nodes[target.0].op {
            *grads.get_mut(pid) += &g;
            return;
        }
        match &mut local[target.0] {
            Some(buf) => *buf += &g,
            slot => *slot = Some(g),
        }
    }

    fn ensure<'a>(
        &self,
        local: &'a mut [Option<Array2<f64>>],
        target: Var,
    ) -> &'a mut Array2<f64> {
        if local[target.0].is_none() {
            local[target.0] = Some(Array2::zeros(self.value(target).dim()));
        }
        local[target.0].as_mut().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central finite difference of a scalar-valued function of a flat
    /// parameter vector.
    fn finite_diff(
        store: &ParamStore,
        f: &dyn Fn(&ParamStore) -> f64,
        step: f64,
    ) -> Vec<f64> {
        let flat = store.flatten();
        let mut out = Vec::with_capacity(flat.len());
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += step;
            let mut sp = store.clone();
            sp.assign_flat(&plus);
            let fp = f(&sp);
            let mut minus = flat.clone();
            minus[i] -= step;
            let mut sm = store.clone();
            sm.assign_flat(&minus);
            let fm = f(&sm);
            out.push((fp - fm) / (2.0 * step));
        }
        out
    }

    fn check_op(build: impl Fn(&mut Graph, &ParamStore) -> Var, store: &ParamStore) {
        let mut g = Graph::new();
        let loss = build(&mut g, store);
        let mut grads = GradStore::zeros_like(store);
        g.backward(loss, 1.0, &mut grads);
        let analytic = grads.flatten();

        let f = |s: &ParamStore| {
            let mut g = Graph::new();
            let loss = build(&mut g, s);
            g.scalar_value(loss)
        };
        let numeric = finite_diff(store, &f, 1e-6);
        for (i, (a, n)) in analytic.iter().zip(numeric.iter()).enumerate() {
            let denom = a.abs().max(n.abs()).max(1e-6);
            assert!(
                (a - n).abs() / denom < 1e-6,
                "grad mismatch at {i}: analytic {a} numeric {n}"
            );
        }
    }

    fn store_with(values: &[(&str, Array2<f64>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (name, v) in values {
            s.register(name, v.clone());
        }
        s
    }

    #[test]
    fn matmul_add_tanh_gradients() {
        let store = store_with(&[
            ("w", array![[0.3, -0.2], [0.5, 0.1], [-0.4, 0.7]]),
            ("x", array![[0.2], [-0.6]]),
            ("b", array![[0.1], [-0.3], [0.2]]),
        ]);
        check_op(
            |g, s| {
                let w = g.param(s, s.by_name("w").unwrap());
                let x = g.param(s, s.by_name("x").unwrap());
                let b = g.param(s, s.by_name("b").unwrap());
                let y = g.affine(w, x, b);
                let t = g.tanh(y);
                g.sum(t)
            },
            &store,
        );
    }

    #[test]
    fn sigmoid_exp_ln_mul_gradients() {
        let store = store_with(&[
            ("a", array![[0.4], [1.2], [0.9]]),
            ("b", array![[0.7], [0.3], [1.5]]),
        ]);
        check_op(
            |g, s| {
                let a = g.param(s, s.by_name("a").unwrap());
                let b = g.param(s, s.by_name("b").unwrap());
                let sa = g.sigmoid(a);
                let eb = g.exp(b);
                let p = g.mul(sa, eb);
                let l = g.ln(p);
                g.sum(l)
            },
            &store,
        );
    }

    #[test]
    fn log_softmax_pick_gradients() {
        let store = store_with(&[("z", array![[0.5], [-1.0], [2.0], [0.0]])]);
        check_op(
            |g, s| {
                let z = g.param(s, s.by_name("z").unwrap());
                let ls = g.log_softmax(z);
                let p = g.pick(ls, 2, 0);
                g.scale(p, -1.0)
            },
            &store,
        );
    }

    #[test]
    fn concat_slice_transpose_gradients() {
        let store = store_with(&[
            ("a", array![[0.5], [-1.0]]),
            ("b", array![[2.0], [0.3], [0.8]]),
        ]);
        check_op(
            |g, s| {
                let a = g.param(s, s.by_name("a").unwrap());
                let b = g.param(s, s.by_name("b").unwrap());
                let cat = g.concat_rows(&[a, b]);
                let sl = g.slice_rows(cat, 1, 3);
                let t = g.transpose(sl);
                let tt = g.tanh(t);
                g.sum(tt)
            },
            &store,
        );
    }

    #[test]
    fn gather_and_concat_cols_gradients() {
        let store = store_with(&[("table", array![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])]);
        check_op(
            |g, s| {
                let t = g.param(s, s.by_name("table").unwrap());
                // Repeated column exercises gradient accumulation.
                let g1 = g.gather(t, &[2, 0, 2]);
                let g2 = g.gather(t, &[1]);
                let cat = g.concat_cols(&[g1, g2]);
                let sq = g.mul(cat, cat);
                g.sum(sq)
            },
            &store,
        );
    }

    #[test]
    fn div_scalar_and_sum_gradients() {
        let store = store_with(&[("w", array![[1.2], [0.4], [2.0]])]);
        check_op(
            |g, s| {
                let w = g.param(s, s.by_name("w").unwrap());
                let e = g.exp(w);
                let total = g.sum(e);
                let norm = g.div_scalar(e, total);
                let sq = g.mul(norm, norm);
                g.sum(sq)
            },
            &store,
        );
    }

    #[test]
    fn add_col_broadcast_gradients() {
        let store = store_with(&[
            ("m", array![[0.1, 0.4, -0.2], [0.9, -0.5, 0.3]]),
            ("c", array![[0.25], [-0.75]]),
        ]);
        check_op(
            |g, s| {
                let m = g.param(s, s.by_name("m").unwrap());
                let c = g.param(s, s.by_name("c").unwrap());
                let y = g.add_col(m, c);
                let t = g.tanh(y);
                g.sum(t)
            },
            &store,
        );
    }

    #[test]
    fn clamp_passes_gradient_inside_bounds() {
        let store = store_with(&[("x", array![[0.5], [-0.25]])]);
        check_op(
            |g, s| {
                let x = g.param(s, s.by_name("x").unwrap());
                let c = g.clamp(x, -1.0, 1.0);
                let sq = g.mul(c, c);
                g.sum(sq)
            },
            &store,
        );
    }

    #[test]
    fn clamp_blocks_gradient_outside_bounds() {
        let store = store_with(&[("x", array![[3.0]])]);
        let mut g = Graph::new();
        let x = g.param(&store, store.by_name("x").unwrap());
        let c = g.clamp(x, -1.0, 1.0);
        let loss = g.sum(c);
        let mut grads = GradStore::zeros_like(&store);
        g.backward(loss, 1.0, &mut grads);
        assert_eq!(grads.flatten(), vec![0.0]);
    }

    #[test]
    fn shared_value_nodes_do_not_copy() {
        let mut store = ParamStore::new();
        let id = store.register("big", Array2::zeros((64, 64)));
        let mut g = Graph::new();
        let v = g.param(&store, id);
        assert_eq!(g.value(v).dim(), (64, 64));
        // Two graphs can reference the same parameter concurrently.
        let mut g2 = Graph::new();
        let v2 = g2.param(&store, id);
        assert_eq!(g2.value(v2).sum(), 0.0);
        store.value_mut(id)[(0, 0)] = 5.0;
        assert_eq!(store.value(id)[(0, 0)], 5.0);
    }

    #[test]
    fn flatten_assign_round_trip() {
        let mut store = ParamStore::new();
        store.register("a", array![[1.0, 2.0], [3.0, 4.0]]);
        store.register("b", array![[5.0]]);
        let flat = store.flatten();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut other = store.clone();
        other.assign_flat(&[9.0, 8.0, 7.0, 6.0, 5.5]);
        assert_eq!(other.value(other.by_name("a").unwrap())[(1, 0)], 7.0);
        assert_eq!(store.value(store.by_name("a").unwrap())[(1, 0)], 3.0);
    }
}
