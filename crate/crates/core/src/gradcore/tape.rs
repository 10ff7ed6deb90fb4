use std::sync::Arc;

use rand::Rng;

use super::params::ParamId;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::otcore::{cost_matrix_raw, CostKind};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`, the layout used for weight matrices stored as `out × in`.
    MatMulT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    Relu(NodeId),
    Sigmoid(NodeId),
    Ln(NodeId),
    Clamp(NodeId, T, T),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize),
    GatherSum(NodeId, Arc<[Vec<usize>]>),
    Sum(NodeId),
    Mean(NodeId),
    SumRows(NodeId),
    LogSumExp(NodeId),
    Dropout(NodeId, Vec<T>),
    TransportCost {
        x: NodeId,
        y: NodeId,
        plans: Vec<Tensor<T>>,
        kind: CostKind,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    param: Option<ParamId>,
    requires_grad: bool,
}

/// Records a forward computation so that [`Tape::backward`] can replay it in
/// reverse. Node ids are handed out in recording order, so every node's
/// inputs precede it.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_str<T: Scalar>(t: &Tensor<T>) -> String {
    format!("{}x{}", t.rows(), t.cols())
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        debug_assert!(
            value.all_finite() || !self.inputs_tame(&op),
            "non-finite forward value from finite, non-overflowing inputs"
        );
        self.nodes.push(Node {
            value,
            op,
            param: None,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Finite inputs whose products cannot overflow. Beyond that bound an
    /// infinite result is ordinary float overflow, reported by the caller.
    fn inputs_tame(&self, op: &Op<T>) -> bool {
        let bound = T::max_value().sqrt();
        let mut ok = true;
        for_each_input(op, |id| {
            ok &= self.nodes[id.0].value.data().iter().all(|x| x.abs() < bound);
        });
        ok
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// A trainable leaf; its gradient is reported under `param`.
    pub fn param(&mut self, param: ParamId, value: Tensor<T>) -> NodeId {
        let id = self.push(value, Op::Leaf, true);
        self.nodes[id.0].param = Some(param);
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(Error::dims("matmul_t", shape_str(av), shape_str(bv)));
        }
        let value = av.matmul_t(bv)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMulT(a, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dims(op, shape_str(av), shape_str(bv)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> NodeId {
        let value = self.value(a).scaled(factor);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, factor), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// Natural logarithm; inputs must be positive.
    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|x| x.ln());
        let rg = self.rg(a);
        self.push(value, Op::Ln(a), rg)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where the bound is active.
    pub fn clamp(&mut self, a: NodeId, lo: T, hi: T) -> NodeId {
        let value = self.value(a).map(|x| x.max(lo).min(hi));
        let rg = self.rg(a);
        self.push(value, Op::Clamp(a, lo, hi), rg)
    }

    /// Concatenates along the feature (column) axis. Zero-sized inputs are skipped.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let parts: Vec<NodeId> = parts
            .iter()
            .copied()
            .filter(|&p| !self.value(p).is_empty())
            .collect();
        let Some(&first) = parts.first() else {
            return Ok(self.constant(Tensor::zeros(0, 0)));
        };
        let rows = self.value(first).rows();
        let mut cols = 0;
        for &p in &parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Error::dims(
                    "concat",
                    shape_str(self.value(first)),
                    shape_str(v),
                ));
            }
            cols += v.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in &parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols(parts), rg))
    }

    /// Stacks inputs vertically; all must have the same column count.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Ok(self.constant(Tensor::zeros(0, 0)));
        };
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::dims("concat_rows", shape_str(self.value(first)), shape_str(v)));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let av = self.value(a);
        if start + len > av.rows() {
            return Err(Error::dims(
                "slice_rows",
                shape_str(av),
                format!("rows {start}..{}", start + len),
            ));
        }
        let value = av.slice_rows(start, len);
        let rg = self.rg(a);
        Ok(self.push(value, Op::SliceRows(a, start), rg))
    }

    /// Output row `r` is the sum of the rows of `a` listed in `lists[r]`,
    /// accumulated in list order. An empty list yields a zero row.
    pub fn gather_sum(&mut self, a: NodeId, lists: Arc<[Vec<usize>]>) -> Result<NodeId> {
        let av = self.value(a);
        let cols = av.cols();
        let mut value = Tensor::zeros(lists.len(), cols);
        for (r, list) in lists.iter().enumerate() {
            let out = value.row_mut(r);
            for &i in list {
                if i >= av.rows() {
                    return Err(Error::dims(
                        "gather_sum",
                        shape_str(av),
                        format!("row index {i}"),
                    ));
                }
                for (o, &x) in out.iter_mut().zip(av.row(i)) {
                    *o += x;
                }
            }
        }
        let rg = self.rg(a);
        Ok(self.push(value, Op::GatherSum(a, lists), rg))
    }

    /// Sum of all entries, as a `1×1` tensor.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let n = T::of_usize(av.len().max(1));
        let value = Tensor::scalar(av.sum() / n);
        let rg = self.rg(a);
        self.push(value, Op::Mean(a), rg)
    }

    /// Column sums as a `1×cols` row.
    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::row_vector(self.value(a).col_sums());
        let rg = self.rg(a);
        self.push(value, Op::SumRows(a), rg)
    }

    /// `ln Σ exp(x)` over all entries, evaluated with the maximum subtracted.
    pub fn log_sum_exp(&mut self, a: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(Error::dims("log_sum_exp", shape_str(av), "non-empty input"));
        }
        let value = Tensor::scalar(log_sum_exp(av.data()));
        let rg = self.rg(a);
        Ok(self.push(value, Op::LogSumExp(a), rg))
    }

    /// Inverted dropout. In train mode each entry is zeroed with probability
    /// `p` and survivors are scaled by `1/(1-p)`; otherwise the input is
    /// returned unchanged.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: NodeId,
        p: T,
        train: bool,
        rng: &mut R,
    ) -> Result<NodeId> {
        if !(p >= T::zero() && p < T::one()) {
            return Err(Error::Config(format!(
                "dropout probability must lie in [0, 1), got {p}"
            )));
        }
        if !train || p == T::zero() {
            return Ok(a);
        }
        let keep = T::one() / (T::one() - p);
        let p64 = p.to_f64_lossy();
        let mask: Vec<T> = (0..self.value(a).len())
            .map(|_| {
                if rng.gen::<f64>() < p64 {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let av = self.value(a);
        let data = av.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let value = Tensor::from_vec(av.rows(), av.cols(), data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Dropout(a, mask), rg))
    }

    /// Costs `Σ_ij T_ij c(x_i, y_j)` of each fixed plan `T` between the clouds
    /// `x` (n×d) and `y` (m×d), as a `1×K` row. Plans are constants: the
    /// gradient flows only through the cost terms.
    pub fn transport_cost(
        &mut self,
        x: NodeId,
        y: NodeId,
        plans: Vec<Tensor<T>>,
        kind: CostKind,
    ) -> Result<NodeId> {
        let (xv, yv) = (self.value(x), self.value(y));
        let cost = cost_matrix_raw(xv, yv, kind)?;
        let mut out = Vec::with_capacity(plans.len());
        for plan in &plans {
            if plan.shape() != cost.shape() {
                return Err(Error::dims(
                    "transport_cost",
                    format!("cost {}", shape_str(&cost)),
                    format!("plan {}", shape_str(plan)),
                ));
            }
            out.push(
                plan.data()
                    .iter()
                    .zip(cost.data())
                    .map(|(&t, &c)| t * c)
                    .sum(),
            );
        }
        let rg = self.rg(x) || self.rg(y);
        Ok(self.push(
            Tensor::row_vector(out),
            Op::TransportCost { x, y, plans, kind },
            rg,
        ))
    }

    /// Reverse pass from a scalar loss with seed gradient 1.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got {}",
                shape_str(lv)
            )));
        }
        self.backward_with(loss, Tensor::scalar(T::one()))
    }

    /// Reverse pass from an arbitrary node with an explicit upstream gradient.
    pub fn backward_with(&self, root: NodeId, seed: Tensor<T>) -> Result<Gradients<T>> {
        if seed.shape() != self.value(root).shape() {
            return Err(Error::dims(
                "backward seed",
                shape_str(self.value(root)),
                shape_str(&seed),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(seed);
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if self.nodes[id].requires_grad {
                self.propagate(id, &g, &mut grads)?;
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { nodes: grads })
    }

    fn propagate(&self, id: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let node = &self.nodes[id];
        let mut acc = |target: NodeId, contribution: Tensor<T>| {
            if !self.nodes[target.0].requires_grad {
                return;
            }
            match &mut grads[target.0] {
                Some(existing) => existing.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    acc(*a, g.matmul_t(bv)?);
                }
                if self.rg(*b) {
                    acc(*b, av.t_matmul(g)?);
                }
            }
            Op::MatMulT(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    acc(*a, g.matmul(bv)?);
                }
                if self.rg(*b) {
                    acc(*b, g.t_matmul(av)?);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.scaled(-T::one()));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, g.zip_map(bv, |x, y| x * y));
                acc(*b, g.zip_map(av, |x, y| x * y));
            }
            Op::Scale(a, f) => acc(*a, g.scaled(*f)),
            Op::Relu(a) => {
                let input = self.value(*a);
                acc(*a, g.zip_map(input, |gi, x| if x > T::zero() { gi } else { T::zero() }));
            }
            Op::Sigmoid(a) => {
                let out = &node.value;
                acc(*a, g.zip_map(out, |gi, s| gi * s * (T::one() - s)));
            }
            Op::Ln(a) => {
                let input = self.value(*a);
                acc(*a, g.zip_map(input, |gi, x| gi / x));
            }
            Op::Clamp(a, lo, hi) => {
                let input = self.value(*a);
                let (lo, hi) = (*lo, *hi);
                acc(
                    *a,
                    g.zip_map(input, |gi, x| if x < lo || x > hi { T::zero() } else { gi }),
                );
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = self.value(p).cols();
                    let part = Tensor::from_fn(g.rows(), cols, |i, j| g.get(i, offset + j));
                    offset += cols;
                    acc(p, part);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    acc(p, g.slice_rows(offset, rows));
                    offset += rows;
                }
            }
            Op::SliceRows(a, start) => {
                let av = self.value(*a);
                let mut full = Tensor::zeros(av.rows(), av.cols());
                for i in 0..g.rows() {
                    full.row_mut(start + i).copy_from_slice(g.row(i));
                }
                acc(*a, full);
            }
            Op::GatherSum(a, lists) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for (r, list) in lists.iter().enumerate() {
                    for &i in list {
                        for (o, &x) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                }
                acc(*a, ga);
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                acc(*a, Tensor::filled(av.rows(), av.cols(), g.data()[0]));
            }
            Op::Mean(a) => {
                let av = self.value(*a);
                let n = T::of_usize(av.len().max(1));
                acc(*a, Tensor::filled(av.rows(), av.cols(), g.data()[0] / n));
            }
            Op::SumRows(a) => {
                let av = self.value(*a);
                acc(*a, Tensor::from_fn(av.rows(), av.cols(), |_, j| g.get(0, j)));
            }
            Op::LogSumExp(a) => {
                let av = self.value(*a);
                let lse = node.value.data()[0];
                let g0 = g.data()[0];
                acc(*a, av.map(|x| g0 * (x - lse).exp()));
            }
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(&gi, &m)| gi * m).collect();
                acc(*a, Tensor::from_vec(g.rows(), g.cols(), data)?);
            }
            Op::TransportCost { x, y, plans, kind } => {
                let (xv, yv) = (self.value(*x), self.value(*y));
                let mut weights = Tensor::zeros(xv.rows(), yv.rows());
                for (k, plan) in plans.iter().enumerate() {
                    let gk = g.data()[k];
                    if gk != T::zero() {
                        for (w, &t) in weights.data_mut().iter_mut().zip(plan.data()) {
                            *w += gk * t;
                        }
                    }
                }
                let (gx, gy) = transport_cost_grads(xv, yv, &weights, *kind)?;
                acc(*x, gx);
                acc(*y, gy);
            }
        }
        Ok(())
    }
}

/// Gradients of `Σ_ij W_ij c(x_i, y_j)` with respect to both clouds.
fn transport_cost_grads<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    weights: &Tensor<T>,
    kind: CostKind,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let wy = weights.matmul(y)?;
    let wtx = weights.t_matmul(x)?;
    match kind {
        CostKind::NegativeDot => Ok((wy.scaled(-T::one()), wtx.scaled(-T::one()))),
        CostKind::SquaredL2 => {
            let two = T::of(2.0);
            let rs = weights.row_sums();
            let cs = weights.col_sums();
            let gx = Tensor::from_fn(x.rows(), x.cols(), |i, k| {
                two * (rs[i] * x.get(i, k) - wy.get(i, k))
            });
            let gy = Tensor::from_fn(y.rows(), y.cols(), |j, k| {
                two * (cs[j] * y.get(j, k) - wtx.get(j, k))
            });
            Ok((gx, gy))
        }
    }
}

fn for_each_input<T>(op: &Op<T>, mut f: impl FnMut(NodeId)) {
    match op {
        Op::Leaf => {}
        Op::MatMul(a, b) | Op::MatMulT(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
            f(*a);
            f(*b);
        }
        Op::Scale(a, _)
        | Op::Relu(a)
        | Op::Sigmoid(a)
        | Op::Ln(a)
        | Op::Clamp(a, _, _)
        | Op::SliceRows(a, _)
        | Op::GatherSum(a, _)
        | Op::Sum(a)
        | Op::Mean(a)
        | Op::SumRows(a)
        | Op::LogSumExp(a)
        | Op::Dropout(a, _) => f(*a),
        Op::ConcatCols(parts) | Op::ConcatRows(parts) => parts.iter().copied().for_each(f),
        Op::TransportCost { x, y, .. } => {
            f(*x);
            f(*y);
        }
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

/// Result of a reverse pass: one optional gradient per recorded node.
pub struct Gradients<T> {
    nodes: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to a node, `None` if it was unreachable or constant.
    pub fn node(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.nodes.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient accumulated into every leaf registered as `param`; zeros if
    /// the parameter is on the tape but unreachable, `None` if never recorded.
    pub fn param(&self, tape: &Tape<T>, param: ParamId) -> Option<Tensor<T>> {
        let mut out: Option<Tensor<T>> = None;
        for (i, node) in tape.nodes.iter().enumerate() {
            if node.param != Some(param) {
                continue;
            }
            let g = self.nodes[i]
                .clone()
                .unwrap_or_else(|| Tensor::zeros(node.value.rows(), node.value.cols()));
            match &mut out {
                Some(acc) => acc.add_assign(&g),
                None => out = Some(g),
            }
        }
        out
    }

    /// Adds every parameter gradient into `sink`, indexed by [`ParamId`].
    pub fn accumulate_into(&self, tape: &Tape<T>, sink: &mut [Tensor<T>]) {
        for (i, node) in tape.nodes.iter().enumerate() {
            if let (Some(p), Some(g)) = (node.param, &self.nodes[i]) {
                sink[p.index()].add_assign(g);
            }
        }
    }
}
