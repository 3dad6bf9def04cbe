//! Recorded forward computation and reverse-mode gradient accumulation.
//!
//! Every op appends a node to the tape, so node ids are topologically
//! ordered by construction: inputs always precede their consumers.
//! `backward` walks the tape in reverse, pushing vector-Jacobian products
//! into each node's parents and finally collecting the gradients of every
//! bound trainable parameter.

use std::collections::{BTreeMap, HashMap};

use crate::params::{ParamId, ParamSet};
use crate::tensor::Tensor;
use crate::{Result, TapeError};

pub type NodeId = usize;

/// The seven primitive kinds exposed through [`Tape::apply_primitive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveKind {
    Matmul,
    Add,
    Mul,
    Concat,
    Mean,
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<(ParamId, bool)> },
    Matmul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, factor: f64 },
    Tanh { a: NodeId },
    Sigmoid { a: NodeId },
    Softmax { a: NodeId },
    Concat { parts: Vec<NodeId> },
    StackRows { rows: Vec<NodeId> },
    Row { a: NodeId, index: usize },
    SumRows { a: NodeId },
    Sum { a: NodeId },
    Mean { a: NodeId },
    Embed { table: NodeId, ids: Vec<usize> },
    Dot { a: NodeId, b: NodeId },
    CrossEntropy { logits: NodeId, target: usize, probs: Vec<f64> },
    BceWithLogits { logits: NodeId, targets: Vec<f64> },
    NegEntropy { a: NodeId },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients keyed by parameter id, in id order.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(&id).map(|v| v.as_slice())
    }

    pub fn insert(&mut self, id: ParamId, grad: Vec<f64>) {
        self.grads.insert(id, grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Vec<f64>)> {
        self.grads.iter().map(|(id, g)| (*id, g))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Vec<f64>)> {
        self.grads.iter_mut().map(|(id, g)| (*id, g))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Euclidean norm over all entries, in parameter-id order.
    pub fn global_norm(&self) -> f64 {
        self.grads
            .values()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Merge another gradient set into this one, summing overlaps.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, g) in other.iter() {
            match self.grads.get_mut(&id) {
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(g.iter()) {
                        *a += b;
                    }
                }
                None => {
                    self.grads.insert(id, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { value, op });
        id
    }

    /// Record a constant input. No gradient flows to constants.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf { param: None })
    }

    /// Bind a parameter onto the tape. Binding the same parameter twice
    /// returns the same node, so gradients from all uses accumulate.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let p = params.get(id);
        let node = self.push(
            p.value.clone(),
            Op::Leaf {
                param: Some((id, p.trainable)),
            },
        );
        self.param_nodes.insert(id, node);
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        let value = match (va.shape(), vb.shape()) {
            ([m, k], [k2, n]) if k == k2 => {
                let out = matmul_2d(va.data(), vb.data(), *m, *k, *n);
                Tensor::new(vec![*m, *n], out)?
            }
            ([m, k], [k2]) if k == k2 => {
                let mut out = vec![0.0; *m];
                for i in 0..*m {
                    let row = &va.data()[i * k..(i + 1) * k];
                    out[i] = row.iter().zip(vb.data()).map(|(x, y)| x * y).sum();
                }
                Tensor::vector(out)
            }
            ([k], [k2, n]) if k == k2 => {
                let mut out = vec![0.0; *n];
                for (i, &av) in va.data().iter().enumerate() {
                    if av != 0.0 {
                        let brow = &vb.data()[i * n..(i + 1) * n];
                        for j in 0..*n {
                            out[j] += av * brow[j];
                        }
                    }
                }
                Tensor::vector(out)
            }
            _ => {
                return Err(TapeError::ShapeMismatch {
                    op: "matmul",
                    lhs: va.shape().to_vec(),
                    rhs: vb.shape().to_vec(),
                })
            }
        };
        Ok(self.push(value, Op::Matmul { a, b }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = elementwise(self, a, b, "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = elementwise(self, a, b, "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = elementwise(self, a, b, "mul", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul { a, b }))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let va = &self.nodes[a].value;
        let value = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().map(|x| x * factor).collect(),
        )
        .expect("same shape");
        self.push(value, Op::Scale { a, factor })
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let value = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().map(|x| x.tanh()).collect(),
        )
        .expect("same shape");
        self.push(value, Op::Tanh { a })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let value = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().map(|x| stable_sigmoid(*x)).collect(),
        )
        .expect("same shape");
        self.push(value, Op::Sigmoid { a })
    }

    /// Numerically stable softmax over a vector (max subtraction).
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if !va.is_vector() {
            return Err(TapeError::BadShape {
                op: "softmax",
                expected: "vector",
                got: va.shape().to_vec(),
            });
        }
        if va.is_empty() {
            return Err(TapeError::EmptyInput { op: "softmax" });
        }
        let value = Tensor::vector(softmax_vec(va.data()));
        Ok(self.push(value, Op::Softmax { a }))
    }

    /// Concatenate vectors along their (only) axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(TapeError::EmptyInput { op: "concat" });
        }
        let mut data = Vec::new();
        for &p in parts {
            let v = &self.nodes[p].value;
            if !v.is_vector() {
                return Err(TapeError::BadShape {
                    op: "concat",
                    expected: "vectors (concat along last axis)",
                    got: v.shape().to_vec(),
                });
            }
            data.extend_from_slice(v.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat { parts: parts.to_vec() }))
    }

    /// Stack equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        if rows.is_empty() {
            return Err(TapeError::EmptyInput { op: "stack_rows" });
        }
        let width = self.nodes[rows[0]].value.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            let v = &self.nodes[r].value;
            if !v.is_vector() || v.len() != width {
                return Err(TapeError::ShapeMismatch {
                    op: "stack_rows",
                    lhs: vec![width],
                    rhs: v.shape().to_vec(),
                });
            }
            data.extend_from_slice(v.data());
        }
        let value = Tensor::new(vec![rows.len(), width], data)?;
        Ok(self.push(value, Op::StackRows { rows: rows.to_vec() }))
    }

    /// Extract row `index` of a matrix as a vector.
    pub fn row(&mut self, a: NodeId, index: usize) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if !va.is_matrix() {
            return Err(TapeError::BadShape {
                op: "row",
                expected: "matrix",
                got: va.shape().to_vec(),
            });
        }
        if index >= va.rows() {
            return Err(TapeError::RowOutOfRange {
                index,
                rows: va.rows(),
            });
        }
        let cols = va.cols();
        let value = Tensor::vector(va.data()[index * cols..(index + 1) * cols].to_vec());
        Ok(self.push(value, Op::Row { a, index }))
    }

    /// Sum a matrix over its rows, producing a vector of column sums.
    pub fn sum_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if !va.is_matrix() {
            return Err(TapeError::BadShape {
                op: "sum_rows",
                expected: "matrix",
                got: va.shape().to_vec(),
            });
        }
        let (rows, cols) = (va.rows(), va.cols());
        let mut out = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j] += va.data()[i * cols + j];
            }
        }
        Ok(self.push(Tensor::vector(out), Op::SumRows { a }))
    }

    /// Mean of matrix rows.
    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let rows = {
            let va = &self.nodes[a].value;
            if !va.is_matrix() {
                return Err(TapeError::BadShape {
                    op: "mean_rows",
                    expected: "matrix",
                    got: va.shape().to_vec(),
                });
            }
            va.rows()
        };
        let s = self.sum_rows(a)?;
        Ok(self.scale(s, 1.0 / rows as f64))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let total: f64 = self.nodes[a].value.data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum { a })
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if va.is_empty() {
            return Err(TapeError::EmptyInput { op: "mean" });
        }
        let total: f64 = va.data().iter().sum();
        let n = va.len() as f64;
        Ok(self.push(Tensor::scalar(total / n), Op::Mean { a }))
    }

    /// Look up embedding rows; gradient scatters back into only those rows.
    pub fn embed(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let vt = &self.nodes[table].value;
        if !vt.is_matrix() {
            return Err(TapeError::BadShape {
                op: "embed",
                expected: "matrix table",
                got: vt.shape().to_vec(),
            });
        }
        if ids.is_empty() {
            return Err(TapeError::EmptyInput { op: "embed" });
        }
        let (rows, cols) = (vt.rows(), vt.cols());
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(TapeError::IdOutOfRange { id, rows });
            }
            data.extend_from_slice(&vt.data()[id * cols..(id + 1) * cols]);
        }
        let value = Tensor::new(vec![ids.len(), cols], data)?;
        Ok(self.push(
            value,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if !va.is_vector() || !vb.is_vector() || va.len() != vb.len() {
            return Err(TapeError::ShapeMismatch {
                op: "dot",
                lhs: va.shape().to_vec(),
                rhs: vb.shape().to_vec(),
            });
        }
        let v: f64 = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(v), Op::Dot { a, b }))
    }

    /// Fused log-softmax + negative log likelihood of `target`.
    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let vl = &self.nodes[logits].value;
        if !vl.is_vector() || vl.is_empty() {
            return Err(TapeError::BadShape {
                op: "cross_entropy",
                expected: "non-empty vector of logits",
                got: vl.shape().to_vec(),
            });
        }
        if target >= vl.len() {
            return Err(TapeError::TargetOutOfRange {
                target,
                classes: vl.len(),
            });
        }
        let x = vl.data();
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
        let loss = z.ln() + max - x[target];
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                target,
                probs,
            },
        ))
    }

    /// Fused sigmoid + binary cross-entropy, averaged over positions.
    pub fn bce_with_logits(&mut self, logits: NodeId, targets: &[f64]) -> Result<NodeId> {
        let vl = &self.nodes[logits].value;
        if !vl.is_vector() || vl.len() != targets.len() || vl.is_empty() {
            return Err(TapeError::ShapeMismatch {
                op: "bce_with_logits",
                lhs: vl.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let loss = vl
            .data()
            .iter()
            .zip(targets)
            .map(|(&x, &t)| x.max(0.0) - x * t + (-(x.abs())).exp().ln_1p())
            .sum::<f64>()
            / targets.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Σ p·log p of a probability vector (the negative Shannon entropy).
    pub fn neg_entropy(&mut self, a: NodeId) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if !va.is_vector() || va.is_empty() {
            return Err(TapeError::BadShape {
                op: "neg_entropy",
                expected: "non-empty probability vector",
                got: va.shape().to_vec(),
            });
        }
        let s: f64 = va
            .data()
            .iter()
            .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::NegEntropy { a }))
    }

    /// Dispatch one of the seven basic primitives by kind.
    pub fn apply_primitive(&mut self, kind: PrimitiveKind, inputs: &[NodeId]) -> Result<NodeId> {
        let two = |op: &'static str, inputs: &[NodeId]| -> Result<(NodeId, NodeId)> {
            if inputs.len() != 2 {
                Err(TapeError::Arity {
                    op,
                    expected: "2",
                    got: inputs.len(),
                })
            } else {
                Ok((inputs[0], inputs[1]))
            }
        };
        let one = |op: &'static str, inputs: &[NodeId]| -> Result<NodeId> {
            if inputs.len() != 1 {
                Err(TapeError::Arity {
                    op,
                    expected: "1",
                    got: inputs.len(),
                })
            } else {
                Ok(inputs[0])
            }
        };
        match kind {
            PrimitiveKind::Matmul => {
                let (a, b) = two("matmul", inputs)?;
                self.matmul(a, b)
            }
            PrimitiveKind::Add => {
                let (a, b) = two("add", inputs)?;
                self.add(a, b)
            }
            PrimitiveKind::Mul => {
                let (a, b) = two("mul", inputs)?;
                self.mul(a, b)
            }
            PrimitiveKind::Concat => self.concat(inputs),
            PrimitiveKind::Mean => {
                let a = one("mean", inputs)?;
                self.mean(a)
            }
            PrimitiveKind::Tanh => Ok(self.tanh(one("tanh", inputs)?)),
            PrimitiveKind::Sigmoid => Ok(self.sigmoid(one("sigmoid", inputs)?)),
        }
    }

    /// Reverse pass from a scalar loss. Returns gradients for every
    /// trainable parameter bound to this tape.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if !self.nodes[loss].value.is_scalar() {
            return Err(TapeError::NonScalarLoss {
                got: self.nodes[loss].value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![1.0]);

        for i in (0..=loss).rev() {
            if matches!(self.nodes[i].op, Op::Leaf { .. }) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(i, &g, &mut grads);
        }

        let mut out = Gradients::default();
        for (&pid, &node) in &self.param_nodes {
            if let Op::Leaf {
                param: Some((_, trainable)),
            } = self.nodes[node].op
            {
                if trainable {
                    if let Some(g) = &grads[node] {
                        out.insert(pid, g.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    fn backward_node(&self, i: NodeId, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        fn add_to(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
            grads[id].get_or_insert_with(|| vec![0.0; len])
        }
        match &self.nodes[i].op {
            Op::Leaf { .. } => {}
            Op::Matmul { a, b } => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                match (va.shape(), vb.shape()) {
                    ([m, k], [_, n]) if vb.is_matrix() && va.is_matrix() => {
                        let (m, k, n) = (*m, *k, *n);
                        {
                            let ga = add_to(grads, *a, m * k);
                            for ii in 0..m {
                                for jj in 0..k {
                                    let mut s = 0.0;
                                    for nn in 0..n {
                                        s += g[ii * n + nn] * vb.data()[jj * n + nn];
                                    }
                                    ga[ii * k + jj] += s;
                                }
                            }
                        }
                        let gb = add_to(grads, *b, k * n);
                        for jj in 0..k {
                            for nn in 0..n {
                                let mut s = 0.0;
                                for ii in 0..m {
                                    s += va.data()[ii * k + jj] * g[ii * n + nn];
                                }
                                gb[jj * n + nn] += s;
                            }
                        }
                    }
                    ([m, k], [_]) => {
                        let (m, k) = (*m, *k);
                        {
                            let ga = add_to(grads, *a, m * k);
                            for ii in 0..m {
                                for jj in 0..k {
                                    ga[ii * k + jj] += g[ii] * vb.data()[jj];
                                }
                            }
                        }
                        let gb = add_to(grads, *b, k);
                        for jj in 0..k {
                            let mut s = 0.0;
                            for ii in 0..m {
                                s += va.data()[ii * k + jj] * g[ii];
                            }
                            gb[jj] += s;
                        }
                    }
                    ([k], [_, n]) => {
                        let (k, n) = (*k, *n);
                        {
                            let ga = add_to(grads, *a, k);
                            for ii in 0..k {
                                let mut s = 0.0;
                                for nn in 0..n {
                                    s += vb.data()[ii * n + nn] * g[nn];
                                }
                                ga[ii] += s;
                            }
                        }
                        let gb = add_to(grads, *b, k * n);
                        for ii in 0..k {
                            for nn in 0..n {
                                gb[ii * n + nn] += va.data()[ii] * g[nn];
                            }
                        }
                    }
                    _ => unreachable!("validated at forward"),
                }
            }
            Op::Add { a, b } => {
                for &p in [a, b] {
                    let gp = add_to(grads, p, g.len());
                    for (x, y) in gp.iter_mut().zip(g) {
                        *x += y;
                    }
                }
            }
            Op::Sub { a, b } => {
                {
                    let ga = add_to(grads, *a, g.len());
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                }
                let gb = add_to(grads, *b, g.len());
                for (x, y) in gb.iter_mut().zip(g) {
                    *x -= y;
                }
            }
            Op::Mul { a, b } => {
                {
                    let vb = self.nodes[*b].value.data();
                    let ga = add_to(grads, *a, g.len());
                    for ((x, y), z) in ga.iter_mut().zip(g).zip(vb) {
                        *x += y * z;
                    }
                }
                let va = self.nodes[*a].value.data();
                let gb = add_to(grads, *b, g.len());
                for ((x, y), z) in gb.iter_mut().zip(g).zip(va) {
                    *x += y * z;
                }
            }
            Op::Scale { a, factor } => {
                let ga = add_to(grads, *a, g.len());
                for (x, y) in ga.iter_mut().zip(g) {
                    *x += y * factor;
                }
            }
            Op::Tanh { a } => {
                let y = self.nodes[i].value.data();
                let ga = add_to(grads, *a, g.len());
                for ((x, gy), yy) in ga.iter_mut().zip(g).zip(y) {
                    *x += gy * (1.0 - yy * yy);
                }
            }
            Op::Sigmoid { a } => {
                let y = self.nodes[i].value.data();
                let ga = add_to(grads, *a, g.len());
                for ((x, gy), yy) in ga.iter_mut().zip(g).zip(y) {
                    *x += gy * yy * (1.0 - yy);
                }
            }
            Op::Softmax { a } => {
                let y = self.nodes[i].value.data();
                let dot: f64 = g.iter().zip(y).map(|(gy, yy)| gy * yy).sum();
                let ga = add_to(grads, *a, g.len());
                for ((x, gy), yy) in ga.iter_mut().zip(g).zip(y) {
                    *x += yy * (gy - dot);
                }
            }
            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p].value.len();
                    let gp = add_to(grads, p, len);
                    for (x, y) in gp.iter_mut().zip(&g[offset..offset + len]) {
                        *x += y;
                    }
                    offset += len;
                }
            }
            Op::StackRows { rows } => {
                let width = self.nodes[rows[0]].value.len();
                for (t, &r) in rows.iter().enumerate() {
                    let gr = add_to(grads, r, width);
                    for (x, y) in gr.iter_mut().zip(&g[t * width..(t + 1) * width]) {
                        *x += y;
                    }
                }
            }
            Op::Row { a, index } => {
                let va = &self.nodes[*a].value;
                let cols = va.cols();
                let ga = add_to(grads, *a, va.len());
                for (j, y) in g.iter().enumerate() {
                    ga[index * cols + j] += y;
                }
            }
            Op::SumRows { a } => {
                let va = &self.nodes[*a].value;
                let (rows, cols) = (va.rows(), va.cols());
                let ga = add_to(grads, *a, va.len());
                for r in 0..rows {
                    for j in 0..cols {
                        ga[r * cols + j] += g[j];
                    }
                }
            }
            Op::Sum { a } => {
                let len = self.nodes[*a].value.len();
                let ga = add_to(grads, *a, len);
                for x in ga.iter_mut() {
                    *x += g[0];
                }
            }
            Op::Mean { a } => {
                let len = self.nodes[*a].value.len();
                let ga = add_to(grads, *a, len);
                let f = g[0] / len as f64;
                for x in ga.iter_mut() {
                    *x += f;
                }
            }
            Op::Embed { table, ids } => {
                let vt = &self.nodes[*table].value;
                let cols = vt.cols();
                let gt = add_to(grads, *table, vt.len());
                for (t, &id) in ids.iter().enumerate() {
                    for j in 0..cols {
                        gt[id * cols + j] += g[t * cols + j];
                    }
                }
            }
            Op::Dot { a, b } => {
                {
                    let vb = self.nodes[*b].value.data();
                    let ga = add_to(grads, *a, vb.len());
                    for (x, y) in ga.iter_mut().zip(vb) {
                        *x += g[0] * y;
                    }
                }
                let va = self.nodes[*a].value.data();
                let gb = add_to(grads, *b, va.len());
                for (x, y) in gb.iter_mut().zip(va) {
                    *x += g[0] * y;
                }
            }
            Op::CrossEntropy {
                logits,
                target,
                probs,
            } => {
                let gl = add_to(grads, *logits, probs.len());
                for (j, p) in probs.iter().enumerate() {
                    let indicator = if j == *target { 1.0 } else { 0.0 };
                    gl[j] += g[0] * (p - indicator);
                }
            }
            Op::BceWithLogits { logits, targets } => {
                let x = self.nodes[*logits].value.data();
                let n = targets.len() as f64;
                let gl = add_to(grads, *logits, targets.len());
                for (j, (&xj, &tj)) in x.iter().zip(targets).enumerate() {
                    gl[j] += g[0] * (stable_sigmoid(xj) - tj) / n;
                }
            }
            Op::NegEntropy { a } => {
                let p = self.nodes[*a].value.data();
                let ga = add_to(grads, *a, p.len());
                for (x, &pj) in ga.iter_mut().zip(p) {
                    *x += g[0] * (pj.max(1e-300).ln() + 1.0);
                }
            }
        }
    }
}

fn elementwise(
    tape: &Tape,
    a: NodeId,
    b: NodeId,
    op: &'static str,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    let (va, vb) = (&tape.nodes[a].value, &tape.nodes[b].value);
    if va.shape() != vb.shape() {
        return Err(TapeError::ShapeMismatch {
            op,
            lhs: va.shape().to_vec(),
            rhs: vb.shape().to_vec(),
        });
    }
    Tensor::new(
        va.shape().to_vec(),
        va.data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| f(*x, *y))
            .collect(),
    )
}

fn matmul_2d(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av != 0.0 {
                let brow = &b[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += av * brow[j];
                }
            }
        }
    }
    out
}

pub(crate) fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_vec(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
