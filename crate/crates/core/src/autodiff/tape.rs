//! Reverse-mode differentiation over a recorded tape of tensor operations.
//!
//! A [`Tape`] borrows a [`ParamStore`] for the duration of one forward pass.
//! Every operation appends a node whose inputs precede it, so a single
//! reverse sweep visits each node once. Parameter leaves are not copied; the
//! tape reads their values from the store and [`Tape::backward`] returns the
//! accumulated gradients as a [`Gradients`] set indexed like the store.

use std::ops::Range;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Tanh,
    Sigmoid,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Mul,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul { a: Var, b: Var, trans_b: bool },
    Binary(Binary, Var, Var),
    AddRow { a: Var, row: Var },
    MulCol { a: Var, col: Var },
    Scale(Var, f64),
    Unary(Unary, Var),
    Softmax { a: Var },
    ConcatCols(Vec<Var>),
    SliceCols { a: Var, start: usize },
    SelectRows { a: Var, index: Vec<Option<usize>> },
    Where { keep_new: Vec<bool>, new: Var, old: Var },
    SegmentMean { a: Var, segments: Vec<Range<usize>> },
    Sum(Var),
    CrossEntropy { logits: Var, targets: Vec<usize> },
    AbsError { pred: Var, targets: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    // `None` only for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.tensor(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Constant, t)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node so
    /// gradients from every use accumulate in one place.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ`, used for weights stored as `[out × in]`. A 1-D operand is
    /// read as a single row.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2();
        let (br, bc) = tb.dims2();
        let (kb, n) = if trans_b { (bc, br) } else { (br, bc) };
        if ta.shape().len() > 2 || tb.shape().len() > 2 || k != kb {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ad[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            if trans_b {
                for (j, o) in orow.iter_mut().enumerate() {
                    let brow = &bd[j * k..(j + 1) * k];
                    *o = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
                }
            } else {
                for (p, &av) in arow.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let brow = &bd[p * n..(p + 1) * n];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
        }
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(Op::MatMul { a, b, trans_b }, value))
    }

    pub fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape("elementwise", ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| match kind {
                Binary::Add => x + y,
                Binary::Mul => x * y,
            })
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Binary(kind, a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    /// Adds a bias row (`row.numel() == cols(a)`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        let (_, c) = ta.dims2();
        if tr.numel() != c {
            return Err(Error::shape("add_row", ta.shape(), tr.shape()));
        }
        let rd = tr.data();
        let data = ta
            .data()
            .chunks(c)
            .flat_map(|r| r.iter().zip(rd).map(|(x, b)| x + b))
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::AddRow { a, row }, value))
    }

    /// Scales each row of `a` by the matching entry of the `[rows × 1]` column.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (ta, tc) = (self.value(a), self.value(col));
        let (r, c) = ta.dims2();
        if tc.numel() != r {
            return Err(Error::shape("mul_col", ta.shape(), tc.shape()));
        }
        let cd = tc.data();
        let data = ta
            .data()
            .chunks(c)
            .zip(cd)
            .flat_map(|(row, &s)| row.iter().map(move |x| x * s))
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::MulCol { a, col }, value))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * factor).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(Op::Scale(a, factor), value)
    }

    pub fn unary(&mut self, kind: Unary, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .map(|&x| match kind {
                Unary::Tanh => x.tanh(),
                Unary::Sigmoid => sigmoid(x),
                Unary::Relu => x.max(0.0),
            })
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(Op::Unary(kind, a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Unary::Relu, a)
    }

    /// Row-wise softmax. Masked entries (`false`) are exactly zero in the
    /// output and each row must keep at least one unmasked entry.
    pub fn softmax(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2();
        if let Some(m) = mask {
            if m.len() != ta.numel() {
                return Err(Error::shape("softmax mask", ta.shape(), &[m.len()]));
            }
        }
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &ta.data()[i * c..(i + 1) * c];
            let keep = |j: usize| mask.is_none_or(|m| m[i * c + j]);
            let max = (0..c)
                .filter(|&j| keep(j))
                .map(|j| row[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::Degenerate(format!(
                    "softmax row {i} has every position masked"
                )));
            }
            let orow = &mut out[i * c..(i + 1) * c];
            let mut total = 0.0;
            for j in (0..c).filter(|&j| keep(j)) {
                orow[j] = (row[j] - max).exp();
                total += orow[j];
            }
            orow.iter_mut().for_each(|x| *x /= total);
        }
        let value = Tensor::new(ta.shape().to_vec(), out)?;
        Ok(self.push(Op::Softmax { a }, value))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?;
        let rows = self.value(*first).rows();
        let mut total_cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(Error::shape("concat_cols", self.value(*first).shape(), t.shape()));
            }
            total_cols += t.cols();
        }
        let mut out = Vec::with_capacity(rows * total_cols);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(vec![rows, total_cols], out)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2();
        if start >= end || end > c {
            return Err(Error::InvalidArgument(format!(
                "column slice {start}..{end} out of range for {c} columns"
            )));
        }
        let out = ta
            .data()
            .chunks(c)
            .flat_map(|row| row[start..end].iter().copied())
            .collect();
        let value = Tensor::new(vec![r, end - start], out)?;
        Ok(self.push(Op::SliceCols { a, start }, value))
    }

    /// Gathers rows of `a`; `None` yields a zero row that receives no gradient.
    pub fn select_rows(&mut self, a: Var, index: &[Option<usize>]) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2();
        if index.is_empty() {
            return Err(Error::InvalidArgument("empty row selection".into()));
        }
        let mut out = vec![0.0; index.len() * c];
        for (dst, src) in index.iter().enumerate() {
            if let Some(s) = *src {
                if s >= r {
                    return Err(Error::InvalidArgument(format!(
                        "row {s} out of range for {r} rows"
                    )));
                }
                out[dst * c..(dst + 1) * c].copy_from_slice(ta.row(s));
            }
        }
        let value = Tensor::new(vec![index.len(), c], out)?;
        Ok(self.push(
            Op::SelectRows {
                a,
                index: index.to_vec(),
            },
            value,
        ))
    }

    /// Row-wise choice: row `r` comes from `new` when `keep_new[r]`, else from `old`.
    pub fn where_rows(&mut self, keep_new: &[bool], new: Var, old: Var) -> Result<Var> {
        let (tn, to) = (self.value(new), self.value(old));
        if tn.shape() != to.shape() || keep_new.len() != tn.rows() {
            return Err(Error::shape("where_rows", tn.shape(), to.shape()));
        }
        let c = tn.cols();
        let mut out = Vec::with_capacity(tn.numel());
        for (r, &k) in keep_new.iter().enumerate() {
            out.extend_from_slice(if k { tn.row(r) } else { to.row(r) });
        }
        let value = Tensor::new(vec![keep_new.len(), c], out)?;
        Ok(self.push(
            Op::Where {
                keep_new: keep_new.to_vec(),
                new,
                old,
            },
            value,
        ))
    }

    /// Mean of each contiguous, non-empty row range.
    pub fn segment_mean(&mut self, a: Var, segments: &[Range<usize>]) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2();
        let mut out = vec![0.0; segments.len() * c];
        for (s, seg) in segments.iter().enumerate() {
            if seg.is_empty() || seg.end > r {
                return Err(Error::Degenerate(format!(
                    "segment {s} ({seg:?}) is empty or exceeds {r} rows"
                )));
            }
            let orow = &mut out[s * c..(s + 1) * c];
            for i in seg.clone() {
                for (o, x) in orow.iter_mut().zip(ta.row(i)) {
                    *o += x;
                }
            }
            let n = seg.len() as f64;
            orow.iter_mut().for_each(|x| *x /= n);
        }
        let value = Tensor::new(vec![segments.len(), c], out)?;
        Ok(self.push(
            Op::SegmentMean {
                a,
                segments: segments.to_vec(),
            },
            value,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).numel() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        let (r, c) = tl.dims2();
        if targets.is_empty() {
            return Err(Error::InvalidArgument("cross-entropy of an empty batch".into()));
        }
        if targets.len() != r {
            return Err(Error::shape("cross_entropy", tl.shape(), &[targets.len()]));
        }
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            if t >= c {
                return Err(Error::InvalidArgument(format!("class {t} >= {c}")));
            }
            total += log_sum_exp(tl.row(i)) - tl.row(i)[t];
        }
        let value = Tensor::scalar(total / r as f64);
        Ok(self.push(
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
            value,
        ))
    }

    /// Mean absolute error between a `[n × 1]` (or `[n]`) prediction and targets.
    pub fn abs_error(&mut self, pred: Var, targets: &[f64]) -> Result<Var> {
        let tp = self.value(pred);
        if targets.is_empty() {
            return Err(Error::InvalidArgument("MAE of an empty batch".into()));
        }
        if tp.numel() != targets.len() {
            return Err(Error::shape("abs_error", tp.shape(), &[targets.len()]));
        }
        let total: f64 = tp
            .data()
            .iter()
            .zip(targets)
            .map(|(p, y)| (p - y).abs())
            .sum();
        let value = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(
            Op::AbsError {
                pred,
                targets: targets.to_vec(),
            },
            value,
        ))
    }

    /// Propagates d`loss`/d(node) back through the tape and returns the
    /// gradients reaching each parameter. Parameters off the path get `None`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.numel() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let out = node.value.as_ref();
            match &node.op {
                Op::Constant => {}
                Op::Param(_) => {
                    grads[idx] = Some(g);
                }
                Op::MatMul { a, b, trans_b } => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = ta.dims2();
                    let n = if *trans_b { tb.rows() } else { tb.cols() };
                    let (ad, bd) = (ta.data(), tb.data());
                    // dA = G · B (trans_b) or G · Bᵀ
                    let mut da = vec![0.0; m * k];
                    let mut db = vec![0.0; tb.numel()];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        let arow = &ad[i * k..(i + 1) * k];
                        let darow = &mut da[i * k..(i + 1) * k];
                        for (j, &gv) in grow.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            if *trans_b {
                                let brow = &bd[j * k..(j + 1) * k];
                                for p in 0..k {
                                    darow[p] += gv * brow[p];
                                }
                                let dbrow = &mut db[j * k..(j + 1) * k];
                                for p in 0..k {
                                    dbrow[p] += gv * arow[p];
                                }
                            } else {
                                for p in 0..k {
                                    darow[p] += gv * bd[p * n + j];
                                    db[p * n + j] += arow[p] * gv;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *a, &da);
                    accumulate(&mut grads, *b, &db);
                }
                Op::Binary(kind, a, b) => match kind {
                    Binary::Add => {
                        accumulate(&mut grads, *a, &g);
                        accumulate(&mut grads, *b, &g);
                    }
                    Binary::Mul => {
                        let (ta, tb) = (self.value(*a), self.value(*b));
                        let da: Vec<f64> = g.iter().zip(tb.data()).map(|(g, y)| g * y).collect();
                        let db: Vec<f64> = g.iter().zip(ta.data()).map(|(g, x)| g * x).collect();
                        accumulate(&mut grads, *a, &da);
                        accumulate(&mut grads, *b, &db);
                    }
                },
                Op::AddRow { a, row } => {
                    let c = self.value(*row).numel();
                    let mut dr = vec![0.0; c];
                    for chunk in g.chunks(c) {
                        for (d, x) in dr.iter_mut().zip(chunk) {
                            *d += x;
                        }
                    }
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *row, &dr);
                }
                Op::MulCol { a, col } => {
                    let (ta, tc) = (self.value(*a), self.value(*col));
                    let c = ta.cols();
                    let mut da = vec![0.0; g.len()];
                    let mut dc = vec![0.0; tc.numel()];
                    for (r, s) in tc.data().iter().enumerate() {
                        for j in 0..c {
                            da[r * c + j] = g[r * c + j] * s;
                            dc[r] += g[r * c + j] * ta.data()[r * c + j];
                        }
                    }
                    accumulate(&mut grads, *a, &da);
                    accumulate(&mut grads, *col, &dc);
                }
                Op::Scale(a, f) => {
                    let da: Vec<f64> = g.iter().map(|x| x * f).collect();
                    accumulate(&mut grads, *a, &da);
                }
                Op::Unary(kind, a) => {
                    let y = out.expect("unary output").data();
                    let x = self.value(*a).data();
                    let da: Vec<f64> = g
                        .iter()
                        .zip(y.iter().zip(x))
                        .map(|(g, (y, x))| match kind {
                            Unary::Tanh => g * (1.0 - y * y),
                            Unary::Sigmoid => g * y * (1.0 - y),
                            Unary::Relu => {
                                if *x > 0.0 {
                                    *g
                                } else {
                                    0.0
                                }
                            }
                        })
                        .collect();
                    accumulate(&mut grads, *a, &da);
                }
                Op::Softmax { a } => {
                    let y = out.expect("softmax output");
                    let (r, c) = y.dims2();
                    let mut da = vec![0.0; r * c];
                    for i in 0..r {
                        let yr = &y.data()[i * c..(i + 1) * c];
                        let gr = &g[i * c..(i + 1) * c];
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for j in 0..c {
                            da[i * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, &da);
                }
                Op::ConcatCols(parts) => {
                    let rows = out.expect("concat output").rows();
                    let total = g.len() / rows;
                    let mut offset = 0;
                    for p in parts {
                        let c = self.value(*p).cols();
                        let mut dp = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            dp.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                        }
                        accumulate(&mut grads, *p, &dp);
                        offset += c;
                    }
                }
                Op::SliceCols { a, start } => {
                    let ta = self.value(*a);
                    let (r, c) = ta.dims2();
                    let w = g.len() / r;
                    let mut da = vec![0.0; r * c];
                    for i in 0..r {
                        da[i * c + start..i * c + start + w].copy_from_slice(&g[i * w..(i + 1) * w]);
                    }
                    accumulate(&mut grads, *a, &da);
                }
                Op::SelectRows { a, index } => {
                    let ta = self.value(*a);
                    let c = ta.cols();
                    let slot = grads[a.0].get_or_insert_with(|| vec![0.0; ta.numel()]);
                    for (dst, src) in index.iter().enumerate() {
                        if let Some(s) = *src {
                            for j in 0..c {
                                slot[s * c + j] += g[dst * c + j];
                            }
                        }
                    }
                }
                Op::Where { keep_new, new, old } => {
                    let c = g.len() / keep_new.len();
                    let mut dn = vec![0.0; g.len()];
                    let mut dold = vec![0.0; g.len()];
                    for (r, &k) in keep_new.iter().enumerate() {
                        let dst = if k { &mut dn } else { &mut dold };
                        dst[r * c..(r + 1) * c].copy_from_slice(&g[r * c..(r + 1) * c]);
                    }
                    accumulate(&mut grads, *new, &dn);
                    accumulate(&mut grads, *old, &dold);
                }
                Op::SegmentMean { a, segments } => {
                    let ta = self.value(*a);
                    let c = ta.cols();
                    let slot = grads[a.0].get_or_insert_with(|| vec![0.0; ta.numel()]);
                    for (s, seg) in segments.iter().enumerate() {
                        let n = seg.len() as f64;
                        for i in seg.clone() {
                            for j in 0..c {
                                slot[i * c + j] += g[s * c + j] / n;
                            }
                        }
                    }
                }
                Op::Sum(a) => {
                    let da = vec![g[0]; self.value(*a).numel()];
                    accumulate(&mut grads, *a, &da);
                }
                Op::CrossEntropy { logits, targets } => {
                    let tl = self.value(*logits);
                    let (r, c) = tl.dims2();
                    let mut dl = vec![0.0; r * c];
                    for (i, &t) in targets.iter().enumerate() {
                        let row = tl.row(i);
                        let lse = log_sum_exp(row);
                        for j in 0..c {
                            let p = (row[j] - lse).exp();
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            dl[i * c + j] = g[0] * (p - onehot) / r as f64;
                        }
                    }
                    accumulate(&mut grads, *logits, &dl);
                }
                Op::AbsError { pred, targets } => {
                    let tp = self.value(*pred);
                    let n = targets.len() as f64;
                    let dp: Vec<f64> = tp
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(p, y)| g[0] * sign(p - y) / n)
                        .collect();
                    accumulate(&mut grads, *pred, &dp);
                }
            }
        }

        let mut out = vec![None; self.store.len()];
        for (pid, var) in self.param_vars.iter().enumerate() {
            if let Some(v) = var {
                if v.0 < grads.len() {
                    out[pid] = grads[v.0].take();
                }
            }
        }
        Ok(Gradients { grads: out })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, delta: &[f64]) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(delta) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta.to_vec()),
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

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl Tape<'_> {
    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`.
    pub fn dropout<R: rand::Rng + ?Sized>(
        &mut self,
        x: Var,
        p: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let shape = self.value(x).shape().to_vec();
        let keep = 1.0 / (1.0 - p);
        let mask = (0..self.value(x).numel())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let mask = self.constant(Tensor::new(shape, mask)?);
        self.mul(x, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Central finite differences on every parameter element, compared with
    /// the analytic gradient from `backward`.
    fn check_gradients<F>(store: &mut ParamStore, build: F, tol: f64)
    where
        F: Fn(&mut Tape) -> Var,
    {
        let h = 1e-5;
        let analytic = {
            let mut tape = Tape::new(store);
            let loss = build(&mut tape);
            tape.backward(loss).unwrap()
        };
        let eval = |store: &ParamStore| {
            let mut tape = Tape::new(store);
            let loss = build(&mut tape);
            tape.value(loss).item()
        };
        for pid in 0..store.len() {
            let id = ParamId(pid);
            for i in 0..store.tensor(id).numel() {
                let orig = store.tensor(id).data()[i];
                store.get_mut(id).tensor.data_mut()[i] = orig + h;
                let plus = eval(store);
                store.get_mut(id).tensor.data_mut()[i] = orig - h;
                let minus = eval(store);
                store.get_mut(id).tensor.data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let exact = analytic.get(id).map_or(0.0, |g| g[i]);
                let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < tol,
                    "param {pid} elem {i}: analytic {exact} numeric {numeric} rel {rel}"
                );
            }
        }
    }

    /// Weighted sum against fixed random coefficients, so upstream gradients are not uniform.
    fn probe(tape: &mut Tape, x: Var, seed: u64) -> Var {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random(&mut rng, tape.value(x).shape());
        let w = tape.constant(w);
        let y = tape.mul(x, w).unwrap();
        tape.sum(y)
    }

    #[test]
    fn matmul_identity_and_orthogonal() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let eye = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let m = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let p = tape.matmul(eye, m).unwrap();
        assert_eq!(tape.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);

        let a = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap());
        let b = tape.constant(Tensor::from_rows(&[vec![0.0], vec![1.0]]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).shape(), &[1, 1]);
        assert_eq!(tape.value(c).item(), 0.0);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(matches!(err, Error::Shape { .. }));
        assert!(tape.matmul_bt(a, b).is_ok());
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let a = store.add("a", random(&mut rng, &[3, 4]));
        let b = store.add("b", random(&mut rng, &[4, 2]));
        let bt = store.add("bt", random(&mut rng, &[2, 4]));
        check_gradients(
            &mut store,
            |t| {
                let (a, b, bt) = (t.param(a), t.param(b), t.param(bt));
                let c = t.matmul(a, b).unwrap();
                let d = t.matmul_bt(a, bt).unwrap();
                let e = t.add(c, d).unwrap();
                probe(t, e, 99)
            },
            1e-4,
        );
    }

    #[test]
    fn elementwise_values() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let z = tape.constant(Tensor::scalar(0.0));
        let th = tape.tanh(z);
        let sg = tape.sigmoid(z);
        assert_eq!(tape.value(th).item(), 0.0);
        assert_eq!(tape.value(sg).item(), 0.5);
        let a = tape.constant(Tensor::zeros(&[2]));
        let b = tape.constant(Tensor::zeros(&[3]));
        assert!(matches!(tape.add(a, b), Err(Error::Shape { .. })));
        assert!(matches!(tape.mul(a, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn tanh_gradient_at_point_three() {
        let mut store = ParamStore::new();
        let x = store.add("x", Tensor::scalar(0.3));
        let analytic = {
            let mut t = Tape::new(&store);
            let v = t.param(x);
            let y = t.tanh(v);
            t.backward(y).unwrap().get(x).unwrap()[0]
        };
        let h = 1e-5;
        let numeric = ((0.3f64 + h).tanh() - (0.3f64 - h).tanh()) / (2.0 * h);
        assert!((analytic - numeric).abs() / numeric.abs() < 1e-4);
    }

    #[test]
    fn elementwise_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let a = store.add("a", random(&mut rng, &[3, 5]));
        let b = store.add("b", random(&mut rng, &[3, 5]));
        // keep relu inputs away from the kink
        let mut shifted = random(&mut rng, &[3, 5]);
        shifted.data_mut().iter_mut().for_each(|x| *x += x.signum() * 0.1);
        let c = store.add("c", shifted);
        check_gradients(
            &mut store,
            |t| {
                let (a, b, c) = (t.param(a), t.param(b), t.param(c));
                let s = t.sigmoid(a);
                let th = t.tanh(b);
                let r = t.relu(c);
                let m = t.mul(s, th).unwrap();
                let sum = t.add(m, r).unwrap();
                let sc = t.scale(sum, 1.7);
                probe(t, sc, 3)
            },
            1e-4,
        );
    }

    #[test]
    fn structural_ops_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let a = store.add("a", random(&mut rng, &[4, 3]));
        let b = store.add("b", random(&mut rng, &[4, 2]));
        let row = store.add("row", random(&mut rng, &[5]));
        let col = store.add("col", random(&mut rng, &[4, 1]));
        check_gradients(
            &mut store,
            |t| {
                let (a, b, row, col) = (t.param(a), t.param(b), t.param(row), t.param(col));
                let cat = t.concat_cols(&[a, b]).unwrap();
                let biased = t.add_row(cat, row).unwrap();
                let scaled = t.mul_col(biased, col).unwrap();
                let left = t.slice_cols(scaled, 1, 4).unwrap();
                let picked = t.select_rows(left, &[Some(2), None, Some(0), Some(2)]).unwrap();
                let other = t.slice_cols(scaled, 0, 3).unwrap();
                let chosen = t.where_rows(&[true, false, true, false], picked, other).unwrap();
                let seg = t.segment_mean(chosen, &[0..1, 1..4]).unwrap();
                probe(t, seg, 5)
            },
            1e-4,
        );
    }

    #[test]
    fn softmax_and_losses_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let a = store.add("a", random(&mut rng, &[3, 4]));
        let logits = store.add("logits", random(&mut rng, &[3, 2]));
        let pred = store.add("pred", random(&mut rng, &[3, 1]));
        let mask = [true, true, false, true, false, true, true, true, true, false, false, true];
        check_gradients(
            &mut store,
            |t| {
                let (a, l, p) = (t.param(a), t.param(logits), t.param(pred));
                let s = t.softmax(a, Some(&mask)).unwrap();
                let s = probe(t, s, 7);
                let ce = t.cross_entropy(l, &[0, 1, 1]).unwrap();
                let mae = t.abs_error(p, &[5.0, -5.0, 0.5 + 10.0]).unwrap();
                let x = t.add(s, ce).unwrap();
                t.add(x, mae).unwrap()
            },
            1e-4,
        );
    }

    #[test]
    fn softmax_examples() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::new(vec![2], vec![0.0, 0.0]).unwrap());
        let y = tape.softmax(x, None).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);

        let x = tape.constant(Tensor::new(vec![3], vec![5.0, 5.0, 5.0]).unwrap());
        let y = tape.softmax(x, Some(&[true, true, false])).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5, 0.0]);

        let x = tape.constant(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let y = tape.softmax(x, None).unwrap();
        // direct formula: e^i / (e + e^2 + e^3)
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        for (i, v) in tape.value(y).data().iter().enumerate() {
            assert!((v - ((i + 1) as f64).exp() / z).abs() < 1e-15);
        }

        let err = tape.softmax(x, Some(&[false, false, false])).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn dropout_behaviour() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = tape.constant(random(&mut rng, &[100_000]));
        let same = tape.dropout(x, 0.0, true, &mut rng).unwrap();
        assert_eq!(same, x);
        let eval = tape.dropout(x, 0.5, false, &mut rng).unwrap();
        assert_eq!(eval, x);
        let d = tape.dropout(x, 0.5, true, &mut rng).unwrap();
        let zeros = tape.value(d).data().iter().filter(|&&v| v == 0.0).count();
        let frac = zeros as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.01, "zero fraction {frac}");
        let (xs, ds) = (tape.value(x).data(), tape.value(d).data());
        for (a, b) in xs.iter().zip(ds) {
            assert!(*b == 0.0 || (b - 2.0 * a).abs() < 1e-15);
        }
        assert!(tape.dropout(x, 1.0, true, &mut rng).is_err());
        assert!(tape.dropout(x, -0.1, true, &mut rng).is_err());
    }

    #[test]
    fn backward_basic_cases() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(vec![2, 3], vec![0.5; 6]).unwrap());
        let s = store.add("s", Tensor::scalar(3.0));
        let unused = store.add("unused", Tensor::scalar(1.0));

        let mut tape = Tape::new(&store);
        let wv = tape.param(w);
        let loss = tape.sum(wv);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap(), &[1.0; 6]);
        assert!(g.get(unused).is_none());

        let mut tape = Tape::new(&store);
        let sv = tape.param(s);
        let sq = tape.mul(sv, sv).unwrap();
        let g = tape.backward(sq).unwrap();
        assert_eq!(g.get(s).unwrap(), &[6.0]);

        let mut tape = Tape::new(&store);
        let wv = tape.param(w);
        assert!(matches!(tape.backward(wv), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn tape_is_topologically_ordered() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(2.0));
        let mut tape = Tape::new(&store);
        let a = tape.param(w);
        let b = tape.param(w);
        assert_eq!(a, b);
        let c = tape.mul(a, b).unwrap();
        let d = tape.tanh(c);
        assert!(a.0 < c.0 && c.0 < d.0);
        assert_eq!(tape.len(), 3);
    }

    proptest! {
        #[test]
        fn softmax_normalizes(values in prop::collection::vec(-50.0f64..50.0, 1..20), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mask: Vec<bool> = values.iter().map(|_| rng.random_bool(0.7)).collect();
            mask[0] = true;
            let store = ParamStore::new();
            let mut tape = Tape::new(&store);
            let x = tape.constant(Tensor::new(vec![values.len()], values.clone()).unwrap());
            let y = tape.softmax(x, Some(&mask)).unwrap();
            let out = tape.value(y).data();
            let total: f64 = out.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for (v, m) in out.iter().zip(&mask) {
                prop_assert!(*v >= 0.0);
                if !m { prop_assert_eq!(*v, 0.0); }
            }
        }
    }
}
