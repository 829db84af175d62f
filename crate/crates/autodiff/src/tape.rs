//! Reverse-mode tape with optional graph recording of the backward pass.
//!
//! Gradients can be taken in two modes. [`Tape::gradients`] evaluates the
//! adjoints eagerly and returns plain tensors. [`Tape::gradients_graph`]
//! records every adjoint computation back onto the tape, so the returned
//! gradients are themselves [`Var`]s and can be differentiated again. This
//! is what makes `D(x) / |grad_x D(x)|` trainable.
//!
//! Both modes share one vector-Jacobian rule per primitive: the rules are
//! written against [`Builder`], whose handle type is either a node id
//! (recording) or a tensor (eager).

use std::cell::RefCell;
use std::fmt;
use std::ops;
use std::rc::Rc;

use crate::error::AdError;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
enum Op<H> {
    Leaf,
    Add(H, H),
    Sub(H, H),
    Mul(H, H),
    Div(H, H),
    /// `scale * x + shift`
    Affine(H, f64, f64),
    /// `op(a) * op(b)`, flags transpose the operands
    MatMul(H, H, bool, bool),
    AddRow(H, H),
    Sum(H),
    SumRows(H),
    SumCols(H),
    BroadcastScalar(H, usize, usize),
    BroadcastRows(H, usize),
    BroadcastCols(H, usize),
    Tanh(H),
    Relu(H),
    Abs(H),
    Square(H),
    Sqrt(H),
    Sin(H),
    Cos(H),
    Clamp(H, f64, f64),
    ConcatCols(Vec<H>),
    SliceCols(H, usize, usize),
    PadCols(H, usize, usize),
}

impl<H> Op<H> {
    fn for_each_operand(&self, mut f: impl FnMut(&H)) {
        use Op::*;
        match self {
            Leaf => {}
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | MatMul(a, b, ..) | AddRow(a, b) => {
                f(a);
                f(b);
            }
            Affine(a, ..)
            | Sum(a)
            | SumRows(a)
            | SumCols(a)
            | BroadcastScalar(a, ..)
            | BroadcastRows(a, _)
            | BroadcastCols(a, _)
            | Tanh(a)
            | Relu(a)
            | Abs(a)
            | Square(a)
            | Sqrt(a)
            | Sin(a)
            | Cos(a)
            | Clamp(a, ..)
            | SliceCols(a, ..)
            | PadCols(a, ..) => f(a),
            ConcatCols(parts) => parts.iter().for_each(f),
        }
    }
}

/// Forward rule shared by recording, eager adjoints and replay.
fn eval<H>(op: &Op<H>, v: impl Fn(&H) -> Rc<Tensor>) -> Tensor {
    use Op::*;
    match op {
        Leaf => unreachable!("leaves carry their own value"),
        Add(a, b) => v(a).add(&v(b)),
        Sub(a, b) => v(a).sub(&v(b)),
        Mul(a, b) => v(a).mul(&v(b)),
        Div(a, b) => v(a).div(&v(b)),
        Affine(a, s, c) => v(a).affine(*s, *c),
        MatMul(a, b, ta, tb) => v(a).matmul(&v(b), *ta, *tb),
        AddRow(a, r) => v(a).add_row(&v(r)),
        Sum(a) => Tensor::scalar(v(a).sum()),
        SumRows(a) => v(a).sum_rows(),
        SumCols(a) => v(a).sum_cols(),
        BroadcastScalar(a, r, c) => Tensor::filled(*r, *c, v(a).item()),
        BroadcastRows(a, r) => v(a).broadcast_rows(*r),
        BroadcastCols(a, c) => v(a).broadcast_cols(*c),
        Tanh(a) => v(a).map(crate::tensor::tanh),
        Relu(a) => v(a).map(|x| if x > 0.0 { x } else { 0.0 }),
        Abs(a) => v(a).map(f64::abs),
        Square(a) => v(a).map(|x| x * x),
        Sqrt(a) => v(a).map(f64::sqrt),
        Sin(a) => v(a).map(f64::sin),
        Cos(a) => v(a).map(f64::cos),
        Clamp(a, lo, hi) => v(a).map(|x| x.clamp(*lo, *hi)),
        ConcatCols(parts) => {
            let vals: Vec<Rc<Tensor>> = parts.iter().map(&v).collect();
            let refs: Vec<&Tensor> = vals.iter().map(|t| t.as_ref()).collect();
            Tensor::concat_cols(&refs)
        }
        SliceCols(a, start, len) => v(a).slice_cols(*start, *len),
        PadCols(a, start, total) => v(a).pad_cols(*start, *total),
    }
}

struct Node {
    op: Op<usize>,
    value: Rc<Tensor>,
}

/// Append-only record of primitive operations.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, c) = self.shape();
        write!(f, "Var#{}({r}x{c})", self.id)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an input, parameter or constant.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op: Op::Leaf,
            value: Rc::new(value),
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn concat_cols<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        let ids = parts
            .iter()
            .map(|p| {
                assert!(std::ptr::eq(p.tape, self), "variable from another tape");
                p.id
            })
            .collect();
        self.var(Op::ConcatCols(ids))
    }

    fn var(&self, op: Op<usize>) -> Var<'_> {
        Var {
            tape: self,
            id: self.push(op),
        }
    }

    fn push(&self, op: Op<usize>) -> usize {
        let value = {
            let nodes = self.nodes.borrow();
            eval(&op, |&i| Rc::clone(&nodes[i].value))
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value: Rc::new(value),
        });
        nodes.len() - 1
    }

    fn value_of(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn check<'t>(&'t self, v: &Var<'t>) -> Result<usize, AdError> {
        if std::ptr::eq(v.tape, self) && v.id < self.len() {
            Ok(v.id)
        } else {
            Err(AdError::ForeignVar)
        }
    }

    /// Re-evaluates every recorded node from the leaves.
    pub fn replay(&self) -> Vec<Tensor> {
        let nodes = self.nodes.borrow();
        let mut values: Vec<Rc<Tensor>> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let value = match node.op {
                Op::Leaf => Rc::clone(&node.value),
                ref op => Rc::new(eval(op, |&i| Rc::clone(&values[i]))),
            };
            values.push(value);
        }
        values.into_iter().map(|v| (*v).clone()).collect()
    }

    /// Vector-Jacobian product of `output` seeded with `adjoint`.
    pub fn backward<'t>(
        &'t self,
        output: Var<'t>,
        adjoint: Tensor,
        wrt: &[Var<'t>],
    ) -> Result<Vec<Tensor>, AdError> {
        let out = self.check(&output)?;
        if adjoint.shape() != output.shape() {
            return Err(AdError::Shape(format!(
                "adjoint {:?} does not match output {:?}",
                adjoint.shape(),
                output.shape()
            )));
        }
        let wrt = wrt
            .iter()
            .map(|w| self.check(w))
            .collect::<Result<Vec<_>, _>>()?;
        let builder = Eager { tape: self };
        let grads = self.reverse(&builder, out, Rc::new(adjoint), &wrt)?;
        Ok(grads.into_iter().map(|g| (*g).clone()).collect())
    }

    /// Gradients of a scalar output, evaluated eagerly.
    pub fn gradients<'t>(&'t self, output: Var<'t>, wrt: &[Var<'t>]) -> Result<Vec<Tensor>, AdError> {
        require_scalar(&output)?;
        self.backward(output, Tensor::scalar(1.0), wrt)
    }

    /// Gradients of a scalar output, recorded on the tape so they can be
    /// differentiated again.
    pub fn gradients_graph<'t>(
        &'t self,
        output: Var<'t>,
        wrt: &[Var<'t>],
    ) -> Result<Vec<Var<'t>>, AdError> {
        require_scalar(&output)?;
        let out = self.check(&output)?;
        let wrt = wrt
            .iter()
            .map(|w| self.check(w))
            .collect::<Result<Vec<_>, _>>()?;
        let seed = self.push_leaf(Tensor::scalar(1.0));
        let grads = self.reverse(&Recording { tape: self }, out, seed, &wrt)?;
        Ok(grads.into_iter().map(|id| Var { tape: self, id }).collect())
    }

    /// `grad_x output` for a scalar output, recorded for double backprop.
    pub fn input_gradient<'t>(&'t self, output: Var<'t>, input: Var<'t>) -> Result<Var<'t>, AdError> {
        Ok(self.gradients_graph(output, &[input])?.remove(0))
    }

    fn push_leaf(&self, value: Tensor) -> usize {
        self.leaf(value).id
    }

    /// Marks nodes at or below `out` that depend on any of `wrt`.
    fn dependency_mask(&self, out: usize, wrt: &[usize]) -> Vec<bool> {
        let nodes = self.nodes.borrow();
        let mut needed = vec![false; out + 1];
        for &w in wrt {
            if w <= out {
                needed[w] = true;
            }
        }
        for id in 0..=out {
            if needed[id] {
                continue;
            }
            let mut any = false;
            nodes[id].op.for_each_operand(|&p| any |= needed[p]);
            needed[id] = any;
        }
        needed
    }

    fn reverse<B: Builder>(
        &self,
        b: &B,
        out: usize,
        seed: B::V,
        wrt: &[usize],
    ) -> Result<Vec<B::V>, AdError> {
        let needed = self.dependency_mask(out, wrt);
        let mut keep = vec![false; out + 1];
        for &w in wrt {
            if w <= out {
                keep[w] = true;
            }
        }
        let mut grads: Vec<Option<B::V>> = vec![None; out + 1];
        if needed[out] {
            grads[out] = Some(seed);
        }
        for id in (0..=out).rev() {
            if !needed[id] {
                continue;
            }
            let Some(g) = grads[id].clone() else { continue };
            if !keep[id] {
                grads[id] = None;
            }
            let op = self.nodes.borrow()[id].op.clone();
            if matches!(op, Op::Leaf) {
                continue;
            }
            for (p, gp) in vjp(b, &op, id, &g, &needed)? {
                grads[p] = Some(match grads[p].take() {
                    Some(acc) => b.emit(Op::Add(acc, gp)),
                    None => gp,
                });
            }
        }
        Ok(wrt
            .iter()
            .map(|&w| match grads.get(w).and_then(|g| g.clone()) {
                Some(g) => g,
                None => {
                    let (r, c) = self.value_of(w).shape();
                    b.constant(Tensor::zeros(r, c))
                }
            })
            .collect())
    }
}

fn require_scalar(v: &Var<'_>) -> Result<(), AdError> {
    match v.shape() {
        (1, 1) => Ok(()),
        (rows, cols) => Err(AdError::NonScalar { rows, cols }),
    }
}

trait Builder {
    type V: Clone;
    /// Whether emitted operations are recorded (and so must be differentiable again).
    const RECORDING: bool;
    fn tape(&self) -> &Tape;
    fn node(&self, id: usize) -> Self::V;
    fn constant(&self, t: Tensor) -> Self::V;
    fn emit(&self, op: Op<Self::V>) -> Self::V;
}

struct Recording<'a> {
    tape: &'a Tape,
}

impl Builder for Recording<'_> {
    type V = usize;
    const RECORDING: bool = true;
    fn tape(&self) -> &Tape {
        self.tape
    }
    fn node(&self, id: usize) -> usize {
        id
    }
    fn constant(&self, t: Tensor) -> usize {
        self.tape.push_leaf(t)
    }
    fn emit(&self, op: Op<usize>) -> usize {
        self.tape.push(op)
    }
}

struct Eager<'a> {
    tape: &'a Tape,
}

impl Builder for Eager<'_> {
    type V = Rc<Tensor>;
    const RECORDING: bool = false;
    fn tape(&self) -> &Tape {
        self.tape
    }
    fn node(&self, id: usize) -> Rc<Tensor> {
        self.tape.value_of(id)
    }
    fn constant(&self, t: Tensor) -> Rc<Tensor> {
        Rc::new(t)
    }
    fn emit(&self, op: Op<Rc<Tensor>>) -> Rc<Tensor> {
        Rc::new(eval(&op, Rc::clone))
    }
}

/// Adjoint contributions of node `out` to its operands.
fn vjp<B: Builder>(
    b: &B,
    op: &Op<usize>,
    out: usize,
    g: &B::V,
    needed: &[bool],
) -> Result<Vec<(usize, B::V)>, AdError> {
    use Op::*;
    let tape = b.tape();
    let n = |i: usize| b.node(i);
    let shape = |i: usize| tape.value_of(i).shape();
    let g = || g.clone();
    let mut contrib = Vec::with_capacity(2);
    let mut push = |i: usize, f: &dyn Fn() -> B::V| {
        if needed[i] {
            contrib.push((i, f()));
        }
    };
    match *op {
        Leaf => {}
        Add(x, y) => {
            push(x, &g);
            push(y, &g);
        }
        Sub(x, y) => {
            push(x, &g);
            push(y, &|| b.emit(Affine(g(), -1.0, 0.0)));
        }
        Mul(x, y) => {
            push(x, &|| b.emit(Mul(g(), n(y))));
            push(y, &|| b.emit(Mul(g(), n(x))));
        }
        Div(x, y) => {
            push(x, &|| b.emit(Div(g(), n(y))));
            push(y, &|| {
                let t = b.emit(Mul(g(), n(out)));
                let t = b.emit(Div(t, n(y)));
                b.emit(Affine(t, -1.0, 0.0))
            });
        }
        Affine(x, s, _) => push(x, &|| b.emit(Affine(g(), s, 0.0))),
        MatMul(x, y, ta, tb) => {
            push(x, &|| {
                if ta {
                    b.emit(MatMul(n(y), g(), tb, true))
                } else {
                    b.emit(MatMul(g(), n(y), false, !tb))
                }
            });
            push(y, &|| {
                if tb {
                    b.emit(MatMul(g(), n(x), true, ta))
                } else {
                    b.emit(MatMul(n(x), g(), !ta, false))
                }
            });
        }
        AddRow(x, r) => {
            push(x, &g);
            push(r, &|| b.emit(SumRows(g())));
        }
        Sum(x) => {
            let (r, c) = shape(x);
            push(x, &|| b.emit(BroadcastScalar(g(), r, c)));
        }
        SumRows(x) => {
            let r = shape(x).0;
            push(x, &|| b.emit(BroadcastRows(g(), r)));
        }
        SumCols(x) => {
            let c = shape(x).1;
            push(x, &|| b.emit(BroadcastCols(g(), c)));
        }
        BroadcastScalar(x, ..) => push(x, &|| b.emit(Sum(g()))),
        BroadcastRows(x, _) => push(x, &|| b.emit(SumRows(g()))),
        BroadcastCols(x, _) => push(x, &|| b.emit(SumCols(g()))),
        Tanh(x) => push(x, &|| {
            let y2 = b.emit(Square(n(out)));
            let d = b.emit(Affine(y2, -1.0, 1.0));
            b.emit(Mul(g(), d))
        }),
        Relu(x) => push(x, &|| {
            let mask = tape.value_of(x).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
            b.emit(Mul(g(), b.constant(mask)))
        }),
        Abs(x) => push(x, &|| {
            let sign = tape.value_of(x).map(|v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            });
            b.emit(Mul(g(), b.constant(sign)))
        }),
        Square(x) => push(x, &|| {
            let two_x = b.emit(Affine(n(x), 2.0, 0.0));
            b.emit(Mul(g(), two_x))
        }),
        Sqrt(x) => push(x, &|| {
            let t = b.emit(Div(g(), n(out)));
            b.emit(Affine(t, 0.5, 0.0))
        }),
        Sin(x) => {
            if B::RECORDING && needed[x] {
                return Err(AdError::UnsupportedSecondOrder("sin"));
            }
            push(x, &|| b.emit(Mul(g(), b.emit(Cos(n(x))))));
        }
        Cos(x) => {
            if B::RECORDING && needed[x] {
                return Err(AdError::UnsupportedSecondOrder("cos"));
            }
            push(x, &|| {
                let s = b.emit(Sin(n(x)));
                b.emit(Mul(g(), b.emit(Affine(s, -1.0, 0.0))))
            });
        }
        Clamp(x, lo, hi) => push(x, &|| {
            let mask = tape
                .value_of(x)
                .map(|v| if v > lo && v < hi { 1.0 } else { 0.0 });
            b.emit(Mul(g(), b.constant(mask)))
        }),
        ConcatCols(ref parts) => {
            let mut offset = 0;
            for &p in parts {
                let width = shape(p).1;
                let start = offset;
                push(p, &|| b.emit(SliceCols(g(), start, width)));
                offset += width;
            }
        }
        SliceCols(x, start, _) => {
            let total = shape(x).1;
            push(x, &|| b.emit(PadCols(g(), start, total)));
        }
        PadCols(x, start, _) => {
            let width = shape(x).1;
            push(x, &|| b.emit(SliceCols(g(), start, width)));
        }
    }
    Ok(contrib)
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().shape()
    }

    fn unary(self, op: Op<usize>) -> Var<'t> {
        self.tape.var(op)
    }

    fn binary(self, other: Var<'t>, op: impl FnOnce(usize, usize) -> Op<usize>) -> Var<'t> {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables from different tapes"
        );
        self.tape.var(op(self.id, other.id))
    }

    pub fn div(self, other: Var<'t>) -> Var<'t> {
        self.binary(other, Op::Div)
    }

    pub fn affine(self, scale: f64, shift: f64) -> Var<'t> {
        self.unary(Op::Affine(self.id, scale, shift))
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        self.affine(k, 0.0)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        self.affine(1.0, c)
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        self.binary(other, |a, b| Op::MatMul(a, b, false, false))
    }

    /// `op(self) * op(other)` with optional transposes.
    pub fn matmul_t(self, other: Var<'t>, trans_self: bool, trans_other: bool) -> Var<'t> {
        self.binary(other, |a, b| Op::MatMul(a, b, trans_self, trans_other))
    }

    /// Adds a `1 x cols` row to every row.
    pub fn add_row(self, row: Var<'t>) -> Var<'t> {
        self.binary(row, Op::AddRow)
    }

    pub fn sum(self) -> Var<'t> {
        self.unary(Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len() as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn sum_rows(self) -> Var<'t> {
        self.unary(Op::SumRows(self.id))
    }

    pub fn sum_cols(self) -> Var<'t> {
        self.unary(Op::SumCols(self.id))
    }

    pub fn broadcast_scalar(self, rows: usize, cols: usize) -> Var<'t> {
        self.unary(Op::BroadcastScalar(self.id, rows, cols))
    }

    pub fn broadcast_rows(self, rows: usize) -> Var<'t> {
        self.unary(Op::BroadcastRows(self.id, rows))
    }

    pub fn broadcast_cols(self, cols: usize) -> Var<'t> {
        self.unary(Op::BroadcastCols(self.id, cols))
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Op::Tanh(self.id))
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Op::Relu(self.id))
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(Op::Abs(self.id))
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Op::Square(self.id))
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(Op::Sqrt(self.id))
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Op::Sin(self.id))
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Op::Cos(self.id))
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        self.unary(Op::Clamp(self.id, lo, hi))
    }

    pub fn slice_cols(self, start: usize, len: usize) -> Var<'t> {
        self.unary(Op::SliceCols(self.id, start, len))
    }

    pub fn pad_cols(self, start: usize, total: usize) -> Var<'t> {
        self.unary(Op::PadCols(self.id, start, total))
    }
}

impl<'t> ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Add)
    }
}

impl<'t> ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Sub)
    }
}

impl<'t> ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Mul)
    }
}

impl<'t> ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::column(v)
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::row(&[1.0, -2.0, 3.0]));
        let w = tape.leaf(Tensor::from_vec(2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap());
        let y = x.matmul_t(w, false, true);
        let seed = Tensor::row(&[2.0, -1.0]);
        let gw = tape.backward(y, seed, &[w]).unwrap().remove(0);
        let expect = Tensor::from_vec(2, 3, vec![2.0, -4.0, 6.0, -1.0, 2.0, -3.0]).unwrap();
        assert_eq!(gw, expect);
    }

    #[test]
    fn gradient_of_sum_of_heads_is_sum_of_gradients() {
        let tape = Tape::new();
        let x = tape.leaf(col(&[0.3, -0.7, 1.1]));
        let a = x.tanh().sum();
        let b = x.square().sum();
        let both = (a + b).sum();
        let ga = tape.gradients(a, &[x]).unwrap().remove(0);
        let gb = tape.gradients(b, &[x]).unwrap().remove(0);
        let gab = tape.gradients(both, &[x]).unwrap().remove(0);
        for i in 0..3 {
            assert!((gab.get(i, 0) - ga.get(i, 0) - gb.get(i, 0)).abs() < 1e-15);
        }
    }

    #[test]
    fn unreachable_wrt_gets_zero_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(col(&[1.0, 2.0]));
        let unused = tape.leaf(Tensor::zeros(2, 3));
        let y = x.square().sum();
        let g = tape.gradients(y, &[unused]).unwrap().remove(0);
        assert_eq!(g, Tensor::zeros(2, 3));
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(col(&[1.0, 2.0]));
        let err = tape.gradients(x.square(), &[x]).unwrap_err();
        assert!(matches!(err, AdError::NonScalar { rows: 2, cols: 1 }));
        assert!(tape.input_gradient(x.tanh(), x).is_err());
    }

    #[test]
    fn foreign_variables_are_rejected() {
        let a = Tape::new();
        let b = Tape::new();
        let xa = a.leaf(Tensor::scalar(1.0));
        let xb = b.leaf(Tensor::scalar(1.0));
        assert!(matches!(a.gradients(xa, &[xb]), Err(AdError::ForeignVar)));
    }

    #[test]
    fn second_order_through_sin_is_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(col(&[0.5]));
        let y = x.sin().sum();
        assert!(tape.gradients(y, &[x]).is_ok());
        let err = tape.gradients_graph(y, &[x]).unwrap_err();
        assert!(matches!(err, AdError::UnsupportedSecondOrder("sin")));
    }

    #[test]
    fn replay_reproduces_recorded_values() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(2, 2, vec![0.1, -0.2, 0.3, 0.9]).unwrap());
        let w = tape.leaf(Tensor::from_vec(2, 2, vec![1.5, -0.5, 0.25, 2.0]).unwrap());
        let y = x.matmul(w).relu().add_row(tape.leaf(Tensor::row(&[0.1, 0.2])));
        let z = (y.tanh() * y).sum_cols().sqrt().sum();
        let _ = tape.gradients_graph(z, &[x, w]).unwrap();
        let replayed = tape.replay();
        let nodes = tape.nodes.borrow();
        assert_eq!(replayed.len(), nodes.len());
        for (r, n) in replayed.iter().zip(nodes.iter()) {
            assert_eq!(r, n.value.as_ref());
        }
    }

    #[test]
    fn clamp_blocks_gradient_outside_interval() {
        let tape = Tape::new();
        let x = tape.leaf(col(&[-2.0, 0.0, 2.0]));
        let y = x.clamp(-1.0, 1.0).sum();
        let g = tape.gradients(y, &[x]).unwrap().remove(0);
        assert_eq!(g, col(&[0.0, 1.0, 0.0]));
    }

    #[test]
    fn second_derivative_of_cubic_via_recorded_gradient() {
        // f(x) = x^3 -> f'' = 6x
        let tape = Tape::new();
        let x = tape.leaf(col(&[0.5, -1.5]));
        let f = (x.square() * x).sum();
        let df = tape.input_gradient(f, x).unwrap();
        let d2 = tape.gradients(df.sum(), &[x]).unwrap().remove(0);
        assert!((d2.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((d2.get(1, 0) + 9.0).abs() < 1e-12);
    }
}
