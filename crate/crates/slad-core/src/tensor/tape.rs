//! Reverse-mode autodiff on a Wengert tape.
//!
//! The tape records every operation in execution order; `backward` replays
//! them in exact reverse order, accumulating gradients by node index. Tapes
//! are rebuilt per training step and consumed by the backward pass. A tape
//! is single-threaded; independent tapes may live on separate threads.

use std::collections::BTreeMap;

use super::{add_row, matmul, silu, silu_grad, Tensor};

/// Handle to a value on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Gradients keyed by parameter name. BTreeMap so iteration order is stable.
pub type GradMap = BTreeMap<String, Tensor>;

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Silu(Var),
    Sqrt(Var),
    ConcatCols(Vec<Var>),
    Sum(Var),
    Mean(Var),
    NormL2(Var),
    SumAxis1(Var),
    GatherRows(Var, Vec<usize>),
}

struct Node {
    op: Op,
    value: Tensor,
}

pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), params: Vec::new(), consumed: false }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        debug_assert!(value.all_finite(), "tape: non-finite value produced");
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Record a constant; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Record a named parameter leaf. `backward` reports a gradient for
    /// every registered parameter (zeros if the loss does not depend on it).
    pub fn param(&mut self, name: &str, value: Tensor) -> Var {
        assert!(
            self.params.iter().all(|(n, _)| n != name),
            "tape: parameter {name:?} registered twice"
        );
        let var = self.push(Op::Leaf, value);
        self.params.push((name.to_string(), var));
        var
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).add(self.value(b));
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).sub(self.value(b));
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).mul(self.value(b));
        self.push(Op::Mul(a, b), value)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).scale(k);
        self.push(Op::Scale(a, k), value)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|v| v + k);
        self.push(Op::AddScalar(a), value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = matmul(self.value(a), self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    /// `[m,n] + [n]` row-broadcast bias.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Var {
        let value = add_row(self.value(x), self.value(bias));
        self.push(Op::AddRow(x, bias), value)
    }

    /// `x @ w + bias`
    pub fn affine(&mut self, x: Var, w: Var, bias: Var) -> Var {
        let h = self.matmul(x, w);
        self.add_row(h, bias)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(silu);
        self.push(Op::Silu(a), value)
    }

    /// Elementwise square root; inputs must be positive for a finite
    /// gradient.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::sqrt);
        self.push(Op::Sqrt(a), value)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let tensors: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
        let value = Tensor::concat_cols(&tensors);
        self.push(Op::ConcatCols(parts.to_vec()), value)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).mean());
        self.push(Op::Mean(a), value)
    }

    pub fn norm_l2(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).norm_l2());
        self.push(Op::NormL2(a), value)
    }

    /// Row sums of a 2-D tensor: `[m,n] -> [m]`.
    pub fn sum_axis1(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (m, _) = (t.rows(), t.cols());
        let value = Tensor::vector((0..m).map(|i| t.row(i).iter().sum()).collect());
        self.push(Op::SumAxis1(a), value)
    }

    /// Embedding lookup: stacks `table[idx[i], :]` into row i.
    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Var {
        let t = self.value(table);
        let (rows, n) = (t.rows(), t.cols());
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            assert!(i < rows, "gather_rows: index {i} out of range for {rows} rows");
            out.extend_from_slice(t.row(i));
        }
        let value = Tensor::matrix(idx.len(), n, out);
        self.push(Op::GatherRows(table, idx.to_vec()), value)
    }

    /// Reverse pass from a scalar loss. Returns the gradient of every
    /// registered parameter; the tape is consumed.
    pub fn backward(&mut self, loss: Var) -> GradMap {
        assert!(!self.consumed, "tape: backward called on a consumed tape");
        assert!(
            self.value(loss).is_scalar(),
            "tape: loss must be scalar, got shape {:?}",
            self.value(loss).shape()
        );
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g);
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = g.mul(&self.nodes[b.0].value);
                    let gb = g.mul(&self.nodes[a.0].value);
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::Scale(a, k) => {
                    let (a, k) = (*a, *k);
                    accumulate(&mut grads, a, g.scale(k));
                }
                Op::AddScalar(a) => {
                    let a = *a;
                    accumulate(&mut grads, a, g);
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = matmul(&g, &self.nodes[b.0].value.transpose());
                    let gb = matmul(&self.nodes[a.0].value.transpose(), &g);
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::AddRow(x, bias) => {
                    let (x, bias) = (*x, *bias);
                    let (m, n) = (g.rows(), g.cols());
                    let mut gb = vec![0.0; n];
                    for r in 0..m {
                        for (acc, &gv) in gb.iter_mut().zip(g.row(r)) {
                            *acc += gv;
                        }
                    }
                    accumulate(&mut grads, x, g);
                    accumulate(&mut grads, bias, Tensor::vector(gb));
                }
                Op::Silu(a) => {
                    let a = *a;
                    let ga = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(self.nodes[a.0].value.data())
                            .map(|(&gv, &x)| gv * silu_grad(x))
                            .collect(),
                    );
                    accumulate(&mut grads, a, ga);
                }
                Op::Sqrt(a) => {
                    let a = *a;
                    // d sqrt(x) = 1 / (2 sqrt(x)); reuse the stored output
                    let out = &self.nodes[i].value;
                    let ga = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(out.data())
                            .map(|(&gv, &s)| gv * 0.5 / s)
                            .collect(),
                    );
                    accumulate(&mut grads, a, ga);
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let m = g.rows();
                    let mut at = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.cols();
                        let mut slice = Vec::with_capacity(m * w);
                        for r in 0..m {
                            slice.extend_from_slice(&g.row(r)[at..at + w]);
                        }
                        accumulate(&mut grads, p, Tensor::matrix(m, w, slice));
                        at += w;
                    }
                }
                Op::Sum(a) => {
                    let a = *a;
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    accumulate(&mut grads, a, Tensor::filled(shape, g.item()));
                }
                Op::Mean(a) => {
                    let a = *a;
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    let n = self.nodes[a.0].value.numel() as f64;
                    accumulate(&mut grads, a, Tensor::filled(shape, g.item() / n));
                }
                Op::NormL2(a) => {
                    let a = *a;
                    let out = self.nodes[i].value.item();
                    let ga = if out == 0.0 {
                        Tensor::zeros(self.nodes[a.0].value.shape().to_vec())
                    } else {
                        self.nodes[a.0].value.scale(g.item() / out)
                    };
                    accumulate(&mut grads, a, ga);
                }
                Op::SumAxis1(a) => {
                    let a = *a;
                    let (m, n) = (self.nodes[a.0].value.rows(), self.nodes[a.0].value.cols());
                    let mut ga = Vec::with_capacity(m * n);
                    for r in 0..m {
                        ga.extend(std::iter::repeat(g.data()[r]).take(n));
                    }
                    accumulate(&mut grads, a, Tensor::matrix(m, n, ga));
                }
                Op::GatherRows(table, idx) => {
                    let (table, idx) = (*table, idx.clone());
                    let shape = self.nodes[table.0].value.shape().to_vec();
                    let n = shape[1];
                    let mut gt = Tensor::zeros(shape);
                    for (r, &row_idx) in idx.iter().enumerate() {
                        let dst = &mut gt.data_mut()[row_idx * n..(row_idx + 1) * n];
                        for (acc, &gv) in dst.iter_mut().zip(g.row(r)) {
                            *acc += gv;
                        }
                    }
                    accumulate(&mut grads, table, gt);
                }
            }
        }

        let mut out = GradMap::new();
        for (name, var) in &self.params {
            let g = match grads[var.0].take() {
                Some(g) => g,
                None => Tensor::zeros(self.nodes[var.0].value.shape().to_vec()),
            };
            out.insert(name.clone(), g);
        }
        out
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => *existing = existing.add(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn d_x_squared_is_two_x() {
        let mut tape = Tape::new();
        let x = tape.param("x", Tensor::scalar(3.0));
        let y = tape.mul(x, x);
        let loss = tape.sum(y);
        let grads = tape.backward(loss);
        assert_eq!(grads["x"].item(), 6.0);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let _w = tape.param("w", Tensor::vector(vec![1.0, 2.0]));
        let c = tape.constant(Tensor::scalar(5.0));
        let loss = tape.sum(c);
        let grads = tape.backward(loss);
        assert_eq!(grads["w"].data(), &[0.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "loss must be scalar")]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.param("x", Tensor::vector(vec![1.0, 2.0]));
        tape.backward(x);
    }

    #[test]
    #[should_panic(expected = "consumed tape")]
    fn backward_rejects_consumed_tape() {
        let mut tape = Tape::new();
        let x = tape.param("x", Tensor::scalar(1.0));
        let loss = tape.sum(x);
        tape.backward(loss);
        tape.backward(loss);
    }

    /// Builds a small random 2-layer network loss and returns it as a
    /// closure over a flat parameter vector, plus the tape gradient.
    fn two_layer_case(seed: u64) -> (Vec<f64>, Vec<f64>, impl Fn(&[f64]) -> f64) {
        let mut r = rng::root(seed);
        let x = Tensor::randn(vec![3, 2], &mut r);
        let w1 = Tensor::randn(vec![2, 4], &mut r);
        let b1 = Tensor::randn(vec![4], &mut r);
        let w2 = Tensor::randn(vec![4, 1], &mut r);
        let target = Tensor::randn(vec![3, 1], &mut r);

        let flat: Vec<f64> = w1
            .data()
            .iter()
            .chain(b1.data())
            .chain(w2.data())
            .copied()
            .collect();

        let x2 = x.clone();
        let t2 = target.clone();
        let eval = move |p: &[f64]| {
            let w1 = Tensor::matrix(2, 4, p[0..8].to_vec());
            let b1 = Tensor::vector(p[8..12].to_vec());
            let w2 = Tensor::matrix(4, 1, p[12..16].to_vec());
            let mut tape = Tape::new();
            let xv = tape.constant(x2.clone());
            let w1v = tape.param("w1", w1);
            let b1v = tape.param("b1", b1);
            let w2v = tape.param("w2", w2);
            let h = tape.affine(xv, w1v, b1v);
            let h = tape.silu(h);
            let y = tape.matmul(h, w2v);
            let tv = tape.constant(t2.clone());
            let d = tape.sub(y, tv);
            let sq = tape.mul(d, d);
            let loss = tape.mean(sq);
            tape.value(loss).item()
        };

        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let w1v = tape.param("w1", w1);
        let b1v = tape.param("b1", b1);
        let w2v = tape.param("w2", w2);
        let h = tape.affine(xv, w1v, b1v);
        let h = tape.silu(h);
        let y = tape.matmul(h, w2v);
        let tv = tape.constant(target);
        let d = tape.sub(y, tv);
        let sq = tape.mul(d, d);
        let loss = tape.mean(sq);
        let grads = tape.backward(loss);
        let grad_flat: Vec<f64> = grads["w1"]
            .data()
            .iter()
            .chain(grads["b1"].data())
            .chain(grads["w2"].data())
            .copied()
            .collect();
        (flat, grad_flat, eval)
    }

    #[test]
    fn gradients_match_central_differences() {
        let (params, grads, eval) = two_layer_case(42);
        let h = 1e-5;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let rel = (grads[i] - fd).abs() / fd.abs().max(1.0);
            assert!(rel < 1e-4, "param {i}: autodiff {} vs fd {fd}", grads[i]);
        }
    }

    #[test]
    fn gradient_linearity() {
        // grad(a*f + b*g) == a*grad(f) + b*grad(g), elementwise to 1e-12
        let mut r = rng::root(7);
        let x0 = Tensor::randn(vec![5], &mut r);
        let (a, b) = (1.7, -0.4);

        let grad_of = |wa: f64, wb: f64| -> Tensor {
            let mut tape = Tape::new();
            let x = tape.param("x", x0.clone());
            let f = tape.mul(x, x);
            let f = tape.mean(f);
            let g = tape.norm_l2(x);
            let fa = tape.scale(f, wa);
            let gb = tape.scale(g, wb);
            let loss = tape.add(fa, gb);
            tape.backward(loss).remove("x").unwrap()
        };

        let combined = grad_of(a, b);
        let gf = grad_of(1.0, 0.0);
        let gg = grad_of(0.0, 1.0);
        for i in 0..x0.numel() {
            let expect = a * gf.data()[i] + b * gg.data()[i];
            assert!((combined.data()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let (_, g1, _) = two_layer_case(9);
        let (_, g2, _) = two_layer_case(9);
        assert_eq!(g1, g2);
    }

    #[test]
    fn gather_rows_accumulates_repeated_indices() {
        let mut tape = Tape::new();
        let table = tape.param("emb", Tensor::matrix(3, 2, vec![1., 2., 3., 4., 5., 6.]));
        let rows = tape.gather_rows(table, &[1, 1, 0]);
        let s = tape.sum(rows);
        let grads = tape.backward(s);
        assert_eq!(grads["emb"].data(), &[1., 1., 2., 2., 0., 0.]);
    }
}
