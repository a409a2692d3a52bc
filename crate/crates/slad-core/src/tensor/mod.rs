//! Dense f64 tensors (1-D and 2-D) and the raw kernels behind them.
//!
//! Everything is 64-bit: the workbench trades throughput for eliminating
//! precision as a confound in the schedule-identity tests. Shape rules are
//! strict; the only broadcast anywhere is row-vector bias addition.

mod tape;

pub use tape::{GradMap, Tape, Var};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::parallel;

/// Contiguous row-major array of f64 with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        let numel: usize = shape.iter().product();
        assert!(
            numel == data.len(),
            "tensor: shape {:?} implies {} elements, got {}",
            shape,
            numel,
            data.len()
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel] }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![value; numel] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Tensor::new(vec![rows, cols], data)
    }

    /// Standard-normal fill.
    pub fn randn<R: Rng>(shape: Vec<usize>, rng: &mut R) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.sample(StandardNormal)).collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rows(&self) -> usize {
        assert!(self.shape.len() == 2, "rows: tensor is not 2-D: {:?}", self.shape);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert!(self.shape.len() == 2, "cols: tensor is not 2-D: {:?}", self.shape);
        self.shape[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item: tensor has shape {:?}", self.shape);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// 2-D transpose (copies).
    pub fn transpose(&self) -> Tensor {
        let (m, n) = (self.rows(), self.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor::matrix(n, m, out)
    }

    /// Column-wise concatenation of 2-D tensors with equal row counts.
    pub fn concat_cols(parts: &[&Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "concat_cols: no operands");
        let m = parts[0].rows();
        for p in parts {
            assert!(
                p.rows() == m,
                "concat_cols: row mismatch {:?} vs {:?}",
                parts[0].shape,
                p.shape
            );
        }
        let n: usize = parts.iter().map(|p| p.cols()).sum();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let mut at = 0;
            for p in parts {
                let w = p.cols();
                out[i * n + at..i * n + at + w].copy_from_slice(p.row(i));
                at += w;
            }
        }
        Tensor::matrix(m, n, out)
    }

    fn zip(&self, other: &Tensor, op: &str, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert!(
            self.shape == other.shape,
            "{}: shape mismatch {:?} vs {:?}",
            op,
            self.shape,
            other.shape
        );
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

/// d/dx silu(x) = sigmoid(x) * (1 + x * (1 - sigmoid(x)))
pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

// Row-parallel matmul pays off only once the output is reasonably large.
const PAR_MATMUL_THRESHOLD: usize = 16 * 1024;

fn matmul_row(i: usize, out_row: &mut [f64], a: &[f64], b: &[f64], k: usize, n: usize) {
    let a_row = &a[i * k..(i + 1) * k];
    for (p, &aip) in a_row.iter().enumerate() {
        let b_row = &b[p * n..(p + 1) * n];
        for (o, &bv) in out_row.iter_mut().zip(b_row) {
            *o += aip * bv;
        }
    }
}

fn matmul_check(a: &Tensor, b: &Tensor) -> (usize, usize, usize) {
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    assert!(
        k == k2,
        "matmul: shape mismatch {:?} vs {:?}",
        a.shape,
        b.shape
    );
    (m, k, n)
}

/// `[m,k] x [k,n]` matrix product. Rows of the output are computed
/// independently (in parallel when the work is large enough), each row
/// sequentially, so the result is bit-identical to [`matmul_seq`].
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = matmul_check(a, b);
    let mut out = vec![0.0; m * n];
    if m * k * n >= PAR_MATMUL_THRESHOLD {
        parallel::for_each_row(&mut out, n, |i, row| {
            matmul_row(i, row, &a.data, &b.data, k, n)
        });
    } else {
        parallel::for_each_row_seq(&mut out, n, |i, row| {
            matmul_row(i, row, &a.data, &b.data, k, n)
        });
    }
    Tensor::matrix(m, n, out)
}

/// Sequential reference matmul (benches, determinism tests).
pub fn matmul_seq(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = matmul_check(a, b);
    let mut out = vec![0.0; m * n];
    parallel::for_each_row_seq(&mut out, n, |i, row| {
        matmul_row(i, row, &a.data, &b.data, k, n)
    });
    Tensor::matrix(m, n, out)
}

/// `[m,n] + [n]` row-broadcast bias addition.
pub fn add_row(x: &Tensor, bias: &Tensor) -> Tensor {
    let (m, n) = (x.rows(), x.cols());
    assert!(
        bias.shape() == [n],
        "add_row: shape mismatch {:?} vs {:?}",
        x.shape,
        bias.shape
    );
    let mut out = x.data.clone();
    for i in 0..m {
        for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(bias.data.iter()) {
            *o += bv;
        }
    }
    Tensor::matrix(m, n, out)
}
