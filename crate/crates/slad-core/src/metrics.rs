//! Two-sample statistics and the adjacent-point mapping-error probe.
//!
//! Energy distance stands in for FID at this scale: kernel-free, exact over
//! all pairs, O(n^2) but cheap for n <= 5000. Reductions are row-structured
//! so parallel and sequential runs agree bitwise.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::parallel;
use crate::rng;
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Deterministic operand order so the two-sample statistics evaluate the
/// identical float expression regardless of argument order (exact
/// symmetry).
fn canonical_pair<'a>(x: &'a Tensor, y: &'a Tensor) -> (&'a Tensor, &'a Tensor) {
    if x.shape() != y.shape() {
        return if (x.rows(), x.cols()) <= (y.rows(), y.cols()) { (x, y) } else { (y, x) };
    }
    for (a, b) in x.data().iter().zip(y.data()) {
        let (ab, bb) = (a.to_bits(), b.to_bits());
        if ab != bb {
            return if ab < bb { (x, y) } else { (y, x) };
        }
    }
    (x, y)
}

fn cross_mean(x: &Tensor, y: &Tensor) -> f64 {
    let (n, m) = (x.rows(), y.rows());
    let rows = parallel::map_indexed(n, |i| {
        let xi = x.row(i);
        (0..m).map(|j| euclidean(xi, y.row(j))).sum::<f64>()
    });
    rows.iter().sum::<f64>() / (n as f64 * m as f64)
}

/// Mean pairwise distance within a sample; `include_diagonal` selects the
/// V-statistic (divide by n^2) over the U-statistic (skip i == j, divide by
/// n(n-1)).
fn within_mean(x: &Tensor, include_diagonal: bool) -> f64 {
    let n = x.rows();
    if n < 2 {
        return 0.0;
    }
    let rows = parallel::map_indexed(n, |i| {
        let xi = x.row(i);
        (0..n)
            .filter(|&j| include_diagonal || j != i)
            .map(|j| euclidean(xi, x.row(j)))
            .sum::<f64>()
    });
    let total: f64 = rows.iter().sum();
    if include_diagonal {
        total / (n as f64 * n as f64)
    } else {
        total / (n as f64 * (n - 1) as f64)
    }
}

/// Energy distance `2 E|x-y| - E|x-x'| - E|y-y'|` with U-statistic within
/// terms. Exactly symmetric in its arguments.
pub fn energy_distance(x: &Tensor, y: &Tensor) -> f64 {
    let (a, b) = canonical_pair(x, y);
    2.0 * cross_mean(a, b) - (within_mean(a, false) + within_mean(b, false))
}

/// V-statistic variant (within terms include the zero diagonal); always
/// non-negative.
pub fn energy_distance_v(x: &Tensor, y: &Tensor) -> f64 {
    let (a, b) = canonical_pair(x, y);
    2.0 * cross_mean(a, b) - (within_mean(a, true) + within_mean(b, true))
}

/// Sequential reference for [`energy_distance`] (benches, determinism
/// tests).
pub fn energy_distance_seq(x: &Tensor, y: &Tensor) -> f64 {
    let (a, b) = canonical_pair(x, y);
    let cross = {
        let (n, m) = (a.rows(), b.rows());
        let rows: Vec<f64> = (0..n)
            .map(|i| (0..m).map(|j| euclidean(a.row(i), b.row(j))).sum())
            .collect();
        rows.iter().sum::<f64>() / (n as f64 * m as f64)
    };
    let within = |t: &Tensor| -> f64 {
        let n = t.rows();
        if n < 2 {
            return 0.0;
        }
        let rows: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| euclidean(t.row(i), t.row(j)))
                    .sum()
            })
            .collect();
        rows.iter().sum::<f64>() / (n as f64 * (n - 1) as f64)
    };
    2.0 * cross - (within(a) + within(b))
}

/// Nearest-center assignment. A mode counts as covered when it receives at
/// least `threshold` of the samples. Returns (covered count, histogram).
pub fn mode_coverage(
    x: &Tensor,
    centers: &[Vec<f64>],
    threshold: f64,
) -> (usize, Vec<usize>) {
    assert!(!centers.is_empty(), "mode_coverage: no centers");
    let n = x.rows();
    let assignments = parallel::map_indexed(n, |i| {
        let xi = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, c) in centers.iter().enumerate() {
            let d = euclidean(xi, c);
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
        best
    });
    let mut hist = vec![0usize; centers.len()];
    for a in assignments {
        hist[a] += 1;
    }
    let covered = hist
        .iter()
        .filter(|&&c| c as f64 >= threshold * n as f64)
        .count();
    (covered, hist)
}

/// How adjacent points are simulated for the mapping-error probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaNoise {
    /// Same unit noise at both timesteps (the literal protocol).
    Shared,
    /// x_t continues from x_{t-k} through the Markov chain.
    Chained,
}

/// Mean consistency-mapping discrepancy between adjacent trajectory points:
/// for each grid t >= t_min, `delta(t, k) = E || F(x_t, 1, t) -
/// F(x_{t-k}, 1, t-k) ||`. Returns (t, delta) pairs in ascending t.
#[allow(clippy::too_many_arguments)]
pub fn delta_error<F>(
    f_fn: &F,
    dataset: &Dataset,
    k: usize,
    sched: &NoiseSchedule,
    n_samples: usize,
    t_min: usize,
    noise: DeltaNoise,
    seed: u64,
) -> Vec<(usize, f64)>
where
    F: Fn(&Tensor, &[Option<usize>], f64, usize) -> Tensor + Sync,
{
    assert!(
        t_min < sched.t_max(),
        "delta_error: t_min {t_min} leaves an empty grid for T = {}",
        sched.t_max()
    );
    let t_grid: Vec<usize> = (1..=sched.t_max() / k)
        .map(|i| i * k)
        .filter(|&t| t >= t_min.max(k))
        .collect();
    let batch = dataset.batch(rng::derive(seed, rng::tags::EVAL), 0, n_samples);
    let labels: Vec<Option<usize>> = batch.labels.iter().map(|&l| Some(l)).collect();
    let dim = dataset.dim();

    let eps: Vec<Tensor> = parallel::map_indexed(n_samples, |i| {
        let mut r = rng::stream(rng::derive(seed, 0xD117A), i as u64);
        Tensor::randn(vec![dim], &mut r)
    });

    t_grid
        .iter()
        .map(|&t| {
            let mut x_t = Vec::with_capacity(n_samples * dim);
            let mut x_tmk = Vec::with_capacity(n_samples * dim);
            for i in 0..n_samples {
                let x0 = Tensor::vector(batch.points.row(i).to_vec());
                let lo = sched.perturb(&x0, t - k, &eps[i]);
                let hi = match noise {
                    DeltaNoise::Shared => sched.perturb(&x0, t, &eps[i]),
                    DeltaNoise::Chained => {
                        let mut r =
                            rng::stream(rng::derive(seed, 0xC4A1), (t * n_samples + i) as u64);
                        let fresh = Tensor::randn(vec![dim], &mut r);
                        sched.chain_step(&lo, t, k, &fresh)
                    }
                };
                x_t.extend_from_slice(hi.data());
                x_tmk.extend_from_slice(lo.data());
            }
            let x_t = Tensor::matrix(n_samples, dim, x_t);
            let x_tmk = Tensor::matrix(n_samples, dim, x_tmk);
            let f_hi = f_fn(&x_t, &labels, 1.0, t);
            let f_lo = f_fn(&x_tmk, &labels, 1.0, t - k);
            let mean_gap = (0..n_samples)
                .map(|i| euclidean(f_hi.row(i), f_lo.row(i)))
                .sum::<f64>()
                / n_samples as f64;
            (t, mean_gap)
        })
        .collect()
}
