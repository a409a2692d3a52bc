//! Deterministic DDIM stepping, guidance mixing, the multiple-estimation
//! loop that builds distillation targets, and few-step sampling.
//!
//! The solver increment convention: `increment(z, from, to) = ddim(z, from,
//! to) - z`, so mixing conditional and unconditional increments with weights
//! w and 1-w composes by plain addition.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;

use crate::net::{eps_predict, NetConfig, ParamStore};
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor;

/// Batched noise predictor: rows of `x` are independent samples.
/// `gamma = 1` everywhere in solver paths.
pub trait EpsModel: Sync {
    fn eps(&self, x: &Tensor, labels: &[Option<usize>], gamma: f64, t: usize) -> Tensor;
}

/// Exact conditional expectation of the noise for isotropic Gaussian data
/// N(mean, scale^2 I):
/// `sigma(t) (z - alpha(t) mean) / (alpha(t)^2 scale^2 + sigma(t)^2)`.
/// Ignores labels and gamma. Serves as the ground-truth teacher in tests
/// and in single-Gaussian distillation runs.
pub struct AnalyticTeacher {
    pub mean: Tensor,
    pub scale: f64,
    pub sched: NoiseSchedule,
}

impl AnalyticTeacher {
    pub fn new(mean: Tensor, scale: f64, sched: NoiseSchedule) -> Self {
        assert!(scale > 0.0, "analytic teacher: scale must be positive, got {scale}");
        AnalyticTeacher { mean, scale, sched }
    }
}

impl EpsModel for AnalyticTeacher {
    fn eps(&self, x: &Tensor, _labels: &[Option<usize>], _gamma: f64, t: usize) -> Tensor {
        let a = self.sched.alpha(t);
        let s = self.sched.sigma(t);
        let denom = a * a * self.scale * self.scale + s * s;
        let (m, n) = (x.rows(), x.cols());
        assert!(n == self.mean.numel(), "analytic teacher: dim mismatch");
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for (j, &mu) in self.mean.data().iter().enumerate() {
                out.push(s * (x.row(i)[j] - a * mu) / denom);
            }
        }
        Tensor::matrix(m, n, out)
    }
}

/// Network-backed predictor.
pub struct NeuralDenoiser {
    pub params: ParamStore,
    pub cfg: NetConfig,
    pub t_max: usize,
}

impl EpsModel for NeuralDenoiser {
    fn eps(&self, x: &Tensor, labels: &[Option<usize>], gamma: f64, t: usize) -> Tensor {
        eps_predict(&self.params, &self.cfg, x, labels, gamma, t, self.t_max)
    }
}

/// Wrapper counting predictor invocations; used by tests that pin the
/// evaluation budget of the estimation loop.
pub struct CountingEps<'a> {
    pub inner: &'a dyn EpsModel,
    pub calls: AtomicUsize,
}

impl<'a> CountingEps<'a> {
    pub fn new(inner: &'a dyn EpsModel) -> Self {
        CountingEps { inner, calls: AtomicUsize::new(0) }
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl EpsModel for CountingEps<'_> {
    fn eps(&self, x: &Tensor, labels: &[Option<usize>], gamma: f64, t: usize) -> Tensor {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eps(x, labels, gamma, t)
    }
}

/// One deterministic DDIM update from `from_t` down to `to_t`:
/// `alpha(to) (z - sigma(from) eps) / alpha(from) + sigma(to) eps`.
pub fn ddim_step(
    eps_fn: &dyn EpsModel,
    z: &Tensor,
    from_t: usize,
    to_t: usize,
    labels: &[Option<usize>],
    sched: &NoiseSchedule,
) -> Tensor {
    assert!(
        to_t < from_t && from_t <= sched.t_max(),
        "ddim_step: need to_t < from_t <= T, got {to_t} and {from_t}"
    );
    let eps = eps_fn.eps(z, labels, 1.0, from_t);
    let x0_coef = sched.alpha(to_t) / sched.alpha(from_t);
    z.sub(&eps.scale(sched.sigma(from_t)))
        .scale(x0_coef)
        .add(&eps.scale(sched.sigma(to_t)))
}

/// Guidance-mixed solver increment:
/// `w (ddim(z, c) - z) + (1 - w) (ddim(z, null) - z)`.
#[allow(clippy::too_many_arguments)]
pub fn cfg_increment(
    eps_fn: &dyn EpsModel,
    z: &Tensor,
    from_t: usize,
    to_t: usize,
    labels: &[Option<usize>],
    w: f64,
    sched: &NoiseSchedule,
) -> Tensor {
    let cond = ddim_step(eps_fn, z, from_t, to_t, labels, sched).sub(z);
    let null = vec![None; labels.len()];
    let uncond = ddim_step(eps_fn, z, from_t, to_t, &null, sched).sub(z);
    cond.scale(w).add(&uncond.scale(1.0 - w))
}

/// Estimates z_{t-k} from z_t by running the guided solver k/k_phi times
/// with stride k_phi.
#[allow(clippy::too_many_arguments)]
pub fn multiple_estimation(
    eps_fn: &dyn EpsModel,
    z_t: &Tensor,
    t: usize,
    k: usize,
    k_phi: usize,
    labels: &[Option<usize>],
    w: f64,
    sched: &NoiseSchedule,
) -> Tensor {
    assert!(k_phi >= 1 && k % k_phi == 0, "multiple_estimation: k={k} not divisible by k_phi={k_phi}");
    assert!(t >= k, "multiple_estimation: t={t} < k={k}");
    let mut z = z_t.clone();
    let substeps = k / k_phi;
    for i in 0..substeps {
        let from_t = t - i * k_phi;
        let to_t = t - (i + 1) * k_phi;
        let inc = cfg_increment(eps_fn, &z, from_t, to_t, labels, w, sched);
        z = z.add(&inc);
    }
    z
}

/// Full guided DDIM descent from t = T to 0 on an evenly spaced grid.
/// Used for teacher sampling and as the fine-grained reference in solver
/// tests.
pub fn pf_ode_sample(
    eps_fn: &dyn EpsModel,
    z_init: &Tensor,
    n_steps: usize,
    labels: &[Option<usize>],
    w: f64,
    sched: &NoiseSchedule,
) -> Tensor {
    assert!(n_steps >= 1, "pf_ode_sample: n_steps must be >= 1");
    let t_max = sched.t_max();
    let grid: Vec<usize> = (0..=n_steps).map(|i| t_max * (n_steps - i) / n_steps).collect();
    let mut z = z_init.clone();
    for pair in grid.windows(2) {
        let inc = cfg_increment(eps_fn, &z, pair[0], pair[1], labels, w, sched);
        z = z.add(&inc);
    }
    z
}

/// Draws `n` guided diffusion samples with labels uniform over classes.
#[allow(clippy::too_many_arguments)]
pub fn sample_diffusion(
    eps_fn: &dyn EpsModel,
    n_classes: usize,
    dim: usize,
    n: usize,
    steps: usize,
    w: f64,
    sched: &NoiseSchedule,
    seed: u64,
) -> Tensor {
    let mut r = crate::rng::stream(seed, crate::rng::tags::SAMPLE);
    let labels: Vec<Option<usize>> = (0..n).map(|_| Some(r.gen_range(0..n_classes))).collect();
    let z = Tensor::randn(vec![n, dim], &mut r);
    pf_ode_sample(eps_fn, &z, steps, &labels, w, sched)
}

/// Grid for few-step consistency sampling: evenly spaced integer timesteps
/// descending from T, smallest point floor(T / n_steps).
pub fn multistep_grid(n_steps: usize, t_max: usize) -> Vec<usize> {
    assert!(n_steps >= 1, "multistep_grid: n_steps must be >= 1");
    (0..n_steps).map(|i| t_max * (n_steps - i) / n_steps).collect()
}

/// Iterative few-step sampling with a consistency generator F. Draws a
/// `[labels.len(), dim]` batch of z ~ N(0, I) at t = T, predicts x0, and
/// while steps remain re-noises the prediction at the next grid time with
/// fresh noise. Guidance is a training-time concern; F is always called
/// with gamma = 1.
pub fn multistep_sample<F, R>(
    f_fn: &F,
    n_steps: usize,
    labels: &[Option<usize>],
    dim: usize,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Tensor
where
    F: Fn(&Tensor, &[Option<usize>], f64, usize) -> Tensor,
    R: Rng,
{
    let grid = multistep_grid(n_steps, sched.t_max());
    let z = Tensor::randn(vec![labels.len(), dim], rng);
    let mut x0 = f_fn(&z, labels, 1.0, grid[0]);
    for &t_next in &grid[1..] {
        let noise = Tensor::randn(x0.shape().to_vec(), rng);
        let z = sched.perturb(&x0, t_next, &noise);
        x0 = f_fn(&z, labels, 1.0, t_next);
    }
    x0
}
