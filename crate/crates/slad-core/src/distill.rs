//! Consistency distillation over linear sub-paths.
//!
//! One step: draw a batch and a grid timestep t, estimate z_{t-k} by
//! running the guided teacher solver (stop-gradient), place the online
//! input on the chosen sub-path at a uniform gamma, and regress the online
//! generator against the EMA generator's prediction at (z_{t-k}, gamma=1).
//! Three switchable objectives share the loop: the drift-shifted SL path,
//! the raw DL path ablation, and the gamma-pinned skipping-step consistency
//! baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledBatch};
use crate::error::{Error, Result};
use crate::metrics::energy_distance;
use crate::net::{
    ema_update, f_forward_with, f_generate, NetConfig, ParamStore,
};
use crate::optim::AdamW;
use crate::rng;
use crate::schedule::NoiseSchedule;
use crate::solver::{multiple_estimation, multistep_sample, EpsModel};
use crate::subpath::{
    dl_interpolate, dl_schedule, sigma_gamma_empirical, sigma_gamma_exact, sl_interpolate,
};
use crate::tensor::{GradMap, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistillMode {
    Sl,
    Dl,
    ConsistencyBaseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    L2,
    PseudoHuber,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    Empirical,
    Exact,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    /// Skipping step size between the paired trajectory points.
    pub k: usize,
    /// Solver stride inside the estimation loop.
    pub k_phi: usize,
    pub guidance_scale: f64,
    pub ema_decay: f64,
    pub metric: Metric,
    pub mode: DistillMode,
    pub sigma_mode: SigmaMode,
    /// When false the teacher jumps t -> t-k in one solver call.
    pub multiple_estimation: bool,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub log_every: usize,
    /// Sample count for the quick energy-distance eval at log points.
    pub eval_samples: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            k: 100,
            k_phi: 20,
            guidance_scale: 3.0,
            ema_decay: 0.95,
            metric: Metric::L2,
            mode: DistillMode::Sl,
            sigma_mode: SigmaMode::Empirical,
            multiple_estimation: true,
            iterations: 2000,
            batch_size: 64,
            lr: 1e-3,
            clip_norm: 10.0,
            log_every: 100,
            eval_samples: 512,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self, t_max: usize) -> Result<()> {
        if self.k_phi == 0 || self.k < self.k_phi || self.k % self.k_phi != 0 {
            return Err(Error::Config(format!(
                "distill: k ({}) must be a positive multiple of k_phi ({})",
                self.k, self.k_phi
            )));
        }
        if self.k >= t_max {
            return Err(Error::Config(format!(
                "distill: k ({}) must be below t_max ({t_max})",
                self.k
            )));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config("distill: ema_decay must be in [0,1)".into()));
        }
        if self.guidance_scale < 0.0 {
            return Err(Error::Config("distill: guidance_scale must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("distill: batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("distill: lr must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("distill: log_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Timesteps the online branch trains on: `{k, k + k_phi, ..., <= T}`.
    pub fn t_grid(&self, t_max: usize) -> Vec<usize> {
        (0..)
            .map(|i| self.k + i * self.k_phi)
            .take_while(|&t| t <= t_max)
            .collect()
    }

    fn solver_stride(&self) -> usize {
        if self.multiple_estimation {
            self.k_phi
        } else {
            self.k
        }
    }
}

/// Pseudo-Huber transition constant for a given sample dimensionality.
pub fn pseudo_huber_c(dim: usize) -> f64 {
    0.00054 * (dim as f64).sqrt()
}

/// Distance between two tensors: L2 is the mean of squared differences
/// over every element; pseudo-Huber is `sqrt(||a-b||^2 + c^2) - c` per row
/// (per vector for 1-D), averaged over rows.
pub fn metric_eval(a: &Tensor, b: &Tensor, metric: Metric) -> f64 {
    match metric {
        Metric::L2 => a.sub(b).map(|v| v * v).mean(),
        Metric::PseudoHuber => {
            let d = a.sub(b);
            if d.shape().len() == 1 {
                let c = pseudo_huber_c(d.numel());
                (d.data().iter().map(|v| v * v).sum::<f64>() + c * c).sqrt() - c
            } else {
                let c = pseudo_huber_c(d.cols());
                let m = d.rows();
                (0..m)
                    .map(|i| {
                        let ssq: f64 = d.row(i).iter().map(|v| v * v).sum();
                        (ssq + c * c).sqrt() - c
                    })
                    .sum::<f64>()
                    / m as f64
            }
        }
    }
}

/// Tape counterpart of [`metric_eval`] for 2-D predictions.
fn metric_loss(tape: &mut Tape, pred: Var, target: Var, metric: Metric) -> Var {
    match metric {
        Metric::L2 => {
            let d = tape.sub(pred, target);
            let sq = tape.mul(d, d);
            tape.mean(sq)
        }
        Metric::PseudoHuber => {
            let c = pseudo_huber_c(tape.value(pred).cols());
            let d = tape.sub(pred, target);
            let sq = tape.mul(d, d);
            let row_ssq = tape.sum_axis1(sq);
            let shifted = tape.add_scalar(row_ssq, c * c);
            let root = tape.sqrt(shifted);
            let ph = tape.add_scalar(root, -c);
            tape.mean(ph)
        }
    }
}

/// Loss and parameter gradients for one batch at a pinned (t, gamma).
/// The teacher estimate and the EMA target are computed off-tape, so no
/// gradient can reach them. Baseline mode ignores the supplied gamma and
/// pins it to 1.
#[allow(clippy::too_many_arguments)]
pub fn distill_loss(
    theta: &ParamStore,
    theta_minus: &ParamStore,
    teacher: &dyn EpsModel,
    batch: &LabeledBatch,
    t: usize,
    gamma: f64,
    noise: &Tensor,
    cfg: &DistillConfig,
    net_cfg: &NetConfig,
    sched: &NoiseSchedule,
) -> (f64, GradMap) {
    let gamma = match cfg.mode {
        DistillMode::ConsistencyBaseline => 1.0,
        _ => gamma,
    };
    let labels: Vec<Option<usize>> = batch.labels.iter().map(|&l| Some(l)).collect();
    let z_t = sched.perturb(&batch.points, t, noise);

    // teacher path, never on the tape
    let z_hat = multiple_estimation(
        teacher,
        &z_t,
        t,
        cfg.k,
        cfg.solver_stride(),
        &labels,
        cfg.guidance_scale,
        sched,
    );
    let target = f_generate(theta_minus, net_cfg, &z_hat, &labels, 1.0, t - cfg.k, 1, sched);

    let mut tape = Tape::new();
    let online = match cfg.mode {
        DistillMode::Sl | DistillMode::ConsistencyBaseline => {
            let point = sl_interpolate(&z_t, &z_hat, gamma, t, cfg.k, sched);
            let sigma = if gamma == 1.0 {
                sched.sigma(t)
            } else {
                match cfg.sigma_mode {
                    SigmaMode::Empirical => sigma_gamma_empirical(gamma, t, cfg.k, sched),
                    SigmaMode::Exact => sigma_gamma_exact(gamma, t, cfg.k, sched),
                }
            };
            let x = tape.constant(point.x);
            f_forward_with(
                &mut tape,
                theta,
                net_cfg,
                x,
                &labels,
                gamma,
                t,
                sched.t_max(),
                sigma,
                sched.alpha(t),
            )
        }
        DistillMode::Dl => {
            let point = dl_interpolate(&z_t, &z_hat, gamma, t, cfg.k, sched);
            let (alpha_dl, sigma_dl) = dl_schedule(gamma, t, cfg.k, sched);
            let x = tape.constant(point.x);
            f_forward_with(
                &mut tape,
                theta,
                net_cfg,
                x,
                &labels,
                gamma,
                t,
                sched.t_max(),
                sigma_dl,
                alpha_dl,
            )
        }
    };
    let target_var = tape.constant(target);
    let loss_var = metric_loss(&mut tape, online, target_var, cfg.metric);
    let loss = tape.value(loss_var).item();
    let grads = tape.backward(loss_var);
    (loss, grads)
}

/// One full training step: sample (batch, t, gamma, noise) from the
/// step-indexed stream, update theta, then the EMA shadow.
#[allow(clippy::too_many_arguments)]
pub fn distill_step(
    theta: &mut ParamStore,
    theta_minus: &mut ParamStore,
    opt: &mut AdamW,
    teacher: &dyn EpsModel,
    dataset: &Dataset,
    step: usize,
    seed: u64,
    cfg: &DistillConfig,
    net_cfg: &NetConfig,
    sched: &NoiseSchedule,
) -> Result<(f64, f64)> {
    let mut r = rng::stream(rng::derive(seed, rng::tags::DISTILL_STEP), step as u64);
    let batch = dataset.batch(seed, (step * cfg.batch_size) as u64, cfg.batch_size);
    let grid = cfg.t_grid(sched.t_max());
    let t = grid[r.gen_range(0..grid.len())];
    let gamma: f64 = r.gen();
    let noise = Tensor::randn(batch.points.shape().to_vec(), &mut r);

    let (loss, grads) =
        distill_loss(theta, theta_minus, teacher, &batch, t, gamma, &noise, cfg, net_cfg, sched);
    if !loss.is_finite() {
        return Err(Error::Diverged { step, lr: cfg.lr, reason: format!("distill loss {loss}") });
    }
    let grad_norm = opt.step(theta, &grads);
    if !grad_norm.is_finite() {
        return Err(Error::Diverged {
            step,
            lr: cfg.lr,
            reason: format!("gradient norm {grad_norm}"),
        });
    }
    ema_update(theta_minus, theta, cfg.ema_decay);
    Ok((loss, grad_norm))
}

/// Snapshot handed to the observer at log points.
pub struct DistillProgress<'a> {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Energy distance of quick 1-step samples against reference data.
    pub ed_one_step: f64,
    /// Same for 4-step samples.
    pub ed_four_step: f64,
    pub theta: &'a ParamStore,
    pub theta_minus: &'a ParamStore,
}

pub struct DistillOutput {
    pub theta: ParamStore,
    pub theta_minus: ParamStore,
}

/// Samples `n` points from the consistency generator over EMA weights,
/// labels uniform over classes.
pub fn sample_student(
    params: &ParamStore,
    net_cfg: &NetConfig,
    sched: &NoiseSchedule,
    n: usize,
    steps: usize,
    seed: u64,
) -> Tensor {
    let mut r = rng::stream(seed, rng::tags::SAMPLE);
    let labels: Vec<Option<usize>> =
        (0..n).map(|_| Some(r.gen_range(0..net_cfg.n_classes))).collect();
    let f = |x: &Tensor, l: &[Option<usize>], g: f64, t: usize| {
        f_generate(params, net_cfg, x, l, g, t, 1, sched)
    };
    multistep_sample(&f, steps, &labels, net_cfg.data_dim, sched, &mut r)
}

/// Runs the distillation loop. Sampling-time weights are the EMA shadow.
#[allow(clippy::too_many_arguments)]
pub fn distill(
    teacher: &dyn EpsModel,
    init: ParamStore,
    dataset: &Dataset,
    cfg: &DistillConfig,
    net_cfg: &NetConfig,
    sched: &NoiseSchedule,
    seed: u64,
    mut observer: impl FnMut(DistillProgress),
) -> Result<DistillOutput> {
    cfg.validate(sched.t_max())?;
    let mut theta = init;
    let mut theta_minus = theta.clone();
    let mut opt = AdamW::new(cfg.lr, cfg.clip_norm);
    let eval_seed = rng::derive(seed, rng::tags::EVAL);
    let reference = dataset.batch(eval_seed, 0, cfg.eval_samples).points;

    for step in 0..cfg.iterations {
        let (loss, grad_norm) = distill_step(
            &mut theta,
            &mut theta_minus,
            &mut opt,
            teacher,
            dataset,
            step,
            seed,
            cfg,
            net_cfg,
            sched,
        )?;
        if (step + 1) % cfg.log_every == 0 || step + 1 == cfg.iterations {
            let s1 = sample_student(
                &theta_minus,
                net_cfg,
                sched,
                cfg.eval_samples,
                1,
                rng::derive(eval_seed, step as u64),
            );
            let s4 = sample_student(
                &theta_minus,
                net_cfg,
                sched,
                cfg.eval_samples,
                4,
                rng::derive(eval_seed, (step + 1) as u64),
            );
            observer(DistillProgress {
                step: step + 1,
                loss,
                grad_norm,
                ed_one_step: energy_distance(&s1, &reference),
                ed_four_step: energy_distance(&s4, &reference),
                theta: &theta,
                theta_minus: &theta_minus,
            });
        }
    }
    Ok(DistillOutput { theta, theta_minus })
}
