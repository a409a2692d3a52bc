//! Teacher training: plain noise-prediction regression on the forward
//! process, providing the trajectories the distillation stage consumes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{eps_forward_per_t, init_denoiser, NetConfig, ParamStore};
use crate::optim::AdamW;
use crate::rng;
use crate::schedule::NoiseSchedule;
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of labels replaced by the null label so the unconditional
    /// guidance branch is trained.
    pub null_label_dropout: f64,
    pub clip_norm: f64,
    pub log_every: usize,
    pub checkpoint_every: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            iterations: 6000,
            batch_size: 128,
            lr: 1e-3,
            null_label_dropout: 0.1,
            clip_norm: 10.0,
            log_every: 200,
            checkpoint_every: 2000,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("teacher.batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("teacher.lr must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.null_label_dropout) {
            return Err(Error::Config("teacher.null_label_dropout must be in [0,1]".into()));
        }
        if self.log_every == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("teacher.log_every/checkpoint_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Progress snapshot handed to the training observer at log points.
pub struct TrainProgress<'a> {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub params: &'a ParamStore,
}

/// Mean-squared noise-prediction loss of `params` on one batch, off-tape.
pub fn teacher_loss(
    params: &ParamStore,
    net_cfg: &NetConfig,
    sched: &NoiseSchedule,
    points: &Tensor,
    labels: &[Option<usize>],
    t: usize,
    eps: &Tensor,
) -> f64 {
    let z_t = sched.perturb(points, t, eps);
    let pred = crate::net::eps_predict(params, net_cfg, &z_t, labels, 1.0, t, sched.t_max());
    pred.sub(eps).map(|v| v * v).mean()
}

/// Trains a denoiser with the epsilon-matching objective: t uniform over
/// 1..=T per step, gamma fixed to 1 (zero embedding). Starts from `init`
/// when given (resume), otherwise from a fresh seeded init. The observer
/// runs every `log_every` steps and at the final step.
pub fn train_teacher(
    dataset: &Dataset,
    net_cfg: &NetConfig,
    cfg: &TeacherConfig,
    sched: &NoiseSchedule,
    seed: u64,
    init: Option<ParamStore>,
    mut observer: impl FnMut(TrainProgress),
) -> Result<ParamStore> {
    cfg.validate()?;
    let mut params = init.unwrap_or_else(|| init_denoiser(net_cfg, seed));
    let mut opt = AdamW::new(cfg.lr, cfg.clip_norm);
    let step_seed = rng::derive(seed, rng::tags::TEACHER_STEP);

    for step in 0..cfg.iterations {
        // cosine decay to 5% of the base rate
        let progress = step as f64 / cfg.iterations.max(1) as f64;
        opt.lr = cfg.lr * (0.05 + 0.475 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let mut r = rng::stream(step_seed, step as u64);
        let batch = dataset.batch(seed, (step * cfg.batch_size) as u64, cfg.batch_size);
        let ts: Vec<usize> =
            (0..cfg.batch_size).map(|_| r.gen_range(1..=sched.t_max())).collect();
        let labels: Vec<Option<usize>> = batch
            .labels
            .iter()
            .map(|&l| {
                if r.gen::<f64>() < cfg.null_label_dropout {
                    None
                } else {
                    Some(l)
                }
            })
            .collect();
        let eps = Tensor::randn(batch.points.shape().to_vec(), &mut r);
        let dim = dataset.dim();
        let mut z_t = Vec::with_capacity(cfg.batch_size * dim);
        for (i, &t) in ts.iter().enumerate() {
            let (a, s) = (sched.alpha(t), sched.sigma(t));
            for j in 0..dim {
                z_t.push(a * batch.points.row(i)[j] + s * eps.row(i)[j]);
            }
        }
        let z_t = Tensor::matrix(cfg.batch_size, dim, z_t);

        let mut tape = Tape::new();
        let zv = tape.constant(z_t);
        let pred =
            eps_forward_per_t(&mut tape, &params, net_cfg, zv, &labels, &ts, sched.t_max());
        let target = tape.constant(eps);
        let diff = tape.sub(pred, target);
        let sq = tape.mul(diff, diff);
        let loss_var = tape.mean(sq);
        let loss = tape.value(loss_var).item();
        if !loss.is_finite() {
            return Err(Error::Diverged {
                step,
                lr: cfg.lr,
                reason: format!("teacher loss {loss}"),
            });
        }
        let grads = tape.backward(loss_var);
        let grad_norm = opt.step(&mut params, &grads);
        if !grad_norm.is_finite() {
            return Err(Error::Diverged {
                step,
                lr: cfg.lr,
                reason: format!("gradient norm {grad_norm}"),
            });
        }

        if (step + 1) % cfg.log_every == 0 || step + 1 == cfg.iterations {
            observer(TrainProgress { step: step + 1, loss, grad_norm, params: &params });
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetConfig, DatasetKind};
    use crate::schedule::make_schedule;
    use crate::solver::{AnalyticTeacher, EpsModel};

    fn quick_net(dataset: &Dataset) -> NetConfig {
        NetConfig {
            data_dim: dataset.dim(),
            width: 32,
            n_classes: dataset.n_classes(),
            class_embed_dim: 4,
            t_frequencies: 16,
            gamma_frequencies: 8,
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = Dataset::new(&DatasetConfig::default()).unwrap();
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let net = quick_net(&ds);
        let cfg = TeacherConfig { iterations: 30, batch_size: 16, ..Default::default() };
        let run = || train_teacher(&ds, &net, &cfg, &sched, 5, None, |_| {}).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn single_gaussian_teacher_approaches_analytic_eps() {
        // Trained predictor within 5% RMS of the closed form on a held-out
        // grid of (z, t).
        let cfg = DatasetConfig {
            kind: DatasetKind::GaussianMixture,
            n_modes: 1,
            radius: 0.0,
            scale: 0.5,
            dim: 2,
        };
        let ds = Dataset::new(&cfg).unwrap();
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let net = quick_net(&ds);
        let tcfg = TeacherConfig {
            iterations: 3000,
            batch_size: 96,
            lr: 2e-3,
            ..Default::default()
        };
        let params = train_teacher(&ds, &net, &tcfg, &sched, 1, None, |_| {}).unwrap();

        let analytic =
            AnalyticTeacher::new(Tensor::vector(vec![0.0, 0.0]), 1.0, sched.clone());
        let student = crate::solver::NeuralDenoiser { params, cfg: net, t_max: 1000 };
        let mut num = 0.0;
        let mut den = 0.0;
        for t in [100usize, 300, 500, 700, 900] {
            for i in 0..8 {
                for j in 0..8 {
                    let z = Tensor::matrix(
                        1,
                        2,
                        vec![-1.5 + i as f64 * 3.0 / 7.0, -1.5 + j as f64 * 3.0 / 7.0],
                    );
                    let want = analytic.eps(&z, &[Some(0)], 1.0, t);
                    let got = student.eps(&z, &[Some(0)], 1.0, t);
                    num += want.sub(&got).norm_l2().powi(2);
                    den += want.norm_l2().powi(2);
                }
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative RMS {rel}");
    }

    #[test]
    fn point_mass_dataset_recovers_deterministic_denoiser() {
        // All data at one off-origin point: the optimum is
        // (z - alpha mu) / sigma. Evaluated on-distribution, i.e. at
        // z = alpha mu + sigma u for moderate u.
        let cfg = DatasetConfig {
            kind: DatasetKind::GaussianMixture,
            n_modes: 1,
            radius: 1.0,
            scale: 1e-6,
            dim: 2,
        };
        let ds = Dataset::new(&cfg).unwrap();
        let mu = ds.mode_centers()[0].clone();
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let net = NetConfig { width: 48, ..quick_net(&ds) };
        let tcfg = TeacherConfig {
            iterations: 4000,
            batch_size: 64,
            lr: 2e-3,
            ..Default::default()
        };
        let params = train_teacher(&ds, &net, &tcfg, &sched, 2, None, |_| {}).unwrap();
        let student = crate::solver::NeuralDenoiser { params, cfg: net, t_max: 1000 };
        let mut num = 0.0;
        let mut den = 0.0;
        for t in [200usize, 500, 800] {
            let (a, s) = (sched.alpha(t), sched.sigma(t));
            for i in 0..10 {
                let u = [-1.8 + 0.4 * i as f64, 1.5 - 0.3 * i as f64];
                let z = Tensor::matrix(
                    1,
                    2,
                    vec![a * mu[0] + s * u[0], a * mu[1] + s * u[1]],
                );
                let want = Tensor::matrix(1, 2, vec![u[0], u[1]]);
                let got = student.eps(&z, &[Some(0)], 1.0, t);
                num += want.sub(&got).norm_l2().powi(2);
                den += want.norm_l2().powi(2);
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative RMS {rel}");
    }

    #[test]
    fn loss_drops_by_an_order_of_magnitude_on_the_mixture() {
        let ds = Dataset::new(&DatasetConfig::default()).unwrap();
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let net = quick_net(&ds);
        let tcfg = TeacherConfig {
            iterations: 2500,
            batch_size: 96,
            lr: 2e-3,
            ..Default::default()
        };
        // fixed evaluation batch, averaged over several timesteps
        let eval_batch = ds.batch(77, 0, 256);
        let eval_labels: Vec<Option<usize>> =
            eval_batch.labels.iter().map(|&l| Some(l)).collect();
        let mut eval_rng = rng::root(78);
        let eval_eps = Tensor::randn(eval_batch.points.shape().to_vec(), &mut eval_rng);
        let eval_ts = [100usize, 300, 500, 700, 900];
        let mean_loss = |params: &ParamStore| {
            eval_ts
                .iter()
                .map(|&t| {
                    teacher_loss(params, &net, &sched, &eval_batch.points, &eval_labels, t, &eval_eps)
                })
                .sum::<f64>()
                / eval_ts.len() as f64
        };

        let init = init_denoiser(&net, 3);
        let loss_init = mean_loss(&init);
        let trained =
            train_teacher(&ds, &net, &tcfg, &sched, 3, Some(init), |_| {}).unwrap();
        let loss_final = mean_loss(&trained);
        assert!(
            loss_final * 10.0 <= loss_init,
            "init {loss_init} vs trained {loss_final}"
        );
    }
}
