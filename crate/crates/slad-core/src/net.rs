//! Noise-prediction network and the boundary-respecting generator built on
//! top of it.
//!
//! The denoiser is a silu MLP conditioned on a class label (embedding table
//! with a reserved null row for guidance dropout), the timestep, and the
//! sub-path coordinate gamma. t and gamma enter through fixed Fourier
//! frequency banks; by convention the gamma features are the zero vector at
//! gamma = 1, so the gamma pathway can be discarded after training.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::schedule::NoiseSchedule;
use crate::subpath::sigma_gamma_empirical;
use crate::tensor::{Tape, Tensor, Var};

/// Version tag for the gamma-embedding convention, stored in checkpoints.
pub const GAMMA_CONVENTION: &str = "gamma-zero-at-one-v1";

/// c_skip/c_out data-scale constant.
pub const SIGMA_DATA: f64 = 0.5;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub data_dim: usize,
    pub width: usize,
    /// Number of class labels; the embedding table carries one extra null row.
    pub n_classes: usize,
    pub class_embed_dim: usize,
    pub t_frequencies: usize,
    pub gamma_frequencies: usize,
}

impl NetConfig {
    pub fn input_dim(&self) -> usize {
        self.data_dim + self.class_embed_dim + 2 * self.t_frequencies + 2 * self.gamma_frequencies
    }

    pub fn null_label(&self) -> usize {
        self.n_classes
    }
}

/// A named tensor; non-trainable entries (the frequency banks) are carried
/// through checkpoints and EMA but never receive gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub trainable: bool,
}

/// Named parameter arrays with stable (sorted) iteration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) {
        self.entries.insert(name.to_string(), Param { value, trainable });
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.entries.get(name).unwrap_or_else(|| panic!("params: no entry {name:?}")).value
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        &mut self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("params: no entry {name:?}"))
            .value
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.entries.iter()
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.entries.values().map(|p| p.value.numel()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|p| p.value.all_finite())
    }
}

/// In-place EMA update of the shadow store:
/// `theta_minus <- mu * theta_minus + (1 - mu) * theta`.
pub fn ema_update(theta_minus: &mut ParamStore, theta: &ParamStore, mu: f64) {
    assert!((0.0..1.0).contains(&mu), "ema_update: mu must be in [0,1), got {mu}");
    for (name, shadow) in theta_minus.entries.iter_mut() {
        let current = &theta.entries[name].value;
        let data = shadow
            .value
            .data()
            .iter()
            .zip(current.data())
            .map(|(&s, &c)| mu * s + (1.0 - mu) * c)
            .collect();
        shadow.value = Tensor::new(shadow.value.shape().to_vec(), data);
    }
}

/// Log-spaced frequency bank on [1, 1000].
fn frequency_bank(n: usize) -> Tensor {
    let freqs = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                10f64.powf(3.0 * i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    Tensor::vector(freqs)
}

/// `[sin(v f_0), .., sin(v f_{n-1}), cos(v f_0), .., cos(v f_{n-1})]`
pub fn fourier_embed(value: f64, bank: &[f64]) -> Vec<f64> {
    assert!(value.is_finite(), "fourier_embed: non-finite input {value}");
    let mut out = Vec::with_capacity(2 * bank.len());
    out.extend(bank.iter().map(|f| (value * f).sin()));
    out.extend(bank.iter().map(|f| (value * f).cos()));
    out
}

/// Timestep features: t is scaled to [0,1] before embedding.
pub fn time_features(t: usize, t_max: usize, bank: &[f64]) -> Vec<f64> {
    fourier_embed(t as f64 / t_max as f64, bank)
}

/// Gamma features; zero vector at gamma = 1 so the pathway is discardable.
pub fn gamma_features(gamma: f64, bank: &[f64]) -> Vec<f64> {
    if gamma == 1.0 {
        vec![0.0; 2 * bank.len()]
    } else {
        fourier_embed(gamma, bank)
    }
}

fn randn_tensor<R: Rng>(shape: Vec<usize>, std: f64, rng: &mut R) -> Tensor {
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            v * std
        })
        .collect();
    Tensor::new(shape, data)
}

/// Fresh denoiser parameters. Layer names: in, h1, h2, h3, out (each .w/.b),
/// plus class_embed and the two fixed frequency banks.
///
/// The input-projection rows that consume the gamma features start at zero:
/// the gamma pathway is silent until training grows it, so the gamma < 1
/// function initially coincides with the gamma = 1 (zero-embedding) one.
pub fn init_denoiser(cfg: &NetConfig, seed: u64) -> ParamStore {
    let mut r = rng::stream(seed, rng::tags::INIT);
    let mut store = ParamStore::new();
    let d_in = cfg.input_dim();
    let w = cfg.width;

    let he = |fan_in: usize| (2.0 / fan_in as f64).sqrt();
    let mut in_w = randn_tensor(vec![d_in, w], he(d_in), &mut r);
    for row in (d_in - 2 * cfg.gamma_frequencies)..d_in {
        for col in 0..w {
            in_w.data_mut()[row * w + col] = 0.0;
        }
    }
    store.insert("in.w", in_w, true);
    store.insert("in.b", Tensor::zeros(vec![w]), true);
    for layer in ["h1", "h2", "h3"] {
        store.insert(&format!("{layer}.w"), randn_tensor(vec![w, w], he(w), &mut r), true);
        store.insert(&format!("{layer}.b"), Tensor::zeros(vec![w]), true);
    }
    store.insert(
        "out.w",
        randn_tensor(vec![w, cfg.data_dim], (1.0 / w as f64).sqrt(), &mut r),
        true,
    );
    store.insert("out.b", Tensor::zeros(vec![cfg.data_dim]), true);
    store.insert(
        "class_embed",
        randn_tensor(vec![cfg.n_classes + 1, cfg.class_embed_dim], 0.5, &mut r),
        true,
    );
    store.insert("t_bank", frequency_bank(cfg.t_frequencies), false);
    store.insert("gamma_bank", frequency_bank(cfg.gamma_frequencies), false);
    store
}

fn label_indices(cfg: &NetConfig, labels: &[Option<usize>]) -> Vec<usize> {
    labels
        .iter()
        .map(|l| match l {
            Some(c) => {
                assert!(
                    *c < cfg.n_classes,
                    "labels: index {c} out of range for {} classes",
                    cfg.n_classes
                );
                *c
            }
            None => cfg.null_label(),
        })
        .collect()
}

/// Builds the conditioned input block and runs the MLP body on the tape.
fn run_mlp(
    tape: &mut Tape,
    params: &ParamStore,
    cfg: &NetConfig,
    x: Var,
    labels: &[Option<usize>],
    cond: Tensor,
) -> Var {
    let cond = tape.constant(cond);
    let table = tape.param("class_embed", params.get("class_embed").clone());
    let class = tape.gather_rows(table, &label_indices(cfg, labels));
    let input = tape.concat_cols(&[x, class, cond]);

    let mut h = input;
    for layer in ["in", "h1", "h2", "h3"] {
        let w = tape.param(&format!("{layer}.w"), params.get(&format!("{layer}.w")).clone());
        let b = tape.param(&format!("{layer}.b"), params.get(&format!("{layer}.b")).clone());
        h = tape.affine(h, w, b);
        h = tape.silu(h);
    }
    let w = tape.param("out.w", params.get("out.w").clone());
    let b = tape.param("out.b", params.get("out.b").clone());
    tape.affine(h, w, b)
}

/// Records the denoiser forward pass on a tape and returns the prediction
/// node, shaped like `x`. Trainable parameters are registered by name, so a
/// later `backward` yields their gradients.
pub fn eps_forward(
    tape: &mut Tape,
    params: &ParamStore,
    cfg: &NetConfig,
    x: Var,
    labels: &[Option<usize>],
    gamma: f64,
    t: usize,
    t_max: usize,
) -> Var {
    assert!((0.0..=1.0).contains(&gamma), "eps_forward: gamma {gamma} outside [0,1]");
    assert!(t <= t_max, "eps_forward: t={t} outside 0..={t_max}");
    let batch = tape.value(x).rows();
    assert!(
        labels.len() == batch,
        "eps_forward: {} labels for batch of {batch}",
        labels.len()
    );

    let t_feat = time_features(t, t_max, params.get("t_bank").data());
    let g_feat = gamma_features(gamma, params.get("gamma_bank").data());
    let mut cond = Vec::with_capacity(batch * (t_feat.len() + g_feat.len()));
    for _ in 0..batch {
        cond.extend_from_slice(&t_feat);
        cond.extend_from_slice(&g_feat);
    }
    let cond = Tensor::matrix(batch, t_feat.len() + g_feat.len(), cond);
    run_mlp(tape, params, cfg, x, labels, cond)
}

/// Forward pass with an independent timestep per row, gamma fixed to 1
/// (zero embedding). Used by teacher training, where covering many
/// timesteps per batch matters.
pub fn eps_forward_per_t(
    tape: &mut Tape,
    params: &ParamStore,
    cfg: &NetConfig,
    x: Var,
    labels: &[Option<usize>],
    ts: &[usize],
    t_max: usize,
) -> Var {
    let batch = tape.value(x).rows();
    assert!(labels.len() == batch && ts.len() == batch, "eps_forward_per_t: row mismatch");
    let t_bank = params.get("t_bank").data().to_vec();
    let g_len = 2 * cfg.gamma_frequencies;
    let row_len = 2 * cfg.t_frequencies + g_len;
    let mut cond = Vec::with_capacity(batch * row_len);
    for &t in ts {
        assert!(t <= t_max, "eps_forward_per_t: t={t} outside 0..={t_max}");
        cond.extend(time_features(t, t_max, &t_bank));
        cond.extend(std::iter::repeat(0.0).take(g_len));
    }
    let cond = Tensor::matrix(batch, row_len, cond);
    run_mlp(tape, params, cfg, x, labels, cond)
}

/// Forward-only noise prediction.
pub fn eps_predict(
    params: &ParamStore,
    cfg: &NetConfig,
    x: &Tensor,
    labels: &[Option<usize>],
    gamma: f64,
    t: usize,
    t_max: usize,
) -> Tensor {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let out = eps_forward(&mut tape, params, cfg, xv, labels, gamma, t, t_max);
    tape.value(out).clone()
}

pub fn c_skip(t: usize, t_max: usize) -> f64 {
    let u = t as f64 / t_max as f64;
    SIGMA_DATA * SIGMA_DATA / (u * u + SIGMA_DATA * SIGMA_DATA)
}

pub fn c_out(t: usize, t_max: usize) -> f64 {
    let u = t as f64 / t_max as f64;
    u / (u * u + SIGMA_DATA * SIGMA_DATA).sqrt()
}

/// Generator forward pass with explicit x0-prediction coefficients:
/// `F = c_skip(t) x + c_out(t) (x - sigma_x0 eps) / alpha_x0`.
/// The SL path passes `sigma(gamma,t)` and `alpha(t)`; the DL ablation
/// passes its own blended schedule. At t = 0 this is the identity and no
/// network is evaluated.
pub fn f_forward_with(
    tape: &mut Tape,
    params: &ParamStore,
    cfg: &NetConfig,
    x: Var,
    labels: &[Option<usize>],
    gamma: f64,
    t: usize,
    t_max: usize,
    sigma_x0: f64,
    alpha_x0: f64,
) -> Var {
    if t == 0 {
        return x;
    }
    assert!(alpha_x0 > 0.0, "f_forward: alpha must be positive, got {alpha_x0}");
    let eps = eps_forward(tape, params, cfg, x, labels, gamma, t, t_max);
    let scaled_eps = tape.scale(eps, sigma_x0);
    let num = tape.sub(x, scaled_eps);
    let f = tape.scale(num, 1.0 / alpha_x0);
    let skip = tape.scale(x, c_skip(t, t_max));
    let out = tape.scale(f, c_out(t, t_max));
    tape.add(skip, out)
}

/// Tape version of the standard (SL) generator: deviation from the
/// empirical sub-path schedule, mean coefficient alpha(t). `k` is the
/// sub-path length; it is irrelevant at gamma = 1 where the deviation
/// reduces to sigma(t).
#[allow(clippy::too_many_arguments)]
pub fn f_forward(
    tape: &mut Tape,
    params: &ParamStore,
    cfg: &NetConfig,
    x: Var,
    labels: &[Option<usize>],
    gamma: f64,
    t: usize,
    k: usize,
    sched: &NoiseSchedule,
) -> Var {
    if t == 0 {
        return x;
    }
    let sigma = if gamma == 1.0 {
        sched.sigma(t)
    } else {
        sigma_gamma_empirical(gamma, t, k, sched)
    };
    f_forward_with(tape, params, cfg, x, labels, gamma, t, sched.t_max(), sigma, sched.alpha(t))
}

/// Forward-only generator evaluation.
#[allow(clippy::too_many_arguments)]
pub fn f_generate(
    params: &ParamStore,
    cfg: &NetConfig,
    x: &Tensor,
    labels: &[Option<usize>],
    gamma: f64,
    t: usize,
    k: usize,
    sched: &NoiseSchedule,
) -> Tensor {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let out = f_forward(&mut tape, params, cfg, xv, labels, gamma, t, k, sched);
    tape.value(out).clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::make_schedule;

    fn test_cfg() -> NetConfig {
        NetConfig {
            data_dim: 2,
            width: 16,
            n_classes: 4,
            class_embed_dim: 4,
            t_frequencies: 16,
            gamma_frequencies: 8,
        }
    }

    #[test]
    fn fourier_embed_at_zero() {
        let bank = frequency_bank(8);
        let e = fourier_embed(0.0, bank.data());
        assert_eq!(e.len(), 16);
        assert!(e[..8].iter().all(|&v| v == 0.0));
        assert!(e[8..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gamma_features_zeroed_at_one() {
        let bank = frequency_bank(8);
        assert!(gamma_features(1.0, bank.data()).iter().all(|&v| v == 0.0));
        assert!(gamma_features(0.999, bank.data()).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn output_shape_matches_input() {
        let cfg = test_cfg();
        let params = init_denoiser(&cfg, 0);
        let x = Tensor::matrix(5, 2, vec![0.1; 10]);
        let labels = vec![Some(0), Some(1), Some(2), Some(3), None];
        let out = eps_predict(&params, &cfg, &x, &labels, 0.5, 300, 1000);
        assert_eq!(out.shape(), x.shape());
    }

    #[test]
    fn parameter_count_is_deterministic() {
        let cfg = test_cfg();
        let a = init_denoiser(&cfg, 1);
        let b = init_denoiser(&cfg, 1);
        assert_eq!(a, b);
        let d_in = cfg.input_dim();
        let expect = d_in * 16 + 16          // in
            + 3 * (16 * 16 + 16)             // h1..h3
            + 16 * 2 + 2                     // out
            + 5 * 4                          // class embed incl. null row
            + 16 + 8;                        // banks
        assert_eq!(a.numel(), expect);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn invalid_label_is_rejected() {
        let cfg = test_cfg();
        let params = init_denoiser(&cfg, 0);
        let x = Tensor::matrix(1, 2, vec![0.0, 0.0]);
        let _ = eps_predict(&params, &cfg, &x, &[Some(9)], 1.0, 10, 1000);
    }

    #[test]
    fn gamma_pathway_inert_at_gamma_one() {
        // Perturbing the gamma frequency bank and the input-projection rows
        // that consume the gamma features must not change the gamma = 1
        // output, bit for bit.
        let cfg = test_cfg();
        let params = init_denoiser(&cfg, 3);
        let x = Tensor::matrix(3, 2, vec![0.3, -0.7, 1.1, 0.2, -0.5, 0.9]);
        let labels = vec![Some(0), Some(1), None];
        let base = eps_predict(&params, &cfg, &x, &labels, 1.0, 512, 1000);

        let mut poked = params.clone();
        let gamma_rows = 2 * cfg.gamma_frequencies;
        let d_in = cfg.input_dim();
        {
            let w = poked.get_mut("in.w");
            let width = cfg.width;
            for row in (d_in - gamma_rows)..d_in {
                for col in 0..width {
                    w.data_mut()[row * width + col] += 17.0;
                }
            }
        }
        for v in poked.get_mut("gamma_bank").data_mut() {
            *v *= -3.5;
        }
        let poked_out = eps_predict(&poked, &cfg, &x, &labels, 1.0, 512, 1000);
        assert_eq!(base, poked_out);

        // and at gamma < 1 those weights do matter
        let lo = eps_predict(&params, &cfg, &x, &labels, 0.4, 512, 1000);
        let lo_poked = eps_predict(&poked, &cfg, &x, &labels, 0.4, 512, 1000);
        assert_ne!(lo, lo_poked);
    }

    #[test]
    fn generator_is_identity_at_t_zero() {
        let cfg = test_cfg();
        let params = init_denoiser(&cfg, 4);
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let mut r = crate::rng::root(8);
        let x = Tensor::randn(vec![4, 2], &mut r);
        for gamma in [0.0, 0.3, 1.0] {
            let out = f_generate(&params, &cfg, &x, &[None; 4], gamma, 0, 10, &sched);
            assert_eq!(out, x);
        }
    }

    #[test]
    fn generator_with_zero_eps_is_skip_plus_scaled_input() {
        let cfg = test_cfg();
        let mut params = init_denoiser(&cfg, 5);
        // zero the output projection so eps == 0 identically
        for name in ["out.w", "out.b"] {
            let t = params.get_mut(name);
            *t = Tensor::zeros(t.shape().to_vec());
        }
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let t = 400;
        let x = Tensor::matrix(2, 2, vec![0.5, -1.0, 2.0, 0.25]);
        let out = f_generate(&params, &cfg, &x, &[Some(0), Some(1)], 1.0, t, 100, &sched);
        let want = x.scale(c_skip(t, 1000) + c_out(t, 1000) / sched.alpha(t));
        for i in 0..4 {
            assert!((out.data()[i] - want.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_matches_denoiser_composition() {
        // F == c_skip x + c_out (x - sigma eps)/alpha evaluated by hand.
        let cfg = test_cfg();
        let params = init_denoiser(&cfg, 6);
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let mut r = crate::rng::root(16);
        let x = Tensor::randn(vec![3, 2], &mut r);
        let labels = vec![Some(2), None, Some(0)];
        let (gamma, t, k) = (0.6, 640, 100);
        let f = f_generate(&params, &cfg, &x, &labels, gamma, t, k, &sched);
        let eps = eps_predict(&params, &cfg, &x, &labels, gamma, t, 1000);
        let sigma = sigma_gamma_empirical(gamma, t, k, &sched);
        let denoised = x.sub(&eps.scale(sigma));
        let want = x
            .scale(c_skip(t, 1000))
            .add(&denoised.scale(c_out(t, 1000) / sched.alpha(t)));
        for i in 0..6 {
            assert!((f.data()[i] - want.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_gradient_matches_finite_differences() {
        let cfg = test_cfg();
        let params = init_denoiser(&cfg, 7);
        let x = Tensor::matrix(2, 2, vec![0.4, -0.2, 0.9, 0.1]);
        let labels = vec![Some(1), Some(3)];

        let loss_at = |store: &ParamStore| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let out = eps_forward(&mut tape, store, &cfg, xv, &labels, 0.7, 250, 1000);
            let loss = tape.mean(out);
            tape.value(loss).item()
        };

        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let out = eps_forward(&mut tape, &params, &cfg, xv, &labels, 0.7, 250, 1000);
        let loss = tape.mean(out);
        let grads = tape.backward(loss);

        let h = 1e-5;
        // probe a few weights in different layers
        for (name, idx) in [("in.w", 5), ("h2.w", 40), ("out.w", 3), ("class_embed", 6)] {
            let mut plus = params.clone();
            plus.get_mut(name).data_mut()[idx] += h;
            let mut minus = params.clone();
            minus.get_mut(name).data_mut()[idx] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let ad = grads[name].data()[idx];
            let rel = (ad - fd).abs() / fd.abs().max(1.0);
            assert!(rel < 1e-4, "{name}[{idx}]: ad={ad} fd={fd}");
        }
    }

    #[test]
    fn ema_examples() {
        let cfg = test_cfg();
        let theta = init_denoiser(&cfg, 9);
        let mut shadow = init_denoiser(&cfg, 10);
        ema_update(&mut shadow, &theta, 0.0);
        assert_eq!(shadow, theta);

        let mut zero = theta.clone();
        for (_, p) in zero.entries.iter_mut() {
            p.value = Tensor::zeros(p.value.shape().to_vec());
        }
        let mut ones = theta.clone();
        for (_, p) in ones.entries.iter_mut() {
            p.value = Tensor::filled(p.value.shape().to_vec(), 1.0);
        }
        ema_update(&mut zero, &ones, 0.95);
        for (_, p) in zero.entries.iter() {
            assert!(p.value.data().iter().all(|&v| (v - 0.05).abs() < 1e-15));
        }
    }

    #[test]
    fn ema_converges_geometrically_to_constant_target() {
        let cfg = test_cfg();
        let theta = init_denoiser(&cfg, 11);
        let mut shadow = init_denoiser(&cfg, 12);
        let mu = 0.9;
        let gap0: f64 = shadow
            .entries
            .iter()
            .flat_map(|(n, p)| {
                p.value
                    .data()
                    .iter()
                    .zip(theta.get(n).data())
                    .map(|(&a, &b)| (a - b) * (a - b))
            })
            .sum::<f64>()
            .sqrt();
        for _ in 0..40 {
            ema_update(&mut shadow, &theta, mu);
        }
        let gap40: f64 = shadow
            .entries
            .iter()
            .flat_map(|(n, p)| {
                p.value
                    .data()
                    .iter()
                    .zip(theta.get(n).data())
                    .map(|(&a, &b)| (a - b) * (a - b))
            })
            .sum::<f64>()
            .sqrt();
        let expected = gap0 * mu.powi(40);
        assert!((gap40 - expected).abs() / expected < 1e-9);
    }

    #[test]
    fn boundary_coefficients() {
        assert_eq!(c_skip(0, 1000), 1.0);
        assert_eq!(c_out(0, 1000), 0.0);
        // c_skip << c_out over most of the range
        assert!(c_skip(500, 1000) < c_out(500, 1000));
        assert!(c_skip(1000, 1000) < c_out(1000, 1000));
    }
}
