//! Linear sub-path construction between trajectory endpoints.
//!
//! A sub-path connects x_{t-k} and x_t on a PF-ODE trajectory. The SL path
//! first applies the drift shift, interpolating from
//! (alpha(t)/alpha(t-k)) x_{t-k} to x_t over gamma in [0,1]; the DL path
//! connects the raw endpoints. Both induce a Gaussian marginal for
//! x_{gamma,t} whose mean/deviation schedules live here, together with the
//! closed-form gap between the exact and the empirical deviation.

use serde::{Deserialize, Serialize};

use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathMode {
    Sl,
    Dl,
}

/// A point x_{gamma,t} with its sub-path coordinates.
#[derive(Clone, Debug)]
pub struct SubPathSample {
    pub x: Tensor,
    pub gamma: f64,
    pub t: usize,
    pub k: usize,
    pub mode: PathMode,
}

fn check_args(gamma: f64, t: usize, k: usize, sched: &NoiseSchedule) {
    assert!(
        (0.0..=1.0).contains(&gamma),
        "sub-path: gamma must be in [0,1], got {gamma}"
    );
    assert!(
        k >= 1 && k <= t && t <= sched.t_max(),
        "sub-path: need 1 <= k <= t <= T, got t={t} k={k} T={}",
        sched.t_max()
    );
}

/// Drift-shifted linear interpolation:
/// `(1-gamma) (alpha(t)/alpha(t-k)) x_{t-k} + gamma x_t`.
pub fn sl_interpolate(
    x_t: &Tensor,
    x_tmk: &Tensor,
    gamma: f64,
    t: usize,
    k: usize,
    sched: &NoiseSchedule,
) -> SubPathSample {
    check_args(gamma, t, k, sched);
    let ratio = sched.alpha_ratio(t, k);
    let x = x_tmk
        .scale((1.0 - gamma) * ratio)
        .add(&x_t.scale(gamma));
    SubPathSample { x, gamma, t, k, mode: PathMode::Sl }
}

/// Straight-line interpolation between the raw endpoints. Evaluated in
/// blend form `(1-gamma) x_{t-k} + gamma x_t` so the endpoint identities
/// hold bitwise.
pub fn dl_interpolate(
    x_t: &Tensor,
    x_tmk: &Tensor,
    gamma: f64,
    t: usize,
    k: usize,
    sched: &NoiseSchedule,
) -> SubPathSample {
    check_args(gamma, t, k, sched);
    let x = x_tmk.scale(1.0 - gamma).add(&x_t.scale(gamma));
    SubPathSample { x, gamma, t, k, mode: PathMode::Dl }
}

/// Operational deviation schedule on the SL path:
/// `(1-gamma) (alpha(t)/alpha(t-k)) sigma(t-k) + gamma sigma(t)`.
pub fn sigma_gamma_empirical(gamma: f64, t: usize, k: usize, sched: &NoiseSchedule) -> f64 {
    check_args(gamma, t, k, sched);
    if gamma == 1.0 {
        return sched.sigma(t);
    }
    (1.0 - gamma) * sched.alpha_ratio(t, k) * sched.sigma(t - k) + gamma * sched.sigma(t)
}

/// Exact deviation of the x_{gamma,t} marginal:
/// `sqrt((alpha(t)/alpha(t-k))^2 sigma(t-k)^2 + gamma^2 (1 - alpha(t)^2/alpha(t-k)^2))`.
/// The mean coefficient is alpha(t) for every gamma.
pub fn sigma_gamma_exact(gamma: f64, t: usize, k: usize, sched: &NoiseSchedule) -> f64 {
    check_args(gamma, t, k, sched);
    let r = sched.alpha_ratio(t, k);
    let s_tmk = sched.sigma(t - k);
    (r * r * s_tmk * s_tmk + gamma * gamma * (1.0 - r * r)).sqrt()
}

/// Closed-form gap `sigma_exact^2 - sigma_empirical^2`:
/// `2 gamma (1-gamma) r sigma(t-k) (sqrt(r^2 - alpha(t)^2) - sqrt(1 - alpha(t)^2))`
/// with `r = alpha(t)/alpha(t-k)`. Zero at both endpoints.
pub fn sigma_error_closed(gamma: f64, t: usize, k: usize, sched: &NoiseSchedule) -> f64 {
    check_args(gamma, t, k, sched);
    let r = sched.alpha_ratio(t, k);
    let a_t = sched.alpha(t);
    let s_tmk = sched.sigma(t - k);
    2.0 * gamma
        * (1.0 - gamma)
        * r
        * s_tmk
        * ((r * r - a_t * a_t).sqrt() - (1.0 - a_t * a_t).sqrt())
}

/// Closed-form gap evaluated on a gamma grid.
pub fn sigma_error_surface(
    t: usize,
    k: usize,
    sched: &NoiseSchedule,
    gamma_grid: &[f64],
) -> Vec<f64> {
    gamma_grid
        .iter()
        .map(|&g| sigma_error_closed(g, t, k, sched))
        .collect()
}

/// Mean/deviation schedule of the DL marginal:
/// `alpha_dl = gamma alpha(t) + (1-gamma) alpha(t-k)`,
/// `sigma_dl^2 = (1 - gamma + gamma r)^2 sigma(t-k)^2 + gamma^2 (1 - r^2)`.
pub fn dl_schedule(gamma: f64, t: usize, k: usize, sched: &NoiseSchedule) -> (f64, f64) {
    check_args(gamma, t, k, sched);
    let r = sched.alpha_ratio(t, k);
    let alpha_dl = gamma * sched.alpha(t) + (1.0 - gamma) * sched.alpha(t - k);
    let s_tmk = sched.sigma(t - k);
    let blend = 1.0 - gamma + gamma * r;
    let sigma_dl = (blend * blend * s_tmk * s_tmk + gamma * gamma * (1.0 - r * r)).sqrt();
    (alpha_dl, sigma_dl)
}

/// Incremental drift-diffusion distance across the sub-path:
/// `x_t - (alpha(t)/alpha(t-k)) x_{t-k}`.
pub fn dist_delta(
    x_t: &Tensor,
    x_tmk: &Tensor,
    t: usize,
    k: usize,
    sched: &NoiseSchedule,
) -> Tensor {
    x_t.sub(&x_tmk.scale(sched.alpha_ratio(t, k)))
}

/// Denoising contribution propagated from t-k:
/// `(alpha(t)/alpha(t-k)) sigma(t-k) eps_pred`.
pub fn dist_zero(
    eps_pred_tmk: &Tensor,
    t: usize,
    k: usize,
    sched: &NoiseSchedule,
) -> Tensor {
    eps_pred_tmk.scale(sched.alpha_ratio(t, k) * sched.sigma(t - k))
}
